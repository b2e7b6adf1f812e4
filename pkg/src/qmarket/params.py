"""Parameter records and the time-series container shared by the market models."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


def _check_nonneg(name, value):
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and non-negative, got {value!r}")


@dataclass(frozen=True)
class TraderParams:
    """Frequencies and coupling of one trader in the closed market.

    ``omega_s`` and ``omega_c`` weight the share and cash number operators,
    ``Omega`` the lack-of-information (LoI) mode, and ``lambda_inf`` couples
    the LoI to the portfolio.
    """

    omega_s: float
    omega_c: float
    Omega: float
    lambda_inf: float

    def __post_init__(self):
        for name in ("omega_s", "omega_c", "Omega", "lambda_inf"):
            _check_nonneg(name, getattr(self, name))


@dataclass(frozen=True)
class MarketInit:
    """Initial quantum numbers of one trader: shares, cash and LoI."""

    shares: int
    cash: int
    loi: int = 0

    def __post_init__(self):
        for name in ("shares", "cash", "loi"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")

    @property
    def portfolio(self) -> int:
        return self.shares + self.cash

    @property
    def total(self) -> int:
        return self.shares + self.cash + self.loi

    def as_array(self) -> np.ndarray:
        return np.array([self.shares, self.cash, self.loi], dtype=float)


@dataclass(frozen=True)
class TimeSeries:
    """Sampled occupations of one trader.

    ``n_loi`` is the LoI side of the conserved charge; for the reservoir
    models it also counts the quanta handed to (or taken from) the
    reservoir, so ``conserved_M`` stays the per-trader charge.
    """

    times: np.ndarray
    n_shares: np.ndarray
    n_cash: np.ndarray
    n_loi: np.ndarray
    portfolio: np.ndarray = field(init=False)

    def __post_init__(self):
        arrays = {}
        for name in ("times", "n_shares", "n_cash", "n_loi"):
            a = np.asarray(getattr(self, name), dtype=float)
            a.setflags(write=False)
            arrays[name] = a
        n = len(arrays["times"])
        if any(len(a) != n for a in arrays.values()):
            raise ValueError("all TimeSeries columns must have the same length")
        if n > 1 and np.any(np.diff(arrays["times"]) <= 0):
            raise ValueError("times must be strictly ascending")
        for name, a in arrays.items():
            object.__setattr__(self, name, a)
        pf = arrays["n_shares"] + arrays["n_cash"]
        pf.setflags(write=False)
        object.__setattr__(self, "portfolio", pf)

    @property
    def conserved_M(self) -> np.ndarray:
        return self.portfolio + self.n_loi

    def __len__(self):
        return len(self.times)


def time_grid(t_max: float, n_samples: int) -> np.ndarray:
    """Uniform grid on ``[0, t_max]`` with ``n_samples`` points."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if not t_max > 0 and n_samples > 1:
        raise ValueError("t_max must be positive")
    return np.linspace(0.0, t_max, n_samples)
