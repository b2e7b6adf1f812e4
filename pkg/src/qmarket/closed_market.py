"""Analytic closed market: three coupled modes per trader.

The Heisenberg equations are linear, ``dX/dt = -i T X`` with
``X = (s, c, i)``, so the ladder operators evolve as ``X(t) = V(t) X(0)``
with ``V(t) = exp(-i T t)``. On the number state of the initial quanta all
cross expectations vanish and each occupation is a weighted sum of
``|V_ab|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qmarket.numerics import eigh_checked
from qmarket.params import MarketInit, TimeSeries, TraderParams


@dataclass(frozen=True)
class Propagator:
    matrix: np.ndarray
    time: float

    def unitarity_residual(self) -> float:
        v = self.matrix
        return float(np.max(np.abs(v.conj().T @ v - np.eye(v.shape[0]))))


def build_T(params: TraderParams) -> np.ndarray:
    lam = params.lambda_inf
    return np.array(
        [
            [params.omega_s, 0.0, lam],
            [0.0, params.omega_c, lam],
            [lam, lam, params.Omega],
        ]
    )


def _check_symmetric(T):
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValueError("T must be a square matrix")
    if np.max(np.abs(T - T.T)) > 1e-12:
        raise ValueError("T must be symmetric within 1e-12")
    return T


def propagator(T, t: float) -> Propagator:
    """``V(t) = U exp(-i sigma t) U^T`` from the eigendecomposition of ``T``."""
    T = _check_symmetric(T)
    sigma, U = eigh_checked(T)
    v = (U * np.exp(-1j * sigma * t)) @ U.T
    return Propagator(v, float(t))


def propagators(T, t_grid) -> np.ndarray:
    """Stack of propagators on a time grid, shape ``(len(t_grid), n, n)``."""
    T = _check_symmetric(T)
    sigma, U = eigh_checked(T)
    phases = np.exp(-1j * np.outer(np.asarray(t_grid, dtype=float), sigma))
    return np.einsum("ak,tk,bk->tab", U, phases, U)


def occupations(V: Propagator | np.ndarray, init: MarketInit):
    """Return ``(N_S, N_K, N_I)``; accepts one propagator or a stack of them."""
    v = V.matrix if isinstance(V, Propagator) else np.asarray(V)
    n = np.abs(v) ** 2 @ init.as_array()
    return n[..., 0], n[..., 1], n[..., 2]


def portfolio_series(params: TraderParams, init: MarketInit, t_grid) -> TimeSeries:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t_grid must be a non-empty 1-D sequence")
    n_s, n_k, n_i = occupations(propagators(build_T(params), t), init)
    return TimeSeries(t, n_s, n_k, n_i)


def peak_to_peak(series: TimeSeries) -> float:
    """Oscillation amplitude of the portfolio, ``max - min``."""
    return float(np.ptp(series.portfolio))


def dominant_frequency(series: TimeSeries) -> float:
    """Frequency (cycles per unit time) of the largest non-DC DFT peak of the portfolio.

    Assumes a uniform grid. Returns 0 for a constant signal.
    """
    t = series.times
    if len(t) < 3:
        raise ValueError("need at least 3 samples")
    x = series.portfolio - series.portfolio.mean()
    spec = np.abs(np.fft.rfft(x))
    if np.max(spec) < 1e-12 * max(1.0, np.max(np.abs(series.portfolio))):
        return 0.0
    freqs = np.fft.rfftfreq(len(x), d=t[1] - t[0])
    return float(freqs[1 + np.argmax(spec[1:])])
