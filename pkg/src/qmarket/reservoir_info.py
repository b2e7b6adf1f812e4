"""Information as a reservoir: the LoI mode becomes a continuum.

Each trader's LoI is a family of modes ``i(k)`` with dispersion
``Omega * k``. With equal share and cash frequencies the antisymmetric
combination of shares and cash is free while the symmetric one decays
into the continuum at the amplitude rate ``gamma' = 2 pi lambda^2 / Omega``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from qmarket.discretized import ReservoirRun, k_grid
from qmarket.numerics import expm1_over, integrate_line
from qmarket.params import MarketInit, TimeSeries

QUAD_WINDOW = 40.0
DEFAULT_ORACLE_HALFWIDTH = 40.0
DEFAULT_ORACLE_MODES = 4001


class TabulatedDensity:
    """Occupation density given on a k table; linear in between, flat outside."""

    def __init__(self, k, n):
        k = np.asarray(k, dtype=float)
        n = np.asarray(n, dtype=float)
        if k.ndim != 1 or k.shape != n.shape or len(k) < 2:
            raise ValueError("density table needs matching 1-D k and n arrays of length >= 2")
        if np.any(np.diff(k) <= 0):
            raise ValueError("density table k values must be strictly ascending")
        if np.any(n < 0) or not np.all(np.isfinite(n)):
            raise ValueError("density values must be finite and non-negative")
        self.k, self.n = k, n

    def __call__(self, k):
        return np.interp(k, self.k, self.n)


Density = Union[float, Callable]


def evaluate_density(density: Density, k):
    if callable(density):
        return np.asarray(density(k), dtype=float)
    return np.full(np.shape(k), float(density))


@dataclass(frozen=True)
class ReservoirSpecII:
    omega: float
    Omega_slope: float
    lambda_inf: float
    n_density: Density = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.Omega_slope) and self.Omega_slope > 0):
            raise ValueError("Omega_slope must be positive")
        if not (math.isfinite(self.lambda_inf) and self.lambda_inf >= 0):
            raise ValueError("lambda_inf must be non-negative")
        if not math.isfinite(self.omega):
            raise ValueError("omega must be finite")
        if not callable(self.n_density) and not (self.n_density >= 0):
            raise ValueError("n_density must be non-negative")

    @property
    def gamma_prime(self) -> float:
        """Amplitude decay rate ``2 pi lambda^2 / Omega``."""
        return 2 * math.pi * self.lambda_inf**2 / self.Omega_slope

    @property
    def resonance(self) -> float:
        """Wave number at which the reservoir frequency equals ``omega``."""
        return self.omega / self.Omega_slope

    @property
    def constant_density(self) -> bool:
        return not callable(self.n_density)


def eta1(spec: ReservoirSpecII, k, t):
    """Kernel ``(exp(z t) - 1) / z`` with ``z = i(omega - Omega k) + gamma'``."""
    if spec.lambda_inf == 0:
        raise ValueError("kernel undefined at zero coupling")
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    z = 1j * (spec.omega - spec.Omega_slope * np.asarray(k, dtype=float)) + spec.gamma_prime
    return expm1_over(z, t)


def _noise_integral(spec: ReservoirSpecII, t: float) -> float:
    """``lambda^2 * int N(k) |eta1(k,t)|^2 exp(-2 gamma' t) dk``.

    The exponential prefactor of the cash occupation is folded in so the
    integrand stays bounded for large t. The density is split as
    ``N(k0) + (N(k) - N(k0))`` around the resonance ``k0``: the flat part
    has the closed form ``pi N(k0) (1 - exp(-2 gamma' t)) / (gamma' Omega)``
    and the remainder carries no Lorentzian peak.
    """
    gp = spec.gamma_prime
    W = spec.Omega_slope
    k0 = spec.resonance
    decay = math.exp(-gp * t)
    n0 = float(evaluate_density(spec.n_density, k0))
    flat = n0 * math.pi * -math.expm1(-2 * gp * t) / (gp * W)
    if spec.constant_density:
        return spec.lambda_inf**2 * flat

    def excess(k):
        return float(evaluate_density(spec.n_density, k)) - n0

    def integrand(k):
        delta = spec.omega - W * k
        num = 1.0 - 2.0 * decay * math.cos(delta * t) + decay * decay
        return excess(k) * num / (delta * delta + gp * gp)

    def smooth(k):
        delta = spec.omega - W * k
        return excess(k) * (1.0 + decay * decay) / (delta * delta + gp * gp)

    def envelope(k):
        delta = spec.omega - W * k
        return -2.0 * decay * excess(k) / (delta * delta + gp * gp)

    # The tails are split into a smooth and a cosine term; both decay like 1/k
    # and nearly cancel unless the tail starts many periods 2 pi / (W t) out.
    base = QUAD_WINDOW * max(gp, 1.0) / W
    half = max(base, 16 * math.pi / (W * t))
    pts = [k0, *spec.n_density.k] if isinstance(spec.n_density, TabulatedDensity) else [k0]
    # break points at the base window and geometrically beyond, so density
    # structure near the resonance is not lost in a very wide window
    reach = base
    while reach < half:
        pts += [k0 - reach, k0 + reach]
        reach *= 2
    # cos(delta t) = cos(W t k - omega t)
    tails = [(smooth, 0.0, 0.0), (envelope, W * t, -spec.omega * t)]
    # with few oscillations the direct integrand is easier than two cancelling terms
    many = W * t * 2 * half / (2 * math.pi) > 32
    rest = integrate_line(integrand, k0 - half, k0 + half, points=pts, terms=tails,
                          terms_in_window=many, atol=1e-12 * max(abs(flat), 1e-300))
    return spec.lambda_inf**2 * (flat + rest)


def occupations_model2(spec: ReservoirSpecII, init: MarketInit, t: float):
    """Mean shares and cash ``(N_S, N_K)`` at time t."""
    if t < 0:
        raise ValueError("t must be non-negative")
    S, K = float(init.shares), float(init.cash)
    if spec.lambda_inf == 0 or t == 0:
        return S, K
    decay = math.exp(-spec.gamma_prime * t)
    n_k = 0.25 * K * (1 + decay) ** 2 + 0.25 * S * (1 - decay) ** 2 + _noise_integral(spec, t)
    n_s = n_k + (S - K) * decay
    return n_s, n_k


def series_model2(spec: ReservoirSpecII, init: MarketInit, t_grid) -> TimeSeries:
    """Closed-form time series; ``n_loi`` counts the net LoI quanta from charge conservation."""
    t = np.asarray(t_grid, dtype=float)
    occ = np.array([occupations_model2(spec, init, tt) for tt in t]).reshape(len(t), 2)
    n_loi = init.total - occ[:, 0] - occ[:, 1]
    return TimeSeries(t, occ[:, 0], occ[:, 1], n_loi)


def delta_pi_model2(pi0: float, n_I: float) -> float:
    """Long-time portfolio change for a flat reservoir density."""
    if pi0 < 0 or n_I < 0:
        raise ValueError("pi0 and n_I must be non-negative")
    return -0.5 * pi0 + n_I


def delta_pi_density(spec: ReservoirSpecII, init: MarketInit) -> float:
    """Long-time portfolio change for an arbitrary density ``N(k)``.

    Equals ``-pi0/2 + N`` when the density is a constant ``N``.
    """
    if spec.lambda_inf == 0:
        return 0.0
    gp = spec.gamma_prime
    k0 = spec.resonance
    n0 = float(evaluate_density(spec.n_density, k0))
    # 2 lambda^2 * pi / (gamma' Omega) = 1, so the flat part contributes n0
    if spec.constant_density:
        return -0.5 * init.portfolio + n0

    def integrand(k):
        delta = spec.omega - spec.Omega_slope * k
        return (float(evaluate_density(spec.n_density, k)) - n0) / (delta * delta + gp * gp)

    half = QUAD_WINDOW * max(gp, 1.0) / spec.Omega_slope
    pts = [k0, *spec.n_density.k] if isinstance(spec.n_density, TabulatedDensity) else [k0]
    rest = integrate_line(integrand, k0 - half, k0 + half, points=pts, atol=1e-14 * max(n0, 1.0))
    return -0.5 * init.portfolio + n0 + 2 * spec.lambda_inf**2 * rest


def lorentzian_integral_check(spec: ReservoirSpecII) -> float:
    """Quadrature of ``1 / (4 pi^2 lambda^4 + Omega^2 (omega - Omega k)^2)`` over k.

    The closed form is ``1 / (2 lambda^2 Omega^2)``.
    """
    if spec.lambda_inf <= 0:
        raise ValueError("kernel undefined at zero coupling")
    a = 4 * math.pi**2 * spec.lambda_inf**4
    W = spec.Omega_slope

    def integrand(k):
        d = spec.omega - W * k
        return 1.0 / (a + W * W * d * d)

    half = QUAD_WINDOW * max(spec.gamma_prime, 1.0) / W
    k0 = spec.resonance
    return integrate_line(integrand, k0 - half, k0 + half, points=[k0], rtol=1e-10)


def default_oracle_window(spec: ReservoirSpecII):
    k0 = spec.resonance
    return (k0 - DEFAULT_ORACLE_HALFWIDTH, k0 + DEFAULT_ORACLE_HALFWIDTH, DEFAULT_ORACLE_MODES)


def solve_oracle_model2(spec: ReservoirSpecII, init: MarketInit, k_window=None) -> ReservoirRun:
    """Diagonalize the discretized Model II system (modes: shares, cash, reservoir)."""
    k_min, k_max, n_k = k_window or default_oracle_window(spec)
    k = k_grid(k_min, k_max, int(n_k), min_modes=100)
    if not k_min <= spec.resonance <= k_max:
        raise ValueError("k window must bracket the resonance omega/Omega")
    system = np.diag([spec.omega, spec.omega])
    couplings = np.full((2, len(k)), spec.lambda_inf)
    occ0 = np.concatenate([[init.shares, init.cash], evaluate_density(spec.n_density, k)])
    return ReservoirRun.solve(system, couplings, k, spec.Omega_slope, occ0)


def discretized_oracle_model2(
    spec: ReservoirSpecII, init: MarketInit, k_window, t_grid, check_window=True
) -> TimeSeries:
    """Exact finite-reservoir evolution approximating the continuum model.

    Raises :class:`~qmarket.errors.WindowTooNarrowError` when boundary modes
    carry more than 1% of the trader response at the last time sample.
    """
    t = np.asarray(t_grid, dtype=float)
    run = solve_oracle_model2(spec, init, k_window)
    if check_window and len(t):
        run.check_window(t[-1], rows=[0, 1])
    occ = run.system_occupations(t)
    n_loi = init.total - occ[:, 0] - occ[:, 1]
    return TimeSeries(t, occ[:, 0], occ[:, 1], n_loi)
