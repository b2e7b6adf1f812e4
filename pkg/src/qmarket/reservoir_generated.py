"""The reservoir generates the information.

A discrete LoI mode per trader is coupled to the portfolio (strength
``lambda_inf``) and to a continuum of news/rumour modes ``r(k)`` with
dispersion ``Omega_r * k`` (strength ``gamma``). Eliminating the reservoir
damps the LoI at the complex rate ``Gamma = i Omega + pi gamma^2 / Omega_r``.
The closed forms below neglect the back-action of the portfolio on the LoI,
which is accurate for small ``lambda_inf``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from qmarket.discretized import ReservoirRun, k_grid
from qmarket.errors import DegenerateKernelWarning
from qmarket.numerics import SERIES_THRESHOLD, d_expm1_over, expm1_over, integrate_line
from qmarket.params import MarketInit, TimeSeries
from qmarket.reservoir_info import Density, TabulatedDensity, evaluate_density

QUAD_WINDOW = 40.0
BISECTION_FLOOR = 1e-6


@dataclass(frozen=True)
class Model3Params:
    omega_s: float
    omega_c: float
    Omega: float
    Omega_r_slope: float
    lambda_inf: float
    gamma: float
    n_r_density: Density = 0.0

    def __post_init__(self):
        for name in ("omega_s", "omega_c", "Omega"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not (math.isfinite(self.Omega_r_slope) and self.Omega_r_slope > 0):
            raise ValueError("Omega_r_slope must be positive")
        if not (math.isfinite(self.gamma) and self.gamma >= 0):
            raise ValueError("gamma must be non-negative")
        if not (math.isfinite(self.lambda_inf) and self.lambda_inf >= 0):
            raise ValueError("lambda_inf must be non-negative")
        if not callable(self.n_r_density) and not (self.n_r_density >= 0):
            raise ValueError("n_r_density must be non-negative")

    @property
    def damping(self) -> float:
        """Real part of Gamma, ``pi gamma^2 / Omega_r``."""
        return math.pi * self.gamma**2 / self.Omega_r_slope

    @property
    def Gamma(self) -> complex:
        return complex(self.damping, self.Omega)

    def frequency(self, which: str) -> float:
        if which in ("s", "shares", "omega_s"):
            return self.omega_s
        if which in ("c", "cash", "omega_c"):
            return self.omega_c
        raise ValueError(f"unknown frequency selector {which!r}; use 's' or 'c'")


@dataclass(frozen=True)
class Model3Kernels:
    """Kernels for one trader frequency ``omega`` (shares or cash)."""

    omega: float
    Gamma: complex
    Omega_r_slope: float

    @property
    def b(self) -> complex:
        return 1j * self.omega - self.Gamma

    @property
    def degenerate(self) -> bool:
        return abs(self.b) < SERIES_THRESHOLD

    def alpha(self, t):
        return expm1_over(self.b, t)

    def eta1(self, k, t):
        a = self.Gamma - 1j * self.Omega_r_slope * np.asarray(k, dtype=float)
        return expm1_over(a, t)

    def eta2(self, k, t):
        """Closed form of ``int_0^t eta1(k, t1) exp(b t1) dt1``.

        Equals ``[E(a + b) - E(b)] / a`` with ``E(z) = (exp(z t) - 1)/z`` and
        ``a = Gamma - i Omega_r k``; for ``|a|`` below the series threshold the
        difference quotient becomes the derivative ``E'(b)``.
        """
        k = np.asarray(k, dtype=float)
        t = np.asarray(t, dtype=float)
        a = self.Gamma - 1j * self.Omega_r_slope * k
        b = self.b
        small = np.abs(a) < SERIES_THRESHOLD
        a_safe = np.where(small, 1.0, a)
        quotient = (expm1_over(a + b, t) - expm1_over(b, t)) / a_safe
        return np.where(small, d_expm1_over(b, t), quotient)


def kernels(p: Model3Params, omega: str | float = "s") -> Model3Kernels:
    """Kernels for the share (``'s'``) or cash (``'c'``) frequency, or an explicit value."""
    w = p.frequency(omega) if isinstance(omega, str) else float(omega)
    ker = Model3Kernels(w, p.Gamma, p.Omega_r_slope)
    if ker.degenerate:
        warnings.warn(
            "i*omega equals Gamma (gamma = 0 and omega = Omega); using the limit alpha(t) = t",
            DegenerateKernelWarning,
            stacklevel=2,
        )
    return ker


def _eta2_sq_integral(p: Model3Params, ker: Model3Kernels, t: float) -> float:
    """``int N_r(k) |eta2(k, t)|^2 dk`` over the real line."""
    if t == 0:
        return 0.0
    if not callable(p.n_r_density) and float(p.n_r_density) == 0.0:
        return 0.0
    W = p.Omega_r_slope
    E2 = complex(expm1_over(ker.b, t))
    cr, ci = E2.real, -E2.imag  # conj(E(b))

    def density(k):
        return float(evaluate_density(p.n_r_density, k))

    def integrand(k):
        return density(k) * abs(complex(ker.eta2(k, t))) ** 2

    # away from k = omega/Omega_r, |eta2|^2 |a|^2 = P + Q cos(delta t) + R sin(delta t)
    def mod_a2(k):
        return ker.Gamma.real**2 + (ker.Gamma.imag - W * k) ** 2

    def P(k):
        d = ker.omega - W * k
        return density(k) * (2 / d**2 + abs(E2) ** 2 + 2 * ci / d) / mod_a2(k)

    def Q(k):
        d = ker.omega - W * k
        return density(k) * (-2 / d**2 - 2 * ci / d) / mod_a2(k)

    def R(k):
        d = ker.omega - W * k
        return density(k) * (-2 * cr / d) / mod_a2(k)

    # delta t = omega t - W t k: cos(W t k - omega t), sin(delta t) = cos(W t k - omega t + pi/2)
    terms = [(P, 0.0, 0.0), (Q, W * t, -ker.omega * t), (R, W * t, -ker.omega * t + math.pi / 2)]
    centers = [ker.omega / W, ker.Gamma.imag / W]
    # the tail terms nearly cancel unless the tail starts many periods 2 pi / (W t) out
    base = QUAD_WINDOW * max(ker.Gamma.real, 1.0) / W
    half = max(base, 16 * math.pi / (W * t))
    lo, hi = min(centers) - half, max(centers) + half
    pts = list(centers)
    if isinstance(p.n_r_density, TabulatedDensity):
        pts.extend(p.n_r_density.k)
    reach = base
    while reach < half:
        pts += [min(centers) - reach, max(centers) + reach]
        reach *= 2
    # |eta2|^2 is about |E(b)|^2 / |a|^2 past |k| ~ 1 / (W t), which sets the size of the integral
    n_ref = max(density(ker.omega / W), density(ker.Gamma.imag / W), 1e-300)
    scale = n_ref * abs(E2) ** 2 * min(t, 1.0) / W
    return integrate_line(integrand, lo, hi, points=pts, terms=terms, atol=1e-12 * max(scale, 1e-300))


def occupation_model3(p: Model3Params, init_quanta: int, loi: int, t: float, which: str,
                      noise_integral: bool = True) -> float:
    """Mean occupation of the share (``which='s'``) or cash mode at time t."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if p.lambda_inf == 0 or t == 0:
        return float(init_quanta)
    ker = kernels(p, which)
    lam2 = p.lambda_inf**2
    value = init_quanta + lam2 * loi * abs(complex(ker.alpha(t))) ** 2
    if noise_integral and p.gamma > 0:
        value += lam2 * p.gamma**2 * _eta2_sq_integral(p, ker, t)
    return float(value)


def occupations_model3(p: Model3Params, init: MarketInit, t: float, noise_integral: bool = True):
    """``(N_S, N_K)`` at time t; ``noise_integral=False`` drops the reservoir-noise integral."""
    n_s = occupation_model3(p, init.shares, init.loi, t, "s", noise_integral)
    n_k = occupation_model3(p, init.cash, init.loi, t, "c", noise_integral)
    return n_s, n_k


def series_model3(p: Model3Params, init: MarketInit, t_grid, noise_integral: bool = True) -> TimeSeries:
    """Closed-form series; ``n_loi`` holds the LoI-plus-reservoir side of the conserved charge."""
    t = np.asarray(t_grid, dtype=float)
    occ = np.array([occupations_model3(p, init, tt, noise_integral) for tt in t]).reshape(len(t), 2)
    n_loi = init.total - occ[:, 0] - occ[:, 1]
    return TimeSeries(t, occ[:, 0], occ[:, 1], n_loi)


def delta_pi_model3(p: Model3Params, loi: float) -> float:
    """Long-time portfolio gain with the reservoir-noise integral neglected."""
    if p.gamma == 0 and (p.omega_s == p.Omega or p.omega_c == p.Omega):
        raise ValueError("pole: gamma = 0 with omega_s or omega_c equal to Omega")
    W = p.Omega_r_slope
    g4 = math.pi**2 * p.gamma**4
    total = 1 / (g4 + (p.omega_s - p.Omega) ** 2 * W**2) + 1 / (g4 + (p.omega_c - p.Omega) ** 2 * W**2)
    return p.lambda_inf**2 * loi * W**2 * total


@dataclass(frozen=True)
class TraderComparison:
    delta_pi_1: float
    delta_pi_2: float
    sign: int  # sign of delta_pi_1 - delta_pi_2

    @property
    def case(self) -> str:
        return {1: "trader 1 gains more", -1: "trader 2 gains more", 0: "equal"}[self.sign]


def _check_equivalent(p1: Model3Params, p2: Model3Params):
    for name in ("omega_s", "omega_c", "Omega_r_slope", "lambda_inf"):
        if getattr(p1, name) != getattr(p2, name):
            raise ValueError(f"traders must share {name}")


def compare_traders(p1: Model3Params, p2: Model3Params, loi: float) -> TraderComparison:
    _check_equivalent(p1, p2)
    d1, d2 = delta_pi_model3(p1, loi), delta_pi_model3(p2, loi)
    return TraderComparison(d1, d2, int(np.sign(d1 - d2)))


def resonance_hypothesis(p1: Model3Params, p2: Model3Params) -> bool:
    """Trader 2's LoI frequency is closer to both trader frequencies than trader 1's."""
    return (abs(p1.omega_s - p2.Omega) < abs(p1.omega_s - p1.Omega)
            and abs(p1.omega_c - p2.Omega) < abs(p1.omega_c - p1.Omega))


@dataclass(frozen=True)
class CriticalGamma:
    gamma1: Optional[float]
    residual: Optional[float]
    reason: str

    @property
    def found(self) -> bool:
        return self.gamma1 is not None


def critical_gamma1(Omega1: float, Omega2: float, gamma2: float, base: Model3Params,
                    loi: float = 1.0, upper: Optional[float] = None,
                    tol: float = 1e-10) -> CriticalGamma:
    """Coupling of trader 1 at which both traders gain the same amount.

    Bisection on ``[1e-6, upper]`` (default ``upper = gamma2``) using that
    the gain falls strictly with gamma. ``base`` supplies the shared
    frequencies and couplings; its own ``Omega`` and ``gamma`` are ignored.
    """
    if Omega1 < Omega2:
        raise ValueError("expects Omega1 >= Omega2 (swap the traders otherwise)")
    if not gamma2 > 0:
        raise ValueError("gamma2 must be positive")
    hi = gamma2 if upper is None else float(upper)
    lo = BISECTION_FLOOR
    target = delta_pi_model3(replace(base, Omega=Omega2, gamma=gamma2), loi)

    def f(g1):
        return delta_pi_model3(replace(base, Omega=Omega1, gamma=g1), loi) - target

    f_lo, f_hi = f(lo), f(hi)
    if f_hi == 0:
        return CriticalGamma(hi, 0.0, "root at upper bracket end")
    if f_lo == 0:
        return CriticalGamma(lo, 0.0, "root at lower bracket end")
    if f_lo < 0:
        return CriticalGamma(None, None, f"no crossing: trader 1 gains less even at gamma1={lo:g}")
    if f_hi > 0:
        return CriticalGamma(None, None, f"no crossing: bracket [{lo:g}, {hi:g}] shows no sign change")
    # f decreasing: f(lo) > 0 > f(hi)
    scale = max(abs(target), 1e-300)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = f(mid)
        if f_mid > 0:
            lo = mid
        else:
            hi = mid
        if abs(f_mid) < tol * min(1.0, scale) or hi - lo < 1e-15 * hi:
            break
    root = 0.5 * (lo + hi)
    return CriticalGamma(root, abs(f(root)), "crossing")


def default_oracle_window(p: Model3Params, n_k: int = 2001):
    W = p.Omega_r_slope
    centers = [p.omega_s / W, p.omega_c / W, p.Omega / W]
    half = QUAD_WINDOW * max(p.damping, 1.0) / W
    mid = 0.5 * (min(centers) + max(centers))
    span = 0.5 * (max(centers) - min(centers))
    return (mid - span - half, mid + span + half, n_k)


def solve_oracle_model3(p: Model3Params, init: MarketInit, k_window=None) -> ReservoirRun:
    """Diagonalize the discretized system: shares, cash, LoI and reservoir modes."""
    k_min, k_max, n_k = k_window or default_oracle_window(p)
    k = k_grid(k_min, k_max, int(n_k), min_modes=200)
    W = p.Omega_r_slope
    for res in (p.omega_s / W, p.omega_c / W, p.Omega / W):
        if not k_min <= res <= k_max:
            raise ValueError("k window must bracket omega_s/Omega_r, omega_c/Omega_r and Omega/Omega_r")
    lam = p.lambda_inf
    system = np.array([[p.omega_s, 0.0, lam], [0.0, p.omega_c, lam], [lam, lam, p.Omega]])
    couplings = np.zeros((3, len(k)))
    couplings[2] = p.gamma
    occ0 = np.concatenate([[init.shares, init.cash, init.loi], evaluate_density(p.n_r_density, k)])
    return ReservoirRun.solve(system, couplings, k, W, occ0)


def discretized_oracle_model3(p: Model3Params, init: MarketInit, k_window, t_grid,
                              check_window: bool = True) -> TimeSeries:
    """Exact evolution of the full linear system with a finite reservoir.

    ``n_loi`` is the actual LoI occupation here (not inferred).
    """
    t = np.asarray(t_grid, dtype=float)
    run = solve_oracle_model3(p, init, k_window)
    if check_window and len(t):
        run.check_window(t[-1], rows=[0, 1])
    occ = run.system_occupations(t)
    return TimeSeries(t, occ[:, 0], occ[:, 1], occ[:, 2])


def long_time(p: Model3Params, decay_times: float = 12.0) -> float:
    """A time at which the LoI transient ``exp(-Re(Gamma) t)`` has died out."""
    if p.damping == 0:
        raise ValueError("no damping at gamma = 0; long-time limit undefined")
    return decay_times / p.damping
