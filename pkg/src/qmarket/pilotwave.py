"""Pilot-wave preparation stage on a 2-D grid.

The wave ``Psi(q1, q2; t)`` obeys

    i dPsi/dt = [-(hbar^2 / 2m) (d^2/dq1^2 + d^2/dq2^2) + V] Psi

on a periodic box, advanced with a Strang split-step Fourier scheme (unitary
by construction). From ``R = |Psi|`` the quantum potential
``U = -(1/R) sum_j d^2R/dq_j^2`` gives the mental forces ``g_j = -dU/dq_j``,
which together with the hard forces ``f_j = -dV/dq_j`` drive the portfolios,
``dpi_j/dt = f_j + g_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from qmarket.errors import GridError

DEFAULT_FLOOR_FRACTION = 1e-6


def periodic_axis(n: int, length: float, center: float = 0.0) -> np.ndarray:
    """``n`` equally spaced nodes covering a periodic box of the given length."""
    if n < 2 or not length > 0:
        raise ValueError("need n >= 2 nodes and a positive box length")
    return center - length / 2 + length * np.arange(n) / n


def _spacing(q: np.ndarray) -> float:
    d = np.diff(q)
    if len(q) < 2 or np.any(d <= 0) or np.max(np.abs(d - d[0])) > 1e-9 * abs(d[0]):
        raise GridError("grid axes must be uniform and ascending")
    return float(d[0])


@dataclass(frozen=True)
class WaveField:
    q1: np.ndarray
    q2: np.ndarray
    values: np.ndarray
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if self.values.shape != (len(self.q1), len(self.q2)):
            raise GridError("values shape must be (len(q1), len(q2))")
        if not (self.hbar > 0 and self.mass > 0):
            raise ValueError("hbar and mass must be positive")
        _spacing(self.q1)
        _spacing(self.q2)

    @property
    def dq1(self) -> float:
        return _spacing(self.q1)

    @property
    def dq2(self) -> float:
        return _spacing(self.q2)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.dq1 * self.dq2)

    def normalized(self) -> "WaveField":
        return replace(self, values=self.values / np.sqrt(self.norm()))

    def same_grid(self, other) -> bool:
        return (self.values.shape == np.shape(other.q1) + np.shape(other.q2)
                and np.allclose(self.q1, other.q1) and np.allclose(self.q2, other.q2))

    def mesh(self):
        return np.meshgrid(self.q1, self.q2, indexing="ij")

    def marginal_width(self, axis: int) -> float:
        """Standard deviation of ``|Psi|^2`` along one axis."""
        rho = np.abs(self.values) ** 2
        q = self.q1 if axis == 0 else self.q2
        p = rho.sum(axis=1 - axis)
        p = p / p.sum()
        mean = np.sum(p * q)
        return float(np.sqrt(np.sum(p * (q - mean) ** 2)))


@dataclass(frozen=True)
class PotentialField:
    """Hard potential ``V``, amplitude ``R`` and quantum potential ``U`` on one grid.

    ``mask`` is True where ``U`` is trusted; elsewhere ``U`` holds NaN.
    """

    q1: np.ndarray
    q2: np.ndarray
    V: np.ndarray
    U: np.ndarray
    R: np.ndarray
    mask: np.ndarray = field(default=None)

    def __post_init__(self):
        shape = (len(self.q1), len(self.q2))
        for name in ("V", "U", "R"):
            if np.shape(getattr(self, name)) != shape:
                raise GridError(f"{name} must have shape {shape}")
        if self.mask is None:
            object.__setattr__(self, "mask", np.isfinite(self.U))


@dataclass(frozen=True)
class PortfolioPoint:
    pi1: float
    pi2: float
    q: tuple
    t: float


def gaussian_packet(q1, q2, center=(0.0, 0.0), sigma=(1.0, 1.0), kappa=(0.0, 0.0),
                    hbar=1.0, mass=1.0) -> WaveField:
    """Normalized product Gaussian ``exp(-(q-c)^2/4 sigma^2 + i kappa q)``; ``sigma`` is the std of ``|Psi|^2``."""
    Q1, Q2 = np.meshgrid(q1, q2, indexing="ij")
    psi = np.exp(
        -((Q1 - center[0]) ** 2) / (4 * sigma[0] ** 2)
        - ((Q2 - center[1]) ** 2) / (4 * sigma[1] ** 2)
        + 1j * (kappa[0] * Q1 + kappa[1] * Q2)
    )
    return WaveField(np.asarray(q1, float), np.asarray(q2, float), psi, hbar, mass).normalized()


def wavenumbers(q: np.ndarray) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(len(q), d=_spacing(q))


def _potential_values(psi: WaveField, V) -> np.ndarray:
    if isinstance(V, PotentialField):
        if not (np.allclose(V.q1, psi.q1) and np.allclose(V.q2, psi.q2)):
            raise GridError("potential and wave live on different grids")
        V = V.V
    V = np.asarray(V, dtype=float)
    if V.shape != psi.values.shape:
        raise GridError(f"potential shape {V.shape} does not match wave grid {psi.values.shape}")
    return V


class SplitStepper:
    """Strang splitting ``exp(-iV dt/2) exp(-iT dt) exp(-iV dt/2)`` with precomputed factors."""

    def __init__(self, psi: WaveField, V, dt: float):
        if not np.isfinite(dt) or dt == 0:
            raise ValueError("dt must be finite and non-zero")
        self.template = psi
        self.dt = dt
        V = _potential_values(psi, V)
        k1, k2 = np.meshgrid(wavenumbers(psi.q1), wavenumbers(psi.q2), indexing="ij")
        kinetic = psi.hbar**2 / (2 * psi.mass) * (k1**2 + k2**2)
        self._half_v = np.exp(-0.5j * V * dt)
        self._kin = np.exp(-1j * kinetic * dt)

    def step_values(self, values: np.ndarray) -> np.ndarray:
        values = self._half_v * values
        values = np.fft.ifft2(self._kin * np.fft.fft2(values))
        return self._half_v * values

    def step(self, psi: WaveField) -> WaveField:
        return replace(psi, values=self.step_values(psi.values))

    def evolve(self, psi: WaveField, n_steps: int, save_every: int = 0):
        """Advance ``n_steps``; returns the final field, or snapshots when ``save_every`` > 0."""
        values = psi.values
        frames = [psi] if save_every else None
        for i in range(1, n_steps + 1):
            values = self.step_values(values)
            if save_every and i % save_every == 0:
                frames.append(replace(psi, values=values))
        return frames if save_every else replace(psi, values=values)


def schrodinger_step(psi: WaveField, V, dt: float) -> WaveField:
    """One unitary step of length ``dt`` (negative ``dt`` runs backwards)."""
    return SplitStepper(psi, V, dt).step(psi)


def _second_difference(a, axis, h):
    return (np.roll(a, -1, axis) - 2 * a + np.roll(a, 1, axis)) / h**2


def _first_difference(a, axis, h):
    return (np.roll(a, -1, axis) - np.roll(a, 1, axis)) / (2 * h)


def quantum_potential(psi: WaveField, r_floor: float | None = None, V=None) -> PotentialField:
    """``U = -(1/R) laplacian(R)`` with centered differences on the periodic grid.

    Nodes with ``R < r_floor`` (default ``1e-6 * max R``) are masked: their U
    is NaN and they are excluded from force evaluation.
    """
    R = np.abs(psi.values)
    if r_floor is None:
        r_floor = DEFAULT_FLOOR_FRACTION * float(R.max())
    if not r_floor > 0:
        raise ValueError("r_floor must be positive")
    lap = _second_difference(R, 0, psi.dq1) + _second_difference(R, 1, psi.dq2)
    mask = R >= r_floor
    U = np.full(R.shape, np.nan)
    U[mask] = -lap[mask] / R[mask]
    Vv = np.zeros_like(R) if V is None else _potential_values(psi, V)
    return PotentialField(psi.q1, psi.q2, Vv, U, R, mask)


def _masked_gradient(a, mask, q1, q2):
    """Negative centered gradient; a node is valid only if it and both neighbours are valid."""
    out = []
    for axis, q in ((0, q1), (1, q2)):
        g = -_first_difference(np.where(mask, a, 0.0), axis, _spacing(q))
        ok = mask & np.roll(mask, 1, axis) & np.roll(mask, -1, axis)
        out.append(np.where(ok, g, np.nan))
    return out[0], out[1]


def mental_force(U: PotentialField):
    """``(g1, g2) = (-dU/dq1, -dU/dq2)``; masking propagates to neighbours."""
    return _masked_gradient(U.U, U.mask, U.q1, U.q2)


def hard_force(V: PotentialField):
    """``(f1, f2) = (-dV/dq1, -dV/dq2)``."""
    return _masked_gradient(V.V, np.ones(V.V.shape, bool), V.q1, V.q2)


def _bilinear(q1, q2, grid, x, y):
    if not (q1[0] <= x <= q1[-1] and q2[0] <= y <= q2[-1]):
        raise GridError(f"path point ({x:g}, {y:g}) leaves the grid")
    i = min(np.searchsorted(q1, x, side="right") - 1, len(q1) - 2)
    j = min(np.searchsorted(q2, y, side="right") - 1, len(q2) - 2)
    tx = (x - q1[i]) / (q1[i + 1] - q1[i])
    ty = (y - q2[j]) / (q2[j + 1] - q2[j])
    cell = grid[i:i + 2, j:j + 2]
    if not np.all(np.isfinite(cell)):
        raise GridError(f"path point ({x:g}, {y:g}) falls in a masked region of the quantum potential")
    return ((1 - tx) * (1 - ty) * cell[0, 0] + tx * (1 - ty) * cell[1, 0]
            + (1 - tx) * ty * cell[0, 1] + tx * ty * cell[1, 1])


def integrate_portfolio(pi0, V: PotentialField, U_fields, q_path=None, t_grid=(0.0, 1.0)):
    """Integrate ``dpi_j/dt = f_j + g_j`` with classical RK4.

    ``U_fields`` is one :class:`PotentialField` (static) or one per time
    sample; between samples the forces are interpolated linearly in time.
    ``q_path`` is a fixed configuration ``(q1, q2)``, an array of shape
    ``(len(t_grid), 2)``, or a callable ``t -> (q1, q2)``; by default the
    centre of the grid. Forces are interpolated bilinearly in space.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or len(t) < 1 or np.any(np.diff(t) <= 0):
        raise ValueError("t_grid must be ascending")
    if isinstance(U_fields, PotentialField):
        fields: Sequence[PotentialField] = [U_fields]
    else:
        fields = list(U_fields)
        if len(fields) != len(t):
            raise ValueError("need one quantum-potential field per time sample")
    f1, f2 = hard_force(V)
    forces = []
    for fld in fields:
        if not (np.allclose(fld.q1, V.q1) and np.allclose(fld.q2, V.q2)):
            raise GridError("quantum potential and hard potential use different grids")
        g1, g2 = mental_force(fld)
        forces.append((f1 + g1, f2 + g2))

    path: Callable[[float], tuple]
    if q_path is None:
        centre = (V.q1[len(V.q1) // 2], V.q2[len(V.q2) // 2])
        path = lambda s: centre  # noqa: E731
    elif callable(q_path):
        path = q_path
    else:
        arr = np.asarray(q_path, dtype=float)
        if arr.shape == (2,):
            path = lambda s: (arr[0], arr[1])  # noqa: E731
        elif arr.shape == (len(t), 2):
            path = lambda s: (np.interp(s, t, arr[:, 0]), np.interp(s, t, arr[:, 1]))  # noqa: E731
        else:
            raise ValueError("q_path must be a point, a (len(t_grid), 2) array or a callable")

    def force(s):
        x, y = path(s)
        if len(forces) == 1:
            F = forces[0]
            return np.array([_bilinear(V.q1, V.q2, F[0], x, y), _bilinear(V.q1, V.q2, F[1], x, y)])
        j = int(np.clip(np.searchsorted(t, s, side="right") - 1, 0, len(t) - 2))
        w = (s - t[j]) / (t[j + 1] - t[j])
        out = []
        for comp in (0, 1):
            a = _bilinear(V.q1, V.q2, forces[j][comp], x, y)
            b = _bilinear(V.q1, V.q2, forces[j + 1][comp], x, y)
            out.append((1 - w) * a + w * b)
        return np.array(out)

    pi = np.array(pi0, dtype=float)
    points = [PortfolioPoint(pi[0], pi[1], tuple(map(float, path(t[0]))), float(t[0]))]
    for a, b in zip(t[:-1], t[1:]):
        h = b - a
        # the right-hand side does not depend on pi, so RK4 reduces to Simpson's rule
        k1, k23, k4 = force(a), force(a + h / 2), force(b)
        pi = pi + h / 6 * (k1 + 4 * k23 + k4)
        points.append(PortfolioPoint(float(pi[0]), float(pi[1]), tuple(map(float, path(b))), float(b)))
    return points
