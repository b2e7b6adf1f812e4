"""Finite-mode stand-in for a continuum reservoir.

A reservoir with linear dispersion ``slope * k`` is replaced by ``n_k``
modes on a uniform k grid. Coupling ``g`` to the continuum becomes
``g * sqrt(dk)`` per discrete mode and a continuum occupation density
``N(k)`` becomes the occupation ``N(k_j)`` of mode j; both reproduce the
continuum correlations as ``dk -> 0``. The resulting quadratic Hamiltonian
is solved exactly by diagonalizing its single-particle matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qmarket.errors import WindowTooNarrowError
from qmarket.numerics import eigh_checked

BOUNDARY_FRACTION = 0.05
LEAKAGE_LIMIT = 0.01


def k_grid(k_min: float, k_max: float, n_k: int, min_modes: int) -> np.ndarray:
    if n_k < min_modes:
        raise ValueError(f"n_k must be at least {min_modes}, got {n_k}")
    if not k_max > k_min:
        raise ValueError("k_max must exceed k_min")
    return np.linspace(k_min, k_max, n_k)


@dataclass
class ReservoirRun:
    """Exact solution of system modes coupled to a discretized reservoir.

    ``system`` is the Hermitian block of the first ``n_sys`` modes,
    ``couplings`` the (n_sys, n_k) continuum couplings before the
    ``sqrt(dk)`` factor, ``occupations0`` the initial occupation of every
    mode (system first).
    """

    k: np.ndarray
    slope: float
    evals: np.ndarray
    evecs: np.ndarray
    occupations0: np.ndarray
    n_sys: int

    @classmethod
    def solve(cls, system, couplings, k, slope, occupations0):
        system = np.atleast_2d(np.asarray(system, dtype=float))
        n_sys = system.shape[0]
        dk = k[1] - k[0]
        n = n_sys + len(k)
        a = np.zeros((n, n))
        a[:n_sys, :n_sys] = system
        a[n_sys:, n_sys:][np.diag_indices(len(k))] = slope * k
        g = np.asarray(couplings, dtype=float).reshape(n_sys, len(k)) * np.sqrt(dk)
        a[:n_sys, n_sys:] = g
        a[n_sys:, :n_sys] = g.T
        evals, evecs = eigh_checked(a)
        return cls(k, slope, evals, evecs, np.asarray(occupations0, dtype=float), n_sys)

    @property
    def recurrence_time(self) -> float:
        """Time after which the finite mode spacing produces revivals."""
        return 2 * np.pi / (abs(self.slope) * (self.k[1] - self.k[0]))

    def _rows(self, rows, t):
        # W(t)[rows, :] with W = Q exp(-i e t) Q^T
        return (self.evecs[rows] * np.exp(-1j * self.evals * t)) @ self.evecs.T

    def system_occupations(self, t_grid) -> np.ndarray:
        """Mean occupation of each system mode, shape (len(t_grid), n_sys)."""
        rows = np.arange(self.n_sys)
        out = np.empty((len(t_grid), self.n_sys))
        for j, t in enumerate(t_grid):
            out[j] = np.abs(self._rows(rows, t)) ** 2 @ self.occupations0
        return out

    def total_quanta(self, t: float) -> float:
        """Sum of all mode occupations at time t (conserved exactly)."""
        w = (self.evecs * np.exp(-1j * self.evals * t)) @ self.evecs.T
        return float(np.sum(np.abs(w) ** 2 @ self.occupations0))

    def leakage(self, t: float, rows) -> float:
        """Share of the reservoir weight in ``rows`` carried by boundary modes."""
        w = np.abs(self._rows(np.asarray(rows), t)[:, self.n_sys:]) ** 2
        weight = w.sum(axis=0)
        total = weight.sum()
        if total <= 1e-12 * len(np.atleast_1d(rows)):
            # nothing has reached the reservoir yet
            return 0.0
        nb = max(1, int(round(BOUNDARY_FRACTION * len(self.k))))
        return float((weight[:nb].sum() + weight[-nb:].sum()) / total)

    def check_window(self, t: float, rows) -> float:
        leak = self.leakage(t, rows)
        if leak > LEAKAGE_LIMIT:
            raise WindowTooNarrowError(
                f"boundary reservoir modes carry {leak:.2%} of the response "
                f"(limit {LEAKAGE_LIMIT:.0%}); widen the k window",
                leak,
            )
        return leak

    def transfer_weights(self, t: float, rows) -> np.ndarray:
        """``|W(t)[rows, b]|^2``: share of mode b's initial quanta found in each row at t."""
        return np.abs(self._rows(np.asarray(rows), t)) ** 2
