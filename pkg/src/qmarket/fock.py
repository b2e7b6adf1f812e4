"""Exact evolution of the closed market on number-conserving Fock sectors.

One trader carries three bosonic modes ordered (shares, cash, LoI). The
Hamiltonian conserves the total number of quanta, so each sector of fixed
total is invariant and small enough to diagonalize densely. This is the
brute-force check for :mod:`qmarket.closed_market`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np

from qmarket.numerics import eigh_checked
from qmarket.params import MarketInit, TimeSeries, TraderParams

SHARES, CASH, LOI = 0, 1, 2


@dataclass(frozen=True)
class SectorBasis:
    """All occupation tuples of ``n_modes`` modes summing to ``total_quanta``."""

    n_modes: int
    total_quanta: int
    states: tuple[tuple[int, ...], ...]

    def __len__(self):
        return len(self.states)

    def index(self, state) -> int:
        try:
            return self._lookup[tuple(state)]
        except KeyError:
            raise ValueError(f"state {tuple(state)} is not in the sector") from None

    @cached_property
    def _lookup(self):
        return {s: i for i, s in enumerate(self.states)}

    def occupations(self) -> np.ndarray:
        """Matrix of shape (len(basis), n_modes) with the occupation numbers."""
        return np.array(self.states, dtype=float).reshape(len(self.states), self.n_modes)


def build_sector_basis(n_modes: int, total_quanta: int) -> SectorBasis:
    if n_modes < 1:
        raise ValueError("n_modes must be positive")
    if total_quanta < 0:
        raise ValueError("total_quanta must be non-negative")
    # stars and bars: choose positions of the n_modes - 1 bars
    states = []
    for bars in itertools.combinations(range(total_quanta + n_modes - 1), n_modes - 1):
        edges = (-1, *bars, total_quanta + n_modes - 1)
        states.append(tuple(edges[i + 1] - edges[i] - 1 for i in range(n_modes)))
    states.sort()
    assert len(states) == comb(total_quanta + n_modes - 1, n_modes - 1)
    return SectorBasis(n_modes, total_quanta, tuple(states))


def hop_matrix(basis: SectorBasis, from_mode: int, to_mode: int) -> np.ndarray:
    """Matrix of ``a_to^dagger a_from`` restricted to the sector.

    Entry ``[j, i]`` is ``sqrt((n_to + 1) * n_from)`` where state ``j`` is
    state ``i`` with one quantum moved from ``from_mode`` to ``to_mode``.
    """
    for m in (from_mode, to_mode):
        if not 0 <= m < basis.n_modes:
            raise IndexError(f"mode index {m} out of range for {basis.n_modes} modes")
    if from_mode == to_mode:
        raise ValueError("from_mode and to_mode must differ")
    dim = len(basis)
    out = np.zeros((dim, dim))
    for i, state in enumerate(basis.states):
        n_from, n_to = state[from_mode], state[to_mode]
        if n_from == 0:
            continue
        moved = list(state)
        moved[from_mode] -= 1
        moved[to_mode] += 1
        out[basis.index(moved), i] = np.sqrt((n_to + 1) * n_from)
    return out


def assemble_model1_hamiltonian(params: TraderParams, basis: SectorBasis) -> np.ndarray:
    """Closed-market Hamiltonian of one trader on a three-mode sector."""
    if basis.n_modes != 3:
        raise ValueError("the closed-market Hamiltonian needs a 3-mode basis (shares, cash, LoI)")
    occ = basis.occupations()
    freqs = np.array([params.omega_s, params.omega_c, params.Omega])
    h = np.diag(occ @ freqs).astype(complex)
    if params.lambda_inf:
        hop = hop_matrix(basis, LOI, SHARES) + hop_matrix(basis, LOI, CASH)
        h += params.lambda_inf * (hop + hop.T)
    return h


def evolve_occupations_exact(h: np.ndarray, basis: SectorBasis, initial_state, t_grid) -> TimeSeries:
    """Schrodinger evolution of a basis state; returns mean occupations per mode."""
    h = np.asarray(h)
    if h.shape != (len(basis), len(basis)):
        raise ValueError(f"Hamiltonian shape {h.shape} does not match basis size {len(basis)}")
    if basis.n_modes != 3:
        raise ValueError("occupation series are defined for the 3-mode trader basis")
    t = np.atleast_1d(np.asarray(t_grid, dtype=float))
    i0 = basis.index(initial_state)
    evals, evecs = eigh_checked(h)
    # psi(t) = Q exp(-i E t) Q^dagger e_{i0}
    coeff = evecs[i0].conj()
    amps = (np.exp(-1j * np.outer(t, evals)) * coeff) @ evecs.T
    probs = np.abs(amps) ** 2
    occ = probs @ basis.occupations()
    return TimeSeries(t, occ[:, SHARES], occ[:, CASH], occ[:, LOI])


def exact_series(params: TraderParams, init: MarketInit, t_grid) -> TimeSeries:
    """Convenience wrapper: build the sector of ``init`` and evolve it."""
    basis = build_sector_basis(3, init.total)
    h = assemble_model1_hamiltonian(params, basis)
    return evolve_occupations_exact(h, basis, (init.shares, init.cash, init.loi), t_grid)


def total_probability(h: np.ndarray, basis: SectorBasis, initial_state, t) -> float:
    """Norm of the evolved state; a unitarity proxy."""
    evals, evecs = eigh_checked(np.asarray(h))
    psi0 = np.zeros(len(basis), dtype=complex)
    psi0[basis.index(initial_state)] = 1.0
    psi = evecs @ (np.exp(-1j * evals * t) * (evecs.conj().T @ psi0))
    return float(np.vdot(psi, psi).real)
