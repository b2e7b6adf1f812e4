import itertools
from math import comb, sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmarket import closed_market, fock
from qmarket.errors import EigenError
from qmarket.numerics import eigh_checked
from qmarket.params import MarketInit, TraderParams

from conftest import random_trader, small_inits


def brute_sector(n_modes, m):
    return sorted(s for s in itertools.product(range(m + 1), repeat=n_modes) if sum(s) == m)


def test_empty_sector():
    b = fock.build_sector_basis(3, 0)
    assert b.states == ((0, 0, 0),)


def test_single_quantum_sector():
    b = fock.build_sector_basis(3, 1)
    assert b.states == ((0, 0, 1), (0, 1, 0), (1, 0, 0))


def test_four_quanta_sector_size():
    b = fock.build_sector_basis(3, 4)
    assert len(b) == 15 == comb(6, 2)


@given(st.integers(1, 4), st.integers(0, 6))
def test_sector_matches_brute_force(n_modes, m):
    b = fock.build_sector_basis(n_modes, m)
    assert list(b.states) == brute_sector(n_modes, m)
    assert len(b) == comb(m + n_modes - 1, n_modes - 1)
    assert all(sum(s) == m for s in b.states)
    assert len(set(b.states)) == len(b)


def test_sector_rejects_bad_sizes():
    with pytest.raises(ValueError):
        fock.build_sector_basis(0, 2)
    with pytest.raises(ValueError):
        fock.build_sector_basis(3, -1)


def test_index_roundtrip_and_missing_state():
    b = fock.build_sector_basis(3, 3)
    for i, s in enumerate(b.states):
        assert b.index(s) == i
    with pytest.raises(ValueError):
        b.index((1, 1, 0))


def test_hop_single_quantum():
    b = fock.build_sector_basis(3, 1)
    h = fock.hop_matrix(b, fock.LOI, fock.SHARES)
    assert h[b.index((1, 0, 0)), b.index((0, 0, 1))] == 1.0
    assert np.count_nonzero(h) == 1


def test_hop_two_quanta_amplitude():
    b = fock.build_sector_basis(3, 2)
    h = fock.hop_matrix(b, fock.LOI, fock.SHARES)
    assert h[b.index((1, 0, 1)), b.index((0, 0, 2))] == pytest.approx(sqrt(2), abs=1e-15)


def test_hop_matches_ladder_elements():
    b = fock.build_sector_basis(3, 3)
    h = fock.hop_matrix(b, 1, 0)
    for i, s in enumerate(b.states):
        for j, r in enumerate(b.states):
            expect = 0.0
            if s[1] >= 1 and r == (s[0] + 1, s[1] - 1, s[2]):
                expect = sqrt((s[0] + 1) * s[1])
            assert h[j, i] == expect


def test_hop_rejects_bad_modes():
    b = fock.build_sector_basis(3, 2)
    with pytest.raises(ValueError):
        fock.hop_matrix(b, 1, 1)
    with pytest.raises(IndexError):
        fock.hop_matrix(b, 0, 3)
    with pytest.raises(IndexError):
        fock.hop_matrix(b, -1, 0)


def test_hamiltonian_free_is_diagonal():
    b = fock.build_sector_basis(3, 3)
    p = TraderParams(1.3, 0.4, 2.2, 0.0)
    h = fock.assemble_model1_hamiltonian(p, b)
    assert np.count_nonzero(h - np.diag(np.diag(h))) == 0
    expect = b.occupations() @ np.array([1.3, 0.4, 2.2])
    assert np.allclose(np.diag(h).real, expect)


def test_single_quantum_sector_reproduces_T():
    b = fock.build_sector_basis(3, 1)
    p = TraderParams(2.0, 2.0, 3.0, 0.5)
    h = fock.assemble_model1_hamiltonian(p, b).real
    # basis order (0,0,1), (0,1,0), (1,0,0) -> LoI, cash, shares
    perm = [b.index((1, 0, 0)), b.index((0, 1, 0)), b.index((0, 0, 1))]
    assert np.allclose(h[np.ix_(perm, perm)], closed_market.build_T(p), atol=0)


def test_hamiltonian_hermitian_random(rng):
    for _ in range(10):
        p = random_trader(rng)
        h = fock.assemble_model1_hamiltonian(p, fock.build_sector_basis(3, int(rng.integers(0, 6))))
        assert np.max(np.abs(h - h.conj().T)) < 1e-12


def test_hamiltonian_needs_three_modes():
    with pytest.raises(ValueError):
        fock.assemble_model1_hamiltonian(TraderParams(1, 1, 1, 1), fock.build_sector_basis(2, 2))


def test_evolution_identity_at_zero():
    p = TraderParams(2.0, 2.0, 3.0, 0.5)
    ts = fock.exact_series(p, MarketInit(2, 1, 1), [0.0])
    assert (ts.n_shares[0], ts.n_cash[0], ts.n_loi[0]) == pytest.approx((2, 1, 1), abs=1e-14)


def test_evolution_free_is_constant():
    ts = fock.exact_series(TraderParams(2.0, 1.0, 3.0, 0.0), MarketInit(1, 2, 1), np.linspace(0, 10, 30))
    for col, v in ((ts.n_shares, 1), (ts.n_cash, 2), (ts.n_loi, 1)):
        assert np.max(np.abs(col - v)) < 1e-12


def test_single_quantum_matches_propagator():
    p = TraderParams(2.0, 2.0, 3.0, 0.5)
    t = np.linspace(0, 10, 50)
    ts = fock.exact_series(p, MarketInit(1, 0, 0), t)
    V = closed_market.propagators(closed_market.build_T(p), t)
    # the quantum starting in mode 0 ends up in mode a with probability |V_a0|^2
    assert np.max(np.abs(ts.n_shares - np.abs(V[:, 0, 0]) ** 2)) < 1e-8
    assert np.max(np.abs(ts.n_cash - np.abs(V[:, 1, 0]) ** 2)) < 1e-8
    assert np.max(np.abs(ts.n_loi - np.abs(V[:, 2, 0]) ** 2)) < 1e-8


def test_number_conservation_and_probability(rng):
    t = np.linspace(0, 15, 40)
    for init in small_inits(4)[::3]:
        p = random_trader(rng)
        ts = fock.exact_series(p, init, t)
        assert np.max(np.abs(ts.conserved_M - init.total)) < 1e-9
        b = fock.build_sector_basis(3, init.total)
        h = fock.assemble_model1_hamiltonian(p, b)
        s0 = (init.shares, init.cash, init.loi)
        assert abs(fock.total_probability(h, b, s0, 7.3) - 1) < 1e-10


def test_oracle_equivalence_all_small_sectors(rng):
    t = np.linspace(0, 10, 50)
    for _ in range(20):
        p = random_trader(rng)
        for init in small_inits(4):
            ex = fock.exact_series(p, init, t)
            an = closed_market.portfolio_series(p, init, t)
            for c in ("n_shares", "n_cash", "n_loi"):
                assert np.max(np.abs(getattr(ex, c) - getattr(an, c))) < 1e-8


def test_evolution_rejects_shape_mismatch():
    b = fock.build_sector_basis(3, 2)
    with pytest.raises(ValueError):
        fock.evolve_occupations_exact(np.eye(3), b, (1, 1, 0), [0.0])


def test_eigh_checked_reports_non_hermitian():
    a = np.array([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(EigenError):
        eigh_checked(a)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 5), st.floats(0, 4), st.floats(0, 4), st.floats(0, 4), st.floats(0, 2))
def test_conservation_property(m, ws, wc, W, lam):
    p = TraderParams(ws, wc, W, lam)
    init = MarketInit(m, 0, 1)
    ts = fock.exact_series(p, init, np.linspace(0, 5, 11))
    assert np.max(np.abs(ts.conserved_M - init.total)) < 1e-9
