import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from qmarket import reservoir_info as ri
from qmarket.errors import WindowTooNarrowError
from qmarket.params import MarketInit

SPEC = ri.ReservoirSpecII(omega=2.0, Omega_slope=3.0, lambda_inf=0.5, n_density=5.0)
INIT = MarketInit(30, 15)


def analytic_nk(spec, init, t):
    """Cash occupation for a flat density, with the k-integral done by residues."""
    gp = spec.gamma_prime
    d = math.exp(-gp * t)
    noise = spec.lambda_inf**2 * spec.n_density * math.pi * (1 - d * d) / (gp * spec.Omega_slope)
    return 0.25 * init.cash * (1 + d) ** 2 + 0.25 * init.shares * (1 - d) ** 2 + noise


def test_spec_validation():
    with pytest.raises(ValueError):
        ri.ReservoirSpecII(1.0, 0.0, 0.5)
    with pytest.raises(ValueError):
        ri.ReservoirSpecII(1.0, 1.0, -0.1)
    with pytest.raises(ValueError):
        ri.ReservoirSpecII(1.0, 1.0, 0.1, -2.0)


def test_decay_rate():
    assert SPEC.gamma_prime == pytest.approx(2 * math.pi * 0.25 / 3, rel=1e-15)
    assert ri.ReservoirSpecII(1.0, 2.0, 0.0).gamma_prime == 0.0


def test_eta1_zero_at_t0():
    assert np.all(ri.eta1(SPEC, np.linspace(-3, 3, 7), 0.0) == 0)


def test_eta1_resonant_is_real():
    t = 1.7
    gp = SPEC.gamma_prime
    v = ri.eta1(SPEC, SPEC.resonance, t)
    assert v.imag == pytest.approx(0.0, abs=1e-14)
    assert v.real == pytest.approx(math.expm1(gp * t) / gp, rel=1e-13)


@pytest.mark.parametrize("k", [-2.0, 0.3, 0.6667, 1.5, 4.0])
def test_eta1_long_time_modulus(k):
    gp = SPEC.gamma_prime
    t = 50 / gp
    lhs = abs(ri.eta1(SPEC, k, t)) ** 2 * math.exp(-2 * gp * t)
    rhs = 1 / (gp**2 + (SPEC.omega - SPEC.Omega_slope * k) ** 2)
    assert lhs == pytest.approx(rhs, rel=1e-6)


def test_eta1_zero_coupling_rejected():
    with pytest.raises(ValueError, match="zero coupling"):
        ri.eta1(ri.ReservoirSpecII(1.0, 1.0, 0.0), 0.5, 1.0)


def test_occupations_initial():
    assert ri.occupations_model2(SPEC, INIT, 0.0) == (30.0, 15.0)


def test_occupations_reject_negative_time():
    with pytest.raises(ValueError):
        ri.occupations_model2(SPEC, INIT, -1.0)


@pytest.mark.parametrize("t", [0.01, 0.5, 2.0, 7.0, 19.0, 38.0, 120.0])
def test_cash_matches_residue_formula(t):
    n_s, n_k = ri.occupations_model2(SPEC, INIT, t)
    ref = analytic_nk(SPEC, INIT, t)
    assert n_k == pytest.approx(ref, rel=1e-9)
    assert n_s == pytest.approx(ref + 15 * math.exp(-SPEC.gamma_prime * t), rel=1e-9)


def test_symmetric_initialization():
    init = MarketInit(20, 20)
    for t in (0.3, 3.0, 30.0):
        n_s, n_k = ri.occupations_model2(SPEC, init, t)
        assert n_s == n_k


def test_long_time_limit():
    t = 20 / SPEC.gamma_prime
    n_s, n_k = ri.occupations_model2(SPEC, INIT, t)
    target = ri.delta_pi_model2(45, 5)
    assert target == -17.5
    assert abs((n_s + n_k - 45) - target) <= 0.01 * abs(target)


def test_zero_coupling_constant():
    spec = ri.ReservoirSpecII(2.0, 3.0, 0.0, 5.0)
    ts = ri.series_model2(spec, INIT, np.linspace(0, 50, 11))
    assert np.all(ts.portfolio == 45) and np.all(ts.conserved_M == 45)


def test_series_conserved_charge():
    ts = ri.series_model2(SPEC, INIT, np.linspace(0, 20, 9))
    assert np.allclose(ts.conserved_M, INIT.total, atol=1e-12)


def test_delta_pi_examples():
    assert ri.delta_pi_model2(45, 5) == -17.5
    assert ri.delta_pi_model2(0, 0) == 0
    assert ri.delta_pi_model2(10, 5) == 0
    with pytest.raises(ValueError):
        ri.delta_pi_model2(-1, 0)


def test_delta_pi_reads_only_portfolio_and_density():
    import inspect
    assert list(inspect.signature(ri.delta_pi_model2).parameters) == ["pi0", "n_I"]


def test_delta_pi_density_flat_matches_closed_form():
    for spec in (SPEC, ri.ReservoirSpecII(-1.0, 0.7, 0.2, 5.0), ri.ReservoirSpecII(10.0, 5.0, 1.3, 5.0)):
        assert ri.delta_pi_density(spec, INIT) == pytest.approx(-17.5, rel=1e-8)


def test_delta_pi_density_tabulated():
    table = ri.TabulatedDensity([-2.0, 0.0, 1.0, 3.0], [0.0, 2.0, 6.0, 1.0])
    spec = ri.ReservoirSpecII(2.0, 3.0, 0.5, table)
    gp = spec.gamma_prime

    def f(k):
        return table(k) / ((2 - 3 * k) ** 2 + gp**2)

    brute = sum(integrate.quad(f, a, b, limit=400, epsabs=1e-13)[0]
                for a, b in [(-np.inf, -2), (-2, 0), (0, 2 / 3), (2 / 3, 1), (1, 3), (3, np.inf)])
    assert ri.delta_pi_density(spec, INIT) == pytest.approx(-22.5 + 2 * 0.25 * brute, rel=1e-8)


def test_tabulated_density_validation():
    with pytest.raises(ValueError):
        ri.TabulatedDensity([0, 0], [1, 1])
    with pytest.raises(ValueError):
        ri.TabulatedDensity([0, 1], [1, -1])


def test_lorentzian_identity_example():
    val = ri.lorentzian_integral_check(ri.ReservoirSpecII(2.0, 3.0, 0.5))
    assert 2 * 0.25 * 9 * val == pytest.approx(1.0, abs=1e-6)


def test_lorentzian_shift_invariance():
    a = ri.lorentzian_integral_check(ri.ReservoirSpecII(0.0, 3.0, 0.5))
    b = ri.lorentzian_integral_check(ri.ReservoirSpecII(10.0, 3.0, 0.5))
    assert a == pytest.approx(b, rel=1e-10)


def test_lorentzian_scaling():
    lam = 0.5
    a = ri.lorentzian_integral_check(ri.ReservoirSpecII(2.0, 3.0, lam))
    b = ri.lorentzian_integral_check(ri.ReservoirSpecII(2.0, 3.0, lam * math.sqrt(2)))
    assert b == pytest.approx(a / 2, rel=1e-9)


def test_lorentzian_zero_coupling():
    with pytest.raises(ValueError):
        ri.lorentzian_integral_check(ri.ReservoirSpecII(2.0, 3.0, 0.0))


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 2.0), st.floats(0.2, 10.0), st.floats(-20.0, 20.0))
def test_lorentzian_identity_property(lam, W, w):
    val = ri.lorentzian_integral_check(ri.ReservoirSpecII(w, W, lam))
    assert 2 * lam**2 * W**2 * val == pytest.approx(1.0, abs=1e-6)


# discretized oracle

def small_window(spec, half=5.0, n_k=501):
    return (spec.resonance - half, spec.resonance + half, n_k)


def test_oracle_zero_coupling_constant():
    spec = ri.ReservoirSpecII(2.0, 3.0, 0.0, 5.0)
    ts = ri.discretized_oracle_model2(spec, INIT, small_window(spec), np.linspace(0, 10, 5))
    assert np.allclose(ts.n_shares, 30, atol=1e-12) and np.allclose(ts.n_cash, 15, atol=1e-12)


def test_oracle_initial_state():
    ts = ri.discretized_oracle_model2(SPEC, INIT, small_window(SPEC), [0.0])
    assert ts.n_shares[0] == pytest.approx(30, abs=1e-10)
    assert ts.n_cash[0] == pytest.approx(15, abs=1e-10)
    run = ri.solve_oracle_model2(SPEC, INIT, small_window(SPEC))
    assert np.allclose(run.transfer_weights(0.0, [0, 1])[:, :2], np.eye(2), atol=1e-12)


def test_oracle_symmetric_initialization():
    init = MarketInit(20, 20)
    ts = ri.discretized_oracle_model2(SPEC, init, small_window(SPEC), np.linspace(0, 5, 6))
    assert np.allclose(ts.n_shares, ts.n_cash, atol=1e-9)


def test_oracle_conserves_total_quanta():
    run = ri.solve_oracle_model2(SPEC, INIT, small_window(SPEC))
    q0 = run.total_quanta(0.0)
    for t in (1.0, 5.0, 20.0):
        assert abs(run.total_quanta(t) - q0) < 1e-6 * t


def test_oracle_rejects_bad_windows():
    with pytest.raises(ValueError):
        ri.solve_oracle_model2(SPEC, INIT, (5.0, 10.0, 501))
    with pytest.raises(ValueError):
        ri.solve_oracle_model2(SPEC, INIT, (-1.0, 2.0, 50))


def test_oracle_narrow_window_reported():
    t = 20 / SPEC.gamma_prime
    with pytest.raises(WindowTooNarrowError) as err:
        ri.discretized_oracle_model2(SPEC, INIT, small_window(SPEC, half=1.0, n_k=201), [0.0, t])
    assert err.value.leakage > 0.01


def test_oracle_converges_as_grid_refines():
    """Doubling n_k at fixed spacing doubles the band; the gap to the closed form must shrink."""
    t = np.linspace(0, 20 / SPEC.gamma_prime, 41)
    closed = ri.series_model2(SPEC, INIT, t).portfolio
    gaps = []
    for half, n_k in ((5.0, 501), (10.0, 1001), (20.0, 2001)):
        ts = ri.discretized_oracle_model2(SPEC, INIT, small_window(SPEC, half, n_k), t)
        gaps.append(np.max(np.abs(ts.portfolio - closed)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.05


def test_default_window_brackets_resonance():
    k_min, k_max, n_k = ri.default_oracle_window(SPEC)
    assert k_min < SPEC.resonance < k_max and n_k == 4001
