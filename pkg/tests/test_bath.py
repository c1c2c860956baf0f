import numpy as np
import pytest

import molspec as ms
from molspec import bath
from molspec.constants import HBAR_MEV_PS, KB_MEV_PER_K, mev_to_angular
from molspec.errors import ConfigError
from molspec.numerics import gauss_panels


XI = mev_to_angular(4.0)


# ---------------------------------------------------------------------------
# Bose occupation

def test_bose_zero_temperature():
    assert ms.bose_occupation(5.0, 0.0) == 0.0


def test_bose_ln2_point():
    delta = KB_MEV_PER_K * 150.0 * np.log(2.0)
    assert abs(ms.bose_occupation(delta, 150.0) - 1.0) < 1e-12


def test_bose_room_temperature_reference():
    # 1 / (exp(21.55 / (kB * 300)) - 1), evaluated at 40-digit precision
    assert abs(ms.bose_occupation(21.55, 300.0)
               - 0.7683032421787909) < 1e-12


def test_bose_rejects_nonpositive_energy():
    with pytest.raises(ValueError):
        ms.bose_occupation(0.0, 10.0)
    with pytest.raises(ValueError):
        ms.bose_occupation(-1.0, 10.0)


# ---------------------------------------------------------------------------
# spectral densities

def test_j_bulk_zero_at_origin_and_when_uncoupled():
    p = ms.BulkBathParams(alpha=0.02, xi=XI)
    assert ms.j_bulk(0.0, p) == 0.0
    p0 = ms.BulkBathParams(alpha=0.0, xi=XI)
    w = np.linspace(0.0, 5 * XI, 64)
    assert np.max(np.abs(ms.j_bulk(w, p0))) == 0.0


def test_j_bulk_argmax():
    p = ms.BulkBathParams(alpha=0.02, xi=XI)
    w = np.linspace(1e-4, 4 * XI, 200001)
    w_star = w[np.argmax(ms.j_bulk(w, p))]
    assert abs(w_star - XI * np.sqrt(1.5)) < 1e-3 * XI


def test_bulk_params_validation():
    with pytest.raises(ConfigError):
        ms.BulkBathParams(alpha=-0.1, xi=XI)
    with pytest.raises(ConfigError):
        ms.BulkBathParams(alpha=0.1, xi=0.0)
    with pytest.raises(ConfigError):
        ms.BulkBathParams(alpha=0.1, xi=XI, omega_max=2.0 * XI)


# ---------------------------------------------------------------------------
# phi(tau)

def test_phi_vanishes_without_coupling():
    p = ms.BulkBathParams(alpha=0.0, xi=XI)
    tau = np.linspace(0.0, 5.0, 11)
    assert np.max(np.abs(ms.phi(tau, 10.0, p))) == 0.0


def test_phi_zero_tau_is_real():
    p = ms.BulkBathParams(alpha=0.02, xi=XI)
    val = ms.phi(0.0, 4.7, p)
    assert abs(val.imag) < 1e-10
    assert val.real > 0


def test_phi_decays_to_zero():
    p = ms.BulkBathParams(alpha=0.02, xi=XI)
    tail = ms.phi(np.array([12.0, 16.0]), 4.7, p)
    assert np.max(np.abs(tail)) < 1e-6 * abs(ms.phi(0.0, 4.7, p))


def test_phi_zero_temperature_limit():
    # coth -> 1: phi(0) = alpha * integral w exp(-w^2/xi^2) dw = alpha xi^2 / 2
    p = ms.BulkBathParams(alpha=0.02, xi=XI)
    expected = 0.02 * XI**2 / 2.0
    assert abs(ms.phi(0.0, 0.0, p) - expected) < 1e-8 * expected


def test_phi_correlation_bundle():
    p = ms.BulkBathParams(alpha=0.02, xi=XI)
    corr = bath.phi_correlation(np.linspace(0.0, 4.0, 9), 4.7, p)
    assert corr.mean_displacement == pytest.approx(
        np.exp(-0.5 * corr.phi_values[0].real), abs=1e-12)


# ---------------------------------------------------------------------------
# mean displacement / Debye-Waller

def test_dwf_limits_and_monotonicity():
    assert ms.debye_waller(10.0, ms.BulkBathParams(alpha=0.0, xi=XI)) == 1.0
    p = ms.BulkBathParams(alpha=0.02, xi=XI)
    dwfs = [ms.debye_waller(t, p) for t in (2.0, 10.0, 25.0, 40.0)]
    assert all(0.0 < d <= 1.0 for d in dwfs)
    assert all(a > b for a, b in zip(dwfs, dwfs[1:]))
    alphas = [ms.debye_waller(10.0, ms.BulkBathParams(alpha=a, xi=XI))
              for a in (0.005, 0.01, 0.02)]
    assert all(a > b for a, b in zip(alphas, alphas[1:]))


def test_solve_alpha_round_trip():
    alpha = ms.solve_alpha_for_dwf(0.72, 4.7, XI)
    got = ms.debye_waller(4.7, ms.BulkBathParams(alpha=alpha, xi=XI))
    assert abs(got - 0.72) < 1e-6


def test_solve_alpha_edge_cases():
    assert ms.solve_alpha_for_dwf(1.0, 4.7, XI) == 0.0
    assert ms.solve_alpha_for_dwf(0.5, 4.7, XI) \
        > ms.solve_alpha_for_dwf(0.72, 4.7, XI)
    with pytest.raises(ValueError):
        ms.solve_alpha_for_dwf(1.2, 4.7, XI)
    with pytest.raises(ValueError):
        ms.solve_alpha_for_dwf(0.0, 4.7, XI)


# ---------------------------------------------------------------------------
# G(tau)

def test_phonon_correlation_g_limits():
    p0 = ms.BulkBathParams(alpha=0.0, xi=XI)
    g = ms.phonon_correlation_g(np.linspace(0.0, 5.0, 21), 10.0, p0)
    np.testing.assert_allclose(g.values, 1.0, atol=1e-14)

    alpha = ms.solve_alpha_for_dwf(0.72, 4.7, XI)
    p = ms.BulkBathParams(alpha=alpha, xi=XI)
    g = ms.phonon_correlation_g(np.array([0.0, 20.0]), 4.7, p)
    assert abs(g.values[0] - 1.0) < 1e-8
    assert abs(g.values[1] - 0.72) < 1e-6


# ---------------------------------------------------------------------------
# local-mode damping

def test_lv_damping_zero_scale():
    p = ms.LocalModeBathParams(scale=0.0, zeta=mev_to_angular(10.0))
    assert ms.lv_damping_rate(mev_to_angular(20.0), p) == 0.0


def test_lv_damping_argmax_at_three_zeta():
    zeta = mev_to_angular(10.0)
    p = ms.LocalModeBathParams(scale=0.01, zeta=zeta)
    w = np.linspace(0.01 * zeta, 10 * zeta, 400001)
    k = ms.j_lv(w, p)
    assert abs(w[np.argmax(k)] - 3.0 * zeta) < 1e-3 * zeta


def test_lv_damping_ratio_reference():
    # (21.55/36.31)^3 * exp(-(21.55-36.31)/10) at 40-digit precision
    p = ms.LocalModeBathParams(scale=0.02, zeta=mev_to_angular(10.0))
    ratio = ms.lv_damping_rate(mev_to_angular(21.55), p) \
        / ms.lv_damping_rate(mev_to_angular(36.31), p)
    assert abs(ratio - 0.9147064300803688) < 1e-12


# ---------------------------------------------------------------------------
# pure dephasing

def test_dephasing_zero_temperature_and_linearity():
    p = ms.DephasingParams(mu=1e-8, omega_c=mev_to_angular(3.0))
    assert ms.pure_dephasing_rate(0.0, p) == 0.0
    g1 = ms.pure_dephasing_rate(20.0, p)
    p2 = ms.DephasingParams(mu=2e-8, omega_c=mev_to_angular(3.0))
    assert abs(ms.pure_dephasing_rate(20.0, p2) - 2.0 * g1) < 1e-12 * g1


def test_dephasing_monotone_in_temperature():
    p = ms.DephasingParams(mu=1e-8, omega_c=mev_to_angular(3.0))
    rates = [ms.pure_dephasing_rate(t, p) for t in (4.7, 10.0, 20.0, 31.0, 40.0)]
    assert all(b > a for a, b in zip(rates, rates[1:]))
    assert all(r >= 0 for r in rates)


def test_angular_integral_small_argument_limit():
    value = bath.dephasing_angular_integral(0.0, mev_to_angular(3.0))
    assert abs(value - 32.0 / 5.0) < 1e-12


def test_angular_integral_matches_theta_quadrature():
    """Brute-force quadrature of int_0^pi sin(t) (1+cos t)^4
    exp(-2 w^2 (1+cos t)/wc^2) dt at sampled frequencies."""
    wc = mev_to_angular(3.0)
    nodes, weights = gauss_panels(np.linspace(0.0, np.pi, 65), order=16)
    for w in np.linspace(0.0, 4.0 * wc, 10):
        integrand = np.sin(nodes) * (1.0 + np.cos(nodes))**4 \
            * np.exp(-2.0 * w**2 * (1.0 + np.cos(nodes)) / wc**2)
        brute = float(integrand @ weights)
        closed = bath.dephasing_angular_integral(w, wc)
        assert abs(closed - brute) < 1e-8 * max(abs(brute), 1e-12)


# ---------------------------------------------------------------------------
# truncated-mode displacement average

def test_mode_displacement_expectation():
    assert ms.mode_displacement_expectation(0.0, 20.0, 5.0) == pytest.approx(1.0)
    # T -> 0 truncated value is cos(r); independent 2x2 exponential oracle
    import scipy.linalg as sla
    r = 6.98 / 21.55
    gen = r * np.array([[0.0, -1.0], [1.0, 0.0]])
    oracle = sla.expm(gen)[0, 0]
    got = ms.mode_displacement_expectation(6.98, 21.55, 0.0)
    assert abs(got - oracle) < 1e-12
    # decreasing in |r| near zero
    vals = [ms.mode_displacement_expectation(e, 20.0, 0.0)
            for e in (0.0, 1.0, 2.0, 4.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
