import dataclasses

import numpy as np
import pytest

import molspec as ms
from molspec import model, observables, qcore
from molspec.constants import HBAR_MEV_PS, mev_to_angular
from molspec.errors import QuadratureError

from conftest import make_config


def test_grid_spec():
    g = ms.GridSpec(-1.0, 1.0, 0.5)
    np.testing.assert_allclose(g.to_array(), [-1.0, -0.5, 0.0, 0.5, 1.0])
    with pytest.raises(ValueError):
        ms.GridSpec(1.0, -1.0, 0.5)
    with pytest.raises(ValueError):
        ms.GridSpec(-1.0, 1.0, 0.0)


# ---------------------------------------------------------------------------
# spectrum: limits and conventions

def test_bare_tls_lorentzian_width():
    cfg = make_config()
    width = ms.zpl_fwhm_mev(cfg)
    expected = 2.0 * HBAR_MEV_PS * cfg.gamma1 / 2.0
    assert abs(width - expected) / expected < 0.01


def test_uncoupled_bath_gives_no_sideband():
    cfg = make_config(modes=(ms.Mode(8.0, 2.0),), lv_scale=0.05)
    res = ms.emission_spectrum(cfg, ms.GridSpec(-15.0, 5.0, 0.05))
    assert np.max(np.abs(res.s_sb)) == 0.0
    assert res.area_sb == 0.0
    assert res.dwf == 1.0
    np.testing.assert_array_equal(res.s_total, res.s_zpl_lv)


def test_single_mode_branching_matches_franck_condon_oracle():
    """Integrated line weights at T = 0 against an independent sum of
    truncated displacement matrix elements: the photon leaves the mode in
    |n> with weight |<n| D(r) |0>|^2."""
    import scipy.linalg as sla
    r = 0.3
    cfg = make_config(temperature=0.0, modes=(ms.Mode(8.0, 8.0 * r),),
                      lv_scale=0.05)
    comp = observables.spectral_components(cfg)
    weights = dict(observables._grouped_weights(comp))
    d_oracle = sla.expm(r * np.array([[0.0, -1.0], [1.0, 0.0]]))
    w_zpl_oracle = d_oracle[0, 0] ** 2
    w_lv_oracle = d_oracle[1, 0] ** 2
    got_ratio = weights[-8.0] / weights[0.0]
    assert got_ratio == pytest.approx(w_lv_oracle / w_zpl_oracle, rel=1e-10)
    assert got_ratio == pytest.approx(np.tan(r) ** 2, rel=1e-10)


def test_eigen_matches_quadrature_pipeline(fast_config):
    """The closed-form transform agrees with the literal truncated-window
    pipeline to the pipeline's own tail criterion (1e-6 relative)."""
    grid = ms.GridSpec(-20.0, 10.0, 0.05)
    res_e = ms.emission_spectrum(fast_config, grid, method="eigen")
    res_q = ms.emission_spectrum(fast_config, grid, method="quadrature")
    scale_z = np.max(np.abs(res_e.s_zpl_lv))
    scale_s = np.max(np.abs(res_e.s_sb))
    assert np.max(np.abs(res_e.s_zpl_lv - res_q.s_zpl_lv)) < 1e-6 * scale_z
    assert np.max(np.abs(res_e.s_sb - res_q.s_sb)) < 1e-6 * scale_s


def test_quadrature_method_rejects_slow_rates():
    """Physical ns-scale decay needs ~1e8 tau samples on a single window;
    the literal pipeline refuses rather than silently truncating."""
    with pytest.raises(QuadratureError):
        ms.emission_spectrum(make_config(alpha=0.001),
                             ms.GridSpec(-1.0, 1.0, 0.01),
                             method="quadrature")


def test_red_sideband_and_lv_sign_convention(alpha_dwf72):
    """Emission convention: vibrational peaks and the low-temperature
    sideband sit at negative detuning."""
    cfg = make_config(temperature=2.0, modes=(ms.Mode(8.0, 2.4),),
                      alpha=alpha_dwf72, lv_scale=0.05)
    res = ms.emission_spectrum(cfg, ms.GridSpec(-20.0, 10.0, 0.02))
    peaks = ms.peak_table(res)
    assert any(abs(c + 8.0) <= 0.021 for c, _ in peaks[:3])
    d = res.detuning_mev
    blue = np.trapezoid(res.s_sb[d > 1.0], d[d > 1.0])
    total = np.trapezoid(res.s_sb, d)
    assert blue < 1e-3 * total


def test_positivity_floor(molecule_config):
    res = ms.emission_spectrum(molecule_config, ms.GridSpec(-60.0, 20.0, 0.1),
                               check_quadrature=False)
    floor = -1e-9 * np.max(res.s_total)
    assert np.min(res.s_zpl_lv) > floor
    assert np.min(res.s_sb) > floor
    np.testing.assert_array_equal(res.s_total, res.s_zpl_lv + res.s_sb)


@pytest.mark.parametrize("alpha_mult, xi_mev, temp", [
    (1.0, 4.0, 4.7), (0.5, 4.0, 20.0), (1.5, 3.0, 31.0)])
def test_debye_waller_area_identity(alpha_dwf72, alpha_mult, xi_mev, temp):
    cfg = make_config(temperature=temp, modes=(ms.Mode(10.0, 2.5),),
                      alpha=alpha_dwf72 * alpha_mult, xi_mev=xi_mev,
                      lv_scale=0.03)
    res = ms.emission_spectrum(cfg, ms.GridSpec(-25.0, 10.0, 0.1),
                               check_quadrature=False)
    ratio = res.area_zpl_lv / (res.area_zpl_lv + res.area_sb)
    assert abs(ratio - res.dwf) < 0.02


def test_temperature_trends(molecule_config):
    fractions, widths = [], []
    for temp in (5.0, 20.0, 40.0):
        cfg = molecule_config.with_temperature(temp)
        res = ms.emission_spectrum(cfg, ms.GridSpec(-45.0, 10.0, 0.2),
                                   check_quadrature=False)
        fractions.append(res.area_sb / (res.area_zpl_lv + res.area_sb))
        widths.append(ms.zpl_fwhm_mev(cfg))
    assert fractions[0] < fractions[1] < fractions[2]
    assert widths[0] < widths[1] < widths[2]


def test_spectrum_deterministic(fast_config):
    grid = ms.GridSpec(-15.0, 5.0, 0.05)
    a = ms.emission_spectrum(fast_config, grid)
    b = ms.emission_spectrum(fast_config, grid)
    np.testing.assert_array_equal(a.s_total, b.s_total)
    np.testing.assert_array_equal(a.s_sb, b.s_sb)
    assert a.area_zpl_lv == b.area_zpl_lv


def test_instrument_response_config():
    cfg = make_config(modes=(ms.Mode(8.0, 2.0),),
                      lv_scale=0.05, instrument_fwhm_mev=0.5)
    res = ms.emission_spectrum(cfg, ms.GridSpec(-15.0, 5.0, 0.02))
    bare = ms.emission_spectrum(
        dataclasses.replace(cfg, instrument_fwhm_mev=None),
        ms.GridSpec(-15.0, 5.0, 0.02))
    assert np.max(res.s_total) < np.max(bare.s_total)
    np.testing.assert_allclose(res.s_total, res.s_zpl_lv + res.s_sb,
                               atol=1e-12 * np.max(res.s_total))


# ---------------------------------------------------------------------------
# g2

def test_g2_matches_resonance_fluorescence_analytics():
    gamma1 = 0.231e-3
    omega = mev_to_angular(0.002)
    cfg = make_config(drive=ms.DriveParams(rabi_mev=0.002))
    tau_ns = np.linspace(0.0, 40.0, 1601)
    trace = ms.g2_resonant(cfg, tau_ns)
    assert trace.values[0] == pytest.approx(0.0, abs=1e-10)
    assert abs(trace.values[-1] - 1.0) < 0.01
    tau_ps = tau_ns * 1e3
    mu = np.sqrt(omega**2 - (gamma1 / 4.0) ** 2)
    analytic = 1.0 - np.exp(-0.75 * gamma1 * tau_ps) * (
        np.cos(mu * tau_ps) + (0.75 * gamma1 / mu) * np.sin(mu * tau_ps))
    assert np.max(np.abs(trace.values - analytic)) < 1e-4


def test_g2_oscillation_frequency_equals_rabi():
    cfg = make_config(drive=ms.DriveParams(rabi_mev=0.002))
    trace = ms.g2_resonant(cfg, np.linspace(0.0, 40.0, 2001))
    freq = ms.estimate_oscillation_frequency(trace)
    omega = mev_to_angular(0.002)
    assert abs(freq - omega) / omega < 0.02


def test_g2_requires_drive():
    with pytest.raises(ValueError):
        ms.g2_resonant(make_config(), np.linspace(0.0, 10.0, 64))


# ---------------------------------------------------------------------------
# jitter convolution

def _dip_trace():
    tau = np.linspace(-10.0, 10.0, 801)
    values = 1.0 - np.exp(-np.abs(tau) / 0.8)
    return ms.CorrelationTrace(tau_ns=tau, values=values)


def test_jitter_zero_is_identity():
    tr = _dip_trace()
    out = ms.convolve_jitter(tr, 0.0)
    np.testing.assert_array_equal(out.values, tr.values)


def test_jitter_smooths_the_dip():
    tr = _dip_trace()
    out = ms.convolve_jitter(tr, 400.0)
    k = len(tr.tau_ns) // 2
    assert out.values[k] > tr.values[k]
    assert abs(out.values[0] - 1.0) < 0.02


def test_jitter_kernel_preserves_mean_on_constant_input():
    tau = np.linspace(0.0, 10.0, 501)
    tr = ms.CorrelationTrace(tau_ns=tau, values=np.full(len(tau), 0.7))
    out = ms.convolve_jitter(tr, 500.0)
    assert abs(np.mean(out.values) - 0.7) < 1e-10


def test_jitter_kernel_width_guard():
    tau = np.linspace(0.0, 1.0, 51)
    tr = ms.CorrelationTrace(tau_ns=tau, values=np.ones(51))
    with pytest.raises(ValueError):
        ms.convolve_jitter(tr, 5000.0)


# ---------------------------------------------------------------------------
# linewidth physics

def test_gamma2_composition():
    cfg = make_config()                      # mu = 0
    assert ms.gamma2(31.0, cfg) == pytest.approx(cfg.gamma1 / 2.0)
    cfg_pd = make_config(mu=2.5e-7)
    rates = [ms.gamma2(t, cfg_pd) for t in (4.7, 10.0, 20.0, 31.0, 40.0)]
    assert all(b > a for a, b in zip(rates, rates[1:]))


def test_power_broadened_linewidth_values():
    gamma2 = 0.231e-3 / 2.0
    assert ms.power_broadened_linewidth(gamma2, 0.0) \
        == pytest.approx(36.7648, rel=1e-4)
    assert ms.power_broadened_linewidth(gamma2, 3.0) \
        == pytest.approx(2.0 * 36.7648, rel=1e-4)
    s = np.array([0.0, 1.0, 2.0, 5.0])
    widths = np.array([ms.power_broadened_linewidth(gamma2, x) for x in s])
    coeffs = np.polyfit(s, widths**2, 1)
    assert coeffs[1] == pytest.approx((gamma2 / np.pi * 1e6) ** 2, rel=1e-10)
    with pytest.raises(ValueError):
        ms.power_broadened_linewidth(gamma2, -0.5)


def test_nonresonant_closed_form():
    assert ms.g2_nonresonant_model(0.0, 0.9, 0.5, 0.231) \
        == pytest.approx(0.1)
    assert ms.g2_nonresonant_model(1e6, 0.9, 0.5, 0.231) \
        == pytest.approx(1.0)
    tau = 1.0 / 0.231
    assert ms.g2_nonresonant_model(tau, 1.0, 0.0, 0.231) \
        == pytest.approx(1.0 - np.exp(-1.0), rel=1e-12)


def test_oscillation_frequency_estimator_on_synthetic():
    tau_ns = np.linspace(0.0, 30.0, 1501)
    tau_ps = tau_ns * 1e3
    mu = 0.004
    y = 1.0 - np.exp(-1.5e-4 * tau_ps) * np.cos(mu * tau_ps)
    tr = ms.CorrelationTrace(tau_ns=tau_ns, values=y)
    got = ms.estimate_oscillation_frequency(tr)
    assert got == pytest.approx(mu, rel=1e-6)
