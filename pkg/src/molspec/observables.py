"""Physical outputs: emission spectra, intensity correlations, linewidths.

Emission spectrum
-----------------
The undriven generator leaves the optical-coherence sector (|g..><e..|
block) invariant, and within that sector every term acts on one mode
factor at a time, so the propagator diagonalizes as a product of 4x4
per-mode superoperators shifted by the scalar coherence decay
Gamma2 = Gamma1/2 + gamma_pd.  The first-order correlation

    g1_0(tau) = Tr[sigma_a^dag e^{L tau} (sigma_a integral rho(t) dt)]

is therefore an explicit sum of complex exponentials, and the sharp-peak
part of the spectrum (one-sided transform, kernel e^{-i w tau}) is
evaluated in closed form per eigencomponent.  The phonon sideband
multiplies g1_0 by the fast-decaying bath factor G(tau) - <B>^2 and is
transformed by Simpson-weighted quadrature on a uniform tau grid (a
chirp-Z transform when the frequency grid is uniform; the frequency grid
never depends on the time grid).  Red detuning is negative; vibrational
peaks appear at minus the mode energies.

A literal pipeline through the generic Liouvillian operations
(time_integrated_source -> regression_correlator -> quadrature transform)
is kept as method="quadrature" for cross-validation at friendly rates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import bath, model, qcore
from .constants import HBAR_MEV_PS, PS_INV_TO_MHZ, mev_to_angular
from .errors import NumericalError, QuadratureError
from .model import AssembledModel, ModelConfig
from .numerics import half_fourier, kron_apply

TAIL_REL = 1e-6            # integrand must decay below this before truncation
SIMPSON_TARGET = 1e-8      # transform self-convergence target
GAUSS_FWHM_TO_SIGMA = 2.3548
MAX_TAU_SAMPLES = 4_000_000


@dataclass(frozen=True)
class GridSpec:
    """Uniform detuning grid in meV."""

    min_mev: float
    max_mev: float
    step_mev: float

    def __post_init__(self):
        if self.step_mev <= 0 or self.max_mev <= self.min_mev:
            raise ValueError("grid needs max > min and step > 0")

    def to_array(self) -> np.ndarray:
        n = int(round((self.max_mev - self.min_mev) / self.step_mev)) + 1
        return self.min_mev + self.step_mev * np.arange(n)


@dataclass(frozen=True)
class SpectrumResult:
    """Emission spectrum components on a detuning grid (meV).

    s_total = s_zpl_lv + s_sb pointwise.  Areas are computed on internal
    peak-resolving grids, so the Debye-Waller identity
    area_zpl_lv / (area_zpl_lv + area_sb) = dwf can be validated even when
    the requested grid under-resolves the zero-phonon line.
    """

    detuning_mev: np.ndarray
    s_zpl_lv: np.ndarray
    s_sb: np.ndarray
    s_total: np.ndarray
    dwf: float
    mean_b: float
    gamma2: float                    # ps^-1
    area_zpl_lv: float
    area_sb: float
    peak_weights: tuple              # (center_mev, integrated weight) per line
    config: ModelConfig = field(repr=False)


@dataclass(frozen=True)
class CorrelationTrace:
    """Second-order correlation samples on a uniform delay grid (ns)."""

    tau_ns: np.ndarray
    values: np.ndarray
    normalized: bool = True


# ---------------------------------------------------------------------------
# per-mode eigenstructure of the invariant blocks

def _pair_flatten(mat: np.ndarray, n: int) -> np.ndarray:
    """m x m mode matrix -> flat vector grouping (row_i, col_i) per mode."""
    if n == 0:
        return mat.reshape(1).astype(complex)
    t = mat.reshape((2,) * (2 * n))
    perm = [ax for i in range(n) for ax in (i, n + i)]
    return t.transpose(perm).reshape(-1).astype(complex)


def _pair_unflatten(vec: np.ndarray, n: int) -> np.ndarray:
    if n == 0:
        return vec.reshape(1, 1)
    t = vec.reshape((2,) * (2 * n))
    perm = [2 * j for j in range(n)] + [2 * j + 1 for j in range(n)]
    return t.transpose(perm).reshape(2**n, 2**n)


_A = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
_N = _A.conj().T @ _A


def _pair_superop(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Superoperator of R -> left @ R @ right in the per-mode pair basis."""
    return np.kron(left, right.T)


def _mode_superop(delta: float, g_plus: float, g_minus: float) -> np.ndarray:
    """Generator piece of one damped mode acting on mode matrices."""
    eye = np.eye(2, dtype=complex)
    m = -1j * delta * (_pair_superop(_N, eye) - _pair_superop(eye, _N))
    for op, rate in ((_A.conj().T, g_plus), (_A, g_minus)):
        opd = op.conj().T
        m += rate * (_pair_superop(op, opd)
                     - 0.5 * _pair_superop(opd @ op, eye)
                     - 0.5 * _pair_superop(eye, opd @ op))
    return m


def _combine(per_mode: list[np.ndarray]) -> np.ndarray:
    out = np.zeros(1, dtype=complex)
    for lam in per_mode:
        out = (out[:, None] + lam[None, :]).ravel()
    return out


@dataclass(frozen=True)
class SpectralComponents:
    """g1_0(tau) = sum_k amps[k] exp(lambdas[k] tau).

    When the initial vibrational state is a per-mode product that each
    mode superoperator annihilates (the thermal default), the amplitude
    tensor factorizes and ``per_mode`` holds (lambda_i, amp_i) pairs so
    the correlator costs O(n_modes) per tau sample instead of O(4^n)."""

    lambdas: np.ndarray
    amps: np.ndarray
    gamma2: float = 0.0
    prefactor: complex = 0.0
    per_mode: tuple | None = None

    def correlator(self, tau: np.ndarray) -> np.ndarray:
        if self.per_mode is not None:
            out = np.full(len(tau), self.prefactor, dtype=complex)
            out *= np.exp(-self.gamma2 * tau)
            for lam_i, amp_i in self.per_mode:
                out *= np.exp(np.outer(tau, lam_i)) @ amp_i
            return out
        out = np.zeros(len(tau), dtype=complex)
        for start in range(0, len(self.lambdas), 64):
            lam = self.lambdas[start:start + 64]
            amp = self.amps[start:start + 64]
            out += np.exp(np.outer(tau, lam)) @ amp
        return out

    def transform(self, omegas: np.ndarray) -> np.ndarray:
        """Exact one-sided transform Re sum_k amps_k / (i w - lambda_k)."""
        out = np.zeros(len(omegas), dtype=float)
        for start in range(0, len(self.lambdas), 64):
            lam = self.lambdas[start:start + 64]
            amp = self.amps[start:start + 64]
            out += np.real(amp[None, :] / (1j * omegas[:, None] - lam[None, :])
                           ).sum(axis=1)
        return out


def _mode_displacement_product(ratios) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for r in ratios:
        out = np.kron(out, qcore.displacement_matrix(r))
    return out


def spectral_components(config: ModelConfig,
                        rates=None) -> SpectralComponents:
    """Eigencomponents of the first-order correlation of the undriven model."""
    if rates is None:
        rates = model.undriven_rates(config)
    n = len(config.modes)

    lams, vs, vinvs = [], [], []
    for i in range(n):
        m = _mode_superop(rates.deltas[i], rates.gamma_plus[i],
                          rates.gamma_minus[i])
        lam, v = np.linalg.eig(m)
        vinv = np.linalg.inv(v)
        resid = np.max(np.abs(m @ v - v * lam[None, :]))
        if resid > 1e-10 * max(1.0, np.max(np.abs(m))):
            raise NumericalError("mode superoperator eigendecomposition failed")
        lams.append(lam)
        vs.append(v)
        vinvs.append(vinv)

    lam_sum = _combine(lams)
    lambdas = lam_sum - rates.gamma2

    # The thermal mode state is the kernel of every mode superoperator, so
    # the excited-block time integral is rho_modes / Gamma1 and every
    # amplitude factorizes per mode.
    product_ok = (not config.initial_modes_ground) or config.temperature == 0.0
    if product_ok:
        prefactor = 1.0 / rates.gamma1
        per_mode = []
        for i in range(n):
            b_i = qcore.displacement_matrix(rates.ratios[i])
            occ = rates.occupations[i]
            p1 = occ / (2.0 * occ + 1.0)
            rho_i = np.diag([1.0 - p1, p1]).astype(complex)
            s_i = _pair_flatten(b_i @ rho_i, 1)
            w_i = _pair_flatten(b_i.conj(), 1)
            per_mode.append(((lams[i]), (vs[i].T @ w_i) * (vinvs[i] @ s_i)))
        amps = np.array([prefactor], dtype=complex)
        for _, amp_i in per_mode:
            amps = (amps[:, None] * amp_i[None, :]).ravel()
        return SpectralComponents(lambdas=lambdas, amps=amps,
                                  gamma2=rates.gamma2, prefactor=prefactor,
                                  per_mode=tuple(per_mode))

    # general path: excited-block integral via the per-mode eigenbasis
    b_mat = _mode_displacement_product(rates.ratios)
    q0 = _pair_flatten(model.initial_mode_matrix(config), n)
    coeff = kron_apply(vinvs, q0) if n else q0
    coeff = coeff / (rates.gamma1 - lam_sum)
    p_mat = _pair_unflatten(kron_apply(vs, coeff) if n else coeff, n)

    seed = _pair_flatten(b_mat @ p_mat, n)
    wvec = _pair_flatten(b_mat.conj(), n)
    amps = (kron_apply([v.T for v in vs], wvec) if n else wvec) \
        * (kron_apply(vinvs, seed) if n else seed)
    return SpectralComponents(lambdas=lambdas, amps=amps)


def _grouped_weights(comp: SpectralComponents) -> tuple:
    """Integrated weight pi * Re(amp) of each spectral line, grouped by
    line center (meV)."""
    centers = comp.lambdas.imag * HBAR_MEV_PS
    weights = np.pi * comp.amps.real
    order = np.argsort(centers)
    groups = []
    for idx in order:
        c, w = centers[idx], weights[idx]
        if groups and abs(c - groups[-1][0]) < 1e-9:
            groups[-1][1] += w
        else:
            groups.append([c, w])
    return tuple((float(c), float(w)) for c, w in groups
                 if abs(w) > 1e-14 * max(1e-300, np.max(np.abs(weights))))


def windowed_peak_area(comp: SpectralComponents, lo_mev: float,
                       hi_mev: float) -> float:
    """Exact integral of the sharp-peak transform over a detuning window.

    Each component Re[c / (i w - lambda)] integrates in closed form
    (complex logarithm), so the area needs no peak-resolving grid even
    though the zero-phonon line is many orders narrower than any
    practical plotting step.
    """
    lo, hi = mev_to_angular(lo_mev), mev_to_angular(hi_mev)
    g = -comp.lambdas.real
    b = comp.lambdas.imag
    term = -1j * comp.amps * (np.log(g + 1j * (hi - b))
                              - np.log(g + 1j * (lo - b)))
    return float(np.sum(term.real))


# ---------------------------------------------------------------------------
# sideband transform

def _sideband_tau_grid(config: ModelConfig, comp: SpectralComponents,
                       omega_grid: np.ndarray) -> np.ndarray:
    nu_thermal = 2.0 * np.pi * bath.KB_MEV_PER_K * config.temperature / HBAR_MEV_PS
    rate_max = (np.max(np.abs(omega_grid)) if len(omega_grid) else 1.0) \
        + (np.max(np.abs(comp.lambdas.imag)) if len(comp.lambdas) else 0.0) \
        + 3.0 * config.bulk_bath.xi + 3.0 * nu_thermal
    # bucket the rate so small parameter changes reuse one cached phi grid
    rate_max = 25.0 * np.ceil(rate_max / 25.0)
    dtau = (180.0 * SIMPSON_TARGET) ** 0.25 / rate_max
    tau_max = bath.phi_decay_window(config.temperature, config.bulk_bath,
                                    rel=1e-8)
    n = int(np.ceil(tau_max / dtau))
    n += (4 - n % 4) % 4                  # stride-2 subgrid stays Simpson-valid
    if n > MAX_TAU_SAMPLES:
        raise QuadratureError(
            f"sideband transform needs {n} tau samples (> {MAX_TAU_SAMPLES}); "
            "the bath correlation decays too slowly for this grid")
    return np.linspace(0.0, tau_max, n + 1)


def _sideband_on_grid(config: ModelConfig, comp: SpectralComponents,
                      omegas: np.ndarray, check: bool) -> np.ndarray:
    """Re int g1_0(tau) (G(tau) - <B>^2) e^{-i w tau} d tau on omegas (ps^-1)."""
    if config.bulk_bath.alpha == 0.0:
        return np.zeros(len(omegas))
    tau = _sideband_tau_grid(config, comp, omegas)
    g_fun = bath.phonon_correlation_g(tau, config.temperature, config.bulk_bath)
    b2 = bath.debye_waller(config.temperature, config.bulk_bath)
    h = comp.correlator(tau) * (g_fun.values - b2)
    h0 = abs(h[0])
    if h0 > 0 and np.max(np.abs(h[-max(4, len(h) // 256):])) > TAIL_REL * h0:
        raise QuadratureError(
            "sideband tau window too short: integrand has not decayed below "
            f"{TAIL_REL:g} of its initial value")
    dtau = tau[1] - tau[0]
    s = np.real(half_fourier(h, dtau, omegas))
    if check:
        s_coarse = np.real(half_fourier(h[::2], 2 * dtau, omegas))
        est = np.max(np.abs(s - s_coarse)) / 15.0
        if est > SIMPSON_TARGET * max(np.max(np.abs(s)), 1e-300):
            raise QuadratureError(
                "sideband transform failed grid-doubling self-convergence")
    return s


# ---------------------------------------------------------------------------
# spectrum pipelines

def emission_spectrum(config: ModelConfig, grid,
                      method: str = "eigen", check_quadrature: bool = True,
                      compute_areas: bool = True) -> SpectrumResult:
    """Emission spectrum split into sharp peaks and phonon sideband.

    ``grid`` is a GridSpec or an explicit detuning array (meV).
    method="eigen" (default) evaluates the sharp-peak transform in closed
    form from the eigencomponents of the invariant coherence block;
    method="quadrature" runs the literal pipeline through the generic
    Liouvillian operations and a truncated-window transform (intended for
    cross-validation at rates of order 1/ps).
    """
    if method == "eigen":
        return _spectrum_eigen(config, grid, check_quadrature, compute_areas)
    if method == "quadrature":
        return _spectrum_quadrature(config, grid)
    raise ValueError(f"unknown spectrum method {method!r}")


def _grid_array(grid) -> np.ndarray:
    if isinstance(grid, GridSpec):
        return grid.to_array()
    return np.asarray(grid, dtype=float)


def _spectrum_eigen(config: ModelConfig, grid,
                    check_quadrature: bool, compute_areas: bool) -> SpectrumResult:
    rates = model.undriven_rates(config)
    comp = spectral_components(config, rates)
    b2 = rates.mean_b**2

    detuning = _grid_array(grid)
    omegas = mev_to_angular(detuning)
    s_zpl = b2 * comp.transform(omegas)
    s_sb = _sideband_on_grid(config, comp, omegas, check_quadrature)

    area_zpl = area_sb = float("nan")
    if compute_areas:
        pad = 10.0 * HBAR_MEV_PS * config.bulk_bath.xi \
            + 10.0 * bath.KB_MEV_PER_K * config.temperature + 40.0
        centers = comp.lambdas.imag * HBAR_MEV_PS
        lo, hi = float(centers.min() - pad), float(centers.max() + pad)
        area_zpl = b2 * windowed_peak_area(comp, lo, hi)
        if config.bulk_bath.alpha > 0.0:
            step = min(0.05, HBAR_MEV_PS * config.bulk_bath.xi / 50.0)
            wide = np.linspace(lo, hi, int((hi - lo) / step) + 2)
            sb_wide = _sideband_on_grid(config, comp, mev_to_angular(wide),
                                        check=False)
            area_sb = float(np.trapezoid(sb_wide, mev_to_angular(wide)))
        else:
            area_sb = 0.0

    result = SpectrumResult(
        detuning_mev=detuning, s_zpl_lv=s_zpl, s_sb=s_sb,
        s_total=s_zpl + s_sb, dwf=b2, mean_b=rates.mean_b,
        gamma2=rates.gamma2, area_zpl_lv=area_zpl, area_sb=area_sb,
        peak_weights=_grouped_weights(comp), config=config)
    if config.instrument_fwhm_mev:
        result = _convolve_spectrum(result, config.instrument_fwhm_mev)
    return result


def _spectrum_quadrature(config: ModelConfig, grid) -> SpectrumResult:
    assembled = model.assemble_undriven(config)
    rates = assembled.rates
    b2 = rates.mean_b**2
    rho0 = model.initial_emission_state(config)
    chi = qcore.time_integrated_source(assembled.liouvillian, rho0,
                                       assembled.sigma_a)

    detuning = _grid_array(grid)
    omegas = mev_to_angular(detuning)

    # window from the slowest decay; extend until the tail criterion holds
    slow = [rates.gamma2] + [k for k in rates.kappas if k > 0]
    window = 12.0 / min(slow)
    rate_max = np.max(np.abs(omegas)) + max([0.0] + list(rates.deltas)) \
        + 3.0 * config.bulk_bath.xi + 1.0
    dtau = (180.0 * SIMPSON_TARGET) ** 0.25 / rate_max
    g1 = None
    for _ in range(3):
        n = int(np.ceil(window / dtau))
        n += n % 2
        if n > MAX_TAU_SAMPLES:
            raise QuadratureError("quadrature spectrum needs too many tau "
                                  "samples; use the eigen method")
        tau = np.linspace(0.0, window, n + 1)
        g1 = qcore.regression_correlator(assembled.liouvillian,
                                         assembled.sigma_a.dag(), chi, tau)
        if abs(g1.values[-1]) <= TAIL_REL * abs(g1.values[0]):
            break
        window *= 1.5
    else:
        raise QuadratureError("tau window too short: |g1(tau_max)| stayed "
                              f"above {TAIL_REL:g} |g1(0)| after extensions")

    dtau_actual = g1.grid[1] - g1.grid[0]
    s_zpl = b2 * np.real(half_fourier(g1.values, dtau_actual, omegas))
    if config.bulk_bath.alpha > 0.0:
        g_fun = bath.phonon_correlation_g(g1.grid, config.temperature,
                                          config.bulk_bath)
        h = g1.values * (g_fun.values - b2)
        s_sb = np.real(half_fourier(h, dtau_actual, omegas))
    else:
        s_sb = np.zeros(len(omegas))

    area_zpl = float(np.trapezoid(s_zpl, omegas))
    area_sb = float(np.trapezoid(s_sb, omegas))
    result = SpectrumResult(
        detuning_mev=detuning, s_zpl_lv=s_zpl, s_sb=s_sb,
        s_total=s_zpl + s_sb, dwf=b2, mean_b=rates.mean_b,
        gamma2=rates.gamma2, area_zpl_lv=area_zpl, area_sb=area_sb,
        peak_weights=(), config=config)
    if config.instrument_fwhm_mev:
        result = _convolve_spectrum(result, config.instrument_fwhm_mev)
    return result


def _convolve_spectrum(result: SpectrumResult, fwhm_mev: float) -> SpectrumResult:
    step = result.detuning_mev[1] - result.detuning_mev[0]
    s_zpl = _gaussian_convolve(result.s_zpl_lv, step, fwhm_mev)
    s_sb = _gaussian_convolve(result.s_sb, step, fwhm_mev)
    import dataclasses
    return dataclasses.replace(result, s_zpl_lv=s_zpl, s_sb=s_sb,
                               s_total=s_zpl + s_sb)


def peak_table(result: SpectrumResult, min_height_frac: float = 1e-8) -> list:
    """Local maxima of the total spectrum: [(detuning_meV, height)],
    tallest first."""
    v = result.s_total
    floor = min_height_frac * np.max(v)
    idx = np.nonzero((v[1:-1] >= v[:-2]) & (v[1:-1] > v[2:])
                     & (v[1:-1] > floor))[0] + 1
    peaks = [(float(result.detuning_mev[i]), float(v[i])) for i in idx]
    return sorted(peaks, key=lambda p: -p[1])


def zpl_fwhm_mev(config: ModelConfig) -> float:
    """Numeric full width at half maximum of the zero-phonon line,
    measured from the sharp-peak spectrum on a self-scaled fine grid."""
    comp = spectral_components(config)
    rates = model.undriven_rates(config)
    half = 30.0 * HBAR_MEV_PS * rates.gamma2
    grid = np.linspace(-half, half, 2001)
    vals = comp.transform(mev_to_angular(grid))
    return fwhm_of_profile(grid, vals)


def fwhm_of_profile(x: np.ndarray, y: np.ndarray) -> float:
    """FWHM of a single-peaked sampled profile by half-crossing interpolation."""
    k = int(np.argmax(y))
    half = y[k] / 2.0
    left = np.nonzero(y[:k] < half)[0]
    right = np.nonzero(y[k:] < half)[0]
    if len(left) == 0 or len(right) == 0:
        raise ValueError("profile does not fall below half maximum in window")
    i = left[-1]
    j = k + right[0]
    xl = np.interp(half, [y[i], y[i + 1]], [x[i], x[i + 1]])
    xr = np.interp(half, [y[j], y[j - 1]], [x[j], x[j - 1]])
    return float(xr - xl)


# ---------------------------------------------------------------------------
# second-order correlations

def g2_resonant(config: ModelConfig, tau_ns) -> CorrelationTrace:
    """Normalized intensity correlation of the resonantly driven emitter.

    g2(tau) = Tr[sigma^dag sigma e^{L tau}(sigma_a rho_ss sigma_a^dag)]
              / Tr[sigma^dag sigma rho_ss]^2

    with the driven generator; scalar phonon-bath factors cancel in the
    normalized ratio beyond the ps phonon relaxation, which the detector
    cannot resolve.
    """
    if config.drive is None:
        raise ValueError("g2_resonant needs a drive section in the config")
    tau_ns = np.asarray(tau_ns, dtype=float)
    assembled = model.assemble_driven(config)
    rho_ss = qcore.steady_state(assembled.liouvillian)
    sa = assembled.sigma_a
    seed = qcore.Operator(assembled.space,
                          sa.data @ rho_ss.data @ sa.data.conj().T)
    proj = qcore.sigma_dag_sigma(assembled.space)
    denom = float(np.real(np.trace(proj.data @ rho_ss.data)))
    if denom <= 0:
        raise NumericalError("steady state carries no excited population")
    corr = qcore.regression_correlator(assembled.liouvillian, proj, seed,
                                       tau_ns * 1e3)
    values = np.real(corr.values) / denom**2
    return CorrelationTrace(tau_ns=tau_ns, values=values, normalized=True)


def _gaussian_convolve(values: np.ndarray, step: float, fwhm: float) -> np.ndarray:
    """Discrete convolution with a unit-area Gaussian kernel, edge padding."""
    if fwhm < 0:
        raise ValueError("fwhm must be >= 0")
    if fwhm == 0.0:
        return values.copy()
    sigma = fwhm / GAUSS_FWHM_TO_SIGMA
    half = int(np.ceil(4.0 * sigma / step))
    if 2 * half + 1 > len(values) // 2:
        raise ValueError("convolution kernel wider than half the trace window")
    x = np.arange(-half, half + 1) * step
    kernel = np.exp(-0.5 * (x / sigma) ** 2)
    kernel /= kernel.sum()
    padded = np.pad(values, half, mode="edge")
    return np.convolve(padded, kernel, mode="valid")


def convolve_jitter(trace: CorrelationTrace, fwhm_ps: float) -> CorrelationTrace:
    """Detector-jitter smoothing: Gaussian of the given FWHM (ps)."""
    tau = trace.tau_ns
    if len(tau) >= 2:
        steps = np.diff(tau)
        if np.max(np.abs(steps - steps[0])) > 1e-9 * steps[0]:
            raise ValueError("jitter convolution needs a uniform tau grid")
    values = _gaussian_convolve(trace.values, (tau[1] - tau[0]) * 1e3, fwhm_ps)
    return CorrelationTrace(tau_ns=tau, values=values,
                            normalized=trace.normalized)


def gamma2(temperature: float, config: ModelConfig) -> float:
    """Coherence decay Gamma2(T) = Gamma1/2 + gamma_pd(T), ps^-1."""
    return config.gamma1 / 2.0 + bath.pure_dephasing_rate(temperature,
                                                          config.dephasing)


def power_broadened_linewidth(gamma2_ps: float, saturation: float) -> float:
    """Lorentzian FWHM (MHz) of the driven line: (Gamma2/pi) sqrt(1+S)."""
    if saturation < 0:
        raise ValueError("saturation parameter must be >= 0")
    return gamma2_ps / np.pi * np.sqrt(1.0 + saturation) * PS_INV_TO_MHZ


def g2_nonresonant_model(tau, visibility: float, saturation: float,
                         gamma1: float):
    """Closed-form antibunching dip 1 - V exp(-(1+S) Gamma1 |tau|).

    tau and gamma1 in mutually consistent units (ns and ns^-1 typical).
    """
    tau = np.asarray(tau, dtype=float)
    out = 1.0 - visibility * np.exp(-(1.0 + saturation) * gamma1 * np.abs(tau))
    return out if out.ndim else float(out)


def estimate_oscillation_frequency(trace: CorrelationTrace) -> float:
    """Dominant oscillation frequency (angular, ps^-1) of a correlation trace.

    Fits 1 + e^{-b tau}(A cos(mu tau) + C sin(mu tau)) with an FFT-seeded
    least-squares; suited to underdamped Rabi oscillations.
    """
    tau_ps = trace.tau_ns * 1e3
    y = trace.values - 1.0
    dt = tau_ps[1] - tau_ps[0]
    spec = np.abs(np.fft.rfft(y * np.hanning(len(y)), n=8 * len(y)))
    freqs = 2.0 * np.pi * np.fft.rfftfreq(8 * len(y), d=dt)
    k = int(np.argmax(spec[1:])) + 1
    mu0 = freqs[k]
    b0 = max(1.0 / tau_ps[-1], 1e-6)

    def residual(p):
        a, c, b, mu = p
        return np.exp(-b * tau_ps) * (a * np.cos(mu * tau_ps)
                                      + c * np.sin(mu * tau_ps)) - y

    fit = scipy.optimize.least_squares(
        residual, x0=[y[0], 0.0, b0, mu0],
        bounds=([-np.inf, -np.inf, 0.0, 0.25 * mu0],
                [np.inf, np.inf, np.inf, 4.0 * mu0]),
        xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if not fit.success:
        raise NumericalError("oscillation-frequency fit did not converge")
    return float(fit.x[3])
