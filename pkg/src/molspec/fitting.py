"""Experimental-data ingestion and model-parameter fitting.

Spectrum fits minimize squared residuals in log intensity (spectra span
decades) with a configurable floor, using derivative-free simplex descent
with a deterministic restart policy.  Resonant line-scan series yield the
coherence decay by extrapolating squared linewidths to zero power with a
weighted linear regression.  Second-order correlation traces are fitted
either with the closed-form non-resonant dip or against the full driven
model with the Rabi energy (and optionally detector jitter) free.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import observables
from .constants import PS_INV_TO_MHZ, wavelength_nm_to_detuning_mev
from .errors import DataError
from .model import Mode, ModelConfig
from .observables import CorrelationTrace

SPECTRUM_PARAM_NAMES = ("alpha", "xi", "lv_scale", "zeta", "mu",
                        "amplitude", "offset")
LOG_FLOOR = 1e-4
MIN_SPECTRUM_POINTS = 50


@dataclass(frozen=True)
class SpectrumData:
    """Measured emission spectrum on a detuning axis (meV), ascending."""

    detuning_mev: np.ndarray
    intensity: np.ndarray
    peak_normalized: bool = False
    temperature: float | None = None

    def __post_init__(self):
        if len(self.detuning_mev) < MIN_SPECTRUM_POINTS:
            raise DataError(
                f"spectrum needs at least {MIN_SPECTRUM_POINTS} points, "
                f"got {len(self.detuning_mev)}")
        if np.any(self.intensity < 0):
            raise DataError("spectrum intensities must be non-negative")
        if np.any(np.diff(self.detuning_mev) <= 0):
            raise DataError("spectrum axis must be strictly increasing")

    def normalized(self) -> "SpectrumData":
        peak = float(np.max(self.intensity))
        if peak <= 0:
            raise DataError("spectrum has no positive intensity")
        return dataclasses.replace(self, intensity=self.intensity / peak,
                                   peak_normalized=True)


@dataclass(frozen=True)
class LineScanSeries:
    """Power-broadening series: linewidth (MHz) per excitation power."""

    power: np.ndarray
    linewidth_mhz: np.ndarray
    sigma_mhz: np.ndarray

    def __post_init__(self):
        if len(self.power) < 2:
            raise DataError("line-scan series needs at least two power levels")
        if not (len(self.power) == len(self.linewidth_mhz) == len(self.sigma_mhz)):
            raise DataError("line-scan columns have mismatched lengths")
        if np.any(self.linewidth_mhz <= 0):
            raise DataError("linewidths must be positive")


@dataclass(frozen=True)
class FitResult:
    """Named parameter estimates with 1-sigma uncertainties."""

    parameters: dict                      # name -> (value, sigma)
    residual_norm: float
    n_evaluations: int
    converged: bool
    config: ModelConfig | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "parameters": {k: {"value": v, "sigma": s}
                           for k, (v, s) in self.parameters.items()},
            "residual_norm": self.residual_norm,
            "n_evaluations": self.n_evaluations,
            "converged": self.converged,
        }


# ---------------------------------------------------------------------------
# CSV ingestion

def _read_rows(path_or_stream):
    if hasattr(path_or_stream, "read"):
        text = path_or_stream.read()
    else:
        with open(path_or_stream, "r", encoding="utf-8") as fh:
            text = fh.read()
    return text.splitlines()


def _parse_two_columns(lines, context: str):
    """Numeric rows plus optional single header; malformed rows are
    reported with their 1-based line numbers."""
    header = None
    rows = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        try:
            rows.append((lineno, [float(p) for p in parts]))
        except ValueError:
            if header is None and not rows:
                header = parts
                continue
            raise DataError(f"{context}: malformed row at line {lineno}: {raw!r}")
    return header, rows


def load_spectrum_csv(path_or_stream, axis_unit: str | None = None,
                      zpl_wavelength_nm: float | None = None,
                      temperature: float | None = None) -> SpectrumData:
    """Read a two-column spectrum file (axis, intensity).

    The axis unit comes from the header (column named ``wavelength_nm`` or
    ``detuning_meV``) or from ``axis_unit``.  Wavelengths are converted to
    detuning via hc (1/lambda - 1/lambda_ZPL), which needs
    ``zpl_wavelength_nm``; the result is sorted to ascending detuning.
    """
    header, rows = _parse_two_columns(_read_rows(path_or_stream), "spectrum")
    unit = axis_unit
    if header is not None:
        name = header[0].lower()
        if "wavelength" in name:
            unit = "wavelength_nm"
        elif "detuning" in name:
            unit = "detuning_meV"
    if unit not in ("wavelength_nm", "detuning_meV"):
        raise DataError("spectrum axis unit undeclared: pass axis_unit or use "
                        "a header column wavelength_nm / detuning_meV")
    for lineno, values in rows:
        if len(values) != 2:
            raise DataError(f"spectrum: expected 2 columns at line {lineno}, "
                            f"got {len(values)}")
    axis = np.array([v[0] for _, v in rows])
    intensity = np.array([v[1] for _, v in rows])
    if unit == "wavelength_nm":
        if zpl_wavelength_nm is None:
            raise DataError("wavelength axis needs zpl_wavelength_nm")
        axis = wavelength_nm_to_detuning_mev(axis, zpl_wavelength_nm)
    diffs = np.diff(axis)
    if np.all(diffs < 0):
        axis, intensity = axis[::-1], intensity[::-1]
    elif not np.all(diffs > 0):
        raise DataError("spectrum axis is not strictly monotone")
    return SpectrumData(detuning_mev=axis, intensity=intensity,
                        temperature=temperature)


def load_linescan_csv(path_or_stream) -> LineScanSeries:
    """Read power, linewidth_MHz and optional uncertainty_MHz columns."""
    _, rows = _parse_two_columns(_read_rows(path_or_stream), "line scan")
    if len(rows) < 3:
        raise DataError("line-scan file needs at least 3 power levels")
    power, width, sigma = [], [], []
    for lineno, values in rows:
        if len(values) not in (2, 3):
            raise DataError(f"line scan: expected 2 or 3 columns at line "
                            f"{lineno}, got {len(values)}")
        power.append(values[0])
        width.append(values[1])
        sigma.append(values[2] if len(values) == 3 else 1.0)
    return LineScanSeries(power=np.array(power),
                          linewidth_mhz=np.array(width),
                          sigma_mhz=np.array(sigma))


def load_g2_csv(path_or_stream) -> CorrelationTrace:
    """Read tau_ns, g2 columns into a correlation trace."""
    _, rows = _parse_two_columns(_read_rows(path_or_stream), "g2 trace")
    if len(rows) < 8:
        raise DataError("g2 file needs at least 8 samples")
    for lineno, values in rows:
        if len(values) < 2:
            raise DataError(f"g2 trace: expected 2 columns at line {lineno}")
    tau = np.array([v[0] for _, v in rows])
    g2 = np.array([v[1] for _, v in rows])
    order = np.argsort(tau)
    return CorrelationTrace(tau_ns=tau[order], values=g2[order],
                            normalized=True)


# ---------------------------------------------------------------------------
# spectrum fit

def _spectrum_param_names(config: ModelConfig):
    names = []
    for i in range(1, len(config.modes) + 1):
        names += [f"delta_{i}", f"eta_{i}"]
    return names + list(SPECTRUM_PARAM_NAMES)


def _get_spectrum_param(config: ModelConfig, name: str, extras: dict) -> float:
    from .constants import HBAR_MEV_PS
    if name.startswith("delta_"):
        return config.modes[int(name.split("_")[1]) - 1].delta_mev
    if name.startswith("eta_"):
        return config.modes[int(name.split("_")[1]) - 1].eta_mev
    if name == "alpha":
        return config.bulk_bath.alpha
    if name == "xi":
        return config.bulk_bath.xi * HBAR_MEV_PS
    if name == "lv_scale":
        return config.lv_bath.scale
    if name == "zeta":
        return config.lv_bath.zeta * HBAR_MEV_PS
    if name == "mu":
        return config.dephasing.mu
    if name in ("amplitude", "offset"):
        return extras[name]
    raise ValueError(f"unknown spectrum fit parameter {name!r}")


def _apply_spectrum_params(config: ModelConfig, names, values) -> tuple:
    """New (config, extras) with the named parameters replaced."""
    from .constants import mev_to_angular
    modes = list(config.modes)
    bulk = config.bulk_bath
    lv = config.lv_bath
    deph = config.dephasing
    extras = {"amplitude": 1.0, "offset": 0.0}
    for name, value in zip(names, values):
        if name.startswith("delta_"):
            i = int(name.split("_")[1]) - 1
            modes[i] = Mode(delta_mev=value, eta_mev=modes[i].eta_mev)
        elif name.startswith("eta_"):
            i = int(name.split("_")[1]) - 1
            modes[i] = Mode(delta_mev=modes[i].delta_mev, eta_mev=value)
        elif name == "alpha":
            bulk = dataclasses.replace(bulk, alpha=value)
        elif name == "xi":
            bulk = dataclasses.replace(bulk, xi=mev_to_angular(value),
                                       omega_max=0.0)
        elif name == "lv_scale":
            lv = dataclasses.replace(lv, scale=value)
        elif name == "zeta":
            lv = dataclasses.replace(lv, zeta=mev_to_angular(value))
        elif name == "mu":
            deph = dataclasses.replace(deph, mu=value)
        elif name in extras:
            extras[name] = value
        else:
            raise ValueError(f"unknown spectrum fit parameter {name!r}")
    config = dataclasses.replace(config, modes=tuple(modes), bulk_bath=bulk,
                                 lv_bath=lv, dephasing=deph)
    return config, extras


_DEFAULT_BOUNDS = {
    "delta": (0.05, 400.0), "eta": (0.0, 100.0), "alpha": (0.0, 10.0),
    "xi": (0.05, 100.0), "lv_scale": (0.0, 10.0), "zeta": (0.05, 400.0),
    "mu": (0.0, 1.0), "amplitude": (1e-6, 1e6), "offset": (0.0, 1e6),
}

# initial simplex displacement per parameter kind: energies move on the
# linewidth scale (meV), dimensionless strengths relatively
_SIMPLEX_STEPS = {
    "delta": 0.1, "eta": 0.1, "xi": 0.2, "zeta": 0.5,
    "alpha": 0.1, "lv_scale": 0.1, "mu": 0.1,
    "amplitude": 0.05, "offset": 0.01,
}


def _simplex_step(name: str, value: float) -> float:
    stem = name.split("_")[0] if name[-1].isdigit() else name
    step = _SIMPLEX_STEPS[stem]
    if stem in ("alpha", "lv_scale", "mu", "amplitude"):
        return step * max(abs(value), 1e-8)
    return step


def _initial_simplex(x0: np.ndarray, names, shrink: float) -> np.ndarray:
    simplex = np.tile(x0, (len(x0) + 1, 1))
    for i, name in enumerate(names):
        simplex[i + 1, i] += shrink * _simplex_step(name, x0[i])
    return simplex


def _bound_for(name: str, bounds: dict | None):
    if bounds and name in bounds:
        return bounds[name]
    return _DEFAULT_BOUNDS[name.split("_")[0] if name[-1].isdigit() else name]


def _log_residuals(model_vals, data_vals, floor):
    m = np.log10(np.maximum(model_vals, floor))
    d = np.log10(np.maximum(data_vals, floor))
    return m - d


def fit_spectrum(data: SpectrumData, initial: ModelConfig, free_params,
                 bounds: dict | None = None, seed: int = 0,
                 max_evals: int = 20000, restarts: int = 2,
                 log_floor: float = LOG_FLOOR) -> FitResult:
    """Fit model parameters to a peak-normalized spectrum.

    free_params is a subset of delta_i / eta_i / alpha / xi / lv_scale /
    zeta / mu / amplitude / offset.  Residuals are taken in log10
    intensity with floor ``log_floor`` (relative to peak).  Nelder-Mead
    simplex with deterministic restarts; modes are sorted by energy in the
    reported result so permuted starts land on one labeling.
    """
    del seed  # deterministic descent; kept for interface stability
    free_params = list(free_params)
    known = set(_spectrum_param_names(initial))
    for name in free_params:
        if name not in known:
            raise ValueError(f"unknown or out-of-range fit parameter {name!r}")

    norm = data if data.peak_normalized else data.normalized()
    grid = norm.detuning_mev
    n_eval = 0

    def forward(config, extras):
        result = observables.emission_spectrum(
            config, grid, check_quadrature=False, compute_areas=False)
        model_vals = result.s_total
        peak = np.max(model_vals)
        if not np.isfinite(peak) or peak <= 0:
            return None
        return extras["amplitude"] * model_vals / peak + extras["offset"]

    def objective(x):
        nonlocal n_eval
        n_eval += 1
        try:
            config, extras = _apply_spectrum_params(initial, free_params, x)
        except Exception:
            return 1e30
        vals = forward(config, extras)
        if vals is None:
            return 1e30
        r = _log_residuals(vals, norm.intensity, log_floor)
        return float(r @ r)

    if not free_params:
        config, extras = _apply_spectrum_params(initial, [], [])
        vals = forward(config, extras)
        r = _log_residuals(vals, norm.intensity, log_floor)
        return FitResult(parameters={}, residual_norm=float(r @ r),
                         n_evaluations=1, converged=True, config=initial)

    x0 = np.array([_get_spectrum_param(initial, n,
                                       {"amplitude": 1.0, "offset": 0.0})
                   for n in free_params])
    opt_bounds = [_bound_for(n, bounds) for n in free_params]

    # deterministic seeding: line-scan each free mode energy around its
    # start so the simplex begins inside the capture basin of the
    # corresponding spectral line rather than on its rim
    for i, name in enumerate(free_params):
        if not name.startswith("delta_"):
            continue
        candidates = x0[i] + 0.1 * np.arange(-3, 4)
        lo, hi = opt_bounds[i]
        scores = []
        for c in candidates:
            x_try = x0.copy()
            x_try[i] = np.clip(c, lo, hi)
            scores.append(objective(x_try))
        x0[i] = np.clip(candidates[int(np.argmin(scores))], lo, hi)

    best = None
    converged = False
    x_start = x0
    for attempt in range(restarts + 1):
        res = scipy.optimize.minimize(
            objective, x_start, method="Nelder-Mead", bounds=opt_bounds,
            options={"maxfev": max_evals, "xatol": 1e-6, "fatol": 1e-12,
                     "adaptive": True,
                     "initial_simplex": _initial_simplex(
                         np.asarray(x_start, dtype=float), free_params,
                         shrink=0.5**attempt)})
        improvement = np.inf if best is None else best.fun - res.fun
        if best is None or res.fun < best.fun:
            best = res
            converged = bool(res.success)
        x_start = best.x
        if improvement < 1e-10:
            break

    sigma_list = _curvature_sigmas(objective, best.x, best.fun,
                                   len(norm.intensity), opt_bounds)
    sigmas = dict(zip(free_params, sigma_list))
    values = dict(zip(free_params, best.x))
    config, _ = _apply_spectrum_params(initial, free_params, best.x)
    config, remap = _canonical_mode_order(config)
    values = remap(values)
    sigmas = remap(sigmas)
    parameters = {n: (float(values[n]), float(sigmas.get(n, np.nan)))
                  for n in values}
    return FitResult(parameters=parameters, residual_norm=float(best.fun),
                     n_evaluations=n_eval, converged=converged, config=config)


def _canonical_mode_order(config: ModelConfig):
    """Sort modes by energy; return the sorted config and a relabeling
    function for delta_i / eta_i keyed dicts."""
    order = np.argsort([m.delta_mev for m in config.modes])
    new_modes = tuple(config.modes[i] for i in order)

    def remap(d: dict) -> dict:
        out = dict(d)
        for new_idx, old_idx in enumerate(order, start=1):
            for stem in ("delta", "eta"):
                old_name = f"{stem}_{old_idx + 1}"
                if old_name in d:
                    out[f"{stem}_{new_idx}"] = d[old_name]
        return out

    return dataclasses.replace(config, modes=new_modes), remap


def _curvature_sigmas(objective, x_opt, f_opt, n_points, bounds):
    """1-sigma estimates from the finite-difference curvature of the
    residual surface (quadratic approximation; approximate by design)."""
    p = len(x_opt)
    dof = max(n_points - p, 1)
    s2 = f_opt / dof
    sigmas = []
    for i in range(p):
        h = max(1e-5, 1e-4 * abs(x_opt[i]))
        lo, hi = bounds[i]
        xp, xm = x_opt.copy(), x_opt.copy()
        xp[i] = min(x_opt[i] + h, hi)
        xm[i] = max(x_opt[i] - h, lo)
        span = (xp[i] - xm[i]) / 2.0
        if span <= 0:
            sigmas.append(np.nan)
            continue
        curv = (objective(xp) - 2.0 * f_opt + objective(xm)) / span**2
        sigmas.append(np.sqrt(2.0 * s2 / curv) if curv > 0 else np.nan)
    return sigmas


# ---------------------------------------------------------------------------
# line-scan extraction

@dataclass(frozen=True)
class Gamma2Extraction:
    gamma2_ps: float
    gamma2_sigma_ps: float
    p_sat: float
    p_sat_sigma: float
    intercept_mhz2: float
    slope_mhz2: float


def extract_gamma2(series: LineScanSeries) -> Gamma2Extraction:
    """Coherence decay from squared linewidth vs power.

    Weighted linear regression of dnu^2 = (Gamma2/pi)^2 (1 + P/P_sat):
    the zero-power intercept gives Gamma2, slope/intercept gives 1/P_sat.
    """
    x = series.power
    y = series.linewidth_mhz**2
    sigma_y = 2.0 * series.linewidth_mhz * series.sigma_mhz
    w = 1.0 / np.where(sigma_y > 0, sigma_y, 1.0) ** 2

    sw, swx, swxx = np.sum(w), np.sum(w * x), np.sum(w * x * x)
    swy, swxy = np.sum(w * y), np.sum(w * x * y)
    det = sw * swxx - swx**2
    if det <= 0:
        raise DataError("degenerate power axis in line-scan series")
    intercept = (swxx * swy - swx * swxy) / det
    slope = (sw * swxy - swx * swy) / det
    var_intercept = swxx / det
    var_slope = sw / det
    cov = -swx / det

    if intercept <= 0:
        raise DataError("negative zero-power intercept: series inconsistent "
                        "with power-broadening model")
    gamma2_mhz = np.pi * np.sqrt(intercept)
    gamma2_sigma_mhz = np.pi * np.sqrt(var_intercept) / (2.0 * np.sqrt(intercept))
    if slope > 0:
        p_sat = intercept / slope
        var_psat = (var_intercept / slope**2
                    + (intercept**2 / slope**4) * var_slope
                    - 2.0 * (intercept / slope**3) * cov)
        p_sat_sigma = np.sqrt(max(var_psat, 0.0))
    else:
        p_sat, p_sat_sigma = np.inf, np.inf
    return Gamma2Extraction(
        gamma2_ps=gamma2_mhz / PS_INV_TO_MHZ,
        gamma2_sigma_ps=gamma2_sigma_mhz / PS_INV_TO_MHZ,
        p_sat=float(p_sat), p_sat_sigma=float(p_sat_sigma),
        intercept_mhz2=float(intercept), slope_mhz2=float(slope))


# ---------------------------------------------------------------------------
# g2 fits

def fit_g2(trace: CorrelationTrace, config: ModelConfig, kind: str,
           fit_jitter: bool = False, jitter_fwhm_ps: float | None = None,
           max_evals: int = 400) -> FitResult:
    """Fit a measured correlation trace.

    kind="nonresonant": closed-form dip, free (V, S), Gamma1 from config.
    kind="resonant": full driven model with the Rabi energy free (plus
    detector jitter when fit_jitter is set); linear-space least squares.
    """
    if kind == "nonresonant":
        return _fit_g2_nonresonant(trace, config)
    if kind == "resonant":
        return _fit_g2_resonant(trace, config, fit_jitter, jitter_fwhm_ps,
                                max_evals)
    raise ValueError(f"unknown g2 fit kind {kind!r}")


def _fit_g2_nonresonant(trace: CorrelationTrace, config: ModelConfig) -> FitResult:
    gamma1_per_ns = config.gamma1 * 1e3
    tau = trace.tau_ns
    n_eval = 0

    def residual(p):
        nonlocal n_eval
        n_eval += 1
        v, s = p
        return observables.g2_nonresonant_model(tau, v, s, gamma1_per_ns) \
            - trace.values

    v0 = float(np.clip(1.0 - np.min(trace.values), 1e-3, 1.0))
    res = scipy.optimize.least_squares(
        residual, x0=[v0, 0.1], bounds=([0.0, 0.0], [1.0, np.inf]),
        xtol=1e-15, ftol=1e-15, gtol=1e-15)
    sigmas = _least_squares_sigmas(res)
    parameters = {"V": (float(res.x[0]), sigmas[0]),
                  "S": (float(res.x[1]), sigmas[1])}
    return FitResult(parameters=parameters,
                     residual_norm=float(2.0 * res.cost),
                     n_evaluations=n_eval, converged=bool(res.success),
                     config=config)


def _fit_g2_resonant(trace: CorrelationTrace, config: ModelConfig,
                     fit_jitter: bool, jitter_fwhm_ps: float | None,
                     max_evals: int) -> FitResult:
    if config.drive is None:
        raise ValueError("resonant g2 fit needs a drive section in the config")
    tau = trace.tau_ns
    fixed_jitter = jitter_fwhm_ps if jitter_fwhm_ps is not None else \
        (config.jitter_fwhm_ps or 0.0)
    n_eval = 0

    def forward(rabi_mev, jitter_ps):
        cfg = dataclasses.replace(
            config, drive=dataclasses.replace(config.drive, rabi_mev=rabi_mev))
        model_trace = observables.g2_resonant(cfg, tau)
        if jitter_ps > 0:
            model_trace = observables.convolve_jitter(model_trace, jitter_ps)
        return model_trace.values

    def residual(p):
        nonlocal n_eval
        n_eval += 1
        rabi = p[0]
        jit = p[1] if fit_jitter else fixed_jitter
        try:
            return forward(rabi, jit) - trace.values
        except Exception:
            return np.full(len(tau), 1e6)

    x0 = [config.drive.rabi_mev] + ([fixed_jitter or 100.0] if fit_jitter else [])
    lo = [1e-6] + ([0.0] if fit_jitter else [])
    hi = [np.inf] + ([np.inf] if fit_jitter else [])
    res = scipy.optimize.least_squares(
        residual, x0=x0, bounds=(lo, hi), xtol=1e-10, ftol=1e-10,
        diff_step=1e-3, max_nfev=max_evals)
    sigmas = _least_squares_sigmas(res)
    parameters = {"rabi_meV": (float(res.x[0]), sigmas[0])}
    if fit_jitter:
        parameters["jitter_fwhm_ps"] = (float(res.x[1]), sigmas[1])
    fitted = dataclasses.replace(
        config, drive=dataclasses.replace(config.drive, rabi_mev=float(res.x[0])))
    return FitResult(parameters=parameters,
                     residual_norm=float(2.0 * res.cost),
                     n_evaluations=n_eval, converged=bool(res.success),
                     config=fitted)


def _least_squares_sigmas(res) -> list:
    """Parameter sigmas from the Jacobian at the least-squares solution."""
    try:
        jtj = res.jac.T @ res.jac
        dof = max(len(res.fun) - len(res.x), 1)
        s2 = 2.0 * res.cost / dof
        cov = np.linalg.inv(jtj) * s2
        return [float(np.sqrt(max(cov[i, i], 0.0)))
                for i in range(len(res.x))]
    except np.linalg.LinAlgError:
        return [float("nan")] * len(res.x)


def summarize_fit_results(results) -> dict:
    """Unweighted mean and sample standard deviation of each parameter
    across independent fits (e.g. one per temperature), plus the
    per-dataset values."""
    names = sorted({n for r in results for n in r.parameters})
    out = {}
    for name in names:
        vals = [r.parameters[name][0] for r in results if name in r.parameters]
        out[name] = {
            "mean": float(np.mean(vals)),
            "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
            "values": [float(v) for v in vals],
        }
    return out
