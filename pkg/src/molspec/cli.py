"""Command-line interface.

Subcommands: spectrum | g2 | linewidth-sweep | dwf | fit {spectrum|linescan|g2}.
Every run writes its data products (CSV at full double precision, JSON with
sorted keys) plus a manifest.json recording the invocation, and renders
matplotlib figures next to the delimited output unless --no-figures is set.

Exit codes: 0 success, 2 input/config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__, fitting, model, observables, plots
from .constants import PS_INV_TO_MHZ
from .errors import ConfigError, DataError, NumericalError, QuadratureError


@dataclasses.dataclass(frozen=True)
class RunManifest:
    command: str
    config_path: str
    output_dir: str
    seed: int
    tool_version: str
    timestamp: str
    config_sha256: str


def _config_digest(raw_text: str) -> str:
    return hashlib.sha256(raw_text.encode("utf-8")).hexdigest()


def _load_config(path: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw_text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}")
    try:
        raw = json.loads(raw_text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON "
                          f"(line {exc.lineno}, column {exc.colno}): {exc.msg}")
    return model.config_from_dict(raw), _config_digest(raw_text)


def _write_manifest(args, digest: str) -> RunManifest:
    manifest = RunManifest(
        command=" ".join(args._command_words),
        config_path=os.path.abspath(args.config),
        output_dir=os.path.abspath(args.out),
        seed=args.seed,
        tool_version=__version__,
        timestamp=datetime.now(timezone.utc).isoformat(),
        config_sha256=digest,
    )
    with open(os.path.join(args.out, "manifest.json"), "w",
              encoding="utf-8") as fh:
        json.dump(dataclasses.asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _provenance_line(args, digest: str) -> str:
    return (f"molspec {__version__} {' '.join(args._command_words)} "
            f"seed={args.seed} config_sha256={digest[:12]}")


def _write_csv(path: str, provenance: str, columns: dict):
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# {provenance}\n")
        fh.write(",".join(names) + "\n")
        for row in zip(*arrays):
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _write_json(path: str, provenance: str, payload: dict):
    payload = dict(payload)
    payload["produced_by"] = provenance
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# subcommands

def _cmd_spectrum(args) -> int:
    config, digest = _load_config(args.config)
    grid = observables.GridSpec(args.grid_min, args.grid_max, args.grid_step)
    result = observables.emission_spectrum(config, grid)
    os.makedirs(args.out, exist_ok=True)
    _write_manifest(args, digest)
    prov = _provenance_line(args, digest)

    _write_csv(os.path.join(args.out, "spectrum.csv"), prov, {
        "detuning_meV": result.detuning_mev,
        "s_zpl_lv": result.s_zpl_lv,
        "s_sb": result.s_sb,
        "s_total": result.s_total,
    })
    peaks = observables.peak_table(result)
    gamma2_ps = result.gamma2
    summary = {
        "dwf": result.dwf,
        "mean_b": result.mean_b,
        "gamma2_per_ns": gamma2_ps * 1e3,
        "zpl_fwhm_MHz": observables.power_broadened_linewidth(gamma2_ps, 0.0),
        "area_zpl_lv": result.area_zpl_lv,
        "area_sb": result.area_sb,
        "area_zpl_fraction": result.area_zpl_lv
        / (result.area_zpl_lv + result.area_sb)
        if result.area_zpl_lv + result.area_sb > 0 else 1.0,
        "polaron_shift_meV": model.polaron_shift_mev(config),
        "peaks": [{"detuning_meV": c, "height": h} for c, h in peaks[:32]],
    }
    _write_json(os.path.join(args.out, "summary.json"), prov, summary)
    if not args.no_figures:
        plots.save_spectrum_figure(result,
                                   os.path.join(args.out, "spectrum.png"))
    return 0


def _cmd_g2(args) -> int:
    config, digest = _load_config(args.config)
    if config.drive is None:
        raise ConfigError("g2 needs a config with a drive section")
    n = int(round(args.tau_max * 1e3 / args.tau_step))
    if n < 8:
        raise ConfigError("tau grid too short: increase --tau-max or "
                          "decrease --tau-step")
    tau_ns = np.arange(n + 1) * args.tau_step * 1e-3
    trace = observables.g2_resonant(config, tau_ns)
    jitter = args.jitter_fwhm_ps
    if jitter is None:
        jitter = config.jitter_fwhm_ps or 0.0
    convolved = observables.convolve_jitter(trace, jitter) if jitter > 0 \
        else trace

    os.makedirs(args.out, exist_ok=True)
    _write_manifest(args, digest)
    prov = _provenance_line(args, digest)
    _write_csv(os.path.join(args.out, "g2.csv"), prov, {
        "tau_ns": trace.tau_ns,
        "g2": trace.values,
        "g2_convolved": convolved.values,
    })
    rabi = model.renormalized_rabi(config)
    _write_json(os.path.join(args.out, "g2_summary.json"), prov, {
        "renormalized_rabi_meV": rabi * 0.6582119569,
        "renormalized_rabi_per_ps": rabi,
        "jitter_fwhm_ps": jitter,
    })
    if not args.no_figures:
        plots.save_g2_figure(trace, os.path.join(args.out, "g2.png"),
                             convolved if jitter > 0 else None)
    return 0


def _parse_temps(text: str):
    try:
        temps = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse temperature list {text!r}")
    if not temps:
        raise ConfigError("temperature list is empty")
    return temps


def _cmd_linewidth_sweep(args) -> int:
    config, digest = _load_config(args.config)
    temps = _parse_temps(args.temps)

    def one(T):
        g2_ps = observables.gamma2(T, config)
        gpd = g2_ps - config.gamma1 / 2.0
        import molspec.bath as bath_mod
        dwf = bath_mod.debye_waller(T, config.bulk_bath)
        mb = bath_mod.mean_displacement(T, config.bulk_bath)
        return (T, gpd, g2_ps,
                observables.power_broadened_linewidth(g2_ps, 0.0), dwf, mb)

    rows = _parallel_map(one, temps, args.threads)

    os.makedirs(args.out, exist_ok=True)
    _write_manifest(args, digest)
    prov = _provenance_line(args, digest)
    _write_csv(os.path.join(args.out, "gamma2_vs_T.csv"), prov, {
        "temperature_K": [r[0] for r in rows],
        "gamma_pd_per_ns": [r[1] * 1e3 for r in rows],
        "gamma2_per_ns": [r[2] * 1e3 for r in rows],
        "linewidth_MHz": [r[3] for r in rows],
    })
    _write_csv(os.path.join(args.out, "dwf_vs_T.csv"), prov, {
        "temperature_K": [r[0] for r in rows],
        "dwf": [r[4] for r in rows],
        "mean_b": [r[5] for r in rows],
    })
    if not args.no_figures:
        plots.save_sweep_figure([r[0] for r in rows],
                                [r[2] * 1e3 for r in rows],
                                [r[4] for r in rows],
                                os.path.join(args.out, "sweep.png"))
    return 0


def _cmd_dwf(args) -> int:
    config, digest = _load_config(args.config)
    import molspec.bath as bath_mod
    os.makedirs(args.out, exist_ok=True)
    _write_manifest(args, digest)
    prov = _provenance_line(args, digest)
    payload = {
        "temperature_K": config.temperature,
        "dwf": bath_mod.debye_waller(config.temperature, config.bulk_bath),
        "mean_b": bath_mod.mean_displacement(config.temperature,
                                             config.bulk_bath),
        "polaron_shift_meV": model.polaron_shift_mev(config),
    }
    _write_json(os.path.join(args.out, "dwf.json"), prov, payload)
    if args.temps:
        temps = _parse_temps(args.temps)
        rows = _parallel_map(
            lambda T: (T, bath_mod.debye_waller(T, config.bulk_bath),
                       bath_mod.mean_displacement(T, config.bulk_bath)),
            temps, args.threads)
        _write_csv(os.path.join(args.out, "dwf_vs_T.csv"), prov, {
            "temperature_K": [r[0] for r in rows],
            "dwf": [r[1] for r in rows],
            "mean_b": [r[2] for r in rows],
        })
    return 0


def _cmd_fit(args) -> int:
    config, digest = _load_config(args.config)
    os.makedirs(args.out, exist_ok=True)
    _write_manifest(args, digest)
    prov = _provenance_line(args, digest)

    if args.subkind == "spectrum":
        data = fitting.load_spectrum_csv(
            args.data, axis_unit=args.axis_unit,
            zpl_wavelength_nm=config.zpl_wavelength_nm,
            temperature=config.temperature)
        free = [p for p in (args.free or "").split(",") if p]
        result = fitting.fit_spectrum(data, config, free, seed=args.seed)
        norm = data.normalized()
        fitted = observables.emission_spectrum(
            result.config, norm.detuning_mev, check_quadrature=False,
            compute_areas=False)
        model_vals = fitted.s_total / np.max(fitted.s_total)
        amp = result.parameters.get("amplitude", (1.0, 0.0))[0]
        off = result.parameters.get("offset", (0.0, 0.0))[0]
        model_vals = amp * model_vals + off
        _write_csv(os.path.join(args.out, "overlay.csv"), prov, {
            "detuning_meV": norm.detuning_mev,
            "data": norm.intensity,
            "model": model_vals,
        })
        payload = result.to_dict()
        payload["fitted_config"] = model.config_to_dict(result.config)
        _write_json(os.path.join(args.out, "fit.json"), prov, payload)
        if not args.no_figures:
            plots.save_overlay_figure(norm.detuning_mev, norm.intensity,
                                      model_vals,
                                      os.path.join(args.out, "overlay.png"),
                                      log_scale=True, xlabel="detuning (meV)")
        return 0

    if args.subkind == "linescan":
        series = fitting.load_linescan_csv(args.data)
        ex = fitting.extract_gamma2(series)
        model_dnu2 = ex.intercept_mhz2 + ex.slope_mhz2 * series.power
        _write_csv(os.path.join(args.out, "overlay.csv"), prov, {
            "power": series.power,
            "dnu2_data_MHz2": series.linewidth_mhz**2,
            "dnu2_model_MHz2": model_dnu2,
        })
        payload = {
            "gamma2_MHz": ex.gamma2_ps * PS_INV_TO_MHZ,
            "gamma2_sigma_MHz": ex.gamma2_sigma_ps * PS_INV_TO_MHZ,
            "gamma2_per_ns": ex.gamma2_ps * 1e3,
            "p_sat": ex.p_sat,
            "p_sat_sigma": ex.p_sat_sigma,
            "intercept_MHz2": ex.intercept_mhz2,
            "slope_MHz2": ex.slope_mhz2,
            "converged": True,
        }
        _write_json(os.path.join(args.out, "fit.json"), prov, payload)
        if not args.no_figures:
            plots.save_overlay_figure(series.power, series.linewidth_mhz**2,
                                      model_dnu2,
                                      os.path.join(args.out, "overlay.png"),
                                      log_scale=False, xlabel="power (arb.)")
        return 0

    if args.subkind == "g2":
        trace = fitting.load_g2_csv(args.data)
        result = fitting.fit_g2(trace, config, kind=args.g2_model,
                                fit_jitter=args.fit_jitter,
                                jitter_fwhm_ps=args.jitter_fwhm_ps)
        if args.g2_model == "nonresonant":
            v = result.parameters["V"][0]
            s = result.parameters["S"][0]
            model_vals = observables.g2_nonresonant_model(
                trace.tau_ns, v, s, config.gamma1 * 1e3)
        else:
            model_trace = observables.g2_resonant(result.config, trace.tau_ns)
            jit = args.jitter_fwhm_ps or config.jitter_fwhm_ps or 0.0
            if result.parameters.get("jitter_fwhm_ps"):
                jit = result.parameters["jitter_fwhm_ps"][0]
            if jit > 0:
                model_trace = observables.convolve_jitter(model_trace, jit)
            model_vals = model_trace.values
        _write_csv(os.path.join(args.out, "overlay.csv"), prov, {
            "tau_ns": trace.tau_ns,
            "data": trace.values,
            "model": model_vals,
        })
        _write_json(os.path.join(args.out, "fit.json"), prov, result.to_dict())
        if not args.no_figures:
            plots.save_overlay_figure(trace.tau_ns, trace.values, model_vals,
                                      os.path.join(args.out, "overlay.png"),
                                      log_scale=False, xlabel="tau (ns)")
        return 0

    raise ConfigError("fit needs a subkind: spectrum | linescan | g2")


def _parallel_map(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# argument parsing

def _add_common(parser):
    parser.add_argument("--config", required=True, help="JSON model config")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    parser.add_argument("--no-figures", action="store_true",
                        help="skip PNG rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="molspec",
        description="Emission spectra, photon correlations and fits for a "
                    "single organic emitter with vibrational modes and a "
                    "thermal phonon bath")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="emission spectrum and summary")
    _add_common(p)
    p.add_argument("--grid-min", type=float, default=-60.0, help="meV")
    p.add_argument("--grid-max", type=float, default=20.0, help="meV")
    p.add_argument("--grid-step", type=float, default=0.02, help="meV")

    p = sub.add_parser("g2", help="resonant second-order correlation")
    _add_common(p)
    p.add_argument("--tau-max", type=float, default=50.0, help="ns")
    p.add_argument("--tau-step", type=float, default=10.0, help="ps")
    p.add_argument("--jitter-fwhm-ps", type=float, default=None)

    p = sub.add_parser("linewidth-sweep",
                       help="Gamma2 and DWF versus temperature")
    _add_common(p)
    p.add_argument("--temps", required=True,
                   help="comma-separated temperatures in K")

    p = sub.add_parser("dwf", help="Debye-Waller factor report")
    _add_common(p)
    p.add_argument("--temps", default=None,
                   help="optional comma-separated temperatures in K")

    p = sub.add_parser("fit", help="fit model parameters to data")
    fit_sub = p.add_subparsers(dest="subkind", required=True)
    for kind in ("spectrum", "linescan", "g2"):
        q = fit_sub.add_parser(kind)
        _add_common(q)
        q.add_argument("--data", required=True, help="input CSV")
        if kind == "spectrum":
            q.add_argument("--free", default="",
                           help="comma-separated free parameters")
            q.add_argument("--axis-unit", default=None,
                           choices=["wavelength_nm", "detuning_meV"])
        if kind == "g2":
            q.add_argument("--g2-model", default="nonresonant",
                           choices=["nonresonant", "resonant"])
            q.add_argument("--fit-jitter", action="store_true")
            q.add_argument("--jitter-fwhm-ps", type=float, default=None)
    return parser


_DISPATCH = {
    "spectrum": _cmd_spectrum,
    "g2": _cmd_g2,
    "linewidth-sweep": _cmd_linewidth_sweep,
    "dwf": _cmd_dwf,
    "fit": _cmd_fit,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    words = [args.command]
    if getattr(args, "subkind", None):
        words.append(args.subkind)
    args._command_words = words

    try:
        from threadpoolctl import threadpool_limits
        limiter = threadpool_limits(limits=args.threads)
    except ImportError:
        limiter = None
    try:
        return _DISPATCH[args.command](args)
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, QuadratureError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
