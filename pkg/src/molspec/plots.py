"""Figure rendering for the CLI report paths.

Every plot works from the same arrays that go into the delimited output
files, so figures are a convenience view, never a separate computation.
"""

from __future__ import annotations

import numpy as np
import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)


def save_spectrum_figure(result, path, log_scale: bool = True):
    """Spectrum with total, sharp-peak and sideband components."""
    fig, ax = plt.subplots(figsize=(8, 4.5))
    floor = np.max(result.s_total) * 1e-8
    ax.plot(result.detuning_mev, np.maximum(result.s_total, floor),
            "k--", lw=1.2, label="total")
    ax.plot(result.detuning_mev, np.maximum(result.s_zpl_lv, floor),
            color="tab:purple", lw=1.0, label="ZPL + vibrational peaks")
    if np.any(result.s_sb > 0):
        ax.plot(result.detuning_mev, np.maximum(result.s_sb, floor),
                color="tab:orange", lw=1.0, label="phonon sideband")
    if log_scale:
        ax.set_yscale("log")
    ax.set_xlabel("detuning (meV)")
    ax.set_ylabel("emission (arb. units)")
    ax.set_title(f"DWF = {result.dwf:.3f}")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_g2_figure(trace, path, convolved=None):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(trace.tau_ns, trace.values, color="tab:purple", ls="--",
            lw=1.0, label="model")
    if convolved is not None:
        ax.plot(convolved.tau_ns, convolved.values, color="tab:red",
                lw=1.2, label="with detector jitter")
    ax.axhline(1.0, color="0.7", lw=0.6)
    ax.set_xlabel(r"$\tau$ (ns)")
    ax.set_ylabel(r"$g^{(2)}(\tau)$")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(temps, gamma2_per_ns, dwf, path):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.6))
    ax1.plot(temps, gamma2_per_ns, "o-", color="tab:blue")
    ax1.set_xlabel("temperature (K)")
    ax1.set_ylabel(r"$\Gamma_2$ (ns$^{-1}$)")
    ax2.plot(temps, dwf, "s-", color="tab:green")
    ax2.set_xlabel("temperature (K)")
    ax2.set_ylabel("Debye-Waller factor")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_overlay_figure(axis, data, model_vals, path, log_scale: bool,
                        xlabel: str):
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(axis, data, color="0.4", lw=1.0, label="data")
    ax.plot(axis, model_vals, "k--", lw=1.2, label="fit")
    if log_scale:
        floor = max(np.max(data), np.max(model_vals)) * 1e-6
        ax.set_ylim(bottom=floor)
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel("signal")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
