"""Matplotlib renderings of result tables and pipeline outputs.

All functions write a file and return its path; the Agg backend is
forced so rendering works headless.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = [
    "plot_denoiser_sweep",
    "plot_recovery",
    "plot_snr_sweep",
    "plot_hardware",
    "plot_waveform",
    "plot_hr_series",
]

_DPI = 150


def plot_denoiser_sweep(series: dict[str, list[dict]], path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, pts in sorted(series.items()):
        snr = [p["snr_db"] for p in pts]
        err = [p["mean_loc_error"] for p in pts]
        ax.semilogy(snr, err, marker="o", label=name)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("mean location error (s)")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return Path(path)


def plot_recovery(pts: list[dict], path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ks = [p["k"] for p in pts]
    errs = [p["max_rel_err"] for p in pts]
    ax.semilogy(ks, errs, marker="s", color="tab:blue")
    ax.axhline(1e-6, color="tab:red", linestyle="--", label="target 1e-6")
    ax.set_xlabel("pulses per period K")
    ax.set_ylabel("worst relative parameter error")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return Path(path)


def plot_snr_sweep(pts: list[dict], path) -> Path:
    metrics = ("success_rate", "pcc", "mae", "rmse")
    fig, axes = plt.subplots(2, 2, figsize=(9, 6))
    conventions = sorted({p["convention"] for p in pts})
    for ax, metric in zip(axes.ravel(), metrics):
        for conv in conventions:
            sel = [p for p in pts if p["convention"] == conv]
            ax.plot(
                [p["snr_db"] for p in sel],
                [p[metric] for p in sel],
                marker="o",
                label=conv,
            )
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel(metric)
        ax.grid(True, alpha=0.3)
    axes[0, 0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return Path(path)


def plot_hardware(rows: list[dict], band: tuple[float, float], path) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    wins = [r["window"] for r in rows]
    ax1.plot(wins, [r["rate_hz"] for r in rows], marker="o")
    ax1.axhspan(band[0], band[1], color="tab:green", alpha=0.15, label=f"{band[0]:g}-{band[1]:g} Hz")
    ax1.set_xlabel("window")
    ax1.set_ylabel("firing rate (Hz)")
    ax1.legend()
    ax2.semilogy(wins, [r["rmse_rel_peak"] for r in rows], marker="s", color="tab:orange")
    ax2.set_xlabel("window")
    ax2.set_ylabel("waveform RMSE / peak")
    for ax in (ax1, ax2):
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return Path(path)


def plot_waveform(t, x, path, ref=None, labels=("reconstruction", "source")) -> Path:
    fig, ax = plt.subplots(figsize=(9, 3.5))
    if ref is not None:
        ax.plot(t, ref, color="0.6", lw=1.0, label=labels[1])
    ax.plot(t, x, color="tab:red", lw=1.0, label=labels[0])
    ax.set_xlabel("time (s)")
    ax.set_ylabel("amplitude")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return Path(path)


def plot_hr_series(est_t, est_bpm, path, ref_t=None, ref_bpm=None) -> Path:
    fig, ax = plt.subplots(figsize=(9, 3.5))
    if ref_t is not None:
        ax.plot(ref_t, ref_bpm, color="0.3", lw=1.2, label="reference")
    ax.plot(est_t, est_bpm, color="tab:red", lw=1.0, label="estimate")
    ax.set_xlabel("time (s)")
    ax.set_ylabel("heart rate (bpm)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
    return Path(path)
