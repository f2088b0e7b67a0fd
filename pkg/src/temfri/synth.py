"""Synthetic inputs: random pulse trains for recovery studies and an
ECG-like record generator for the heart-rate experiments.

The ECG template is five Lorentzian pulses per beat shaped like the
P-Q-R-S-T deflections. Subjects jitter the inter-beat interval slowly
around a mean rate and scale beats slightly, so the ground-truth beat
times are known exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .io import EcgRecord
from .model import VpwPulse, VpwSignal, amplitude_bound, fourier_coeffs

__all__ = [
    "random_vpw_signal",
    "ecg_beat_template",
    "SyntheticSubject",
    "synth_ecg_record",
]


def random_vpw_signal(
    rng: np.random.Generator,
    k: int,
    period: float = 1.0,
    r_range: tuple[float, float] = (0.01, 0.04),
    amp_range: tuple[float, float] = (0.5, 2.0),
    asym_range: tuple[float, float] = (0.1, 1.0),
    min_sep_frac: float = 0.5,
) -> VpwSignal:
    """Random K-pulse train with delays kept at least
    ``min_sep_frac * T / K`` apart (also across the period wrap) and
    widths/amplitudes bounded away from zero, so recovery is well
    conditioned in double precision.
    """
    if k < 1:
        raise PreconditionError(f"need k >= 1, got {k}")
    sep = min_sep_frac * period / k
    # Jitter around an even grid; keeps the pairwise (circular) separation.
    base = period * (np.arange(k) + 0.5) / k
    jitter = rng.uniform(-0.5, 0.5, size=k) * (period / k - sep)
    tau = (base + jitter + rng.uniform(0.0, period)) % period
    r = rng.uniform(*r_range, size=k) * period
    c = rng.uniform(*amp_range, size=k) * rng.choice([-1.0, 1.0], size=k)
    d = rng.uniform(*asym_range, size=k) * rng.choice([-1.0, 1.0], size=k)
    pulses = tuple(
        VpwPulse(c=float(c[i]), d=float(d[i]), r=float(r[i]), tau=float(tau[i]))
        for i in range(k)
    )
    return VpwSignal(period=period, pulses=pulses)


# Per-beat template for a beat of unit length: (peak_height, d_frac, r, tau).
# Heights are converted to symmetric amplitudes via c = h * pi * r, which
# makes h the approximate peak value of the Lorentzian.
_ECG_TEMPLATE = (
    (0.15, 0.20, 0.030, 0.20),   # P
    (-0.12, -0.10, 0.012, 0.27), # Q
    (1.00, 0.00, 0.010, 0.33),   # R
    (-0.22, 0.10, 0.013, 0.39),  # S
    (0.35, 0.25, 0.045, 0.58),   # T
)


def ecg_beat_template(beat_s: float = 1.0, amplitude: float = 1.0) -> tuple[VpwPulse, ...]:
    """Five-pulse P-Q-R-S-T beat scaled to ``beat_s`` seconds."""
    pulses = []
    for height, d_frac, r, tau in _ECG_TEMPLATE:
        c = height * math.pi * (r * beat_s) * amplitude
        pulses.append(
            VpwPulse(c=c, d=d_frac * c, r=r * beat_s, tau=tau * beat_s)
        )
    return tuple(pulses)


@dataclass(frozen=True)
class SyntheticSubject:
    """An ECG-like record with its exact beat schedule."""

    record: EcgRecord
    beat_times: np.ndarray  # R-peak instants, seconds
    mean_bpm: float


def synth_ecg_record(
    duration_s: float = 60.0,
    fs: float = 2000.0,
    seed: int = 0,
    mean_bpm: float = 60.0,
    bpm_swing: float = 4.0,
    ibi_jitter: float = 0.01,
    amp_jitter: float = 0.05,
    target_bound: float = 0.4,
    m_bound: int = 40,
) -> SyntheticSubject:
    """Generate a record of jittered P-Q-R-S-T beats.

    The instantaneous rate drifts sinusoidally by ``bpm_swing`` around
    ``mean_bpm`` with additional white inter-beat jitter. The waveform is
    scaled so the coefficient-sum amplitude bound of a two-beat window is
    about ``target_bound`` (measured at ``m_bound`` harmonics), matching
    what the encoder will see.
    """
    rng = np.random.default_rng(seed)
    base_ibi = 60.0 / mean_bpm

    # Calibrate the template scale against the bound of a nominal window.
    nominal = VpwSignal(period=2 * base_ibi, pulses=(
        ecg_beat_template(base_ibi)
        + tuple(
            VpwPulse(p.c, p.d, p.r, p.tau + base_ibi) for p in ecg_beat_template(base_ibi)
        )
    ))
    nominal_bound = amplitude_bound(fourier_coeffs(nominal, m_bound).without_dc())
    scale = target_bound / nominal_bound

    beat_starts = []
    t = 0.25 * base_ibi  # lead-in so the first beat is complete
    while t < duration_s + base_ibi:
        beat_starts.append(t)
        phase = 2.0 * np.pi * t / 60.0  # one swing cycle per minute
        bpm = mean_bpm + bpm_swing * np.sin(phase) + mean_bpm * ibi_jitter * rng.standard_normal()
        t += 60.0 / np.clip(bpm, 30.0, 180.0)
    beat_starts = np.asarray(beat_starts)

    n = int(round(duration_s * fs))
    tgrid = np.arange(n) / fs
    x = np.zeros(n)
    r_tau_frac = _ECG_TEMPLATE[2][3]
    beat_peaks = []
    for i, start in enumerate(beat_starts):
        ibi = (beat_starts[i + 1] - start) if i + 1 < beat_starts.size else base_ibi
        amp = scale * (1.0 + amp_jitter * rng.standard_normal())
        lo = max(int((start - 2.0) * fs), 0)
        hi = min(int((start + ibi + 2.0) * fs), n)
        if hi <= lo:
            continue
        seg_t = tgrid[lo:hi]
        for p in ecg_beat_template(ibi, amplitude=amp):
            w = seg_t - (start + p.tau)
            x[lo:hi] += (p.c * p.r + p.d * w) / (np.pi * (p.r**2 + w**2))
        peak = start + r_tau_frac * ibi
        if 0.0 <= peak < duration_s:
            beat_peaks.append(peak)

    record = EcgRecord(time_s=tgrid, voltage=x)
    return SyntheticSubject(
        record=record, beat_times=np.asarray(beat_peaks), mean_bpm=mean_bpm
    )
