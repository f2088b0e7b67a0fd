"""Sampling kernel, integrate-and-fire time encoder, and encoder parameter
selection.

The kernel is a spectral mask that keeps harmonics m in {-M..-1, 1..M} and
removes DC. The encoder integrates the biased band-limited signal and emits
a time instant whenever the scaled integral reaches the threshold:

    (1/kappa) * integral_{t_n}^{t_{n+1}} (y(s) + b) ds = delta.

Because y is a finite Fourier sum, the integral has an exact antiderivative
and each firing time is located by a safeguarded Newton iteration bracketed
by the interval bounds kappa*delta/(b +- c). No quadrature error accumulates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .model import FourierCoeffs, amplitude_bound

__all__ = [
    "KernelSpec",
    "TemParams",
    "FiringTimes",
    "apply_kernel",
    "encode",
    "suggest_params",
    "discretize_record",
    "min_firing_rate",
]

#: Absolute tolerance (seconds) to which firing times are solved.
DEFAULT_TIME_TOL = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    """Spectral passband {-M..-1, 1..M} for a T-periodic input; DC is zeroed."""

    m_max: int
    period: float

    def __post_init__(self):
        if self.m_max < 1:
            raise PreconditionError(f"kernel m_max must be >= 1, got {self.m_max}")
        if not (math.isfinite(self.period) and self.period > 0.0):
            raise PreconditionError(f"kernel period must be > 0, got {self.period}")

    @property
    def omega0(self) -> float:
        return 2.0 * np.pi / self.period

    def supports_order(self, k: int) -> bool:
        """True when the passband keeps enough harmonics (M >= 4K) to
        recover a K-pulse train."""
        return self.m_max >= 4 * k


@dataclass(frozen=True)
class TemParams:
    """Integrate-and-fire encoder constants.

    b is the bias added to the input, kappa the integrator scale, delta the
    comparator threshold. ``c`` is the amplitude bound promised for the
    input; b > c keeps the biased input strictly positive.
    """

    b: float
    kappa: float
    delta: float
    c: float = 0.0

    def __post_init__(self):
        for name in ("b", "kappa", "delta"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0.0):
                raise PreconditionError(f"TEM parameter {name} must be > 0, got {v}")
        if not (math.isfinite(self.c) and self.c >= 0.0):
            raise PreconditionError(f"amplitude bound c must be >= 0, got {self.c}")
        if not self.b > self.c:
            raise PreconditionError(
                f"bias must exceed the amplitude bound (b={self.b}, c={self.c})"
            )

    @property
    def min_interval(self) -> float:
        return self.kappa * self.delta / (self.b + self.c)

    @property
    def max_interval(self) -> float:
        return self.kappa * self.delta / (self.b - self.c)

    def validate_for_order(self, k: int, period: float, margin: float = 1.0) -> None:
        """Check the minimum-rate condition (b - c)/(kappa*delta) >=
        margin * (8K + 2)/T; raises when violated."""
        need = margin * min_firing_rate(k, period)
        have = (self.b - self.c) / (self.kappa * self.delta)
        if have < need * (1.0 - 1e-12):
            raise PreconditionError(
                f"firing-rate bound too low for K={k}: "
                f"(b-c)/(kappa*delta) = {have:.6g} < {need:.6g}"
            )


@dataclass(frozen=True)
class FiringTimes:
    """Strictly increasing firing instants observed over ``horizon`` seconds."""

    times: np.ndarray
    horizon: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if times.ndim != 1 or times.size < 1:
            raise PreconditionError("need at least one firing time")
        if np.any(np.diff(times) <= 0.0):
            raise PreconditionError("firing times must be strictly increasing")
        if not (math.isfinite(self.horizon) and self.horizon > 0.0):
            raise PreconditionError(f"horizon must be > 0, got {self.horizon}")
        times = times.copy()
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @property
    def n(self) -> int:
        return int(self.times.size)

    @property
    def intervals(self) -> np.ndarray:
        return np.diff(self.times)


def min_firing_rate(k: int, period: float) -> float:
    """Minimum firing rate (8K + 2)/T that allows recovering K pulses."""
    return (8 * k + 2) / period


def apply_kernel(coeffs: FourierCoeffs, kernel: KernelSpec) -> FourierCoeffs:
    """Restrict coefficients to the kernel passband and drop DC.

    Output equals the input on {-M..-1, 1..M} and has exactly 2M entries.
    """
    if coeffs.m_max < kernel.m_max:
        raise PreconditionError(
            f"coefficients cover |m| <= {coeffs.m_max} but the kernel needs "
            f"|m| <= {kernel.m_max}"
        )
    if not math.isclose(coeffs.period, kernel.period, rel_tol=1e-12):
        raise PreconditionError("coefficient and kernel periods differ")
    return FourierCoeffs.from_positive(
        kernel.m_max, kernel.period, coeffs.positive[: kernel.m_max]
    )


def encode(
    coeffs: FourierCoeffs,
    tem: TemParams,
    horizon: float,
    t0: float = 0.0,
    tol_t: float = DEFAULT_TIME_TOL,
    quantize_s: float | None = None,
) -> FiringTimes:
    """Simulate the integrate-and-fire encoder on the band-limited signal.

    Firing times are the exact level crossings of F(t) = b*t + A(t) at
    multiples of kappa*delta, where A is the closed-form antiderivative of
    y. Each crossing is solved to the absolute time tolerance ``tol_t``
    inside the bracket given by the interval bounds, so the output is
    deterministic and bit-reproducible.

    ``quantize_s``, when set, rounds the emitted instants to that grid
    (no rounding by default; hardware timestamp quantization is not
    modeled otherwise).
    """
    if coeffs.has_dc:
        raise PreconditionError("encoder input must be DC-free; apply the kernel first")
    if not math.isfinite(t0):
        raise PreconditionError("non-finite start time")
    if horizon < coeffs.period:
        raise PreconditionError(
            f"horizon {horizon} shorter than one period {coeffs.period}"
        )
    bound = amplitude_bound(coeffs)
    if bound > tem.c * (1.0 + 1e-12):
        raise PreconditionError(
            f"amplitude bound {bound:.6g} exceeds the declared input bound c={tem.c:.6g}"
        )

    kd = tem.kappa * tem.delta
    t_end = t0 + horizon

    if bound == 0.0:
        # Constant integrand: crossings are exactly uniform at kappa*delta/b.
        step = kd / tem.b
        n_max = int(math.floor(horizon / step + 1e-12))
        if n_max < 1:
            raise PreconditionError("horizon too short to produce a firing")
        times = t0 + step * np.arange(1, n_max + 1)
        return _finalize(times, horizon, quantize_s)

    w0 = 2.0 * np.pi / coeffs.period
    m = np.arange(1, coeffs.m_max + 1)
    cm = coeffs.positive
    am = cm / (1j * m * w0)  # antiderivative coefficients
    b = tem.b

    def anti(t: float) -> float:
        e = np.exp((1j * w0 * t) * m)
        return b * t + 2.0 * np.real(np.dot(am, e))

    def rate(t: float) -> float:
        e = np.exp((1j * w0 * t) * m)
        return b + 2.0 * np.real(np.dot(cm, e))

    lo_step = kd / (tem.b + tem.c)
    hi_step = kd / (tem.b - tem.c)

    times = []
    t_prev = t0
    f_t0 = anti(t0)
    n = 1
    while True:
        target = f_t0 + n * kd
        lo = t_prev + lo_step
        hi = t_prev + hi_step
        if lo > t_end:
            break
        g_lo = anti(lo) - target
        g_hi = anti(hi) - target
        # Roundoff can push the bracket endpoints past the root; widen a hair.
        while g_lo > 0.0:
            lo -= tol_t
            g_lo = anti(lo) - target
        while g_hi < 0.0:
            hi += tol_t
            g_hi = anti(hi) - target
        t = 0.5 * (lo + hi)
        for _ in range(80):
            g = anti(t) - target
            if g > 0.0:
                hi = t
            else:
                lo = t
            step = g / rate(t)
            t_new = t - step
            if not lo < t_new < hi:
                t_new = 0.5 * (lo + hi)
            if hi - lo < tol_t or abs(t_new - t) < tol_t:
                t = t_new
                break
            t = t_new
        if t > t_end:
            break
        times.append(t)
        t_prev = t
        n += 1

    if not times:
        raise PreconditionError("horizon too short to produce a firing")
    return _finalize(np.asarray(times), horizon, quantize_s)


def _finalize(times: np.ndarray, horizon: float, quantize_s: float | None) -> FiringTimes:
    if quantize_s is not None:
        if quantize_s <= 0.0:
            raise PreconditionError("quantize_s must be > 0")
        times = np.round(times / quantize_s) * quantize_s
        if np.any(np.diff(times) <= 0.0):
            raise PreconditionError(
                "timestamp quantization collapsed consecutive firings; use a finer grid"
            )
    return FiringTimes(times=times, horizon=horizon)


def suggest_params(
    k: int,
    period: float,
    c: float,
    margin: float = 2.0,
    kappa: float = 1.0,
    eps_b: float = 0.25,
) -> TemParams:
    """Pick encoder constants meeting the minimum-rate condition with margin.

    Returns params with (b - c)/(kappa*delta) = margin*(8K+2)/T and
    b = c*(1 + eps_b). The headroom eps_b is kept small because bias and
    threshold cost supply power; the default 0.25 trades that against the
    spread of firing intervals, whose ratio is (2 + eps_b)/eps_b. For a
    zero-amplitude bound the bias defaults to 1.
    """
    if k < 1:
        raise PreconditionError(f"model order must be >= 1, got {k}")
    if not period > 0.0:
        raise PreconditionError(f"period must be > 0, got {period}")
    if c < 0.0:
        raise PreconditionError(f"amplitude bound must be >= 0, got {c}")
    if margin < 1.0:
        raise PreconditionError(f"margin must be >= 1, got {margin}")
    if eps_b <= 0.0:
        raise PreconditionError("eps_b must be > 0")
    b = c * (1.0 + eps_b) if c > 0.0 else 1.0
    rate = margin * min_firing_rate(k, period)
    delta = (b - c) / (kappa * rate)
    params = TemParams(b=b, kappa=kappa, delta=delta, c=c)
    params.validate_for_order(k, period)
    return params


def discretize_record(
    samples: np.ndarray,
    fs: float,
    period: float,
    m_max: int,
) -> FourierCoeffs:
    """Project one period of a uniformly sampled record onto harmonics
    m in {-M..-1, 1..M} (discrete Fourier projection); DC is discarded.

    The window must contain an integer number of samples per period and at
    least 2M + 1 of them. For a band-limited input sampled above its
    Nyquist rate the projection recovers the coefficients exactly.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 1:
        raise PreconditionError("record must be one-dimensional")
    if not fs > 0.0:
        raise PreconditionError(f"sampling rate must be > 0, got {fs}")
    n_per = int(round(fs * period))
    if abs(n_per - fs * period) > 1e-6 * max(n_per, 1):
        raise PreconditionError(
            f"period {period} is not an integer number of samples at fs={fs}"
        )
    if n_per < 2 * m_max + 1:
        raise PreconditionError(
            f"need at least {2 * m_max + 1} samples per period, got {n_per}"
        )
    if samples.size < n_per:
        raise PreconditionError(
            f"record too short: {samples.size} samples < one period ({n_per})"
        )
    spectrum = np.fft.fft(samples[:n_per]) / n_per
    return FourierCoeffs.from_positive(m_max, period, spectrum[1 : m_max + 1])
