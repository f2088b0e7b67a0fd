"""Periodic variable-pulse-width pulse-train model.

A signal is a sum of K periodized Lorentzian pulses. Each pulse has a
symmetric amplitude ``c``, an asymmetric amplitude ``d``, a half-width
``r`` (seconds, strictly positive) and a delay ``tau``. The pulse train
is periodic with period ``T`` and has closed-form Fourier-series
coefficients

    X[m] = sum_k (c_k - j d_k sgn(m)) / T * exp(-2*pi*(r_k*|m| + j*tau_k*m)/T)

with sgn(0) := 0, so X[0] = sum_k c_k / T. Coefficients of a real signal
come in conjugate pairs, X[-m] = conj(X[m]).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError

__all__ = [
    "VpwPulse",
    "VpwSignal",
    "FourierCoeffs",
    "evaluate",
    "fourier_coeffs",
    "bandlimited_evaluate",
    "amplitude_bound",
]


@dataclass(frozen=True)
class VpwPulse:
    """One Lorentzian pulse of a periodic train.

    Attributes
    ----------
    c : float
        Symmetric amplitude (signal units).
    d : float
        Asymmetric amplitude (signal units).
    r : float
        Pulse half-width in seconds, > 0. The r -> 0 limit is a Dirac
        impulse and is not representable.
    tau : float
        Delay in seconds. Normalized into [0, T) by the owning signal.
    """

    c: float
    d: float
    r: float
    tau: float

    def __post_init__(self):
        for name in ("c", "d", "r", "tau"):
            if not math.isfinite(getattr(self, name)):
                raise PreconditionError(f"non-finite pulse parameter {name!r}")
        if not self.r > 0.0:
            raise PreconditionError(f"pulse width must be > 0, got {self.r}")


@dataclass(frozen=True)
class VpwSignal:
    """A T-periodic train of K >= 1 variable-pulse-width pulses.

    Delays are normalized modulo the period on construction.
    """

    period: float
    pulses: tuple[VpwPulse, ...]

    def __post_init__(self):
        if not (math.isfinite(self.period) and self.period > 0.0):
            raise PreconditionError(f"period must be finite and > 0, got {self.period}")
        if len(self.pulses) < 1:
            raise PreconditionError("signal needs at least one pulse")
        normalized = tuple(
            p if 0.0 <= p.tau < self.period
            else VpwPulse(p.c, p.d, p.r, p.tau % self.period)
            for p in self.pulses
        )
        object.__setattr__(self, "pulses", normalized)

    @property
    def n_pulses(self) -> int:
        return len(self.pulses)

    def shifted(self, s: float) -> "VpwSignal":
        """Same train delayed by s seconds (delays wrap modulo T)."""
        return VpwSignal(
            self.period,
            tuple(VpwPulse(p.c, p.d, p.r, p.tau + s) for p in self.pulses),
        )

    def scaled(self, alpha: float) -> "VpwSignal":
        """Same train with both amplitudes scaled by alpha."""
        return VpwSignal(
            self.period,
            tuple(VpwPulse(alpha * p.c, alpha * p.d, p.r, p.tau) for p in self.pulses),
        )


@dataclass(frozen=True, eq=False)
class FourierCoeffs:
    """Fourier-series coefficients over harmonics m in {-M..-1, 1..M}.

    ``data`` stores X[m] at index ``m + m_max``. The m = 0 slot is kept
    only when ``has_dc`` is true (diagnostics); band-limited synthesis
    always ignores it. Instances are immutable.
    """

    m_max: int
    period: float
    data: np.ndarray = field(repr=False)
    has_dc: bool = False

    def __post_init__(self):
        if self.m_max < 1:
            raise PreconditionError(f"m_max must be >= 1, got {self.m_max}")
        if not (math.isfinite(self.period) and self.period > 0.0):
            raise PreconditionError(f"period must be finite and > 0, got {self.period}")
        data = np.asarray(self.data, dtype=np.complex128)
        if data.shape != (2 * self.m_max + 1,):
            raise PreconditionError(
                f"data must have length {2 * self.m_max + 1}, got {data.shape}"
            )
        data = data.copy()
        if not self.has_dc:
            data[self.m_max] = 0.0
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_positive(
        cls,
        m_max: int,
        period: float,
        positive: np.ndarray,
        dc: complex | None = None,
    ) -> "FourierCoeffs":
        """Build from X[1..M]; the negative side is mirrored by conjugation,
        which makes X[-m] == conj(X[m]) hold bit for bit."""
        positive = np.asarray(positive, dtype=np.complex128)
        if positive.shape != (m_max,):
            raise PreconditionError(f"need {m_max} positive coefficients, got {positive.shape}")
        data = np.zeros(2 * m_max + 1, dtype=np.complex128)
        data[m_max + 1 :] = positive
        data[:m_max] = np.conj(positive[::-1])
        if dc is not None:
            data[m_max] = dc
        return cls(m_max=m_max, period=period, data=data, has_dc=dc is not None)

    @classmethod
    def zeros(cls, m_max: int, period: float) -> "FourierCoeffs":
        return cls(m_max=m_max, period=period, data=np.zeros(2 * m_max + 1, dtype=np.complex128))

    def get(self, m: int) -> complex:
        if m == 0 and not self.has_dc:
            raise KeyError("m = 0 entry is absent (removed by the sampling kernel)")
        if not -self.m_max <= m <= self.m_max:
            raise KeyError(f"harmonic {m} outside |m| <= {self.m_max}")
        return complex(self.data[m + self.m_max])

    @property
    def positive(self) -> np.ndarray:
        """X[1..M] as a read-only view."""
        return self.data[self.m_max + 1 :]

    @property
    def n_entries(self) -> int:
        return 2 * self.m_max + (1 if self.has_dc else 0)

    def items(self):
        """(m, X[m]) pairs, skipping m = 0 unless the DC slot is kept."""
        for m in range(-self.m_max, self.m_max + 1):
            if m == 0 and not self.has_dc:
                continue
            yield m, complex(self.data[m + self.m_max])

    def conjugate_asymmetry(self) -> float:
        """Max |X[-m] - conj(X[m])|; zero for a real signal's spectrum."""
        neg = self.data[: self.m_max][::-1]
        pos = self.data[self.m_max + 1 :]
        return float(np.max(np.abs(neg - np.conj(pos)))) if self.m_max else 0.0

    def without_dc(self) -> "FourierCoeffs":
        return FourierCoeffs.from_positive(self.m_max, self.period, self.positive)


def _pulse_arrays(signal: VpwSignal):
    c = np.array([p.c for p in signal.pulses])
    d = np.array([p.d for p in signal.pulses])
    r = np.array([p.r for p in signal.pulses])
    tau = np.array([p.tau for p in signal.pulses])
    return c, d, r, tau


def evaluate(signal: VpwSignal, t, p_terms: int = 64):
    """Evaluate the pulse train at time(s) ``t``.

    The periodization sum over image index p is truncated to |p| <= p_terms
    and the remaining two tails are added analytically (integral plus a
    first-order Euler-Maclaurin correction), so the truncation error decays
    like p_terms**-5. The default of 64 image terms keeps it below 1e-10
    for unit-scale parameters; raising p_terms tightens it further.
    """
    if p_terms < 1:
        raise PreconditionError(f"p_terms must be >= 1, got {p_terms}")
    t_arr = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(t_arr)):
        raise PreconditionError("non-finite evaluation time")
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)

    T = signal.period
    c, d, r, tau = _pulse_arrays(signal)
    # Reduce the offset so p = 0 is the nearest image; shape (n_t, K).
    s = (t_arr[:, None] - tau[None, :] + T / 2.0) % T - T / 2.0

    p = np.arange(-p_terms, p_terms + 1)
    w = s[:, :, None] - T * p[None, None, :]
    num = c[None, :, None] * r[None, :, None] + d[None, :, None] * w
    out = np.sum(num / (np.pi * (r[None, :, None] ** 2 + w**2)), axis=(1, 2))

    # Analytic tails beyond |p| = p_terms. With q(w) = (c*r + d*w)/(pi*(r^2+w^2))
    # and edges a = s - (P+1/2)T (right images) and b = s + (P+1/2)T (left),
    # the two integrals combine into a finite expression; the log terms of the
    # asymmetric part cancel only when both sides are taken together.
    a = s - (p_terms + 0.5) * T
    b = s + (p_terms + 0.5) * T
    cc, dd, rr = c[None, :], d[None, :], r[None, :]
    integral = (
        (cc / np.pi) * (np.pi + np.arctan(a / rr) - np.arctan(b / rr))
        + (dd / (2.0 * np.pi)) * np.log((rr**2 + a**2) / (rr**2 + b**2))
    ) / T

    def q_prime(w_edge):
        den = rr**2 + w_edge**2
        return (dd * den - (cc * rr + dd * w_edge) * 2.0 * w_edge) / (np.pi * den**2)

    correction = T * (q_prime(b) - q_prime(a)) / 24.0
    out += np.sum(integral + correction, axis=1)
    return float(out[0]) if scalar else out


def fourier_coeffs(signal: VpwSignal, m_max: int) -> FourierCoeffs:
    """Closed-form Fourier-series coefficients X[-M..M] of the train.

    The DC slot X[0] = sum_k c_k / T is kept for diagnostics; the
    sampling kernel removes it before encoding.
    """
    if m_max < 1:
        raise PreconditionError(f"m_max must be >= 1, got {m_max}")
    T = signal.period
    c, d, r, tau = _pulse_arrays(signal)
    m = np.arange(1, m_max + 1)
    # (K, M): per-pulse coefficient at each positive harmonic.
    decay = np.exp(-2.0 * np.pi * (r[:, None] * m[None, :] + 1j * tau[:, None] * m[None, :]) / T)
    positive = np.sum((c[:, None] - 1j * d[:, None]) / T * decay, axis=0)
    dc = complex(np.sum(c) / T)
    return FourierCoeffs.from_positive(m_max, T, positive, dc=dc)


def bandlimited_evaluate(coeffs: FourierCoeffs, t, rtol: float = 1e-9):
    """Synthesize y(t) = sum_{m in M} X[m] exp(j*m*w0*t) from coefficients.

    Requires a conjugate-symmetric coefficient set (the spectrum of a real
    signal); the m = 0 slot, if present, is ignored. The returned value is
    exactly real because the sum is folded onto positive harmonics.
    """
    asym = coeffs.conjugate_asymmetry()
    scale = float(np.max(np.abs(coeffs.data))) or 1.0
    if asym > rtol * scale:
        raise PreconditionError(
            f"coefficients are not conjugate-symmetric (asymmetry {asym:.3e})"
        )
    t_arr = np.asarray(t, dtype=np.float64)
    scalar = t_arr.ndim == 0
    t_arr = np.atleast_1d(t_arr)
    w0 = 2.0 * np.pi / coeffs.period
    m = np.arange(1, coeffs.m_max + 1)
    phases = np.exp(1j * w0 * np.outer(t_arr, m))
    out = 2.0 * np.real(phases @ coeffs.positive)
    return float(out[0]) if scalar else out


def amplitude_bound(coeffs: FourierCoeffs) -> float:
    """Upper bound sum_{m in M} |X[m]| on max_t |y(t)| of the band-limited
    signal (triangle inequality; tight for a single cosine). DC excluded."""
    return float(2.0 * np.sum(np.abs(coeffs.positive)))
