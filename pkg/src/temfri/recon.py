"""Recovery of pulse-train parameters from firing times.

The chain is: firing intervals -> measurements y_n -> partial sums z_n ->
least-squares solve of the Vandermonde-structured system z = B zhat for
the scaled coefficients -> annihilating-filter (Prony) root finding on
the positive-index coefficients -> pulse parameters from the roots.

With M kept harmonics the solve needs N - 1 >= 2M + 1 measurements; with
M >= 4K that means at least 8K + 2 firings per period.
"""

from __future__ import annotations

import math
import warnings
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import denoise as _dn
from .errors import (
    DegenerateInputError,
    NonPhysicalRootError,
    PreconditionError,
    StageFailure,
    TemfriError,
    UnderdeterminedError,
)
from .model import FourierCoeffs, VpwPulse, VpwSignal
from .sampling import FiringTimes, KernelSpec, TemParams

__all__ = [
    "Measurements",
    "ReconDiagnostics",
    "ReconResult",
    "AnnihilatingFilter",
    "measurements_from_times",
    "solve_fsc",
    "solve_fsc_detailed",
    "annihilate",
    "extract_params",
    "reconstruct",
]


@dataclass(frozen=True)
class Measurements:
    """Integrals y_n of the signal between consecutive firings and their
    running partial sums z_n.

    y_n = -b*(t_{n+1} - t_n) + kappa*delta holds exactly because each
    firing interval integrates the biased signal to kappa*delta.
    """

    y: np.ndarray
    z: np.ndarray
    source_times: FiringTimes
    tem: TemParams


@dataclass(frozen=True)
class ReconDiagnostics:
    firing_count: int
    lsq_residual: float
    condition_estimate: float
    annihilation_residual: float
    dc_slot: complex = 0j
    clamped_roots: int = 0


@dataclass(frozen=True)
class ReconResult:
    signal: VpwSignal
    coeffs: FourierCoeffs
    diagnostics: ReconDiagnostics


@dataclass(frozen=True)
class AnnihilatingFilter:
    """Filter h (length K + 1) whose convolution with X[1..M] vanishes,
    and its K polynomial roots."""

    filter: np.ndarray
    roots: np.ndarray
    residual: float


def measurements_from_times(times: FiringTimes, tem: TemParams) -> Measurements:
    """Signal integrals between firings and their partial sums."""
    t = times.times
    if t.size < 2:
        raise PreconditionError(f"need at least 2 firing times, got {t.size}")
    y = -tem.b * np.diff(t) + tem.kappa * tem.delta
    z = np.cumsum(y)
    return Measurements(y=y, z=z, source_times=times, tem=tem)


@dataclass(frozen=True)
class FscSolve:
    coeffs: FourierCoeffs
    dc_slot: complex
    lsq_residual: float
    condition_estimate: float


def solve_fsc_detailed(meas: Measurements, kernel: KernelSpec) -> FscSolve:
    """Least-squares recovery of the coefficients from partial sums.

    Builds B with rows [exp(-jMw0 t_n) ... 1 ... exp(jMw0 t_n)] over the
    firing times t_2..t_N and solves z = B zhat by a rank-revealing SVD
    factorization (never the normal equations; clustered firing times make
    B ill-conditioned). The coefficient at harmonic m is j*m*w0*zhat[m];
    the m = 0 slot absorbs the integration constant and is reported only
    as a diagnostic. Conjugate symmetry is enforced by averaging X[m] with
    conj(X[-m]).
    """
    m_max = kernel.m_max
    n_meas = meas.z.size
    needed = 2 * m_max + 1
    if n_meas < needed:
        raise UnderdeterminedError(
            f"underdetermined: {n_meas} partial sums for {needed} unknowns; "
            f"need at least {needed + 1} firing times"
        )
    t = meas.source_times.times[1:]
    w0 = kernel.omega0
    ms = np.arange(-m_max, m_max + 1)
    basis = np.exp(1j * w0 * np.outer(t, ms))
    zhat, _, rank, sv = np.linalg.lstsq(basis, meas.z.astype(np.complex128), rcond=None)
    if rank < needed:
        raise DegenerateInputError(
            f"rank-deficient system (rank {rank} < {needed}); "
            "firing times are too clustered or duplicated"
        )
    z_norm = float(np.linalg.norm(meas.z))
    residual = float(np.linalg.norm(basis @ zhat - meas.z)) / max(z_norm, 1e-300)
    condition = float(sv[0] / sv[-1]) if sv.size else math.inf

    x = 1j * ms * w0 * zhat
    pos = x[m_max + 1 :]
    neg = x[:m_max][::-1]
    averaged = 0.5 * (pos + np.conj(neg))
    coeffs = FourierCoeffs.from_positive(m_max, kernel.period, averaged)
    return FscSolve(
        coeffs=coeffs,
        dc_slot=complex(zhat[m_max]),
        lsq_residual=residual,
        condition_estimate=condition,
    )


def solve_fsc(meas: Measurements, kernel: KernelSpec) -> FourierCoeffs:
    """Coefficients recovered from the partial-sum system (see
    :func:`solve_fsc_detailed` for the numerics and diagnostics)."""
    return solve_fsc_detailed(meas, kernel).coeffs


def annihilate(coeffs: FourierCoeffs, k: int) -> AnnihilatingFilter:
    """Annihilating filter of the positive-index coefficient sequence.

    Only m >= 1 feeds the Toeplitz system; the spectrum has a cusp at
    m = 0 (the |m| decay), so mixing in negative indices would break the
    geometric-progression structure the filter relies on. The filter is
    the smallest right singular vector of the row-normalized Toeplitz
    lift (row scaling leaves the nullspace unchanged and evens out the
    geometric decay across rows); roots come from the companion-matrix
    eigenvalues of the filter polynomial.
    """
    if k < 1:
        raise PreconditionError(f"model order must be >= 1, got {k}")
    a = np.asarray(coeffs.positive)
    if a.size < 2 * k:
        raise PreconditionError(
            f"need at least {2 * k} positive-index coefficients for K={k}, got {a.size}"
        )
    norm = float(np.linalg.norm(a))
    if norm == 0.0:
        raise DegenerateInputError("all-zero coefficients cannot be annihilated")
    mat = _dn._toeplitz_matrix(a, k + 1)
    row_norms = np.linalg.norm(mat, axis=1, keepdims=True)
    scale = np.where(row_norms > 0.0, row_norms, 1.0)
    h = _dn.nullspace_filter(mat / scale)
    if abs(h[0]) < 1e-12 * float(np.linalg.norm(h)):
        raise DegenerateInputError("annihilating filter has a vanishing leading tap")
    roots = np.roots(h)
    if roots.size != k:
        raise DegenerateInputError(
            f"filter degenerated to {roots.size} roots, expected {k}"
        )
    res = float(np.linalg.norm(mat @ h)) / float(np.linalg.norm(mat, ord="fro"))
    return AnnihilatingFilter(filter=h, roots=roots, residual=res)


def extract_params(
    roots: np.ndarray,
    coeffs: FourierCoeffs,
    period: float,
    clamp_tol: float = 1e-6,
) -> tuple[VpwSignal, int]:
    """Pulse parameters from spectral roots u_k.

    Delays come from the root angles, tau = -T*angle(u)/(2*pi) normalized
    into [0, T); widths from the magnitudes, r = -T*log|u|/(2*pi), the
    sign chosen so that roots inside the unit circle give positive
    widths. Complex amplitudes v_k then solve the linear system
    X[m] = sum_k v_k u_k^m over positive m, with c = T*Re(v) and
    d = -T*Im(v) so that v = (c - j*d)/T round-trips.

    Roots with |u| in (1, 1 + clamp_tol] are clamped just inside the
    circle (noise can push a width across zero); anything farther out is
    rejected as non-physical. Returns the signal (pulses sorted by delay)
    and the number of clamped roots.
    """
    roots = np.asarray(roots, dtype=np.complex128)
    k = roots.size
    if k < 1:
        raise PreconditionError("need at least one root")
    mags = np.abs(roots)
    if np.any(mags == 0.0):
        raise NonPhysicalRootError("zero-magnitude root maps to an infinite width")
    over = mags > 1.0 + clamp_tol
    if np.any(over):
        raise NonPhysicalRootError(
            f"{int(np.sum(over))} root(s) with |u| > 1 + {clamp_tol:g} "
            "imply negative pulse widths"
        )
    clamp = mags > 1.0
    clamped = int(np.sum(clamp))
    if clamped:
        roots = np.where(clamp, roots / mags * (1.0 - 1e-9), roots)
    if k > 1:
        dists = np.abs(roots[:, None] - roots[None, :])[np.triu_indices(k, 1)]
        if np.min(dists) < 1e-12:
            raise DegenerateInputError("repeated spectral roots; pulses are not identifiable")

    tau = (-period * np.angle(roots) / (2.0 * np.pi)) % period
    r = -period * np.log(np.abs(roots)) / (2.0 * np.pi)

    a = np.asarray(coeffs.positive)
    m = np.arange(1, a.size + 1)
    vander = roots[None, :] ** m[:, None]
    v, *_ = np.linalg.lstsq(vander, a, rcond=None)
    c = period * np.real(v)
    d = -period * np.imag(v)

    order = np.argsort(tau)
    pulses = tuple(
        VpwPulse(c=float(c[i]), d=float(d[i]), r=float(r[i]), tau=float(tau[i]))
        for i in order
    )
    return VpwSignal(period=period, pulses=pulses), clamped


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageFailure:
        raise
    except TemfriError as err:
        raise StageFailure(name, err) from err


def reconstruct(
    times: FiringTimes,
    tem: TemParams,
    kernel: KernelSpec,
    k: int,
    denoiser: str | Callable[[FourierCoeffs], FourierCoeffs] | None = None,
    noise_model: _dn.NoiseModel | None = None,
    denoise_iters: int = 10,
    root_clamp_tol: float = 1e-6,
) -> ReconResult:
    """Full parameter recovery from firing times.

    ``denoiser`` may be None, one of "cadzow", "pan", "matrix_pencil", or
    a callable mapping coefficients to coefficients; it runs between the
    coefficient solve and the annihilation step. "matrix_pencil" skips the
    annihilating filter and takes its subspace roots directly.
    ``noise_model`` perturbs the recovered coefficients first (used by the
    synthetic noise studies; acquisition itself is noise-free here).
    ``root_clamp_tol`` bounds how far outside the unit circle a root may
    sit before the window is rejected instead of clamped; exact-model
    recovery keeps the tight default, whereas windowed real data needs a
    generous one because neighboring-beat leakage inflates magnitudes.

    Failures carry the stage label that produced them.
    """
    if not kernel.supports_order(k):
        raise PreconditionError(
            f"kernel keeps M={kernel.m_max} harmonics but K={k} pulses need M >= {4 * k}"
        )
    needed = 2 * kernel.m_max + 2
    if times.n < needed:
        raise UnderdeterminedError(
            f"underdetermined: got {times.n} firing times, need at least {needed}"
        )

    with _stage("measurements"):
        meas = measurements_from_times(times, tem)
    with _stage("solve_fsc"):
        solve = solve_fsc_detailed(meas, kernel)
    coeffs = solve.coeffs

    if noise_model is not None:
        with _stage("add_noise"):
            coeffs = _dn.add_noise(coeffs, noise_model)

    roots = None
    filt_residual = math.nan
    if callable(denoiser):
        with _stage("denoise"):
            coeffs = denoiser(coeffs)
    elif denoiser == "cadzow":
        with _stage("denoise"):
            coeffs = _dn.cadzow(coeffs, k, iters=denoise_iters)
    elif denoiser == "pan":
        with _stage("denoise"):
            coeffs = _dn.pan_denoise(coeffs, k, iters=denoise_iters)
    elif denoiser == "matrix_pencil":
        with _stage("denoise"):
            roots = _dn.matrix_pencil(coeffs, k)
    elif denoiser is not None:
        raise PreconditionError(f"unknown denoiser {denoiser!r}")

    if roots is None:
        with _stage("annihilate"):
            ann = annihilate(coeffs, k)
        roots = ann.roots
        filt_residual = ann.residual
    else:
        # Residual of the filter implied by the subspace roots.
        h = np.poly(roots)
        mat = _dn._toeplitz_matrix(np.asarray(coeffs.positive), k + 1)
        filt_residual = float(np.linalg.norm(mat @ h) / (np.linalg.norm(mat, ord="fro") * np.linalg.norm(h)))

    with _stage("extract_params"):
        signal, clamped = extract_params(roots, coeffs, kernel.period, clamp_tol=root_clamp_tol)

    diag = ReconDiagnostics(
        firing_count=times.n,
        lsq_residual=solve.lsq_residual,
        condition_estimate=solve.condition_estimate,
        annihilation_residual=filt_residual,
        dc_slot=solve.dc_slot,
        clamped_roots=clamped,
    )
    return ReconResult(signal=signal, coeffs=coeffs, diagnostics=diag)
