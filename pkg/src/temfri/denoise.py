"""Denoisers for noisy Fourier-series coefficients.

All four estimators operate on the positive-index coefficients X[1..M]
(the spectrum of a K-pulse train restricted to m >= 1 is a sum of K
geometric progressions, so its Toeplitz lift has rank K). Outputs are
mirrored back onto negative indices by conjugation, which preserves the
real-signal symmetry exactly.

Noise is modeled as complex white Gaussian perturbations of the
coefficients with conjugate symmetry, injected after acquisition.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DegenerateInputError, PreconditionError
from .model import FourierCoeffs

__all__ = [
    "NoiseModel",
    "ToeplitzData",
    "add_noise",
    "cadzow",
    "matrix_pencil",
    "pisarenko",
    "pan_denoise",
    "toeplitz_from_coeffs",
    "nullspace_filter",
]

SnrConvention = Literal["signal-power-ratio", "per-coefficient-variance"]


@dataclass(frozen=True)
class NoiseModel:
    """Additive complex Gaussian noise on the coefficients.

    ``signal-power-ratio`` spreads a total noise power of
    P_signal / 10^(snr/10) uniformly over the 2M coefficients.
    ``per-coefficient-variance`` sets each coefficient's noise variance to
    10^(-snr/10) outright (SNR read as the inverse noise variance).
    """

    snr_db: float
    seed: int
    convention: SnrConvention = "signal-power-ratio"

    def __post_init__(self):
        if math.isnan(self.snr_db):
            raise PreconditionError("snr_db must not be NaN")
        if self.convention not in ("signal-power-ratio", "per-coefficient-variance"):
            raise PreconditionError(f"unknown SNR convention {self.convention!r}")


@dataclass(frozen=True)
class ToeplitzData:
    """Toeplitz lift of consecutive positive-index coefficients.

    Row i of ``matrix`` is [a[c-1+i], a[c-2+i], ..., a[i]] for the
    coefficient vector a = X[1..M], so ``matrix @ h`` evaluates the
    convolution of the filter h with the coefficient sequence. Rank is at
    most K for a noiseless K-pulse spectrum.
    """

    matrix: np.ndarray
    rows: int
    cols: int

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.complex128)
        if m.shape != (self.rows, self.cols):
            raise PreconditionError(f"matrix shape {m.shape} != ({self.rows}, {self.cols})")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)


def _toeplitz_matrix(a: np.ndarray, cols: int) -> np.ndarray:
    rows = a.size - cols + 1
    if rows < 1:
        raise PreconditionError(f"need at least {cols} coefficients, got {a.size}")
    idx = (cols - 1) + np.arange(rows)[:, None] - np.arange(cols)[None, :]
    return a[idx]


def toeplitz_from_coeffs(coeffs: FourierCoeffs, cols: int) -> ToeplitzData:
    """Toeplitz lift of X[1..M] with the given column count."""
    a = np.asarray(coeffs.positive)
    m = _toeplitz_matrix(a, cols)
    return ToeplitzData(matrix=m, rows=m.shape[0], cols=cols)


def _diagonal_average(mat: np.ndarray, length: int) -> np.ndarray:
    """Average anti-shifted diagonals (constant i - j) back to a sequence."""
    rows, cols = mat.shape
    out = np.zeros(length, dtype=np.complex128)
    counts = np.zeros(length)
    jj, ii = np.meshgrid(np.arange(cols), np.arange(rows))
    idx = (cols - 1) + ii - jj
    np.add.at(out, idx.ravel(), mat.ravel())
    np.add.at(counts, idx.ravel(), 1.0)
    return out / counts


def nullspace_filter(matrix: np.ndarray, tie_rtol: float = 1e-12) -> np.ndarray:
    """Right singular vector of the smallest singular value, unit norm.

    Raises when the two smallest singular values tie (within ``tie_rtol``
    of the largest), because the nullspace is then ambiguous.
    """
    u, s, vh = np.linalg.svd(matrix)
    if s[0] == 0.0:
        raise DegenerateInputError("all-zero matrix has no unique nullspace vector")
    if s.size >= 2 and (s[-2] - s[-1]) <= tie_rtol * s[0]:
        raise DegenerateInputError(
            "tied smallest singular values: annihilating filter is ambiguous"
        )
    return np.conj(vh[-1])


def add_noise(coeffs: FourierCoeffs, model: NoiseModel) -> FourierCoeffs:
    """Perturb coefficients with seeded conjugate-symmetric Gaussian noise."""
    if math.isinf(model.snr_db):
        return coeffs
    pos = np.asarray(coeffs.positive)
    m = coeffs.m_max
    if model.convention == "signal-power-ratio":
        power = 2.0 * float(np.sum(np.abs(pos) ** 2))
        var = power * 10.0 ** (-model.snr_db / 10.0) / (2 * m)
    else:
        var = 10.0 ** (-model.snr_db / 10.0)
    rng = np.random.default_rng(model.seed)
    sigma = math.sqrt(var / 2.0)
    zeta = sigma * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
    return FourierCoeffs.from_positive(m, coeffs.period, pos + zeta)


def cadzow(
    coeffs: FourierCoeffs,
    k: int,
    iters: int = 10,
    rank_tol: float = 1e-10,
) -> FourierCoeffs:
    """Alternating projections between rank-K matrices and Toeplitz
    structure on the lift of X[1..M] (SVD truncation, then diagonal
    averaging). Stops early once sigma_{K+1} <= rank_tol * sigma_1; if
    that never happens the best iterate seen is returned with a warning.
    """
    if k < 1:
        raise PreconditionError(f"rank target must be >= 1, got {k}")
    if iters < 0:
        raise PreconditionError("iteration count must be >= 0")
    a = np.asarray(coeffs.positive).copy()
    length = a.size
    cols = max(k + 1, (length + 1) // 2)
    rows = length - cols + 1
    if rows < k + 1 or cols < k + 1:
        raise PreconditionError(
            f"need at least {2 * k + 1} positive coefficients for rank {k}, got {length}"
        )
    if iters == 0:
        return coeffs

    best = a
    best_excess = math.inf
    converged = False
    for _ in range(iters):
        mat = _toeplitz_matrix(a, cols)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        excess = s[k] / s[0] if s[0] > 0.0 else 0.0
        low_rank = (u[:, :k] * s[:k]) @ vh[:k, :]
        a = _diagonal_average(low_rank, length)
        if excess < best_excess:
            best_excess = excess
            best = a
        if excess <= rank_tol:
            converged = True
            break
    if not converged:
        mat = _toeplitz_matrix(a, cols)
        s = np.linalg.svd(mat, compute_uv=False)
        excess = s[k] / s[0] if s[0] > 0.0 else 0.0
        if excess < best_excess:
            best = a
        else:
            warnings.warn(
                f"rank reduction stalled (sigma_{k + 1}/sigma_1 = {best_excess:.3e}); "
                "returning best iterate",
                stacklevel=2,
            )
            a = best
    return FourierCoeffs.from_positive(coeffs.m_max, coeffs.period, a)


def matrix_pencil(coeffs: FourierCoeffs, k: int, rank_rtol: float = 1e-12) -> np.ndarray:
    """Non-iterative subspace estimate of the K spectral roots u_k.

    Builds a Hankel matrix from X[1..M], takes the K-dimensional row
    space, and solves the shift-invariance relation between its two
    column-shifted copies (generalized eigenvalues). Exact for noiseless
    data.
    """
    a = np.asarray(coeffs.positive)
    if a.size < 2 * k + 1:
        raise PreconditionError(
            f"need at least {2 * k + 1} positive coefficients for K={k}, got {a.size}"
        )
    pencil = a.size // 2
    pencil = min(max(pencil, k), a.size - k - 1)
    rows = a.size - pencil
    hankel = a[np.arange(rows)[:, None] + np.arange(pencil + 1)[None, :]]
    u, s, vh = np.linalg.svd(hankel)
    if s[0] == 0.0 or s[k - 1] <= rank_rtol * s[0]:
        raise DegenerateInputError(
            f"rank collapse: fewer than {k} significant singular values"
        )
    # Rows of vh[:k] span the same space as the geometric rows (u_k^j)_j, so
    # shifting the column index multiplies that basis by diag(u_k).
    w = vh[:k]
    psi = w[:, 1:] @ np.linalg.pinv(w[:, :-1])
    return np.linalg.eigvals(psi)


def pisarenko(toeplitz: ToeplitzData) -> np.ndarray:
    """Annihilating-filter estimate: the right singular vector of the
    smallest singular value of the Toeplitz lift (cols = K + 1)."""
    return nullspace_filter(toeplitz.matrix)


def _conv_matrix(h: np.ndarray, length: int) -> np.ndarray:
    """Operator C with C @ x = conv(h, x) restricted to valid rows."""
    k = h.size - 1
    conv = np.zeros((length - k, length), dtype=np.complex128)
    for i in range(length - k):
        conv[i, i : i + k + 1] = h[::-1]
    return conv


def _pan_objective(noisy: np.ndarray, h: np.ndarray) -> float:
    """Squared distance from ``noisy`` to the subspace annihilated by h."""
    conv = _conv_matrix(h, noisy.size)
    r = conv @ noisy
    s = np.linalg.solve(conv @ np.conj(conv.T), r)
    return float(np.real(np.vdot(r, s)))


def pan_denoise(
    coeffs: FourierCoeffs,
    k: int,
    iters: int = 10,
    improve_tol: float = 1e-10,
) -> FourierCoeffs:
    """Iterative coefficient denoiser (reweighted annihilating filter).

    Minimizes |noisy - x|^2 over pairs (x, h) with conv(h, x) = 0. For a
    fixed filter the optimal x is the least-squares projection onto the
    annihilated subspace, whose squared distance is
    (G h)^H (C_h C_h^H)^-1 (G h) with G the Toeplitz lift of the noisy
    coefficients and C_h the filter's convolution operator. Each iteration
    refits h as the smallest eigenvector of that quadratic form, with the
    weight frozen at the previous filter; the projection operator is thus
    rebuilt every pass. The best-objective filter seen produces the
    output; non-convergence within ``iters`` only warns.
    """
    if k < 1:
        raise PreconditionError(f"model order must be >= 1, got {k}")
    if iters < 0:
        raise PreconditionError("iteration count must be >= 0")
    noisy = np.asarray(coeffs.positive)
    length = noisy.size
    if length < 2 * k + 1:
        raise PreconditionError(
            f"need at least {2 * k + 1} positive coefficients for K={k}, got {length}"
        )
    if iters == 0 or not np.any(noisy):
        return coeffs

    data_lift = _toeplitz_matrix(noisy, k + 1)
    h = nullspace_filter(data_lift)
    best_h = h
    best_obj = _pan_objective(noisy, h)
    prev_obj = best_obj
    converged = best_obj == 0.0
    for _ in range(iters - 1):
        if converged:
            break
        conv = _conv_matrix(h, length)
        try:
            weighted = np.linalg.solve(conv @ np.conj(conv.T), data_lift)
        except np.linalg.LinAlgError:
            warnings.warn("filter weight matrix singular; stopping early", stacklevel=2)
            break
        quad = np.conj(data_lift.T) @ weighted
        quad = 0.5 * (quad + np.conj(quad.T))
        _, vecs = np.linalg.eigh(quad)
        h = vecs[:, 0]
        obj = _pan_objective(noisy, h)
        if obj < best_obj:
            best_obj = obj
            best_h = h
        if abs(prev_obj - obj) <= improve_tol * max(best_obj, 1e-300):
            converged = True
        prev_obj = obj
    if not converged and iters > 1:
        warnings.warn(
            "objective still improving after the final iteration; "
            "returning the best filter seen",
            stacklevel=2,
        )

    conv = _conv_matrix(best_h, length)
    gram = conv @ np.conj(conv.T)
    estimate = noisy - np.conj(conv.T) @ np.linalg.solve(gram, conv @ noisy)
    return FourierCoeffs.from_positive(coeffs.m_max, coeffs.period, estimate)
