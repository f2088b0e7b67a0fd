"""Independent oracles used across the test suite.

These deliberately avoid the library's computational paths: the closed
form uses the periodic-kernel identity, the quadrature oracle integrates
the time-domain signal, and the encoder oracle integrates on a dense
grid. They exist so the implementations are checked against a different
route to the same number.
"""

import numpy as np
from scipy.integrate import cumulative_trapezoid

from temfri import bandlimited_evaluate


def plain_series_sum(signal, t, p_terms):
    """Bare truncated periodization sum over |p| <= p_terms, no tail
    correction. Converges like 1/p_terms."""
    total = 0.0
    for p in signal.pulses:
        ps = np.arange(-p_terms, p_terms + 1)
        w = t - p.tau - ps * signal.period
        total += np.sum((p.c * p.r + p.d * w) / (np.pi * (p.r**2 + w**2)))
    return total


def closed_form_eval(signal, t):
    """Exact periodized-Lorentzian value via the Poisson-kernel identity."""
    T = signal.period
    out = 0.0
    for p in signal.pulses:
        q = np.exp(-2.0 * np.pi * p.r / T)
        th = 2.0 * np.pi * (t - p.tau) / T
        den = 1.0 - 2.0 * q * np.cos(th) + q * q
        out += (p.c / T) * (1.0 - q * q) / den + (p.d / T) * (2.0 * q * np.sin(th)) / den
    return out


def quadrature_fsc(signal, m, n_grid=8192):
    """Coefficient X[m] by discrete quadrature of the time-domain signal
    over one period (spectral accuracy for smooth integrands)."""
    T = signal.period
    tt = np.arange(n_grid) * (T / n_grid)
    x = np.array([closed_form_eval(signal, t) for t in tt])
    spectrum = np.fft.fft(x) / n_grid
    return spectrum[m % n_grid]


def dense_encoder_oracle(coeffs, tem, horizon, t0=0.0, n_grid=10**6):
    """Firing times from brute-force cumulative trapezoid integration of
    the biased signal on an (n_grid + 1)-point grid."""
    grid = t0 + np.linspace(0.0, horizon, n_grid + 1)
    y = bandlimited_evaluate(coeffs, grid)
    cum = cumulative_trapezoid(y + tem.b, grid, initial=0.0) / tem.kappa
    n_max = int(np.floor(cum[-1] / tem.delta))
    levels = np.arange(1, n_max + 1) * tem.delta
    idx = np.searchsorted(cum, levels)
    lo = idx - 1
    frac = (levels - cum[lo]) / (cum[idx] - cum[lo])
    return grid[lo] + frac * (grid[idx] - grid[lo])


def circular_diff(a, b, period):
    d = np.abs(np.asarray(a) - np.asarray(b)) % period
    return np.minimum(d, period - d)
