"""temfri: time-encoded sub-Nyquist sampling and reconstruction of
pulse-train (ECG-like) signals, plus heart-rate monitoring tools.

The signal model is a periodic train of variable-width Lorentzian pulses
with closed-form Fourier coefficients. An integrate-and-fire encoder
turns the band-limited signal into firing times; the reconstruction
solves a Vandermonde least-squares system for the coefficients and an
annihilating-filter (Prony) step for the pulse parameters. Denoisers,
a heart-rate pipeline, and an experiment harness sit on top.
"""

from .denoise import (
    NoiseModel,
    ToeplitzData,
    add_noise,
    cadzow,
    matrix_pencil,
    pan_denoise,
    pisarenko,
    toeplitz_from_coeffs,
)
from .errors import (
    BandEmptyError,
    DegenerateInputError,
    FormatError,
    NonPhysicalRootError,
    PreconditionError,
    StageFailure,
    TemfriError,
    UnderdeterminedError,
)
from .experiments import ExperimentSpec, ResultTable, emit_plots, parameter_errors, run
from .hrm import (
    HrMetrics,
    HrmConfig,
    HrmResult,
    HrSeries,
    detect_r_peaks,
    hr_from_window,
    hr_series,
    hr_series_length,
    run_hrm_pipeline,
    score,
)
from .io import EcgRecord
from .model import (
    FourierCoeffs,
    VpwPulse,
    VpwSignal,
    amplitude_bound,
    bandlimited_evaluate,
    evaluate,
    fourier_coeffs,
)
from .recon import (
    AnnihilatingFilter,
    Measurements,
    ReconDiagnostics,
    ReconResult,
    annihilate,
    extract_params,
    measurements_from_times,
    reconstruct,
    solve_fsc,
    solve_fsc_detailed,
)
from .sampling import (
    FiringTimes,
    KernelSpec,
    TemParams,
    apply_kernel,
    discretize_record,
    encode,
    min_firing_rate,
    suggest_params,
)
from .synth import SyntheticSubject, ecg_beat_template, random_vpw_signal, synth_ecg_record

__version__ = "0.1.0"
