"""Spectral dictionary learning generative model.

Flattened images are modeled as linear mixtures of K learned sinusoidal atoms
with time-varying amplitude/frequency/phase; training jointly optimizes the
atoms, a small time-modulation network, and per-image mixing coefficients
under a combined time-domain MSE and STFT-magnitude L1 objective. A Gaussian
prior fitted over the coefficients turns the model generative: sampling plus
one linear synthesis step produces a new image.
"""

import os as _os

# SDG_THREADS controls BLAS parallelism; 0 means single-threaded deterministic
# mode. Translated before numpy loads (no effect if numpy is already imported).
_threads = _os.environ.get("SDG_THREADS")
if _threads is not None and _threads.strip():
    _n = "1" if _threads.strip() == "0" else _threads.strip()
    for _var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS"):
        _os.environ.setdefault(_var, _n)
del _os, _threads

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .dataset import (
    ImageSignal,
    make_time_grid,
    normalize_bytes,
    denormalize_to_bytes,
    read_cifar_batch,
    read_png,
    signals_to_matrix,
    write_cifar_batch,
    write_png,
)
from .dictionary import (
    ModulationNetwork,
    SpectralDictionary,
    reconstruct,
    sigmoid,
    softplus,
    softplus_inverse,
    synthesize_basis,
)
from .estimator import SpectralDictionaryLearning
from .exceptions import (
    CheckpointError,
    CifarFormatError,
    CorruptRecordError,
    MissingPriorError,
    NotPositiveDefiniteError,
    SingularMatrixError,
    TrainingDivergedError,
)
from .prior import (
    GaussianPrior,
    cholesky,
    fit_gaussian,
    generate,
    sample_prior,
    samples_from_noise,
)
from .stft import StftConfig, fft, loss_freq, naive_dft, stft_magnitude
from .training import (
    AdamState,
    EpochStats,
    GradientCheckReport,
    ParameterLayout,
    TrainConfig,
    TrainResult,
    adam_step,
    backward,
    encode_ridge,
    encode_ridge_batch,
    gradient_check,
    loss_time,
    total_loss,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Checkpoint",
    "CheckpointError",
    "CifarFormatError",
    "CorruptRecordError",
    "EpochStats",
    "GaussianPrior",
    "GradientCheckReport",
    "ImageSignal",
    "MissingPriorError",
    "ModulationNetwork",
    "NotPositiveDefiniteError",
    "ParameterLayout",
    "SingularMatrixError",
    "SpectralDictionary",
    "SpectralDictionaryLearning",
    "StftConfig",
    "TrainConfig",
    "TrainResult",
    "TrainingDivergedError",
    "adam_step",
    "backward",
    "cholesky",
    "denormalize_to_bytes",
    "encode_ridge",
    "encode_ridge_batch",
    "fft",
    "fit_gaussian",
    "generate",
    "gradient_check",
    "load_checkpoint",
    "loss_freq",
    "loss_time",
    "make_time_grid",
    "naive_dft",
    "normalize_bytes",
    "read_cifar_batch",
    "read_png",
    "reconstruct",
    "sample_prior",
    "samples_from_noise",
    "save_checkpoint",
    "sigmoid",
    "signals_to_matrix",
    "softplus",
    "softplus_inverse",
    "stft_magnitude",
    "synthesize_basis",
    "total_loss",
    "train",
    "write_cifar_batch",
    "write_png",
]
