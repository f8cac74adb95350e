"""Versioned binary checkpoint for trained models ("SDG1" format).

Layout, all multi-byte values little-endian:

    magic      4 bytes   b"SDG1"
    version    uint32    currently 1
    K, T, H, N uint32    atoms, signal length, hidden width, training images
    has_prior  uint32    0 or 1

followed by float64 fields in this exact order:

    config echo (12 values): epochs, batch_size, learning_rate, lambda_stft,
        adam_beta1, adam_beta2, adam_epsilon, seed, frame_length, hop_length,
        window code (0 hann, 1 rectangular), mixing-init code (0 zeros, 1 ridge)
    base_amplitude        K
    base_frequency        K
    base_phase            K
    modnet_input_weights  H
    modnet_input_bias     H
    modnet_output_weights 3*K*H   row-major
    modnet_output_bias    3*K
    mixing                N*K     row-major
    prior_mean            K       only when has_prior
    prior_covariance      K*K     row-major, only when has_prior

The prior's Cholesky factor is recomputed on load (deterministically), so a
write -> read -> write cycle is byte-identical. Unknown versions and any
truncated or oversized payload are rejected with the offending field named.
Writes go through a temp file plus atomic rename, so an aborted run never
leaves a corrupt checkpoint behind.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dictionary import ModulationNetwork, SpectralDictionary
from .exceptions import CheckpointError
from .prior import GaussianPrior, cholesky
from .stft import StftConfig
from .training import TrainConfig

MAGIC = b"SDG1"
VERSION = 1
_WINDOW_CODES = {"hann": 0.0, "rectangular": 1.0}
_MIXING_INIT_CODES = {"zeros": 0.0, "ridge": 1.0}
_MAX_EXACT_INT = 2**53


@dataclass
class Checkpoint:
    """Everything needed to resume, evaluate, or sample a trained model."""

    dictionary: SpectralDictionary
    mixing: np.ndarray
    config: TrainConfig
    signal_length: int
    prior: GaussianPrior | None = None

    @property
    def n_atoms(self) -> int:
        return self.dictionary.n_atoms


def _config_echo(cfg: TrainConfig) -> np.ndarray:
    seed = float(cfg.seed)
    if abs(cfg.seed) > _MAX_EXACT_INT:
        raise CheckpointError(f"seed {cfg.seed} is not exactly representable as float64")
    return np.array(
        [
            float(cfg.epochs),
            float(cfg.batch_size),
            cfg.learning_rate,
            cfg.lambda_stft,
            cfg.adam_beta1,
            cfg.adam_beta2,
            cfg.adam_epsilon,
            seed,
            float(cfg.stft.frame_length),
            float(cfg.stft.hop_length),
            _WINDOW_CODES[cfg.stft.window],
            _MIXING_INIT_CODES[cfg.mixing_init],
        ],
        dtype=np.float64,
    )


def _config_from_echo(echo: np.ndarray, n_atoms: int, hidden_width: int) -> TrainConfig:
    windows = {v: k for k, v in _WINDOW_CODES.items()}
    inits = {v: k for k, v in _MIXING_INIT_CODES.items()}
    if echo[10] not in windows:
        raise CheckpointError(f"unknown window code {echo[10]}")
    if echo[11] not in inits:
        raise CheckpointError(f"unknown mixing-init code {echo[11]}")
    return TrainConfig(
        epochs=int(echo[0]),
        batch_size=int(echo[1]),
        learning_rate=float(echo[2]),
        lambda_stft=float(echo[3]),
        adam_beta1=float(echo[4]),
        adam_beta2=float(echo[5]),
        adam_epsilon=float(echo[6]),
        seed=int(echo[7]),
        n_atoms=n_atoms,
        hidden_width=hidden_width,
        stft=StftConfig(
            frame_length=int(echo[8]),
            hop_length=int(echo[9]),
            window=windows[echo[10]],
        ),
        mixing_init=inits[echo[11]],
    )


def checkpoint_bytes(ckpt: Checkpoint) -> bytes:
    """Serialize a checkpoint to its canonical byte string."""
    d = ckpt.dictionary
    net = d.modnet
    k = d.n_atoms
    h = net.hidden_width
    mixing = np.ascontiguousarray(ckpt.mixing, dtype=np.float64)
    if mixing.ndim != 2 or mixing.shape[1] != k:
        raise CheckpointError(f"mixing matrix must be (N, {k}), got {mixing.shape}")
    n = mixing.shape[0]

    parts = [
        MAGIC,
        struct.pack(
            "<6I", VERSION, k, ckpt.signal_length, h, n, 0 if ckpt.prior is None else 1
        ),
        _config_echo(ckpt.config).tobytes(),
        d.base_amplitude.astype("<f8").tobytes(),
        d.base_frequency.astype("<f8").tobytes(),
        d.base_phase.astype("<f8").tobytes(),
        net.input_weights.astype("<f8").tobytes(),
        net.input_bias.astype("<f8").tobytes(),
        np.ascontiguousarray(net.output_weights).astype("<f8").tobytes(),
        net.output_bias.astype("<f8").tobytes(),
        mixing.astype("<f8").tobytes(),
    ]
    if ckpt.prior is not None:
        if ckpt.prior.dim != k:
            raise CheckpointError(
                f"prior dimension {ckpt.prior.dim} does not match K={k}"
            )
        parts.append(ckpt.prior.mean.astype("<f8").tobytes())
        parts.append(np.ascontiguousarray(ckpt.prior.covariance).astype("<f8").tobytes())
    return b"".join(parts)


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    payload = checkpoint_bytes(ckpt)
    target = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=target.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.offset = 0
        self.path = path

    def take(self, count: int, field: str) -> bytes:
        end = self.offset + count
        if end > len(self.blob):
            raise CheckpointError(
                f"{self.path}: truncated checkpoint, field '{field}' needs "
                f"{count} bytes at offset {self.offset} but only "
                f"{len(self.blob) - self.offset} remain"
            )
        chunk = self.blob[self.offset : end]
        self.offset = end
        return chunk

    def floats(self, count: int, field: str) -> np.ndarray:
        raw = self.take(8 * count, field)
        return np.frombuffer(raw, dtype="<f8").copy()


def load_checkpoint(path) -> Checkpoint:
    """Read and validate a checkpoint file.

    Raises
    ------
    CheckpointError
        On wrong magic, unsupported version, truncation (naming the missing
        field), or trailing bytes.
    """
    blob = Path(path).read_bytes()
    reader = _Reader(blob, path)
    magic = reader.take(4, "magic")
    if magic != MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    version, k, t, h, n, has_prior = struct.unpack("<6I", reader.take(24, "header"))
    if version != VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {version}, expected {VERSION}"
        )
    if has_prior not in (0, 1):
        raise CheckpointError(f"{path}: invalid has_prior flag {has_prior}")

    echo = reader.floats(12, "config")
    config = _config_from_echo(echo, n_atoms=k, hidden_width=h)
    dictionary = SpectralDictionary(
        base_amplitude=reader.floats(k, "base_amplitude"),
        base_frequency=reader.floats(k, "base_frequency"),
        base_phase=reader.floats(k, "base_phase"),
        modnet=ModulationNetwork(
            input_weights=reader.floats(h, "modnet_input_weights"),
            input_bias=reader.floats(h, "modnet_input_bias"),
            output_weights=reader.floats(3 * k * h, "modnet_output_weights").reshape(
                3 * k, h
            ),
            output_bias=reader.floats(3 * k, "modnet_output_bias"),
        ),
    )
    mixing = reader.floats(n * k, "mixing").reshape(n, k)
    prior = None
    if has_prior:
        mean = reader.floats(k, "prior_mean")
        cov = reader.floats(k * k, "prior_covariance").reshape(k, k)
        prior = GaussianPrior(mean=mean, covariance=cov, chol=cholesky(cov))
    if reader.offset != len(blob):
        raise CheckpointError(
            f"{path}: {len(blob) - reader.offset} unexpected trailing bytes"
        )
    return Checkpoint(
        dictionary=dictionary,
        mixing=mixing,
        config=config,
        signal_length=t,
        prior=prior,
    )
