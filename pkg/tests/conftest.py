"""Shared fixtures: synthetic CIFAR-format data and small model builders."""

import numpy as np
import pytest

from specdict.dataset import denormalize_to_bytes, write_cifar_batch
from specdict.dictionary import ModulationNetwork, SpectralDictionary


def cifar_like_images(n: int, seed: int) -> np.ndarray:
    """Smooth, channel-correlated 32x32x3 fields with mild texture, in [-1, 1].

    Statistically close to natural thumbnails: most energy in low spatial
    frequencies shared across channels, a small per-channel component, and a
    faint high-frequency texture. Returned flattened channel-major, (n, 3072).
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:32, 0:32] / 32.0
    out = np.empty((n, 3072))
    for i in range(n):
        base = rng.uniform(-0.25, 0.25) * np.ones((32, 32))
        for _ in range(4):
            fx, fy = rng.uniform(0.2, 2.0, size=2)
            px, py = rng.uniform(0, 2 * np.pi, size=2)
            base = base + rng.uniform(0.1, 0.3) * np.cos(
                2 * np.pi * fx * xx + px
            ) * np.cos(2 * np.pi * fy * yy + py)
        chans = []
        for _c in range(3):
            own = rng.uniform(-0.1, 0.1) * np.ones((32, 32))
            for _ in range(2):
                fx, fy = rng.uniform(0.2, 2.5, size=2)
                own = own + rng.uniform(0.03, 0.12) * np.cos(
                    2 * np.pi * (fx * xx + fy * yy) + rng.uniform(0, 2 * np.pi)
                )
            tex = 0.03 * np.cos(
                2 * np.pi * (rng.uniform(3, 7) * xx + rng.uniform(3, 7) * yy)
                + rng.uniform(0, 2 * np.pi)
            )
            chans.append(0.85 * base + own + tex)
        out[i] = np.clip(np.stack(chans), -0.97, 0.97).ravel()
    return out


def write_cifar_like_file(path, n: int, seed: int) -> np.ndarray:
    """Write n synthetic records in CIFAR-10 binary layout; returns the floats
    that a reader will see after byte quantization."""
    images = cifar_like_images(n, seed)
    raw = denormalize_to_bytes(images)
    labels = np.random.default_rng(seed + 1).integers(0, 10, size=n)
    write_cifar_batch(path, raw, labels)
    return 2.0 * (raw.astype(np.float64) / 255.0) - 1.0


def smooth_image(seed: int = 7, contrast: float = 1.0) -> np.ndarray:
    """One smooth natural-thumbnail surrogate, shape (1, 3072).

    ``contrast`` scales the field before clipping; low values mimic the dim,
    low-contrast frames that are common in natural thumbnail data.
    """
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:32, 0:32] / 32.0
    base = rng.uniform(-0.25, 0.25) * np.ones((32, 32))
    for _ in range(3):
        fx, fy = rng.uniform(0.2, 1.2, size=2)
        px, py = rng.uniform(0, 2 * np.pi, size=2)
        base = base + rng.uniform(0.1, 0.3) * np.cos(2 * np.pi * fx * xx + px) * np.cos(
            2 * np.pi * fy * yy + py
        )
    chans = []
    for _c in range(3):
        own = rng.uniform(-0.08, 0.08) * np.ones((32, 32))
        for _ in range(2):
            fx, fy = rng.uniform(0.2, 1.2, size=2)
            own = own + rng.uniform(0.02, 0.08) * np.cos(
                2 * np.pi * (fx * xx + fy * yy) + rng.uniform(0, 2 * np.pi)
            )
        chans.append(0.9 * base + own)
    return np.clip(contrast * np.stack(chans), -0.97, 0.97).ravel()[None, :]


def tiny_dictionary(n_atoms=3, hidden_width=2, seed=0, randomize_output=False):
    """Small dictionary with every parameter away from zero when asked."""
    rng = np.random.default_rng(seed)
    d = SpectralDictionary.initialize(n_atoms, hidden_width, 64, rng)
    if randomize_output:
        d.modnet.output_weights += rng.normal(scale=0.3, size=d.modnet.output_weights.shape)
        d.modnet.output_bias += rng.normal(scale=0.3, size=d.modnet.output_bias.shape)
    return d


def zero_modnet_dictionary(base_amplitude, base_frequency, base_phase, hidden_width=2):
    """Dictionary whose modulation network outputs exactly zero."""
    amp = np.atleast_1d(np.asarray(base_amplitude, dtype=np.float64))
    return SpectralDictionary(
        base_amplitude=amp,
        base_frequency=np.atleast_1d(np.asarray(base_frequency, dtype=np.float64)),
        base_phase=np.atleast_1d(np.asarray(base_phase, dtype=np.float64)),
        modnet=ModulationNetwork.zeros(amp.shape[0], hidden_width),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def cifar_file(tmp_path):
    """A 10-record synthetic CIFAR-format file plus its normalized contents."""
    path = tmp_path / "batch.bin"
    values = write_cifar_like_file(path, 10, seed=5)
    return path, values
