"""Radix-2 FFT, short-time Fourier transform magnitudes, and the spectral L1 loss.

The transform is built from scratch so the whole pipeline stays dependency-free
and auditable against a naive DFT. Frames of a real signal are windowed,
transformed, and reduced to the one-sided magnitude spectrum (frame_length/2 + 1
bins, no doubling of interior bins). The loss is the entrywise L1 distance
between two magnitude spectrograms, scaled by a nonnegative weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import is_power_of_two

_WINDOWS = ("hann", "rectangular")


@dataclass(frozen=True)
class StftConfig:
    """Framing parameters: power-of-two frame, hop in (0, frame], window name."""

    frame_length: int = 256
    hop_length: int = 128
    window: str = "hann"

    def __post_init__(self):
        if not is_power_of_two(self.frame_length):
            raise ValueError(f"frame_length must be a power of two, got {self.frame_length}")
        if not 0 < self.hop_length <= self.frame_length:
            raise ValueError(
                f"hop_length must be in (0, {self.frame_length}], got {self.hop_length}"
            )
        if self.window not in _WINDOWS:
            raise ValueError(f"window must be one of {_WINDOWS}, got {self.window!r}")

    @property
    def num_bins(self) -> int:
        return self.frame_length // 2 + 1

    def num_frames(self, signal_length: int) -> int:
        if signal_length < self.frame_length:
            raise ValueError(
                f"signal of length {signal_length} is shorter than one "
                f"{self.frame_length}-sample frame"
            )
        return (signal_length - self.frame_length) // self.hop_length + 1

    def window_values(self) -> np.ndarray:
        n = self.frame_length
        if self.window == "rectangular":
            return np.ones(n)
        # periodic Hann, the usual analysis convention
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def _bit_reverse_indices(n: int) -> np.ndarray:
    idx = np.zeros(1, dtype=np.intp)
    while idx.size < n:
        idx = np.concatenate([2 * idx, 2 * idx + 1])
    return idx


def fft(buffer, inverse: bool = False) -> np.ndarray:
    """Iterative radix-2 Cooley-Tukey transform along the last axis.

    Forward: unnormalized X[k] = sum_n x[n] exp(-2i*pi*k*n/N).
    Inverse: conjugate-kernel transform scaled by 1/N, so
    ``fft(fft(x), inverse=True)`` returns x.

    Accepts any array whose last axis is a power of two; other axes are
    batched. Raises ValueError otherwise.
    """
    a = np.array(buffer, dtype=np.complex128, copy=True)
    n = a.shape[-1]
    if not is_power_of_two(n):
        raise ValueError(f"FFT length must be a power of two, got {n}")
    a = np.ascontiguousarray(a[..., _bit_reverse_indices(n)])
    sign = 1.0 if inverse else -1.0
    m = 2
    while m <= n:
        half = m // 2
        twiddle = np.exp(sign * 2j * np.pi * np.arange(half) / m)
        view = a.reshape(a.shape[:-1] + (n // m, m))
        even = view[..., :half].copy()
        odd = view[..., half:] * twiddle
        view[..., :half] = even + odd
        view[..., half:] = even - odd
        m *= 2
    if inverse:
        a /= n
    return a


def naive_dft(buffer, inverse: bool = False) -> np.ndarray:
    """O(N^2) reference transform with the same conventions as :func:`fft`."""
    x = np.asarray(buffer, dtype=np.complex128)
    n = x.shape[-1]
    sign = 1.0 if inverse else -1.0
    k = np.arange(n)
    kernel = np.exp(sign * 2j * np.pi * np.outer(k, k) / n)
    out = x @ kernel.T
    return out / n if inverse else out


def frame_signal(values: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Slice (..., T) signals into (..., M, frame_length) overlapping frames."""
    values = np.asarray(values, dtype=np.float64)
    m = cfg.num_frames(values.shape[-1])
    windows = np.lib.stride_tricks.sliding_window_view(
        values, cfg.frame_length, axis=-1
    )
    return windows[..., :: cfg.hop_length, :][..., :m, :]


def _onesided_spectra(values: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Complex one-sided spectra of all windowed frames, shape (..., M, F)."""
    frames = frame_signal(values, cfg) * cfg.window_values()
    return fft(frames)[..., : cfg.num_bins]


def stft_magnitude(signal, cfg: StftConfig) -> np.ndarray:
    """One-sided magnitude spectrogram, shape (num_bins, num_frames)."""
    values = np.asarray(getattr(signal, "values", signal), dtype=np.float64)
    if values.ndim != 1:
        raise ValueError(f"signal must be 1-D, got shape {values.shape}")
    return np.abs(_onesided_spectra(values, cfg)).T


def batch_magnitudes(values: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Magnitude spectrograms of a (B, T) batch, shape (B, M, F)."""
    return np.abs(_onesided_spectra(values, cfg))


def loss_freq(x, xhat, cfg: StftConfig, stft_weight: float) -> float:
    """Weighted L1 distance between the magnitude spectrograms of two signals."""
    if stft_weight < 0:
        raise ValueError("stft_weight must be nonnegative")
    xv = np.asarray(getattr(x, "values", x), dtype=np.float64)
    yv = np.asarray(getattr(xhat, "values", xhat), dtype=np.float64)
    if xv.shape != yv.shape:
        raise ValueError(f"signal shapes differ: {xv.shape} vs {yv.shape}")
    if stft_weight == 0.0:
        return 0.0
    diff = stft_magnitude(xv, cfg) - stft_magnitude(yv, cfg)
    return float(stft_weight * np.abs(diff).sum())


def magnitude_l1(xhat: np.ndarray, target_mag: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """Per-signal L1 spectrogram mismatch of a (B, T) batch, no gradient."""
    diff = batch_magnitudes(np.asarray(xhat, dtype=np.float64), cfg) - target_mag
    return np.abs(diff).reshape(diff.shape[0], -1).sum(axis=1)


def magnitude_l1_and_grad(
    xhat: np.ndarray, target_mag: np.ndarray, cfg: StftConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Per-signal L1 spectrogram mismatch and its gradient w.r.t. the signals.

    Parameters
    ----------
    xhat : (B, T) array
        Candidate signals.
    target_mag : (B, M, F) array
        Precomputed magnitude spectrograms of the targets.

    Returns
    -------
    l1 : (B,) array
        sum |mag(xhat) - target_mag| per signal, unweighted.
    grad : (B, T) array
        d l1 / d xhat. Where a one-sided bin difference is exactly zero the
        subgradient is taken as 0, and the gradient of a magnitude at an
        exact complex zero is also 0, so the result is finite everywhere.
    """
    xhat = np.asarray(xhat, dtype=np.float64)
    spectra = _onesided_spectra(xhat, cfg)
    mag = np.abs(spectra)
    diff = mag - target_mag
    l1 = np.abs(diff).reshape(xhat.shape[0], -1).sum(axis=1)

    # dl1/dmag = sign(diff); chain through |z| = |X[k]| gives Re(X e^{+i..})/|X|.
    # Collapsing the one-sided bin sum into one inverse transform: pad the
    # weighted unit phasors to full length and take N * Re(ifft(...)).
    n = cfg.frame_length
    coef = np.zeros(spectra.shape[:-1] + (n,), dtype=np.complex128)
    safe = mag > 0.0
    scaled = np.zeros_like(spectra)
    np.divide(spectra, mag, out=scaled, where=safe)
    coef[..., : cfg.num_bins] = np.sign(diff) * scaled
    frame_grad = n * fft(coef, inverse=True).real * cfg.window_values()

    grad = np.zeros_like(xhat)
    hop = cfg.hop_length
    for m in range(frame_grad.shape[-2]):
        grad[:, m * hop : m * hop + n] += frame_grad[:, m, :]
    return l1, grad
