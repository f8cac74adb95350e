"""Sinusoidal dictionary with time-varying amplitude, frequency, and phase.

Atom i evaluated on a time grid t in [0, 1]:

    s_i(t) = softplus(a_i + dA_i(t)) * sin(2*pi * softplus(b_i + df_i(t)) * t
                                           + p_i + dphi_i(t))

where (a_i, b_i, p_i) are learned global base parameters and the d-terms are
produced by a small tanh network conditioned on the scalar time t. Softplus
keeps effective amplitude and frequency strictly positive; phase is left
unconstrained so optimization never sees a wrapping discontinuity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_float_matrix, as_float_vector

TWO_PI = 2.0 * np.pi


def softplus(x):
    """Numerically stable log(1 + exp(x)).

    Uses max(x, 0) + log1p(exp(-|x|)), which equals x + log1p(exp(-x)) for
    large x, so no overflow occurs anywhere on the real line.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return out if out.ndim else float(out)


def softplus_inverse(y):
    """Inverse of softplus, valid for y > 0.

    Evaluated as y + log(1 - exp(-y)), which stays finite for large y where
    the textbook log(exp(y) - 1) would overflow.
    """
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0.0):
        raise ValueError("softplus_inverse requires strictly positive input")
    out = y + np.log(-np.expm1(-y))
    return out if out.ndim else float(out)


def sigmoid(x):
    """Derivative of softplus; stable on both tails."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


@dataclass
class ModulationNetwork:
    """One-hidden-layer tanh network mapping scalar time to 3K modulations.

    Output layout is fixed: the first K entries modulate amplitude, the next
    K frequency, the last K phase.
    """

    input_weights: np.ndarray   # (H,)
    input_bias: np.ndarray      # (H,)
    output_weights: np.ndarray  # (3K, H)
    output_bias: np.ndarray     # (3K,)

    def __post_init__(self):
        h = self.input_weights.shape[0]
        self.input_weights = as_float_vector(self.input_weights, "input_weights", h)
        self.input_bias = as_float_vector(self.input_bias, "input_bias", h)
        self.output_weights = as_float_matrix(
            self.output_weights, "output_weights", (None, h)
        )
        out_dim = self.output_weights.shape[0]
        if out_dim % 3 != 0:
            raise ValueError(f"output dimension {out_dim} is not a multiple of 3")
        self.output_bias = as_float_vector(self.output_bias, "output_bias", out_dim)

    @property
    def hidden_width(self) -> int:
        return self.input_weights.shape[0]

    @property
    def n_atoms(self) -> int:
        return self.output_weights.shape[0] // 3

    @classmethod
    def zeros(cls, n_atoms: int, hidden_width: int) -> "ModulationNetwork":
        """Network that outputs exactly zero for every t."""
        return cls(
            input_weights=np.zeros(hidden_width),
            input_bias=np.zeros(hidden_width),
            output_weights=np.zeros((3 * n_atoms, hidden_width)),
            output_bias=np.zeros(3 * n_atoms),
        )

    @classmethod
    def initialize(cls, n_atoms: int, hidden_width: int, rng: np.random.Generator):
        """Warm-start init: hidden layer uniform in [-0.5, 0.5], output layer zero.

        A zero output layer makes the modulations identically zero, so
        training starts from the plain base sinusoids.
        """
        return cls(
            input_weights=rng.uniform(-0.5, 0.5, size=hidden_width),
            input_bias=rng.uniform(-0.5, 0.5, size=hidden_width),
            output_weights=np.zeros((3 * n_atoms, hidden_width)),
            output_bias=np.zeros(3 * n_atoms),
        )

    def hidden(self, t: np.ndarray) -> np.ndarray:
        """tanh(w_in * t + b_in) for a vector of times; shape (T, H)."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        return np.tanh(t[:, None] * self.input_weights[None, :] + self.input_bias)

    def modulate_grid(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Evaluate modulations on a whole time grid.

        Returns (dA, df, dphi), each of shape (T, K).
        """
        k = self.n_atoms
        out = self.hidden(t) @ self.output_weights.T + self.output_bias
        return out[:, :k], out[:, k : 2 * k], out[:, 2 * k :]

    def modulate(self, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Modulations at a single time; returns three K-vectors."""
        da, df, dphi = self.modulate_grid(np.asarray([t], dtype=np.float64))
        return da[0], df[0], dphi[0]


@dataclass
class SpectralDictionary:
    """K sinusoidal atoms: global base parameters plus a shared modulation net."""

    base_amplitude: np.ndarray  # (K,) pre-softplus
    base_frequency: np.ndarray  # (K,) pre-softplus
    base_phase: np.ndarray      # (K,) radians, unconstrained
    modnet: ModulationNetwork

    def __post_init__(self):
        k = self.base_amplitude.shape[0]
        self.base_amplitude = as_float_vector(self.base_amplitude, "base_amplitude", k)
        self.base_frequency = as_float_vector(self.base_frequency, "base_frequency", k)
        self.base_phase = as_float_vector(self.base_phase, "base_phase", k)
        if self.modnet.n_atoms != k:
            raise ValueError(
                f"modulation network is sized for {self.modnet.n_atoms} atoms, "
                f"dictionary has {k}"
            )

    @property
    def n_atoms(self) -> int:
        return self.base_amplitude.shape[0]

    @classmethod
    def initialize(
        cls,
        n_atoms: int,
        hidden_width: int,
        signal_length: int,
        rng: np.random.Generator,
    ) -> "SpectralDictionary":
        """Default initialization.

        Base frequencies cover a geometric sweep from 1 to signal_length/4
        cycles over [0, 1] (pre-softplus via the inverse map), base amplitudes
        start small at softplus^-1(0.1), and base phases are uniform in
        [0, 2*pi) to break symmetry.
        """
        if n_atoms < 1:
            raise ValueError("need at least one atom")
        top = signal_length / 4.0
        if n_atoms == 1:
            target_freq = np.asarray([1.0])
        else:
            target_freq = np.geomspace(1.0, top, n_atoms)
        return cls(
            base_amplitude=np.full(n_atoms, softplus_inverse(0.1)),
            base_frequency=softplus_inverse(target_freq),
            base_phase=rng.uniform(0.0, TWO_PI, size=n_atoms),
            modnet=ModulationNetwork.initialize(n_atoms, hidden_width, rng),
        )


@dataclass
class BasisCache:
    """Intermediates of one basis evaluation, kept for the backward pass."""

    basis: np.ndarray       # (T, K) atom values
    amplitude: np.ndarray   # (T, K) softplus(a + dA)
    sin_phase: np.ndarray   # (T, K)
    cos_phase: np.ndarray   # (T, K)
    amp_slope: np.ndarray   # (T, K) sigmoid of amplitude pre-activation
    freq_slope: np.ndarray  # (T, K) sigmoid of frequency pre-activation
    hidden: np.ndarray      # (T, H) tanh activations of the modulation net
    grid: np.ndarray        # (T,)


def _softplus_and_sigmoid(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Share the exp between softplus and its derivative (training hot path)."""
    u = np.exp(-np.abs(x))
    value = np.maximum(x, 0.0) + np.log1p(u)
    r = 1.0 / (1.0 + u)  # sigmoid(|x|); mirror it for negative inputs
    slope = np.where(x >= 0.0, r, 1.0 - r)
    return value, slope


def _preactivations(dictionary: SpectralDictionary, grid: np.ndarray):
    net = dictionary.modnet
    hidden = net.hidden(grid)
    k = dictionary.n_atoms
    out = hidden @ net.output_weights.T + net.output_bias
    amp_pre = dictionary.base_amplitude[None, :] + out[:, :k]
    freq_pre = dictionary.base_frequency[None, :] + out[:, k : 2 * k]
    phase_off = dictionary.base_phase[None, :] + out[:, 2 * k :]
    return hidden, amp_pre, freq_pre, phase_off


def basis_with_cache(dictionary: SpectralDictionary, grid: np.ndarray) -> BasisCache:
    """Evaluate all atoms on ``grid`` and keep backward-pass intermediates."""
    grid = as_float_vector(grid, "grid")
    hidden, amp_pre, freq_pre, phase_off = _preactivations(dictionary, grid)
    amplitude, amp_slope = _softplus_and_sigmoid(amp_pre)
    frequency, freq_slope = _softplus_and_sigmoid(freq_pre)
    phase = TWO_PI * frequency * grid[:, None] + phase_off
    sin_phase = np.sin(phase)
    cos_phase = np.cos(phase)
    return BasisCache(
        basis=amplitude * sin_phase,
        amplitude=amplitude,
        sin_phase=sin_phase,
        cos_phase=cos_phase,
        amp_slope=amp_slope,
        freq_slope=freq_slope,
        hidden=hidden,
        grid=grid,
    )


def synthesize_basis(dictionary: SpectralDictionary, grid: np.ndarray) -> np.ndarray:
    """Atom matrix S of shape (T, K); column i is atom i on the grid."""
    grid = as_float_vector(grid, "grid")
    _, amp_pre, freq_pre, phase_off = _preactivations(dictionary, grid)
    phase = TWO_PI * softplus(freq_pre) * grid[:, None] + phase_off
    return softplus(amp_pre) * np.sin(phase)


def reconstruct(basis: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Linear synthesis S @ w of a signal from mixing weights."""
    basis = np.asarray(basis, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if basis.ndim != 2 or weights.ndim != 1 or basis.shape[1] != weights.shape[0]:
        raise ValueError(
            f"cannot mix basis {basis.shape} with weights {weights.shape}"
        )
    return basis @ weights
