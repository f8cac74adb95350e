"""Joint optimization of the dictionary, modulation network, and mixing matrix.

The trainable set is one flat parameter vector:

    [base_amplitude | base_frequency | base_phase |
     modnet input weights | input bias | output weights | output bias |
     mixing matrix rows]

Each Adam step consumes the exact reverse-mode gradient of the composite
objective (per-batch mean of squared time-domain error plus the weighted
spectrogram L1), derived by hand through the linear synthesis, the
sin/softplus parameterization, the tanh network, and the STFT magnitude.
A central-difference checker validates the whole chain at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import make_time_grid
from .dictionary import (
    TWO_PI,
    BasisCache,
    ModulationNetwork,
    SpectralDictionary,
    basis_with_cache,
    synthesize_basis,
)
from .exceptions import NotPositiveDefiniteError, SingularMatrixError, TrainingDivergedError
from .prior import cholesky, solve_lower, solve_upper
from .stft import StftConfig, batch_magnitudes, magnitude_l1, magnitude_l1_and_grad
from .validation import as_float_matrix, as_signal_matrix

PARAMETER_GROUPS = ("amplitudes", "frequencies", "phases", "modnet", "mixing")


@dataclass
class TrainConfig:
    """Hyperparameters for one training run."""

    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 1e-3
    lambda_stft: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0
    n_atoms: int = 256
    hidden_width: int = 64
    stft: StftConfig = field(default_factory=StftConfig)
    mixing_init: str = "zeros"  # "zeros" or "ridge" (warm start against the initial basis)

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        # learning_rate 0 is allowed: it makes training a (useful) no-op.
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be nonnegative")
        if self.lambda_stft < 0:
            raise ValueError("lambda_stft must be nonnegative")
        for name in ("adam_beta1", "adam_beta2"):
            b = getattr(self, name)
            if not 0.0 < b < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {b}")
        if self.adam_epsilon <= 0:
            raise ValueError("adam_epsilon must be positive")
        if self.n_atoms < 1 or self.hidden_width < 1:
            raise ValueError("n_atoms and hidden_width must be at least 1")
        if self.mixing_init not in ("zeros", "ridge"):
            raise ValueError(f"unknown mixing_init {self.mixing_init!r}")


class ParameterLayout:
    """Bijection between the named parameter arrays and one flat vector."""

    def __init__(self, n_atoms: int, hidden_width: int, n_images: int):
        self.n_atoms = n_atoms
        self.hidden_width = hidden_width
        self.n_images = n_images
        k, h, n = n_atoms, hidden_width, n_images
        sizes = [
            ("base_amplitude", k),
            ("base_frequency", k),
            ("base_phase", k),
            ("modnet_input_weights", h),
            ("modnet_input_bias", h),
            ("modnet_output_weights", 3 * k * h),
            ("modnet_output_bias", 3 * k),
            ("mixing", n * k),
        ]
        self.slices: dict[str, slice] = {}
        offset = 0
        for name, size in sizes:
            self.slices[name] = slice(offset, offset + size)
            offset += size
        self.total = offset

    def group_slices(self) -> dict[str, slice]:
        """Coarser report groups: the three base vectors, the net, the codes."""
        s = self.slices
        return {
            "amplitudes": s["base_amplitude"],
            "frequencies": s["base_frequency"],
            "phases": s["base_phase"],
            "modnet": slice(s["modnet_input_weights"].start, s["modnet_output_bias"].stop),
            "mixing": s["mixing"],
        }

    def pack(self, dictionary: SpectralDictionary, mixing: np.ndarray) -> np.ndarray:
        net = dictionary.modnet
        return np.concatenate(
            [
                dictionary.base_amplitude,
                dictionary.base_frequency,
                dictionary.base_phase,
                net.input_weights,
                net.input_bias,
                net.output_weights.ravel(),
                net.output_bias,
                np.asarray(mixing, dtype=np.float64).ravel(),
            ]
        )

    def unpack(self, theta: np.ndarray) -> tuple[SpectralDictionary, np.ndarray]:
        """Views into ``theta``; mutating theta mutates the returned model."""
        if theta.shape != (self.total,):
            raise ValueError(f"expected a flat vector of length {self.total}")
        k, h, n = self.n_atoms, self.hidden_width, self.n_images
        s = self.slices
        net = ModulationNetwork(
            input_weights=theta[s["modnet_input_weights"]],
            input_bias=theta[s["modnet_input_bias"]],
            output_weights=theta[s["modnet_output_weights"]].reshape(3 * k, h),
            output_bias=theta[s["modnet_output_bias"]],
        )
        dictionary = SpectralDictionary(
            base_amplitude=theta[s["base_amplitude"]],
            base_frequency=theta[s["base_frequency"]],
            base_phase=theta[s["base_phase"]],
            modnet=net,
        )
        return dictionary, theta[s["mixing"]].reshape(n, k)

    def describe_index(self, flat_index: int) -> str:
        for name, sl in self.slices.items():
            if sl.start <= flat_index < sl.stop:
                local = flat_index - sl.start
                if name == "mixing":
                    return f"mixing[{local // self.n_atoms}, {local % self.n_atoms}]"
                if name == "modnet_output_weights":
                    return f"modnet_output_weights[{local // self.hidden_width}, {local % self.hidden_width}]"
                return f"{name}[{local}]"
        raise IndexError(flat_index)


@dataclass
class BatchGradients:
    """Named gradient arrays for one batch (mixing rows only for the batch)."""

    base_amplitude: np.ndarray
    base_frequency: np.ndarray
    base_phase: np.ndarray
    input_weights: np.ndarray
    input_bias: np.ndarray
    output_weights: np.ndarray
    output_bias: np.ndarray
    mixing: np.ndarray  # (B, K)


def loss_time(x, xhat) -> float:
    """Sum of squared differences between two equal-length signals."""
    xv = np.asarray(getattr(x, "values", x), dtype=np.float64)
    yv = np.asarray(getattr(xhat, "values", xhat), dtype=np.float64)
    if xv.shape != yv.shape:
        raise ValueError(f"signal shapes differ: {xv.shape} vs {yv.shape}")
    diff = xv - yv
    return float(diff @ diff)


def _forward_losses(
    x_batch: np.ndarray,
    w_batch: np.ndarray,
    basis: np.ndarray,
    cfg: TrainConfig,
    target_mag: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-image (time, freq) loss components against a fixed basis."""
    xhat = w_batch @ basis.T
    resid = xhat - x_batch
    l_time = np.einsum("ij,ij->i", resid, resid)
    if cfg.lambda_stft > 0.0:
        if target_mag is None:
            target_mag = batch_magnitudes(x_batch, cfg.stft)
        l_freq = cfg.lambda_stft * magnitude_l1(xhat, target_mag, cfg.stft)
    else:
        l_freq = np.zeros(x_batch.shape[0])
    return l_time, l_freq


def _batch_forward_backward(
    x_batch: np.ndarray,
    w_batch: np.ndarray,
    dictionary: SpectralDictionary,
    cfg: TrainConfig,
    grid: np.ndarray,
    cache: BasisCache | None = None,
    target_mag: np.ndarray | None = None,
):
    """Mean batch loss, per-image components, and all gradients."""
    if cache is None:
        cache = basis_with_cache(dictionary, grid)
    basis = cache.basis
    b = x_batch.shape[0]
    xhat = w_batch @ basis.T
    resid = xhat - x_batch
    l_time = np.einsum("ij,ij->i", resid, resid)
    g_xhat = (2.0 / b) * resid

    if cfg.lambda_stft > 0.0:
        if target_mag is None:
            target_mag = batch_magnitudes(x_batch, cfg.stft)
        l1, g_l1 = magnitude_l1_and_grad(xhat, target_mag, cfg.stft)
        l_freq = cfg.lambda_stft * l1
        g_xhat = g_xhat + (cfg.lambda_stft / b) * g_l1
    else:
        l_freq = np.zeros(b)

    loss = float((l_time.sum() + l_freq.sum()) / b)
    g_mix = g_xhat @ basis                  # (B, K)
    g_basis = g_xhat.T @ w_batch            # (T, K)

    # One (T, 3K) buffer holding the gradients w.r.t. the three modulation
    # blocks [dA | df | dphi]; the base-parameter gradients are its column
    # sums, and the modulation net backprops through it directly.
    k = dictionary.n_atoms
    g_net_out = np.empty((grid.shape[0], 3 * k))
    g_amp_pre = g_net_out[:, :k]
    g_freq_pre = g_net_out[:, k : 2 * k]
    g_phase = g_net_out[:, 2 * k :]
    np.multiply(g_basis, cache.sin_phase, out=g_amp_pre)
    g_amp_pre *= cache.amp_slope
    np.multiply(g_basis, cache.amplitude, out=g_phase)
    g_phase *= cache.cos_phase
    np.multiply(g_phase, TWO_PI * grid[:, None], out=g_freq_pre)
    g_freq_pre *= cache.freq_slope

    net = dictionary.modnet
    g_hidden = g_net_out @ net.output_weights
    g_pre = g_hidden * (1.0 - cache.hidden**2)

    grads = BatchGradients(
        base_amplitude=g_amp_pre.sum(axis=0),
        base_frequency=g_freq_pre.sum(axis=0),
        base_phase=g_phase.sum(axis=0),
        input_weights=g_pre.T @ grid,
        input_bias=g_pre.sum(axis=0),
        output_weights=g_net_out.T @ cache.hidden,
        output_bias=g_net_out.sum(axis=0),
        mixing=g_mix,
    )
    return loss, l_time, l_freq, grads


def total_loss(x_batch, w_batch, dictionary: SpectralDictionary, cfg: TrainConfig) -> float:
    """Mean over the batch of time-domain SSE plus the weighted spectral L1."""
    x = as_signal_matrix(x_batch, "x_batch")
    w = as_float_matrix(np.atleast_2d(w_batch), "w_batch", (x.shape[0], dictionary.n_atoms))
    basis = synthesize_basis(dictionary, make_time_grid(x.shape[1]))
    l_time, l_freq = _forward_losses(x, w, basis, cfg)
    return float((l_time.sum() + l_freq.sum()) / x.shape[0])


def backward(x_batch, w_batch, dictionary: SpectralDictionary, cfg: TrainConfig) -> np.ndarray:
    """Flat gradient of :func:`total_loss` over the full parameter vector.

    The mixing block covers every row of ``w_batch`` (the batch is the whole
    coefficient set from the gradient's point of view).
    """
    x = as_signal_matrix(x_batch, "x_batch")
    w = as_float_matrix(np.atleast_2d(w_batch), "w_batch", (x.shape[0], dictionary.n_atoms))
    grid = make_time_grid(x.shape[1])
    _, _, _, grads = _batch_forward_backward(x, w, dictionary, cfg, grid)
    layout = ParameterLayout(dictionary.n_atoms, dictionary.modnet.hidden_width, x.shape[0])
    flat = np.zeros(layout.total)
    _scatter_gradients(flat, grads, np.arange(x.shape[0]), layout)
    return flat


def _scatter_gradients(
    flat: np.ndarray, grads: BatchGradients, rows: np.ndarray, layout: ParameterLayout
) -> None:
    s = layout.slices
    flat[s["base_amplitude"]] = grads.base_amplitude
    flat[s["base_frequency"]] = grads.base_frequency
    flat[s["base_phase"]] = grads.base_phase
    flat[s["modnet_input_weights"]] = grads.input_weights
    flat[s["modnet_input_bias"]] = grads.input_bias
    flat[s["modnet_output_weights"]] = grads.output_weights.ravel()
    flat[s["modnet_output_bias"]] = grads.output_bias
    mixing = flat[s["mixing"]].reshape(layout.n_images, layout.n_atoms)
    mixing[rows] = grads.mixing


@dataclass
class AdamState:
    """First/second moment vectors and the global step counter."""

    m: np.ndarray
    v: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(m=np.zeros(size), v=np.zeros(size), step_count=0)


def adam_step(
    params: np.ndarray, grad: np.ndarray, state: AdamState, cfg: TrainConfig
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update, applied in place; returns (params, state)."""
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ValueError("params, grad, and state must have matching lengths")
    state.step_count += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    state.m *= b1
    state.m += (1.0 - b1) * grad
    state.v *= b2
    state.v += (1.0 - b2) * grad * grad
    m_hat = state.m / (1.0 - b1**state.step_count)
    v_hat = state.v / (1.0 - b2**state.step_count)
    params -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_epsilon)
    return params, state


@dataclass(frozen=True)
class EpochStats:
    """Dataset-mean losses evaluated at the end of one epoch."""

    epoch: int
    loss_time: float
    loss_freq: float

    @property
    def total(self) -> float:
        return self.loss_time + self.loss_freq


@dataclass
class TrainResult:
    dictionary: SpectralDictionary
    mixing: np.ndarray
    history: list[EpochStats]
    config: TrainConfig
    signal_length: int


def _check_finite(loss: float, theta: np.ndarray, layout: ParameterLayout) -> None:
    if np.isfinite(loss):
        return
    bad = np.nonzero(~np.isfinite(theta))[0]
    if bad.size:
        where = layout.describe_index(int(bad[0]))
        detail = f"first non-finite parameter: {where}"
    else:
        detail = "all parameters are finite; the loss itself overflowed"
    raise TrainingDivergedError(f"training aborted: loss is {loss}; {detail}")


def _dataset_losses(
    x: np.ndarray,
    mixing: np.ndarray,
    basis: np.ndarray,
    cfg: TrainConfig,
    target_mag: np.ndarray | None,
    chunk: int = 256,
) -> tuple[float, float]:
    """Mean per-image (time, freq) losses over the whole dataset."""
    n = x.shape[0]
    time_sum = 0.0
    freq_sum = 0.0
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        mags = None if target_mag is None else target_mag[start:stop]
        l_time, l_freq = _forward_losses(
            x[start:stop], mixing[start:stop], basis, cfg, target_mag=mags
        )
        time_sum += l_time.sum()
        freq_sum += l_freq.sum()
    return time_sum / n, freq_sum / n


def _epoch_permutation(rng: np.random.Generator, n: int) -> np.ndarray:
    """Per-epoch shuffle (split out so tests can pin the permutation)."""
    return rng.permutation(n)


def train(data, cfg: TrainConfig) -> TrainResult:
    """Run the full joint optimization.

    Parameters
    ----------
    data : (N, T) array or sequence of ImageSignal
    cfg : TrainConfig

    Returns
    -------
    TrainResult
        Trained dictionary, (N, K) mixing matrix, and per-epoch loss history
        (dataset-mean losses evaluated at the end of each epoch).

    Notes
    -----
    Every random choice (initialization, per-epoch shuffles) comes from one
    numpy PCG64 generator seeded with ``cfg.seed``, so runs are reproducible
    bit for bit. Mini-batches are contiguous chunks of each epoch's
    permutation, processed in ascending row order so reductions have one
    canonical order (at batch_size = N the shuffle therefore cannot affect
    anything); one Adam step is taken per batch over the full parameter
    vector. A non-finite loss aborts immediately.
    """
    x = as_signal_matrix(data)
    n, t = x.shape
    grid = make_time_grid(t)
    rng = np.random.default_rng(cfg.seed)

    dictionary = SpectralDictionary.initialize(cfg.n_atoms, cfg.hidden_width, t, rng)
    layout = ParameterLayout(cfg.n_atoms, cfg.hidden_width, n)
    if cfg.mixing_init == "ridge":
        basis0 = basis_with_cache(dictionary, grid).basis
        penalty = 1e-3 * float(np.mean(np.einsum("ij,ij->j", basis0, basis0)))
        mixing0 = encode_ridge_batch(x, basis0, penalty)
    else:
        mixing0 = np.zeros((n, cfg.n_atoms))
    theta = layout.pack(dictionary, mixing0)
    dictionary, mixing = layout.unpack(theta)
    state = AdamState.zeros(layout.total)

    target_mag = batch_magnitudes(x, cfg.stft) if cfg.lambda_stft > 0 else None
    grad = np.zeros(layout.total)
    history: list[EpochStats] = []

    def record_epoch(epoch: int, basis: np.ndarray) -> None:
        time_mean, freq_mean = _dataset_losses(x, mixing, basis, cfg, target_mag)
        _check_finite(time_mean + freq_mean, theta, layout)
        history.append(EpochStats(epoch=epoch, loss_time=time_mean, loss_freq=freq_mean))

    for epoch in range(cfg.epochs):
        perm = _epoch_permutation(rng, n)
        for start in range(0, n, cfg.batch_size):
            rows = np.sort(perm[start : start + cfg.batch_size])
            mags = None if target_mag is None else target_mag[rows]
            cache = basis_with_cache(dictionary, grid)
            if epoch > 0 and start == 0:
                # Parameters have not changed since the end of the previous
                # epoch, so this cache doubles as its history evaluation.
                record_epoch(epoch - 1, cache.basis)
            loss, _, _, grads = _batch_forward_backward(
                x[rows], mixing[rows], dictionary, cfg, grid,
                cache=cache, target_mag=mags,
            )
            _check_finite(loss, theta, layout)
            grad.fill(0.0)
            _scatter_gradients(grad, grads, rows, layout)
            adam_step(theta, grad, state, cfg)
    if cfg.epochs > 0:
        record_epoch(cfg.epochs - 1, synthesize_basis(dictionary, grid))

    return TrainResult(
        dictionary=dictionary,
        mixing=mixing,
        history=history,
        config=cfg,
        signal_length=t,
    )


def encode_ridge(x, basis: np.ndarray, ridge_penalty: float = 0.0) -> np.ndarray:
    """Closed-form mixing vector for one signal against a fixed basis.

    Solves (S^T S + penalty*I) w = S^T x through a Cholesky factorization of
    the K x K normal matrix; this is the exact minimizer of
    ||x - S w||^2 + penalty * ||w||^2.

    Raises
    ------
    SingularMatrixError
        If the normal matrix is singular and ``ridge_penalty`` is 0.
    """
    xv = np.asarray(getattr(x, "values", x), dtype=np.float64)
    return encode_ridge_batch(xv[None, :], basis, ridge_penalty)[0]


def encode_ridge_batch(x: np.ndarray, basis: np.ndarray, ridge_penalty: float = 0.0) -> np.ndarray:
    """Ridge-encode an (N, T) batch; one factorization, N solves."""
    if ridge_penalty < 0:
        raise ValueError("ridge_penalty must be nonnegative")
    basis = as_float_matrix(basis, "basis")
    x = as_float_matrix(x, "x", (None, basis.shape[0]))
    k = basis.shape[1]
    normal = basis.T @ basis + ridge_penalty * np.eye(k)
    try:
        lower = cholesky(normal)
    except NotPositiveDefiniteError as err:
        raise SingularMatrixError(
            "normal matrix S^T S is singular; pass ridge_penalty > 0"
        ) from err
    rhs = basis.T @ x.T  # (K, N)
    return solve_upper(lower.T, solve_lower(lower, rhs)).T


@dataclass
class GradientCheckReport:
    """Max relative gradient error per parameter group, against central differences."""

    group_errors: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(err < self.tolerance for err in self.group_errors.values())

    def __str__(self) -> str:
        lines = []
        for name in PARAMETER_GROUPS:
            err = self.group_errors[name]
            verdict = "ok" if err < self.tolerance else "FAIL"
            lines.append(f"{name:12s} max_rel_err={err:.3e} {verdict}")
        return "\n".join(lines)


def compare_gradients(
    analytic: np.ndarray,
    numeric: np.ndarray,
    layout: ParameterLayout,
    tolerance: float,
) -> GradientCheckReport:
    """Relative error |ga - gn| / max(1e-8, |ga| + |gn|), maxed per group."""
    err = np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))
    groups = {
        name: float(err[sl].max()) if err[sl].size else 0.0
        for name, sl in layout.group_slices().items()
    }
    return GradientCheckReport(group_errors=groups, tolerance=tolerance)


def numeric_gradient(loss_fn, theta: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector."""
    grad = np.zeros_like(theta)
    probe = theta.copy()
    for i in range(theta.size):
        original = probe[i]
        probe[i] = original + step
        up = loss_fn(probe)
        probe[i] = original - step
        down = loss_fn(probe)
        probe[i] = original
        grad[i] = (up - down) / (2.0 * step)
    return grad


def gradient_check(
    cfg: TrainConfig,
    signal_length: int = 64,
    n_images: int = 2,
    tolerance: float = 1e-4,
    seed: int = 0,
    step: float = 1e-5,
) -> GradientCheckReport:
    """Validate the analytic gradient on a small randomized configuration.

    All parameters (including the modulation net's output layer, which the
    training warm start would leave at zero) are drawn away from zero so
    every term of the chain rule is exercised.
    """
    layout = ParameterLayout(cfg.n_atoms, cfg.hidden_width, n_images)
    if layout.total > 5000:
        raise ValueError(
            f"{layout.total} parameters is too large for a finite-difference sweep"
        )
    rng = np.random.default_rng(seed)
    dictionary = SpectralDictionary.initialize(
        cfg.n_atoms, cfg.hidden_width, signal_length, rng
    )
    net = dictionary.modnet
    net.output_weights += rng.normal(scale=0.2, size=net.output_weights.shape)
    net.output_bias += rng.normal(scale=0.2, size=net.output_bias.shape)
    mixing = rng.normal(scale=1.0, size=(n_images, cfg.n_atoms))
    x = rng.uniform(-1.0, 1.0, size=(n_images, signal_length))
    theta = layout.pack(dictionary, mixing)

    def loss_fn(flat):
        d, w = layout.unpack(flat)
        return total_loss(x, w, d, cfg)

    dict_view, mixing_view = layout.unpack(theta)
    analytic = backward(x, mixing_view, dict_view, cfg)
    numeric = numeric_gradient(loss_fn, theta, step=step)
    return compare_gradients(analytic, numeric, layout, tolerance)
