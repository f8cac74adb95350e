"""scikit-learn style front end for the spectral dictionary generative model.

``SpectralDictionaryLearning`` behaves like a transformer: ``fit`` learns the
sinusoidal dictionary plus per-image mixing coefficients from an (N, T) matrix
of flattened signals, ``transform`` ridge-encodes signals to coefficients,
``inverse_transform`` synthesizes signals back, and ``sample`` draws new
signals from a Gaussian prior fitted over the training coefficients.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dataset import make_time_grid
from .dictionary import synthesize_basis
from .exceptions import MissingPriorError
from .prior import fit_gaussian, generate
from .stft import StftConfig
from .training import TrainConfig, encode_ridge_batch, train


class SpectralDictionaryLearning(TransformerMixin, BaseEstimator):
    """Generative model of flattened images as mixtures of sinusoidal atoms.

    Parameters
    ----------
    n_atoms : int
        Number of dictionary atoms K.
    hidden_width : int
        Hidden width of the time-modulation network.
    epochs, batch_size, learning_rate : training schedule for Adam.
    lambda_stft : float
        Weight of the spectrogram L1 term in the objective.
    frame_length, hop_length, window : STFT analysis parameters.
    beta1, beta2, epsilon : Adam moment decays and stabilizer.
    mixing_init : {"zeros", "ridge"}
        Start the coefficients at zero or at a ridge fit to the initial basis.
    shrinkage : float
        Trace-scaled shrinkage used when fitting the Gaussian prior.
    ridge_penalty : float
        Regularizer used by :meth:`transform` for unseen signals.
    random_state : int
        Seed for initialization and batch shuffling.

    Attributes
    ----------
    dictionary_ : SpectralDictionary
    mixing_ : ndarray of shape (n_samples, n_atoms)
    loss_history_ : list of EpochStats
    basis_ : ndarray of shape (n_features, n_atoms)
    prior_ : GaussianPrior, set by :meth:`fit_prior`.
    """

    def __init__(
        self,
        n_atoms: int = 256,
        hidden_width: int = 64,
        epochs: int = 20,
        batch_size: int = 32,
        learning_rate: float = 1e-3,
        lambda_stft: float = 0.1,
        frame_length: int = 256,
        hop_length: int = 128,
        window: str = "hann",
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
        mixing_init: str = "zeros",
        shrinkage: float = 1e-3,
        ridge_penalty: float = 1e-6,
        random_state: int = 0,
    ):
        self.n_atoms = n_atoms
        self.hidden_width = hidden_width
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lambda_stft = lambda_stft
        self.frame_length = frame_length
        self.hop_length = hop_length
        self.window = window
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.mixing_init = mixing_init
        self.shrinkage = shrinkage
        self.ridge_penalty = ridge_penalty
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            lambda_stft=self.lambda_stft,
            adam_beta1=self.beta1,
            adam_beta2=self.beta2,
            adam_epsilon=self.epsilon,
            seed=self.random_state,
            n_atoms=self.n_atoms,
            hidden_width=self.hidden_width,
            stft=StftConfig(
                frame_length=self.frame_length,
                hop_length=self.hop_length,
                window=self.window,
            ),
            mixing_init=self.mixing_init,
        )

    def fit(self, X, y=None):
        """Learn the dictionary and per-sample coefficients from (N, T) signals."""
        X = check_array(X, dtype=np.float64, ensure_min_samples=1)
        result = train(X, self._train_config())
        self.n_features_in_ = X.shape[1]
        self.dictionary_ = result.dictionary
        self.mixing_ = result.mixing
        self.loss_history_ = result.history
        self.time_grid_ = make_time_grid(X.shape[1])
        self.basis_ = synthesize_basis(self.dictionary_, self.time_grid_)
        return self

    def transform(self, X) -> np.ndarray:
        """Ridge-encode signals to mixing coefficients, shape (N, n_atoms)."""
        check_is_fitted(self, "basis_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return encode_ridge_batch(X, self.basis_, self.ridge_penalty)

    def inverse_transform(self, W) -> np.ndarray:
        """Synthesize signals from coefficients, shape (N, n_features)."""
        check_is_fitted(self, "basis_")
        W = check_array(W, dtype=np.float64)
        if W.shape[1] != self.basis_.shape[1]:
            raise ValueError(
                f"W has {W.shape[1]} columns, expected {self.basis_.shape[1]}"
            )
        return W @ self.basis_.T

    def fit_prior(self, shrinkage: float | None = None, diagonal: bool = False):
        """Fit the Gaussian prior over the learned training coefficients."""
        check_is_fitted(self, "mixing_")
        value = self.shrinkage if shrinkage is None else shrinkage
        self.prior_ = fit_gaussian(self.mixing_, shrinkage=value, diagonal=diagonal)
        return self

    def sample(self, n_samples: int = 1, random_state: int = 0) -> np.ndarray:
        """Draw new signals from the fitted prior, shape (n_samples, n_features)."""
        check_is_fitted(self, "basis_")
        if not hasattr(self, "prior_"):
            raise MissingPriorError(
                "no prior has been fitted; call fit_prior() after fit()"
            )
        return generate(
            self.prior_, self.dictionary_, self.time_grid_, random_state, n_samples
        )

    def score(self, X, y=None) -> float:
        """Negative mean squared reconstruction error of ridge-encoded X."""
        recon = self.inverse_transform(self.transform(X))
        X = check_array(X, dtype=np.float64)
        return float(-np.mean((X - recon) ** 2))
