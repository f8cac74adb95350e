"""Gaussian prior over mixing coefficients: fitting, sampling, synthesis.

After training, the per-image mixing vectors are treated as draws from a
multivariate Gaussian. Fitting is the population-moment estimate (mean and
1/N covariance) with optional trace-scaled shrinkage for conditioning; new
signals are produced by sampling w = mu + L z with L the Cholesky factor of
the covariance and z standard normal, then applying one linear synthesis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dictionary import SpectralDictionary, reconstruct, synthesize_basis
from .exceptions import NotPositiveDefiniteError
from .validation import as_float_matrix, as_float_vector

# Absolute diagonal added when the fitted covariance has zero trace (all
# mixing vectors identical); keeps the factorization defined.
ZERO_TRACE_FLOOR = 1e-6


def cholesky(matrix: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L @ L.T equal to the given SPD matrix.

    Raises
    ------
    NotPositiveDefiniteError
        On the first non-positive pivot (matrix not positive definite).
    """
    a = as_float_matrix(matrix, "matrix")
    n = a.shape[0]
    if a.shape[1] != n:
        raise ValueError(f"matrix must be square, got {a.shape}")
    lower = np.zeros_like(a)
    for j in range(n):
        pivot = a[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= 0.0 or not np.isfinite(pivot):
            raise NotPositiveDefiniteError(
                f"non-positive pivot {pivot:.3e} at row {j}; "
                "matrix is not positive definite"
            )
        lower[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            lower[j + 1 :, j] = (a[j + 1 :, j] - lower[j + 1 :, :j] @ lower[j, :j]) / lower[j, j]
    return lower


def solve_lower(lower: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Forward substitution for L y = rhs (rhs may be a matrix)."""
    n = lower.shape[0]
    y = np.array(rhs, dtype=np.float64, copy=True)
    for j in range(n):
        if j:
            y[j] -= lower[j, :j] @ y[:j]
        y[j] /= lower[j, j]
    return y


def solve_upper(upper: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Back substitution for U x = rhs (rhs may be a matrix)."""
    n = upper.shape[0]
    x = np.array(rhs, dtype=np.float64, copy=True)
    for j in range(n - 1, -1, -1):
        if j + 1 < n:
            x[j] -= upper[j, j + 1 :] @ x[j + 1 :]
        x[j] /= upper[j, j]
    return x


def solve_spd(matrix: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve an SPD system via Cholesky plus two triangular solves."""
    lower = cholesky(matrix)
    return solve_upper(lower.T, solve_lower(lower, rhs))


@dataclass
class GaussianPrior:
    """Mean, covariance, and cached Cholesky factor over K mixing weights."""

    mean: np.ndarray        # (K,)
    covariance: np.ndarray  # (K, K)
    chol: np.ndarray        # (K, K) lower triangular

    def __post_init__(self):
        k = self.mean.shape[0]
        self.mean = as_float_vector(self.mean, "mean", k)
        self.covariance = as_float_matrix(self.covariance, "covariance", (k, k))
        self.chol = as_float_matrix(self.chol, "chol", (k, k))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def fit_gaussian(
    mixing: np.ndarray, shrinkage: float = 1e-3, diagonal: bool = False
) -> GaussianPrior:
    """Fit the Gaussian prior to an (N, K) matrix of mixing vectors.

    Covariance uses the population (1/N) convention plus trace-scaled
    shrinkage: cov + shrinkage * (trace(cov)/K) * I. When the raw trace is
    zero (degenerate input) an absolute floor of ``ZERO_TRACE_FLOOR`` * I is
    used instead so the factorization stays defined.

    Parameters
    ----------
    mixing : (N, K) array
    shrinkage : float
        Nonnegative shrinkage weight; 0 disables conditioning entirely.
    diagonal : bool
        Keep only the per-coordinate variances (cheaper for very large K).

    Raises
    ------
    NotPositiveDefiniteError
        If the (possibly shrunk) covariance cannot be factorized; raising
        ``shrinkage`` is the remedy.
    """
    w = as_float_matrix(mixing, "mixing")
    if shrinkage < 0:
        raise ValueError("shrinkage must be nonnegative")
    n, k = w.shape
    mean = w.mean(axis=0)
    centered = w - mean
    cov = (centered.T @ centered) / n
    if diagonal:
        cov = np.diag(np.diag(cov))
    if shrinkage > 0:
        scale = np.trace(cov) / k
        ridge = shrinkage * scale if scale > 0.0 else ZERO_TRACE_FLOOR
        cov = cov + ridge * np.eye(k)
    cov = 0.5 * (cov + cov.T)
    try:
        lower = cholesky(cov)
    except NotPositiveDefiniteError as err:
        raise NotPositiveDefiniteError(
            f"{err}; the fitted covariance is numerically degenerate, "
            "raise the shrinkage parameter"
        ) from err
    return GaussianPrior(mean=mean, covariance=cov, chol=lower)


def samples_from_noise(prior: GaussianPrior, noise: np.ndarray) -> np.ndarray:
    """Deterministic half of sampling: mu + L z for given standard-normal z.

    ``noise`` has shape (count, K); exposing this separately lets tests pin
    z (for example z = 0 recovers the mean exactly).
    """
    noise = as_float_matrix(noise, "noise", (None, prior.dim))
    return prior.mean + noise @ prior.chol.T


def sample_prior(prior: GaussianPrior, rng_seed: int, count: int) -> np.ndarray:
    """Draw ``count`` mixing vectors, shape (count, K).

    Noise comes from numpy's seeded PCG64 generator (ziggurat normals), so
    the same seed reproduces the same samples bit for bit.
    """
    if count < 0:
        raise ValueError("count must be nonnegative")
    rng = np.random.default_rng(rng_seed)
    noise = rng.standard_normal((count, prior.dim))
    return samples_from_noise(prior, noise)


def generate(
    prior: GaussianPrior,
    dictionary: SpectralDictionary,
    grid: np.ndarray,
    rng_seed: int,
    count: int,
) -> np.ndarray:
    """Sample mixing vectors and synthesize signals, shape (count, T).

    Exactly the composition of :func:`sample_prior` with one linear
    reconstruction per sample against the fixed basis; no iteration.
    """
    if prior.dim != dictionary.n_atoms:
        raise ValueError(
            f"prior dimension {prior.dim} does not match "
            f"dictionary atom count {dictionary.n_atoms}"
        )
    weights = sample_prior(prior, rng_seed, count)
    basis = synthesize_basis(dictionary, grid)
    return np.stack([reconstruct(basis, w) for w in weights]) if count else np.empty(
        (0, grid.shape[0])
    )
