"""Tests for the scikit-learn estimator facade."""

import numpy as np
import pytest
from sklearn.base import clone

from specdict.estimator import SpectralDictionaryLearning
from specdict.exceptions import MissingPriorError
from tests.conftest import cifar_like_images


def small_estimator(**kw):
    params = dict(
        n_atoms=8,
        hidden_width=4,
        epochs=3,
        batch_size=2,
        learning_rate=0.01,
        lambda_stft=0.1,
        frame_length=16,
        hop_length=8,
        random_state=3,
    )
    params.update(kw)
    return SpectralDictionaryLearning(**params)


@pytest.fixture(scope="module")
def fitted():
    x = np.random.default_rng(0).uniform(-1, 1, size=(6, 64))
    return small_estimator().fit(x), x


class TestSklearnProtocol:
    def test_get_set_params_round_trip(self):
        est = small_estimator()
        params = est.get_params()
        assert params["n_atoms"] == 8
        est.set_params(n_atoms=16)
        assert est.n_atoms == 16

    def test_clone(self):
        est = small_estimator(lambda_stft=0.7)
        twin = clone(est)
        assert twin.get_params() == est.get_params()

    def test_unfitted_transform_raises(self):
        with pytest.raises(Exception):  # sklearn NotFittedError
            small_estimator().transform(np.zeros((1, 64)))


class TestFitTransform:
    def test_fit_sets_attributes(self, fitted):
        est, x = fitted
        assert est.dictionary_.n_atoms == 8
        assert est.mixing_.shape == (6, 8)
        assert len(est.loss_history_) == 3
        assert est.basis_.shape == (64, 8)
        assert est.n_features_in_ == 64

    def test_transform_shape_and_quality(self, fitted):
        est, x = fitted
        codes = est.transform(x)
        assert codes.shape == (6, 8)
        recon = est.inverse_transform(codes)
        assert recon.shape == x.shape
        # ridge encoding is the least-squares fit: no worse than zero weights
        assert np.mean((x - recon) ** 2) < np.mean(x**2)

    def test_transform_wrong_width(self, fitted):
        est, _ = fitted
        with pytest.raises(ValueError, match="features"):
            est.transform(np.zeros((2, 32)))

    def test_inverse_transform_wrong_width(self, fitted):
        est, _ = fitted
        with pytest.raises(ValueError, match="columns"):
            est.inverse_transform(np.zeros((2, 5)))

    def test_score_is_negative_mse(self, fitted):
        est, x = fitted
        codes = est.transform(x)
        recon = est.inverse_transform(codes)
        assert est.score(x) == pytest.approx(-np.mean((x - recon) ** 2))

    def test_deterministic_across_runs(self):
        x = cifar_like_images(3, seed=11)[:, :128]
        a = small_estimator().fit(x)
        b = small_estimator().fit(x)
        np.testing.assert_array_equal(a.mixing_, b.mixing_)
        np.testing.assert_array_equal(a.basis_, b.basis_)


class TestSampling:
    def test_sample_requires_prior(self, fitted):
        est, _ = fitted
        fresh = clone(est).fit(np.random.default_rng(1).uniform(-1, 1, (4, 64)))
        with pytest.raises(MissingPriorError, match="fit_prior"):
            fresh.sample(2)

    def test_fit_prior_then_sample(self, fitted):
        est, _ = fitted
        est.fit_prior()
        out = est.sample(n_samples=4, random_state=5)
        assert out.shape == (4, 64)
        again = est.sample(n_samples=4, random_state=5)
        np.testing.assert_array_equal(out, again)
        other = est.sample(n_samples=4, random_state=6)
        assert np.any(out != other)
