import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import multivariate_normal

from spkback.core import DataError, EmbeddingSet
from spkback.plda import (
    PldaFitConfig,
    PldaModel,
    expected_llr_term,
    fit_plda,
    llr_score,
    llr_score_oracle,
    preprocess,
    scoring_constants,
    train_two_covariance,
)
from spkback.synthlab import GeneratorModel, sample_plda


def random_model(rng, d, psi_hi=100.0):
    return PldaModel(rng.standard_normal(d), rng.standard_normal((d, d)) + 3 * np.eye(d),
                     rng.uniform(0.0, psi_hi, d))


def test_scoring_constants_values():
    c, m = scoring_constants([0.0, 1.0])
    np.testing.assert_allclose(c, [0.0, -np.log(3.0) + 2 * np.log(2.0)])
    np.testing.assert_allclose(m, [0.0, 1.0 / 6.0])


def test_zero_psi_scores_zero():
    model = PldaModel(np.zeros(3), np.eye(3), np.zeros(3))
    assert llr_score(model, np.ones(3), -np.ones(3)) == 0.0


@settings(max_examples=80, deadline=None)
@given(d=st.integers(1, 16), seed=st.integers(0, 2**31 - 1))
def test_closed_form_matches_joint_gaussian(d, seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, d)
    u1, u2 = rng.standard_normal((2, d)) * np.sqrt(model.psi + 1)
    assert abs(llr_score(model, u1, u2) - llr_score_oracle(model, u1, u2)) <= 1e-8


def test_llr_symmetric_in_arguments():
    rng = np.random.default_rng(1)
    model = random_model(rng, 5)
    u1, u2 = rng.standard_normal((2, 5))
    assert llr_score(model, u1, u2) == pytest.approx(llr_score(model, u2, u1), abs=1e-14)


def test_one_dimensional_hand_value():
    # psi = 1: c = log(4/3), m = 1/6; u1 = 1, u2 = 0 -> 0.5 * (log(4/3) - 1/6)
    model = PldaModel([0.0], [[1.0]], [1.0])
    assert llr_score(model, [1.0], [0.0]) == pytest.approx(0.5 * (np.log(4 / 3) - 1 / 6), abs=1e-15)


@pytest.mark.parametrize("psi", [0.25, 1.0, 4.0])
def test_expected_term_monte_carlo(psi):
    rng = np.random.default_rng(int(psi * 100))
    n = 200_000
    v = rng.standard_normal(n) * np.sqrt(psi)
    m = psi / ((2 * psi + 1) * (psi + 1))
    for hyp in ("H1", "H0"):
        v2 = v if hyp == "H1" else rng.standard_normal(n) * np.sqrt(psi)
        u1 = v + rng.standard_normal(n)
        u2 = v2 + rng.standard_normal(n)
        t = m * (2 * u1 * u2 - psi * (u1 - u2) ** 2)
        se = t.std() / np.sqrt(n)
        assert abs(t.mean() - expected_llr_term(psi, hyp)) < 4 * se


def test_expected_term_errors():
    assert expected_llr_term(0.0, "H0") == 0.0
    with pytest.raises(DataError):
        expected_llr_term(1.0, "H2")
    with pytest.raises(DataError):
        expected_llr_term(-1.0, "H1")


def test_model_shapes_validated():
    with pytest.raises(DataError):
        PldaModel(np.zeros(2), np.eye(3), np.ones(2))
    with pytest.raises(DataError):
        PldaModel(np.zeros(2), np.eye(2), [1.0, -1.0])


def test_from_covariances_round_trip():
    rng = np.random.default_rng(2)
    B = rng.standard_normal((4, 4))
    phi_b = B @ B.T
    W = rng.standard_normal((4, 4))
    phi_w = W @ W.T + np.eye(4)
    model = PldaModel.from_covariances(np.ones(4), phi_b, phi_w)
    pb, pw = model.covariances()
    np.testing.assert_allclose(pb, phi_b, atol=1e-9)
    np.testing.assert_allclose(pw, phi_w, atol=1e-9)


def test_preprocess_whitens_generator_output():
    rng = np.random.default_rng(5)
    truth = GeneratorModel(rng.standard_normal(4), rng.standard_normal((4, 4)) + 2 * np.eye(4),
                           [3.0, 2.0, 1.0, 0.5])
    model = truth.to_plda_model()
    x = truth.mean + truth.A @ np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(preprocess(model, x), [1.0, 2.0, 3.0, 4.0], atol=1e-12)
    assert preprocess(model, np.vstack([x, x])).shape == (2, 4)
    with pytest.raises(DataError):
        preprocess(model, np.zeros(3))


def _brute_loglik(eset, mean, phi_b, phi_w):
    # each speaker's stacked sessions are jointly Gaussian
    total = 0.0
    for s in range(eset.n_speakers):
        Xs = eset.X[eset.spk_index == s]
        n, d = Xs.shape
        C = np.kron(np.ones((n, n)), phi_b) + np.kron(np.eye(n), phi_w)
        total += multivariate_normal(np.tile(mean, n), C).logpdf(Xs.reshape(-1))
    return total / len(eset)


def test_em_loglik_matches_joint_gaussian():
    rng = np.random.default_rng(11)
    truth = GeneratorModel(rng.standard_normal(3), rng.standard_normal((3, 3)) + 2 * np.eye(3), [4.0, 1.0, 0.3])
    X = sample_plda(truth, 12, 3, seed=4)
    # unequal session counts
    eset = X.subset(np.r_[0:30, 31, 34])
    for iters in (1, 3):
        mean, phi_b, phi_w, hist = train_two_covariance(eset, PldaFitConfig(em_iters=iters, tol=1e-300))
        assert hist[-1] == pytest.approx(_brute_loglik(eset, mean, phi_b, phi_w), abs=1e-9)


def test_em_monotone_and_recovers():
    rng = np.random.default_rng(0)
    psi = np.array([8.0, 3.0, 1.0, 0.5])
    truth = GeneratorModel(rng.standard_normal(4), rng.standard_normal((4, 4)), psi)
    eset = sample_plda(truth, 1000, 10, seed=1)
    _, _, _, hist = train_two_covariance(eset, PldaFitConfig(em_iters=50, tol=1e-10))
    assert np.all(np.diff(hist) >= -1e-10)
    model = fit_plda(eset, PldaFitConfig(em_iters=50, tol=1e-10))
    np.testing.assert_allclose(model.psi, psi, rtol=0.1)
    np.testing.assert_allclose(model.mean, eset.X.mean(axis=0))


def test_degenerate_within_class():
    # every session identical to its speaker vector: within-class covariance is zero
    rng = np.random.default_rng(3)
    v = rng.standard_normal((20, 3))
    X = np.repeat(v, 4, axis=0)
    ids = [f"u{k}" for k in range(80)]
    labels = [f"s{k // 4}" for k in range(80)]
    model = fit_plda(EmbeddingSet(ids, X, labels), PldaFitConfig(em_iters=5))
    assert np.all(np.isfinite(model.psi)) and np.all(np.isfinite(model.A_inv))
    assert model.psi.min() > 1e3


def test_training_needs_labels_and_two_speakers():
    with pytest.raises(DataError):
        fit_plda(EmbeddingSet(["a", "b"], np.eye(2)))
    with pytest.raises(DataError):
        fit_plda(EmbeddingSet(["a", "b"], np.eye(2), ["s", "s"]))
    with pytest.raises(DataError):
        PldaFitConfig(em_iters=0)
