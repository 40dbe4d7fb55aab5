import numpy as np
import pytest

from spkback.core import DataError, EmbeddingSet
from spkback.numlin import sample_mean_cov
from spkback.synthlab import (
    DomainSample,
    DomainSpec,
    ExperimentPlan,
    GeneratorModel,
    apply_domain_shift,
    apply_nonlinearity,
    build_data,
    coral_embedding_check,
    default_truth,
    make_trials,
    run_condition,
    sample_plda,
    trial_indices,
)


def test_default_truth():
    t = default_truth(8, 0.1, 10.0, seed=0)
    assert t.psi[0] == pytest.approx(10.0) and t.psi[-1] == pytest.approx(0.1)
    np.testing.assert_allclose(t.A.T @ t.A, np.eye(8), atol=1e-12)
    # orthogonal mixing: marginal std is the rms of sqrt(psi + 1)
    assert t.marginal_std() == pytest.approx(np.sqrt(np.mean(t.psi + 1)))


def test_sample_plda_covariances():
    t = default_truth(5, 0.5, 4.0, seed=1)
    e = sample_plda(t, 4000, 4, seed=2)
    assert len(e) == 16000 and e.n_speakers == 4000
    _, C = sample_mean_cov(e.X)
    phi_b = (t.A * t.psi) @ t.A.T
    np.testing.assert_allclose(C, phi_b + t.A @ t.A.T, atol=0.15)
    again = sample_plda(t, 4000, 4, seed=2)
    np.testing.assert_array_equal(again.X, e.X)


def test_generator_validation():
    with pytest.raises(DataError):
        GeneratorModel(np.zeros(2), np.eye(3), np.ones(2))
    with pytest.raises(DataError):
        GeneratorModel(np.zeros(2), np.eye(2), [-1.0, 1.0])
    with pytest.raises(DataError):
        sample_plda(default_truth(2), 0, 3, 0)


def test_nonlinearities():
    X = np.array([[-2.0, 0.5, 3.0]])
    np.testing.assert_array_equal(apply_nonlinearity(X, "relu"), [[0.0, 0.5, 3.0]])
    np.testing.assert_array_equal(apply_nonlinearity(X, "shifted_relu", 1.0), [[1.0, 1.0, 3.0]])
    np.testing.assert_array_equal(apply_nonlinearity(X, "none"), X)
    with pytest.raises(DataError):
        apply_nonlinearity(X, "tanh")


def test_domain_shift_order():
    e = EmbeddingSet(["a"], [[1.0, 2.0]])
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    spec = DomainSpec(mean_shift=[1.0, 1.0], rotation=R, scale=[2.0, 3.0])
    # rotate -> (-2, 1), scale -> (-4, 3), shift -> (-3, 4)
    np.testing.assert_allclose(apply_domain_shift(e, spec).X, [[-3.0, 4.0]])
    with pytest.raises(DataError):
        DomainSpec(rotation=[[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(DataError):
        apply_domain_shift(e, DomainSpec(scale=[1.0, 1.0, 1.0]))


def test_cross_domain_spec():
    s = DomainSpec.cross_domain(16, seed=3, scale_range=(0.5, 2.0), shift_norm=2.0)
    assert np.all((s.scale >= 0.5) & (s.scale <= 2.0))
    assert np.linalg.norm(s.mean_shift) == pytest.approx(2.0)
    assert s.rotation is None
    assert DomainSpec.cross_domain(4, 0, rotate=True).rotation.shape == (4, 4)


def test_trials():
    e = sample_plda(default_truth(3), 10, 4, seed=0)
    i, j, tgt = trial_indices(e, seed=1)
    assert tgt.sum() == 10 * 6 and (~tgt).sum() == 60
    spk = e.spk_index
    assert np.all(spk[i[tgt]] == spk[j[tgt]])
    assert np.all(spk[i[~tgt]] != spk[j[~tgt]])
    pairs = set(zip(i.tolist(), j.tolist()))
    assert len(pairs) == i.size
    tl = make_trials(e, seed=1)
    assert len(tl) == i.size


def test_trials_with_few_cross_pairs():
    X = np.arange(11, dtype=float)[:, None]
    e = EmbeddingSet([f"u{k}" for k in range(11)], X, ["a"] * 10 + ["b"])
    i, j, tgt = trial_indices(e, seed=0)
    assert tgt.sum() == 45 and (~tgt).sum() == 10


def small_plan(**kw):
    truth = default_truth(8, 0.1, 5.0, seed=0)
    base = dict(
        truth=truth,
        train=[DomainSample(DomainSpec(), 60, 5)],
        test=DomainSample(DomainSpec.cross_domain(8, 10), 30, 4),
        adaptation=("none", "coral", "coral_plus"),
        adapt_speakers=40,
        adapt_sessions=3,
    )
    base.update(kw)
    return ExperimentPlan(**base)


def test_build_data_speaker_disjoint():
    train, test, indom = build_data(small_plan())
    for a, b in ((train, test), (train, indom), (test, indom)):
        assert set(a.labels).isdisjoint(b.labels)
    assert test.domain == "test"


def test_run_condition_rows_and_determinism():
    rows = run_condition(small_plan(seed=3))
    cells = {(r["backend"], r["adaptation"]) for r in rows}
    assert cells == {("cos", "none"), ("plda", "none"), ("plda", "coral"), ("plda", "coral_plus")}
    for r in rows:
        assert 0 <= r["eer"] <= 1 and 0 <= r["min_dcf"] <= 1 and 0 <= r["min_cp"] <= 1
    assert rows == run_condition(small_plan(seed=3))
    assert rows != run_condition(small_plan(seed=4))


def test_coral_embedding_check():
    assert coral_embedding_check(small_plan()) < 1e-9


def test_plan_validation():
    with pytest.raises(DataError):
        small_plan(backends=("lda",))
    with pytest.raises(DataError):
        small_plan(adaptation=("magic",))
    with pytest.raises(DataError):
        small_plan(train=[])
