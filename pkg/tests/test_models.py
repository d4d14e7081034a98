"""Vote-share model and nearest-neighbor baseline."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pbcast.models import (
    KnnVoteRegressor,
    PvmRegressor,
    fit_pvm,
    load_model,
    model_from_dict,
    model_to_dict,
    predict_knn,
    predict_pvm,
    pvm_probabilities,
    save_model,
)


def finite_difference_gradient(model, w, X, votes, h=1e-5):
    """Central-difference oracle for the log-likelihood gradient."""
    total = votes.sum()
    grad = np.zeros_like(w)
    for j in range(w.shape[0]):
        up = w.copy()
        up[j] += h
        down = w.copy()
        down[j] -= h
        grad[j] = (
            model._objective(up, X, votes, total)
            - model._objective(down, X, votes, total)
        ) / (2 * h)
    return grad


class TestProbabilities:
    def test_zero_weights_are_uniform(self):
        X = np.random.default_rng(0).normal(size=(7, 4))
        p = pvm_probabilities(np.zeros(4), X)
        assert np.allclose(p, 1 / 7, atol=1e-12)

    def test_hand_computed_two_point_softmax(self):
        # scores ln 3 and 0 -> shares 3/4 and 1/4
        X = np.array([[1.0], [0.0]])
        p = pvm_probabilities(np.array([math.log(3)]), X)
        assert np.allclose(p, [0.75, 0.25], atol=1e-12)

    def test_shift_invariance(self):
        # adding a constant to every score (bias feature) leaves shares alone
        rng = np.random.default_rng(1)
        X = rng.normal(size=(9, 3))
        w = rng.normal(size=3)
        p1 = pvm_probabilities(w, X)
        Xb = np.hstack([X, np.ones((9, 1))])
        wb = np.concatenate([w, [123.4]])
        p2 = pvm_probabilities(wb, Xb)
        assert np.allclose(p1, p2, atol=1e-12)

    def test_overflow_safe(self):
        X = np.array([[1000.0], [0.0]])
        p = pvm_probabilities(np.array([1.0]), X)
        assert np.isfinite(p).all() and abs(p.sum() - 1.0) < 1e-12

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError, match="non-finite"):
            pvm_probabilities(np.array([1.0]), np.array([[np.inf], [0.0]]))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(min_value=2, max_value=12), st.integers(min_value=1, max_value=6),
           st.integers(min_value=0, max_value=2**31 - 1))
    def test_always_a_distribution(self, n, d, seed):
        # score spreads kept inside the float64-representable exp range
        rng = np.random.default_rng(seed)
        X = rng.normal(scale=2.0, size=(n, d))
        w = rng.normal(scale=1.0, size=d)
        p = pvm_probabilities(w, X)
        assert np.all(p > 0)
        assert abs(p.sum() - 1.0) < 1e-12


class TestFit:
    def test_two_point_closed_form(self):
        # one indicator feature; MLE puts p at the empirical vote shares
        X = np.array([[1.0], [0.0]])
        votes = np.array([30.0, 10.0])
        model = PvmRegressor().fit(X, votes)
        p = model.predict_proba(X)
        assert np.allclose(p, [0.75, 0.25], atol=1e-4)
        assert abs(model.coef_[0] - math.log(3)) < 1e-3

    def test_symmetric_instance_fits_uniform(self):
        X = np.eye(4)
        votes = np.full(4, 25.0)
        model = PvmRegressor().fit(X, votes)
        assert np.allclose(model.predict_proba(X), 0.25, atol=1e-4)

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        model = PvmRegressor()
        for _ in range(5):
            X = rng.normal(size=(10, 5))
            votes = rng.integers(1, 50, size=10).astype(float)
            w = rng.normal(scale=0.5, size=5)
            analytic = model._gradient(w, X, votes, votes.sum())
            numeric = finite_difference_gradient(model, w, X, votes)
            rel = np.max(np.abs(analytic - numeric) / np.maximum(np.abs(numeric), 1e-8))
            assert rel < 1e-6

    def test_loglik_history_non_decreasing(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(20, 4))
        votes = rng.integers(0, 100, size=20).astype(float)
        votes[0] = 5  # ensure not all zero
        model = PvmRegressor().fit(X, votes)
        history = np.asarray(model.diagnostics_.history)
        assert np.all(np.diff(history) >= -1e-9)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_l2_shrinks_weights(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(15, 3))
        votes = rng.integers(1, 80, size=15).astype(float)
        free = PvmRegressor().fit(X, votes)
        ridged = PvmRegressor(l2=10.0).fit(X, votes)
        assert np.linalg.norm(ridged.coef_) < np.linalg.norm(free.coef_)

    def test_validation_errors(self):
        X = np.ones((2, 1))
        with pytest.raises(ValueError, match="non-negative"):
            PvmRegressor().fit(X, np.array([-1.0, 2.0]))
        with pytest.raises(ValueError, match="all zero"):
            PvmRegressor().fit(X, np.zeros(2))
        with pytest.raises(ValueError, match="at least 2"):
            PvmRegressor().fit(np.ones((1, 1)), np.array([1.0]))

    def test_non_convergence_warns_but_returns(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(30, 5))
        votes = rng.integers(1, 100, size=30).astype(float)
        with pytest.warns(RuntimeWarning, match="best iterate"):
            model = PvmRegressor(max_iter=2).fit(X, votes)
        assert np.all(np.isfinite(model.coef_))
        assert not model.diagnostics_.converged


class TestPredict:
    def fit_simple(self):
        X = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        votes = np.array([10.0, 30.0, 60.0])
        return PvmRegressor().fit(X, votes), X

    def test_uniform_share_scale(self):
        model = PvmRegressor(total_votes=111961.0)
        model.coef_ = np.zeros(2)
        model.diagnostics_ = None
        X = np.zeros((50, 2))
        pred = model.predict(X)
        assert np.allclose(pred, 111961 / 50, atol=1e-9)
        assert abs(pred[0] - 2239.22) < 0.0001

    def test_sum_matches_total(self):
        model, X = self.fit_simple()
        pred = model.predict(X, total_votes=21780)
        assert abs(pred.sum() - 21780) < 1e-6 * 21780
        assert np.all(pred >= 0)

    def test_doubling_total_doubles_predictions(self):
        model, X = self.fit_simple()
        one = model.predict(X, total_votes=5000)
        two = model.predict(X, total_votes=10000)
        assert np.allclose(two, 2 * one, atol=1e-9)

    def test_ranking_invariant_to_total(self):
        model, X = self.fit_simple()
        a = np.argsort(model.predict(X, total_votes=100))
        b = np.argsort(model.predict(X, total_votes=987654))
        assert np.array_equal(a, b)

    def test_total_required_and_positive(self):
        model, X = self.fit_simple()
        with pytest.raises(ValueError, match="total_votes"):
            model.predict(X)
        with pytest.raises(ValueError, match="total_votes"):
            model.predict(X, total_votes=0)

    def test_functional_facades(self):
        X = np.array([[1.0], [0.0]])
        votes = np.array([30.0, 10.0])
        model = fit_pvm(X, votes)
        assert np.allclose(predict_pvm(model, X, 40.0), [30.0, 10.0], atol=1e-2)


class TestKnn:
    def test_self_query_k1(self):
        rng = np.random.default_rng(6)
        X = rng.normal(size=(12, 4))
        votes = rng.integers(0, 500, size=12).astype(float)
        model = KnnVoteRegressor(k=1).fit(X, votes)
        assert np.array_equal(model.predict(X), votes)

    def test_k_equals_n_gives_mean(self):
        rng = np.random.default_rng(7)
        X = rng.normal(size=(9, 3))
        votes = rng.integers(0, 100, size=9).astype(float)
        model = KnnVoteRegressor(k=9).fit(X, votes)
        pred = model.predict(rng.normal(size=(4, 3)))
        assert np.allclose(pred, votes.mean(), atol=1e-9)

    def test_hand_constructed_geometry(self):
        train = np.array([[0.0, 0.0], [1.0, 0.0], [10.0, 10.0]])
        votes = np.array([10.0, 20.0, 60.0])
        model = KnnVoteRegressor(k=2).fit(train, votes)
        pred = model.predict(np.array([[0.5, 0.1]]))
        assert pred[0] == pytest.approx(15.0)

    def test_predictions_within_train_range(self, campaigns):
        # convexity of the mean on a real dataset
        from pbcast.embeddings import HashingEmbedder
        from pbcast.features import build_features, fit_feature_schema

        embedder = HashingEmbedder(dim=64)
        train = campaigns["wroclaw-2016"]
        eval_c = campaigns["wroclaw-2017"]
        schema = fit_feature_schema(train.projects, embedder)
        model = KnnVoteRegressor(k=5).fit(
            build_features(train, schema, embedder), train.vote_counts()
        )
        pred = model.predict(build_features(eval_c, schema, embedder))
        assert pred.min() >= min(train.vote_counts())
        assert pred.max() <= max(train.vote_counts())

    def test_distance_ties_break_by_training_index(self):
        train = np.array([[1.0, 0.0], [1.0, 0.0], [5.0, 5.0]])
        votes = np.array([10.0, 99.0, 50.0])
        model = KnnVoteRegressor(k=1).fit(train, votes)
        # both first points are equidistant; index order picks the first
        assert model.predict(np.array([[1.0, 0.0]]))[0] == 10.0

    def test_k_bounds(self):
        X = np.ones((3, 2))
        with pytest.raises(ValueError, match="k must be"):
            KnnVoteRegressor(k=0).fit(X, np.ones(3))
        with pytest.raises(ValueError, match="k must be"):
            KnnVoteRegressor(k=4).fit(X, np.ones(3))

    def test_dim_mismatch(self):
        model = KnnVoteRegressor(k=1).fit(np.ones((3, 2)), np.ones(3))
        with pytest.raises(ValueError, match="dimension"):
            model.predict(np.ones((2, 5)))

    def test_facade(self):
        model = KnnVoteRegressor(k=1).fit(np.eye(2), np.array([5.0, 9.0]))
        assert predict_knn(model, np.eye(2)).tolist() == [5.0, 9.0]


class TestSerialization:
    def test_pvm_round_trip(self, tmp_path):
        X = np.array([[1.0], [0.0]])
        model = PvmRegressor().fit(X, np.array([30.0, 10.0]))
        path = save_model(model, tmp_path / "pvm.json", extra={"schema_hash": "abc"})
        again = load_model(path)
        assert np.allclose(again.predict_proba(X), model.predict_proba(X), atol=1e-15)

    def test_knn_round_trip(self):
        model = KnnVoteRegressor(k=2).fit(np.eye(3), np.array([1.0, 2.0, 3.0]))
        again = model_from_dict(model_to_dict(model))
        query = np.array([[0.2, 0.1, 0.0]])
        assert np.array_equal(again.predict(query), model.predict(query))

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown model kind"):
            model_from_dict({"kind": "tree"})

    def test_get_params(self):
        assert PvmRegressor(l2=0.5).get_params()["l2"] == 0.5
        assert KnnVoteRegressor(k=3).get_params() == {"k": 3}
