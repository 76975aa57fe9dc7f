import numpy as np
import pytest

from exitcast.logreg import (
    LogisticModel,
    ll_gradient,
    log_likelihood,
    logit_prob,
    logreg_fit,
    load_logistic,
    save_logistic,
)


def make_model(beta):
    beta = np.asarray(beta, dtype=float)
    p = len(beta) - 1
    return LogisticModel(
        beta=beta,
        ridge=0.0,
        converged=True,
        iterations=0,
        means=np.zeros(p),
        scales=np.ones(p),
    )


class TestLogitProb:
    def test_zero_coefficients_give_half(self):
        model = make_model(np.zeros(20))
        assert logit_prob(model, np.ones(19)) == pytest.approx(0.5)

    def test_intercept_only(self):
        model = make_model([1.0] + [0.0] * 19)
        expected = np.e / (1 + np.e)  # 0.7310585786300049
        assert logit_prob(model, np.zeros(19)) == pytest.approx(expected, abs=1e-12)

    def test_single_slope(self):
        model = make_model([0.0, 2.0] + [0.0] * 18)
        x = np.zeros(19)
        x[0] = -1.0
        expected = np.exp(-2) / (1 + np.exp(-2))  # 0.11920292202211757
        assert logit_prob(model, x) == pytest.approx(expected, abs=1e-12)

    def test_overflow_safe(self):
        model = make_model([0.0, 1.0])
        assert logit_prob(model, np.array([1e4])) == pytest.approx(1.0)
        assert logit_prob(model, np.array([-1e4])) == pytest.approx(0.0)
        assert np.isfinite(logit_prob(model, np.array([[1e4], [-1e4]]))).all()

    def test_matrix_input_vectorizes(self):
        model = make_model([0.5, 1.0, -1.0])
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        probs = logit_prob(model, X)
        assert probs.shape == (2,)
        assert probs[0] == pytest.approx(1 / (1 + np.exp(-0.5)))

    def test_negated_coefficients_complement(self, rng):
        beta = rng.normal(size=6)
        model = make_model(beta)
        flipped = make_model(-beta)
        for _ in range(20):
            x = rng.normal(size=5)
            assert logit_prob(model, x) + logit_prob(flipped, x) == pytest.approx(
                1.0, abs=1e-12
            )


class TestGradient:
    def test_matches_central_differences(self, rng):
        for _ in range(10):
            n, p = 30, 5
            X = rng.normal(size=(n, p))
            y = rng.integers(0, 2, size=n).astype(float)
            beta = rng.normal(scale=0.5, size=p + 1)
            analytic = ll_gradient(beta, X, y)
            h = 1e-5
            fd = np.empty_like(analytic)
            for j in range(p + 1):
                e = np.zeros(p + 1)
                e[j] = h
                fd[j] = (log_likelihood(beta + e, X, y) - log_likelihood(beta - e, X, y)) / (2 * h)
            np.testing.assert_allclose(analytic, fd, rtol=1e-6, atol=1e-8)


class TestFit:
    def test_separable_data(self, rng):
        x = np.concatenate([rng.uniform(-2, -0.5, 50), rng.uniform(0.5, 2, 50)])
        y = (x > 0).astype(int)
        model = logreg_fit(x[:, None], y, ridge=1e-6)
        acc = ((logit_prob(model, x[:, None]) > 0.5) == y).mean()
        assert acc >= 0.99
        assert abs(model.beta[1]) > 5
        assert np.isfinite(model.beta).all()

    def test_null_signal_slopes_vanish(self, rng):
        n = 4000
        X = rng.normal(size=(n, 3))
        y = rng.integers(0, 2, size=n)
        model = logreg_fit(X, y)
        assert np.all(np.abs(model.beta[1:]) < 0.05)

    def test_duplicated_rows_leave_optimum_unchanged(self, rng):
        X = rng.normal(size=(60, 4))
        y = ((X[:, 0] + rng.normal(scale=1.5, size=60)) > 0).astype(int)
        single = logreg_fit(X, y, ridge=0.0, tol=1e-12)
        double = logreg_fit(np.vstack([X, X]), np.concatenate([y, y]), ridge=0.0, tol=1e-12)
        np.testing.assert_allclose(single.beta, double.beta, atol=1e-8)

    def test_objective_nondecreasing(self, rng):
        X = rng.normal(size=(100, 6))
        y = ((X @ rng.normal(size=6)) > 0).astype(int)
        trace = []
        logreg_fit(X, y, objective_callback=trace.append)
        diffs = np.diff(trace)
        assert np.all(diffs >= -1e-9)

    def test_single_class_rejected(self, rng):
        with pytest.raises(ValueError):
            logreg_fit(rng.normal(size=(10, 2)), np.ones(10))

    def test_non_finite_rejected(self):
        X = np.array([[1.0], [np.inf]])
        with pytest.raises(ValueError):
            logreg_fit(X, np.array([0, 1]))

    def test_negative_ridge_rejected(self, rng):
        with pytest.raises(ValueError):
            logreg_fit(rng.normal(size=(10, 2)), np.arange(10) % 2, ridge=-1.0)

    def test_constant_column_tolerated(self, rng):
        X = rng.normal(size=(50, 3))
        X[:, 1] = 4.2
        y = (X[:, 0] > 0).astype(int)
        model = logreg_fit(X, y)
        assert np.isfinite(model.beta).all()


def test_save_load_round_trip(tmp_path, rng):
    X = rng.normal(size=(80, 19))
    y = ((X[:, 0] - X[:, 3]) > 0).astype(int)
    model = logreg_fit(X, y)
    path = tmp_path / "model.lr"
    save_logistic(path, model)
    loaded = load_logistic(path)
    np.testing.assert_array_equal(model.beta, loaded.beta)
    np.testing.assert_array_equal(model.means, loaded.means)
    np.testing.assert_array_equal(model.scales, loaded.scales)
    assert loaded.converged == model.converged
    assert loaded.iterations == model.iterations
    assert loaded.ridge == model.ridge
