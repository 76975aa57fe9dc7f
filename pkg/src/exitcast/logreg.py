"""Logistic regression trained by iteratively reweighted least squares.

The model is the plain log-odds-linear classifier; a tiny ridge penalty on
the slope coefficients keeps the optimum finite when a balanced training
fold happens to be separable.  Fitting standardizes features internally for
conditioning, then folds the transform back so the stored coefficients live
in raw feature space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LogisticModel",
    "sigmoid",
    "logit_prob",
    "log_likelihood",
    "ll_gradient",
    "logreg_fit",
    "save_logistic",
    "load_logistic",
]


def sigmoid(s: np.ndarray) -> np.ndarray:
    """Overflow-safe logistic function."""
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass(frozen=True)
class LogisticModel:
    """Fitted coefficients (intercept first) in raw feature space."""

    beta: np.ndarray
    ridge: float
    converged: bool
    iterations: int
    means: np.ndarray
    scales: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.beta) - 1


def logit_prob(model: LogisticModel, x: np.ndarray) -> float | np.ndarray:
    """Positive-class probability for one vector or a matrix of rows."""
    x = np.asarray(x, dtype=float)
    s = model.beta[0] + x @ model.beta[1:]
    p = sigmoid(s)
    return float(p) if np.ndim(s) == 0 else p


def _linear_score(beta: np.ndarray, X: np.ndarray) -> np.ndarray:
    return beta[0] + X @ beta[1:]


def log_likelihood(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    """Bernoulli log-likelihood of labels y in {0,1} under coefficients beta."""
    s = _linear_score(np.asarray(beta, float), np.asarray(X, float))
    y = np.asarray(y, float)
    # log(1 + e^s) computed without overflow.
    softplus = np.maximum(s, 0.0) + np.log1p(np.exp(-np.abs(s)))
    return float(np.sum(y * s - softplus))


def ll_gradient(beta: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Analytic gradient of log_likelihood with respect to beta."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    resid = y - sigmoid(_linear_score(np.asarray(beta, float), X))
    grad = np.empty(X.shape[1] + 1)
    grad[0] = resid.sum()
    grad[1:] = X.T @ resid
    return grad


def _penalized_ll(beta: np.ndarray, X: np.ndarray, y: np.ndarray, ridge: float) -> float:
    return log_likelihood(beta, X, y) - 0.5 * ridge * float(beta[1:] @ beta[1:])


def logreg_fit(
    X: np.ndarray,
    y: np.ndarray,
    ridge: float = 1e-6,
    tol: float = 1e-8,
    max_iter: int = 100,
    objective_callback=None,
) -> LogisticModel:
    """Maximize the ridge-penalized log-likelihood by Newton/IRLS steps.

    The penalty applies to slopes only (never the intercept) in the
    standardized feature space.  Steps are halved whenever a full Newton
    step would decrease the penalized objective, so the objective is
    nondecreasing across iterations.  Stops when the objective improves by
    less than ``tol``.

    ``objective_callback``, when given, receives the penalized objective
    after every accepted iteration (and once for the starting point).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y) or len(y) < 2:
        raise ValueError(f"need matching X ({X.shape}) and y ({y.shape}) with >= 2 rows")
    if not np.isfinite(X).all():
        raise ValueError("feature matrix contains non-finite entries")
    if len(np.unique(y)) < 2:
        raise ValueError("labels are single-class; nothing to fit")
    if ridge < 0:
        raise ValueError(f"ridge must be nonnegative, got {ridge}")

    means = X.mean(axis=0)
    scales = X.std(axis=0, ddof=1)
    scales = np.where(scales == 0.0, 1.0, scales)
    Z = (X - means) / scales

    p = X.shape[1]
    beta = np.zeros(p + 1)
    penalty = np.concatenate([[0.0], np.full(p, ridge)])
    ll = _penalized_ll(beta, Z, y, ridge)
    if objective_callback is not None:
        objective_callback(ll)
    converged = False
    iterations = 0

    for iterations in range(1, max_iter + 1):
        s = _linear_score(beta, Z)
        prob = sigmoid(s)
        w = np.clip(prob * (1.0 - prob), 1e-12, None)
        grad = ll_gradient(beta, Z, y) - penalty * beta
        Z1 = np.column_stack([np.ones(len(Z)), Z])
        hess = (Z1 * w[:, None]).T @ Z1 + np.diag(penalty)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]

        # Step-halving: never accept a move that lowers the objective.
        new_ll = ll
        scale = 1.0
        for _ in range(30):
            candidate = beta + scale * step
            new_ll = _penalized_ll(candidate, Z, y, ridge)
            if new_ll >= ll:
                beta = candidate
                break
            scale *= 0.5
        if new_ll < ll:
            converged = True  # no uphill direction left at machine precision
            break
        if objective_callback is not None:
            objective_callback(new_ll)
        if new_ll - ll < tol:
            ll = new_ll
            converged = True
            break
        ll = new_ll

    # Fold the standardization back into raw-space coefficients.
    raw = np.empty(p + 1)
    raw[1:] = beta[1:] / scales
    raw[0] = beta[0] - float((beta[1:] * means / scales).sum())
    return LogisticModel(
        beta=raw,
        ridge=ridge,
        converged=converged,
        iterations=iterations,
        means=means,
        scales=scales,
    )


def save_logistic(path, model: LogisticModel, feature_names: list[str] | None = None) -> None:
    """Write the model as flat text: named coefficients plus scaling constants."""
    names = feature_names or [f"x{i}" for i in range(1, model.n_features + 1)]
    if len(names) != model.n_features:
        raise ValueError("feature_names length must match the model")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("logistic v1\n")
        fh.write(
            f"ridge={model.ridge!r} converged={int(model.converged)} "
            f"iterations={model.iterations}\n"
        )
        fh.write(f"intercept {float(model.beta[0])!r}\n")
        for name, b, m, s in zip(names, model.beta[1:], model.means, model.scales):
            fh.write(f"coef {name} {float(b)!r} {float(m)!r} {float(s)!r}\n")


def load_logistic(path) -> LogisticModel:
    """Read back a model written by save_logistic."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "logistic v1":
        raise ValueError("not a logistic model file")
    meta = dict(kv.split("=") for kv in lines[1].split())
    intercept = float(lines[2].split()[1])
    betas, means, scales = [], [], []
    for line in lines[3:]:
        parts = line.split()
        betas.append(float(parts[2]))
        means.append(float(parts[3]))
        scales.append(float(parts[4]))
    return LogisticModel(
        beta=np.array([intercept] + betas),
        ridge=float(meta["ridge"]),
        converged=bool(int(meta["converged"])),
        iterations=int(meta["iterations"]),
        means=np.array(means),
        scales=np.array(scales),
    )
