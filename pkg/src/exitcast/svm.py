"""Soft-margin SVM with a radial kernel, trained by sequential minimal optimization.

The dual is solved pair-by-pair using maximal-violating-pair selection;
probability outputs come from a sigmoid calibrated on cross-fitted decision
values.  ``svm_tune`` reproduces the repeated-subsample grid-search protocol
for picking the misclassification cost and kernel width.
"""
from __future__ import annotations

import warnings
from collections import Counter, OrderedDict
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .domain import CompanyRecord, LabelMapping, aggregate_label
from .features import build_investor_index, featurize_all
from .pca import pca_fit, pca_transform
from .sampling import kfold

__all__ = [
    "SVMModel",
    "TuneResult",
    "SMOResult",
    "rbf_kernel",
    "rbf_matrix",
    "smo_solve",
    "svm_fit",
    "svm_decision",
    "svm_prob",
    "platt_fit",
    "svm_tune",
    "save_svm",
    "load_svm",
    "DEFAULT_COST_GRID",
    "DEFAULT_ALPHA_GRID",
]

KERNEL_CACHE_BYTES = 64 * 1024 * 1024

# Powers of two bracketing the usual sweet spot for cost and kernel width.
DEFAULT_COST_GRID: tuple[float, ...] = tuple(2.0**k for k in range(-3, 5))
DEFAULT_ALPHA_GRID: tuple[float, ...] = tuple(2.0**k for k in range(-6, 3))


def rbf_kernel(x: np.ndarray, y: np.ndarray, alpha: float) -> float:
    """Radial kernel exp(-alpha * ||x - y||^2)."""
    if alpha <= 0:
        raise ValueError(f"kernel alpha must be positive, got {alpha}")
    d = np.asarray(x, float) - np.asarray(y, float)
    return float(np.exp(-alpha * float(d @ d)))


def rbf_matrix(A: np.ndarray, B: np.ndarray, alpha: float) -> np.ndarray:
    """Kernel matrix K[i, j] = exp(-alpha * ||A_i - B_j||^2)."""
    if alpha <= 0:
        raise ValueError(f"kernel alpha must be positive, got {alpha}")
    A = np.atleast_2d(np.asarray(A, float))
    B = np.atleast_2d(np.asarray(B, float))
    sq = (
        (A * A).sum(axis=1)[:, None]
        + (B * B).sum(axis=1)[None, :]
        - 2.0 * (A @ B.T)
    )
    return np.exp(-alpha * np.clip(sq, 0.0, None))


class _KernelCache:
    """Kernel rows on demand, bounded by KERNEL_CACHE_BYTES.

    Small problems precompute the full matrix; larger ones keep an LRU set
    of rows.
    """

    def __init__(self, X: np.ndarray, alpha: float):
        self.X = X
        self.alpha = alpha
        n = len(X)
        self.full: np.ndarray | None = None
        if n * n * 8 <= KERNEL_CACHE_BYTES:
            self.full = rbf_matrix(X, X, alpha)
        else:
            self.capacity = max(2, KERNEL_CACHE_BYTES // (8 * n))
            self.rows: OrderedDict[int, np.ndarray] = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        if self.full is not None:
            return self.full[i]
        cached = self.rows.get(i)
        if cached is not None:
            self.rows.move_to_end(i)
            return cached
        r = rbf_matrix(self.X[i : i + 1], self.X, self.alpha)[0]
        self.rows[i] = r
        if len(self.rows) > self.capacity:
            self.rows.popitem(last=False)
        return r


@dataclass(frozen=True)
class SMOResult:
    """Raw dual solution: multipliers, bias, and convergence diagnostics."""

    alphas: np.ndarray
    bias: float
    n_iter: int
    converged: bool
    kkt_violation: float
    objective_gains: np.ndarray | None


def smo_solve(
    X: np.ndarray,
    y_signed: np.ndarray,
    cost: float,
    kernel_alpha: float,
    tol: float = 1e-3,
    max_iter: int = 1_000_000,
    record_objective: bool = False,
) -> SMOResult:
    """Solve the soft-margin dual for labels in {-1, +1}.

    Each step picks the maximal violating pair, solves the two-variable
    subproblem analytically (clipped to the box), and updates the cached
    margins.  Terminates when the worst KKT violation drops below ``tol``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y_signed, dtype=float)
    n = len(y)
    C = float(cost)
    if C <= 0:
        raise ValueError(f"cost must be positive, got {cost}")
    kernel = _KernelCache(X, kernel_alpha)

    alphas = np.zeros(n)
    F = -y.copy()  # F_i = sum_j alpha_j y_j K_ij - y_i
    gains: list[float] = []
    snap = 1e-10 * C
    n_iter = 0
    converged = False
    violation = np.inf

    for n_iter in range(1, max_iter + 1):
        interior = (alphas > 0) & (alphas < C)
        up = interior | ((alphas <= 0) & (y > 0)) | ((alphas >= C) & (y < 0))
        low = interior | ((alphas >= C) & (y > 0)) | ((alphas <= 0) & (y < 0))

        F_up = np.where(up, F, np.inf)
        F_low = np.where(low, F, -np.inf)
        i2 = int(np.argmin(F_up))  # smallest F in the "up" set
        i1 = int(np.argmax(F_low))  # largest F in the "low" set
        violation = float(F_low[i1] - F_up[i2])
        if violation <= tol:
            converged = True
            break

        y1, y2 = y[i1], y[i2]
        a1, a2 = alphas[i1], alphas[i2]
        K1 = kernel.row(i1)
        K2 = kernel.row(i2)
        eta = max(K1[i1] + K2[i2] - 2.0 * K1[i2], 1e-12)

        a2_new = a2 + y2 * (F[i1] - F[i2]) / eta
        if y1 != y2:
            lo, hi = max(0.0, a2 - a1), min(C, C + a2 - a1)
        else:
            lo, hi = max(0.0, a1 + a2 - C), min(C, a1 + a2)
        a2_new = min(max(a2_new, lo), hi)
        if abs(a2_new - a2) < 1e-14:
            converged = True  # numerically stuck; violation already near tol
            break
        a1_new = a1 + y1 * y2 * (a2 - a2_new)
        if a1_new < snap:
            a1_new = 0.0
        elif a1_new > C - snap:
            a1_new = C
        if a2_new < snap:
            a2_new = 0.0
        elif a2_new > C - snap:
            a2_new = C

        d1, d2 = a1_new - a1, a2_new - a2
        if record_objective:
            t = y1 * d1
            f1, f2 = F[i1] + y1, F[i2] + y2
            gains.append(d1 + d2 - t * (f1 - f2) - 0.5 * t * t * eta)
        alphas[i1], alphas[i2] = a1_new, a2_new
        F += (d1 * y1) * K1 + (d2 * y2) * K2

    interior = (alphas > 0) & (alphas < C)
    up = interior | ((alphas <= 0) & (y > 0)) | ((alphas >= C) & (y < 0))
    low = interior | ((alphas >= C) & (y > 0)) | ((alphas <= 0) & (y < 0))
    b_up = float(np.min(np.where(up, F, np.inf)))
    b_low = float(np.max(np.where(low, F, -np.inf)))
    bias = -0.5 * (b_up + b_low)
    if not converged:
        warnings.warn(
            f"SMO stopped at max_iter={max_iter} with KKT violation {violation:.3g}",
            stacklevel=2,
        )
    return SMOResult(
        alphas=alphas,
        bias=bias,
        n_iter=n_iter,
        converged=converged,
        kkt_violation=max(violation if np.isfinite(violation) else 0.0, b_low - b_up),
        objective_gains=np.asarray(gains) if record_objective else None,
    )


@dataclass(frozen=True)
class SVMModel:
    """Fitted classifier: support vectors, dual coefficients, and calibration."""

    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel_alpha: float
    cost: float
    platt_a: float
    platt_b: float
    n_iter: int = 0
    converged: bool = True
    kkt_violation: float = 0.0
    objective_gains: np.ndarray | None = None


def _nll(z: np.ndarray, t: np.ndarray) -> float:
    return float(np.sum(np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))) - (1.0 - t) * z))


def platt_fit(decision_values: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Fit p(d) = 1 / (1 + exp(a*d + b)) to (decision value, 0/1 label) pairs.

    Uses the classic smoothed targets so the fitted slope stays finite even
    on perfectly ordered data, plus a tiny ridge for numerical safety.  The
    slope is clamped to a <= 0: larger decision values can only mean a larger
    positive probability.  Degenerate inputs (all decision values equal) fall
    back to the prior-matching constant sigmoid with a diagnostic.
    """
    d = np.asarray(decision_values, dtype=float)
    lab = np.asarray(labels)
    if len(d) != len(lab) or len(d) == 0:
        raise ValueError("decision values and labels must align and be nonempty")
    n_pos = int((lab == 1).sum())
    n_neg = len(lab) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes are required to calibrate probabilities")

    t = np.where(lab == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    prior_b = float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    if np.all(d == d[0]):
        warnings.warn("constant decision values; returning prior-matching sigmoid", stacklevel=2)
        return 0.0, prior_b

    lam = 1e-8
    a, b = 0.0, prior_b
    nll = _nll(a * d + b, t) + 0.5 * lam * (a * a + b * b)
    for _ in range(100):
        z = a * d + b
        p = 1.0 / (1.0 + np.exp(np.clip(z, -500, 500)))
        resid = t - p  # d(nll)/dz = t - p
        g = np.array([float(resid @ d) + lam * a, float(resid.sum()) + lam * b])
        w = np.clip(p * (1.0 - p), 1e-12, None)
        h11 = float(w @ (d * d)) + lam
        h12 = float(w @ d)
        h22 = float(w.sum()) + lam
        det = h11 * h22 - h12 * h12
        step = np.array([(h22 * g[0] - h12 * g[1]) / det, (h11 * g[1] - h12 * g[0]) / det])
        scale = 1.0
        improved = False
        for _ in range(30):
            na, nb = a - scale * step[0], b - scale * step[1]
            new_nll = _nll(na * d + nb, t) + 0.5 * lam * (na * na + nb * nb)
            if new_nll <= nll:
                improved = True
                break
            scale *= 0.5
        if not improved:
            break
        a, b = na, nb
        if nll - new_nll < 1e-12:
            nll = new_nll
            break
        nll = new_nll

    if a > 0.0:
        # Constrained optimum sits on the boundary: constant sigmoid at the
        # smoothed prior.
        mean_t = float(t.mean())
        return 0.0, float(np.log((1.0 - mean_t) / mean_t))
    return float(a), float(b)


def svm_fit(
    X: np.ndarray,
    y: np.ndarray,
    cost: float = 0.5,
    alpha: float = 0.125,
    tol: float = 1e-3,
    max_passes: int = 1_000_000,
    calibration_folds: int = 3,
    seed: int = 0,
    record_objective: bool = False,
) -> SVMModel:
    """Train the kernel classifier and calibrate its probability output.

    The decision function comes from one SMO solve on the full input; the
    sigmoid calibration is fitted on decision values cross-fitted over
    ``calibration_folds`` internal splits so the calibrator never scores the
    points it was trained on.  Tiny or degenerate inputs fall back to direct
    calibration on the training decisions.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if alpha <= 0:
        raise ValueError(f"kernel alpha must be positive, got {alpha}")
    if cost <= 0:
        raise ValueError(f"cost must be positive, got {cost}")
    if len(np.unique(y)) < 2:
        raise ValueError("labels are single-class; nothing to fit")
    ys = 2.0 * y - 1.0

    cal_d: list[np.ndarray] = []
    cal_y: list[np.ndarray] = []
    if calibration_folds >= 2 and len(y) >= 2 * calibration_folds:
        folds = kfold(len(y), calibration_folds, seed)
        for f in range(calibration_folds):
            tr = folds.train_indices(f)
            te = folds.test_indices(f)
            if len(np.unique(y[tr])) < 2:
                continue
            part = smo_solve(X[tr], ys[tr], cost, alpha, tol, max_passes)
            sv = part.alphas > 0
            dec = (
                rbf_matrix(X[te], X[tr][sv], alpha) @ (part.alphas[sv] * ys[tr][sv])
                + part.bias
            )
            cal_d.append(dec)
            cal_y.append(y[te])

    result = smo_solve(
        X, ys, cost, alpha, tol, max_passes, record_objective=record_objective
    )
    sv = result.alphas > 0
    support_vectors = X[sv]
    dual_coefs = result.alphas[sv] * ys[sv]

    if cal_d:
        platt_a, platt_b = platt_fit(np.concatenate(cal_d), np.concatenate(cal_y))
    else:
        train_dec = rbf_matrix(X, support_vectors, alpha) @ dual_coefs + result.bias
        platt_a, platt_b = platt_fit(train_dec, y)

    return SVMModel(
        support_vectors=support_vectors,
        dual_coefs=dual_coefs,
        bias=result.bias,
        kernel_alpha=alpha,
        cost=cost,
        platt_a=platt_a,
        platt_b=platt_b,
        n_iter=result.n_iter,
        converged=result.converged,
        kkt_violation=result.kkt_violation,
        objective_gains=result.objective_gains,
    )


def svm_decision(model: SVMModel, x: np.ndarray) -> float | np.ndarray:
    """Signed distance-like score; positive means the positive class side."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if len(model.dual_coefs):
        dec = rbf_matrix(X, model.support_vectors, model.kernel_alpha) @ model.dual_coefs
        dec = dec + model.bias
    else:
        dec = np.full(len(X), model.bias)
    return float(dec[0]) if single else dec


def svm_prob(model: SVMModel, x: np.ndarray) -> float | np.ndarray:
    """Calibrated positive-class probability."""
    dec = svm_decision(model, x)
    z = model.platt_a * np.asarray(dec) + model.platt_b
    p = 1.0 / (1.0 + np.exp(np.clip(z, -500, 500)))
    return float(p) if np.ndim(dec) == 0 else p


@dataclass(frozen=True)
class TuneResult:
    """Best (cost, alpha) per tuning session plus their order statistics."""

    session_costs: tuple[float, ...]
    session_alphas: tuple[float, ...]
    median_cost: float
    median_alpha: float
    mode_cost: float
    mode_alpha: float


def _mode(values: Sequence[float]) -> float:
    counts = Counter(values)
    top = max(counts.values())
    return min(v for v, c in counts.items() if c == top)


def svm_tune(
    records: Sequence[CompanyRecord],
    n_sessions: int = 200,
    session_size: int = 1600,
    cost_grid: Sequence[float] = DEFAULT_COST_GRID,
    alpha_grid: Sequence[float] = DEFAULT_ALPHA_GRID,
    seed: int = 0,
    cv_folds: int = 3,
    pca_components: int = 7,
    mapping: LabelMapping | None = None,
    tol: float = 1e-3,
) -> TuneResult:
    """Repeated-subsample grid search for (cost, kernel alpha).

    Each session draws ``session_size`` records without replacement, builds
    its own investor index and PCA reduction, and grid-searches the pair by
    internal cross-validated sign accuracy.  The result reports the median
    and most frequent winner across sessions.  Deterministic given the seed.
    """
    if len(cost_grid) == 0 or len(alpha_grid) == 0:
        raise ValueError("parameter grids must be nonempty")
    if len(records) < session_size:
        raise ValueError(
            f"need at least session_size={session_size} records, got {len(records)}"
        )
    if n_sessions < 1:
        raise ValueError(f"n_sessions must be >= 1, got {n_sessions}")
    mapping = mapping or LabelMapping()

    best_costs: list[float] = []
    best_alphas: list[float] = []
    for s in range(n_sessions):
        rng = np.random.default_rng(np.random.SeedSequence([seed, s]))
        chosen = rng.choice(len(records), size=session_size, replace=False)
        session = [records[i] for i in chosen]
        y = np.array(
            [int(aggregate_label(r.exit, mapping)) for r in session], dtype=np.int64
        )
        index = build_investor_index(session)
        Xf = featurize_all(session, index)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # constant feature columns are routine
            model = pca_fit(Xf, standardize=True)
        Z = pca_transform(model, Xf, pca_components)
        ys = 2.0 * y - 1.0
        folds = kfold(session_size, cv_folds, int(rng.integers(2**63)))

        best_acc = -1.0
        best_pair = (float(cost_grid[0]), float(alpha_grid[0]))
        for cost in cost_grid:
            for alpha in alpha_grid:
                correct = 0
                counted = 0
                for f in range(cv_folds):
                    tr = folds.train_indices(f)
                    te = folds.test_indices(f)
                    if len(np.unique(y[tr])) < 2:
                        continue
                    fit = smo_solve(Z[tr], ys[tr], cost, alpha, tol)
                    sv = fit.alphas > 0
                    dec = (
                        rbf_matrix(Z[te], Z[tr][sv], alpha)
                        @ (fit.alphas[sv] * ys[tr][sv])
                        + fit.bias
                    )
                    correct += int(((dec > 0) == (y[te] == 1)).sum())
                    counted += len(te)
                acc = correct / counted if counted else -1.0
                if acc > best_acc:
                    best_acc = acc
                    best_pair = (float(cost), float(alpha))
        best_costs.append(best_pair[0])
        best_alphas.append(best_pair[1])

    return TuneResult(
        session_costs=tuple(best_costs),
        session_alphas=tuple(best_alphas),
        median_cost=float(np.median(best_costs)),
        median_alpha=float(np.median(best_alphas)),
        mode_cost=_mode(best_costs),
        mode_alpha=_mode(best_alphas),
    )


def save_svm(path, model: SVMModel) -> None:
    """Write support vectors, coefficients, calibration, and hyperparameters."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("svm v1\n")
        fh.write(
            f"cost={model.cost!r} kernel_alpha={model.kernel_alpha!r} "
            f"bias={model.bias!r} platt_a={model.platt_a!r} platt_b={model.platt_b!r} "
            f"n_features={model.support_vectors.shape[1] if len(model.support_vectors) else 0} "
            f"n_sv={len(model.dual_coefs)}\n"
        )
        for coef, row in zip(model.dual_coefs, model.support_vectors):
            fh.write("sv " + repr(float(coef)) + " " + " ".join(repr(float(v)) for v in row) + "\n")


def load_svm(path) -> SVMModel:
    """Read back a model written by save_svm."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "svm v1":
        raise ValueError("not an svm model file")
    meta = dict(kv.split("=") for kv in lines[1].split())
    coefs, vecs = [], []
    for line in lines[2:]:
        parts = line.split()
        coefs.append(float(parts[1]))
        vecs.append([float(v) for v in parts[2:]])
    n_feat = int(meta["n_features"])
    return SVMModel(
        support_vectors=np.asarray(vecs) if vecs else np.zeros((0, n_feat)),
        dual_coefs=np.asarray(coefs),
        bias=float(meta["bias"]),
        kernel_alpha=float(meta["kernel_alpha"]),
        cost=float(meta["cost"]),
        platt_a=float(meta["platt_a"]),
        platt_b=float(meta["platt_b"]),
    )
