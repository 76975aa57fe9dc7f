"""Principal component analysis via eigendecomposition of the (scaled) covariance.

Used to shrink the 19-dimensional feature space down to the handful of
components the kernel classifier trains on.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PCAModel",
    "pca_fit",
    "pca_transform",
    "pca_inverse_transform",
    "cumulative_variance",
    "write_cumvar_csv",
    "read_cumvar_csv",
    "save_pca",
    "load_pca",
]


@dataclass(frozen=True)
class PCAModel:
    """Fitted PCA: centering/scaling constants plus an orthonormal basis.

    ``components`` rows are principal directions ordered by eigenvalue
    descending; the sign of each row is fixed so its largest-magnitude
    loading is positive.
    """

    means: np.ndarray
    scales: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    standardized: bool

    @property
    def n_features(self) -> int:
        return len(self.means)


def pca_fit(X: np.ndarray, standardize: bool = True) -> PCAModel:
    """Eigendecompose the covariance (or correlation) matrix of X.

    Features are centered, and scaled to unit variance when ``standardize``
    is set; a zero-variance column gets scale 1 with a diagnostic instead of
    failing.  Deterministic: component signs are canonicalized.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError(f"need a 2-D matrix with at least 2 rows, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("feature matrix contains non-finite entries")

    means = X.mean(axis=0)
    if standardize:
        scales = X.std(axis=0, ddof=1)
        dead = scales == 0.0
        if dead.any():
            warnings.warn(
                f"{int(dead.sum())} zero-variance column(s) left unscaled",
                stacklevel=2,
            )
            scales = np.where(dead, 1.0, scales)
    else:
        scales = np.ones(X.shape[1])

    Z = (X - means) / scales
    cov = (Z.T @ Z) / (X.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    components = eigvecs[:, order].T

    # Fix each component's sign: largest-magnitude loading positive.
    for i, row in enumerate(components):
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            components[i] = -row

    return PCAModel(
        means=means,
        scales=scales,
        components=components,
        eigenvalues=eigvals,
        standardized=standardize,
    )


def pca_transform(model: PCAModel, X: np.ndarray, k: int) -> np.ndarray:
    """Project rows of X onto the first k principal components."""
    if not 1 <= k <= model.n_features:
        raise ValueError(f"k must be in 1..{model.n_features}, got {k}")
    X = np.asarray(X, dtype=float)
    if X.shape[-1] != model.n_features:
        raise ValueError(
            f"expected {model.n_features} columns, got {X.shape[-1]}"
        )
    Z = (X - model.means) / model.scales
    return Z @ model.components[:k].T


def pca_inverse_transform(model: PCAModel, Z: np.ndarray) -> np.ndarray:
    """Map k-component projections back to the original feature space."""
    Z = np.asarray(Z, dtype=float)
    k = Z.shape[-1]
    if not 1 <= k <= model.n_features:
        raise ValueError(f"projection has {k} columns, model has {model.n_features}")
    return (Z @ model.components[:k]) * model.scales + model.means


def cumulative_variance(model: PCAModel) -> np.ndarray:
    """Cumulative fraction of total variance explained, one entry per component."""
    total = model.eigenvalues.sum()
    if total == 0.0:
        # All-constant input: nothing to explain; report a flat ramp of ones.
        return np.ones_like(model.eigenvalues)
    return np.cumsum(model.eigenvalues) / total


def write_cumvar_csv(path, model: PCAModel) -> None:
    """Emit (component, eigenvalue, cumulative fraction) rows for plotting."""
    cum = cumulative_variance(model)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "eigenvalue", "cumulative_fraction"])
        for i, (ev, cv) in enumerate(zip(model.eigenvalues, cum), start=1):
            writer.writerow([i, repr(float(ev)), repr(float(cv))])


def read_cumvar_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Read back (eigenvalues, cumulative fractions) written by write_cumvar_csv."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["component", "eigenvalue", "cumulative_fraction"]:
            raise ValueError(f"unexpected cumvar CSV header: {header}")
        rows = [(float(r[1]), float(r[2])) for r in reader]
    arr = np.asarray(rows) if rows else np.zeros((0, 2))
    return arr[:, 0], arr[:, 1]


def save_pca(path, model: PCAModel) -> None:
    """Plain-text projection file: scaling constants then one row per component."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("pca v1\n")
        fh.write(f"n_features={model.n_features} standardized={int(model.standardized)}\n")
        for name, values in (
            ("means", model.means),
            ("scales", model.scales),
            ("eigenvalues", model.eigenvalues),
        ):
            fh.write(name + " " + " ".join(repr(float(v)) for v in values) + "\n")
        for row in model.components:
            fh.write("component " + " ".join(repr(float(v)) for v in row) + "\n")


def load_pca(path) -> PCAModel:
    """Read back a projection written by save_pca."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "pca v1":
        raise ValueError("not a pca file")
    meta = dict(kv.split("=") for kv in lines[1].split())
    vectors = {}
    components = []
    for line in lines[2:]:
        name, rest = line.split(" ", 1)
        values = np.array([float(v) for v in rest.split()])
        if name == "component":
            components.append(values)
        else:
            vectors[name] = values
    return PCAModel(
        means=vectors["means"],
        scales=vectors["scales"],
        components=np.stack(components),
        eigenvalues=vectors["eigenvalues"],
        standardized=bool(int(meta["standardized"])),
    )
