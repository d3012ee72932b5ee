"""Synthetic benchmark generators: Fourier-sparse regression targets over
binary features, and tree-teacher classification tasks with pseudo-labels,
both carrying ground truth for recovery scoring."""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .data import Dataset, TASK_BINARY, TASK_REGRESSION, from_arrays, split
from .fourier import Subset
from .learners import DecisionTree, train_cart


class SyntheticError(ValueError):
    """Raised for infeasible generator parameters."""


@dataclass(frozen=True)
class FourierTask:
    n_features: int
    sparsity: int
    noise_sd: float
    subsets: tuple[Subset, ...]
    coefficients: np.ndarray
    train: Dataset
    test: Dataset
    seed: int

    def clean_values(self, X: np.ndarray) -> np.ndarray:
        """Noiseless target at the given binary rows."""
        return _sparse_eval(self.subsets, self.coefficients, X)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_features": self.n_features,
                "sparsity": self.sparsity,
                "noise_sd": self.noise_sd,
                "subsets": [list(s) for s in self.subsets],
                "coefficients": self.coefficients.tolist(),
                "seed": self.seed,
            }
        )


def _sparse_eval(subsets, coefficients, X: np.ndarray) -> np.ndarray:
    out = np.zeros(X.shape[0])
    for s, c in zip(subsets, coefficients):
        if s:
            out += c * (1.0 - 2.0 * (X[:, list(s)].sum(axis=1) % 2))
        else:
            out += c
    return out


def _all_low_order_subsets(n: int, max_order: int, min_order: int = 1) -> list[Subset]:
    out: list[Subset] = []
    for k in range(min_order, max_order + 1):
        out.extend(combinations(range(n), k))
    return out


def gen_fourier_sparse(
    n: int,
    k: int,
    noise_sd: float,
    n_train: int,
    n_test: int,
    seed: int,
    min_order: int = 1,
) -> FourierTask:
    """k-sparse Fourier target over Bernoulli(0.5) bits.

    Draws k distinct subsets of size <= 3 uniformly without replacement (the
    empty set is always one of them), coefficients from N(0, 4), additive
    Gaussian noise.  ``min_order`` restricts the non-constant subsets' sizes.
    """
    if k < 1:
        raise SyntheticError("sparsity k must be >= 1")
    if n < 3:
        raise SyntheticError("need at least 3 features")
    pool = _all_low_order_subsets(n, max_order=3, min_order=min_order)
    if k - 1 > len(pool):
        raise SyntheticError(
            f"k={k} exceeds the {len(pool) + 1} available size-<=3 subsets"
        )
    rng = np.random.default_rng(seed)
    chosen = [()]
    if k > 1:
        picks = rng.choice(len(pool), size=k - 1, replace=False)
        chosen.extend(pool[i] for i in sorted(picks))
    coeffs = rng.normal(0.0, 2.0, size=k)

    X = rng.integers(0, 2, size=(n_train + n_test, n)).astype(np.float64)
    y = _sparse_eval(chosen, coeffs, X) + rng.normal(0.0, noise_sd, size=X.shape[0])
    d_train = from_arrays(X[:n_train], y[:n_train], TASK_REGRESSION)
    d_test = from_arrays(X[n_train:], y[n_train:], TASK_REGRESSION)
    return FourierTask(
        n_features=n,
        sparsity=k,
        noise_sd=noise_sd,
        subsets=tuple(chosen),
        coefficients=coeffs,
        train=d_train,
        test=d_test,
        seed=seed,
    )


def scenario_a_grids() -> dict[str, list[dict]]:
    """Experiment grids for the Fourier-sparse scenario: low-data sweep,
    noise sweep, and the extreme-sparsity setting."""
    exp1 = [
        {"n": 10, "k": 3, "noise_sd": 0.5, "n_train": nt, "n_test": 200}
        for nt in (20, 50, 100, 200, 300, 500)
    ]
    exp2 = [
        {"n": 8, "k": 3, "noise_sd": s, "n_train": 300, "n_test": 200}
        for s in (0.1, 0.3, 0.5, 1.0, 2.0)
    ]
    exp3 = [
        {"n": 15, "k": k, "noise_sd": 0.3, "n_train": 400, "n_test": 200}
        for k in (1, 2, 3)
    ]
    return {"exp1": exp1, "exp2": exp2, "exp3": exp3}


@dataclass(frozen=True)
class TreeTask:
    teacher: DecisionTree
    depth: int
    train: Dataset  # pseudo-labeled
    test: Dataset  # pseudo-labeled
    original_train_labels: np.ndarray
    original_test_labels: np.ndarray
    seed: int


def gen_cluster_classification(n: int, p: int, p_inf: int, seed: int) -> Dataset:
    """Balanced two-class data: per class, two Gaussian clusters in a
    ``p_inf``-dimensional latent space mixed by a random orthonormal map into
    the informative features; the rest is pure noise."""
    if not 1 <= p_inf <= p:
        raise SyntheticError(f"need 1 <= p_inf <= p, got p_inf={p_inf}, p={p}")
    if n < 4:
        raise SyntheticError("need at least 4 rows")
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, 1.0, size=(2, 2, p_inf)) * 2.0  # (class, cluster, dim)
    mix, _ = np.linalg.qr(rng.normal(size=(p_inf, p_inf)))
    X = np.empty((n, p))
    y = np.empty(n)
    half = n // 2
    sizes = [half, n - half]
    row = 0
    for cls in (0, 1):
        m = sizes[cls]
        cluster = rng.integers(0, 2, size=m)
        latent = centers[cls, cluster] + rng.normal(size=(m, p_inf))
        X[row : row + m, :p_inf] = latent @ mix
        X[row : row + m, p_inf:] = rng.normal(size=(m, p - p_inf))
        y[row : row + m] = cls
        row += m
    perm = rng.permutation(n)
    return from_arrays(X[perm], y[perm], TASK_BINARY, n_classes=2)


def make_tree_task(d: Dataset, depth: int, seed: int, min_leaf: int = 1) -> TreeTask:
    """7:3 split, CART teacher on the training originals, pseudo-labels on
    both splits."""
    if not d.is_classification():
        raise SyntheticError("tree tasks require a classification dataset")
    train, test = split(d, 0.7, seed)
    teacher = train_cart(train, max_depth=depth, min_leaf=min_leaf, seed=seed)
    y_train = np.argmax(teacher.predict(train.features), axis=1).astype(np.float64)
    y_test = np.argmax(teacher.predict(test.features), axis=1).astype(np.float64)
    pseudo_train = from_arrays(train.features, y_train, d.task, n_classes=d.n_classes)
    pseudo_test = from_arrays(test.features, y_test, d.task, n_classes=d.n_classes)
    return TreeTask(
        teacher=teacher,
        depth=depth,
        train=pseudo_train,
        test=pseudo_test,
        original_train_labels=train.target,
        original_test_labels=test.target,
        seed=seed,
    )
