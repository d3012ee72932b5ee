"""Boolean Fourier (Walsh-Hadamard) basis, sparse surrogate fitting, and an
exact brute-force transform used as a verification oracle.

A surrogate approximates a value function f over masks m in {0,1}^p as

    f(m) ~= sum_{S in support} coeff[S] * (-1)^{|m & S|}

Support is selected by orthogonal matching pursuit over the enumerated basis
of all subsets of size <= K, then coefficients are refit by ridge-regularized
least squares.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Sequence

import numpy as np


class FourierError(ValueError):
    """Raised for invalid surrogate inputs or budgets."""


Subset = tuple[int, ...]


def parity(subset: Sequence[int], mask: np.ndarray) -> int:
    """(-1)^(number of set bits of mask inside subset)."""
    mask = np.asarray(mask)
    for j in subset:
        if j < 0 or j >= len(mask):
            raise FourierError(f"feature index {j} out of range for p={len(mask)}")
    bits = sum(int(mask[j]) for j in subset)
    return -1 if bits % 2 else 1


def parity_matrix(subsets: Sequence[Subset], masks: np.ndarray) -> np.ndarray:
    """(n_masks, n_subsets) matrix of parities, vectorized."""
    masks = np.asarray(masks, dtype=np.int64)
    n, p = masks.shape
    out = np.empty((n, len(subsets)), dtype=np.float64)
    for j, s in enumerate(subsets):
        if s:
            out[:, j] = 1.0 - 2.0 * (masks[:, list(s)].sum(axis=1) % 2)
        else:
            out[:, j] = 1.0
    return out


@dataclass(frozen=True)
class FourierSurrogate:
    p: int
    max_order: int
    support: tuple[Subset, ...]
    coefficients: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.support) != len(self.coefficients):
            raise FourierError("support and coefficient lengths differ")
        if len(set(self.support)) != len(self.support):
            raise FourierError("support subsets must be pairwise distinct")
        for s in self.support:
            if len(s) > self.max_order:
                raise FourierError(f"support subset {s} exceeds max order {self.max_order}")
            if any(j < 0 or j >= self.p for j in s):
                raise FourierError(f"support subset {s} out of range for p={self.p}")
        if not np.all(np.isfinite(self.coefficients)):
            raise FourierError("non-finite surrogate coefficients")

    def to_json(self) -> str:
        return json.dumps(
            {
                "p": self.p,
                "K": self.max_order,
                "support": [list(s) for s in self.support],
                "coefficients": [float(c) for c in self.coefficients],
                "diagnostics": self.diagnostics,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "FourierSurrogate":
        obj = json.loads(text)
        return cls(
            p=obj["p"],
            max_order=obj["K"],
            support=tuple(tuple(s) for s in obj["support"]),
            coefficients=np.asarray(obj["coefficients"], dtype=np.float64),
            diagnostics=obj.get("diagnostics", {}),
        )


def eval_surrogate(s: FourierSurrogate, mask: np.ndarray) -> float:
    mask = np.asarray(mask)
    if mask.shape != (s.p,):
        raise FourierError(f"mask length {mask.shape} does not match p={s.p}")
    return float(eval_surrogate_batch(s, mask[None, :])[0])


def eval_surrogate_batch(s: FourierSurrogate, masks: np.ndarray) -> np.ndarray:
    masks = np.asarray(masks)
    if masks.shape[1] != s.p:
        raise FourierError(f"mask width {masks.shape[1]} does not match p={s.p}")
    if not s.support:
        return np.zeros(masks.shape[0])
    return parity_matrix(s.support, masks) @ s.coefficients


def enumerate_subsets(p: int, max_order: int) -> list[Subset]:
    """All subsets of {0..p-1} with size <= max_order, empty set first."""
    out: list[Subset] = [()]
    for k in range(1, max_order + 1):
        out.extend(combinations(range(p), k))
    return out


def _call_value_fn(value_fn: Callable, masks: np.ndarray) -> np.ndarray:
    """Accept either a batched (masks->vector) or scalar (mask->real) callable."""
    try:
        vals = np.asarray(value_fn(masks), dtype=np.float64)
        if vals.shape == (masks.shape[0],):
            return vals
    except Exception:
        pass
    return np.array([float(value_fn(m)) for m in masks], dtype=np.float64)


def fit_surrogate(
    value_fn: Callable,
    p: int,
    max_order: int = 3,
    budget: int = 500,
    max_support: int = 20,
    ridge: float = 1e-6,
    seed: int = 0,
    residual_tol: float = 1e-8,
) -> FourierSurrogate:
    """Fit a sparse low-order surrogate from uniformly drawn mask queries.

    Draws ``budget`` masks uniformly (all-ones and all-zeros always included),
    queries each distinct mask once, runs OMP over the enumerated basis on an
    80% train portion, ridge-refits the selected coefficients (constant term
    unpenalized), and records held-out R^2 on the remaining 20%.
    """
    if max_order < 1:
        raise FourierError(f"max_order must be >= 1, got {max_order}")
    if p > 30:
        raise FourierError(f"p={p} exceeds the enumerated-basis limit of 30")
    if budget < 2 * max_support:
        raise FourierError(
            f"budget {budget} too small; need at least 2*max_support={2 * max_support}"
        )
    rng = np.random.default_rng(seed)
    masks = rng.integers(0, 2, size=(budget, p), dtype=np.int64)
    masks[0] = 1
    masks[1] = 0
    masks, first = np.unique(masks, axis=0, return_index=True)
    order = np.argsort(first)  # keep draw order so determinism is transparent
    masks = masks[order]
    values = _call_value_fn(value_fn, masks)
    if not np.all(np.isfinite(values)):
        raise FourierError("value function returned non-finite values")

    n = masks.shape[0]
    n_holdout = max(1, n // 5) if n >= 5 else 0
    holdout_idx = rng.choice(n, size=n_holdout, replace=False) if n_holdout else np.array([], int)
    train_mask = np.ones(n, dtype=bool)
    train_mask[holdout_idx] = False
    # keep the anchors (all-ones / all-zeros rows) in the training portion
    anchors = np.flatnonzero((masks.sum(axis=1) == p) | (masks.sum(axis=1) == 0))
    train_mask[anchors] = True
    if train_mask.all() and n_holdout:
        train_mask[holdout_idx[0]] = False

    basis = enumerate_subsets(p, max_order)
    X = parity_matrix(basis, masks)
    X_tr, y_tr = X[train_mask], values[train_mask]
    X_ho, y_ho = X[~train_mask], values[~train_mask]

    selected = _omp_select(X_tr, y_tr, max_support, residual_tol)
    coeffs = _ridge_refit(X_tr[:, selected], y_tr, basis, selected, ridge)

    # drop numerically-zero coefficients so exact sparse functions recover
    # exactly their generating support
    scale = max(1.0, float(np.max(np.abs(coeffs))) if len(coeffs) else 1.0)
    keep = np.abs(coeffs) > 1e-7 * scale
    selected = [s for s, k in zip(selected, keep) if k]
    coeffs = coeffs[keep]

    support = tuple(basis[j] for j in selected)
    if X_ho.shape[0] > 0:
        pred = X_ho[:, selected] @ coeffs if selected else np.zeros(len(y_ho))
        ss_tot = float(np.sum((y_ho - y_ho.mean()) ** 2))
        ss_res = float(np.sum((y_ho - pred) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    else:
        r2 = float("nan")
    diagnostics = {
        "holdout_r2": r2,
        "n_queries": int(n),
        "budget": int(budget),
        "n_selected": len(support),
    }
    return FourierSurrogate(
        p=p,
        max_order=max_order,
        support=support,
        coefficients=np.asarray(coeffs, dtype=np.float64),
        diagnostics=diagnostics,
    )


def _omp_select(X: np.ndarray, y: np.ndarray, max_support: int, tol: float) -> list[int]:
    """Greedy column selection with full least-squares refit each step."""
    selected: list[int] = []
    residual = y.copy()
    prev_norm = float(np.linalg.norm(residual))
    col_norms = np.linalg.norm(X, axis=0)
    col_norms[col_norms == 0] = 1.0
    for _ in range(min(max_support, X.shape[1])):
        corr = np.abs(X.T @ residual) / col_norms
        corr[selected] = -np.inf
        j = int(np.argmax(corr))
        trial = selected + [j]
        beta, *_ = np.linalg.lstsq(X[:, trial], y, rcond=None)
        new_residual = y - X[:, trial] @ beta
        new_norm = float(np.linalg.norm(new_residual))
        if prev_norm - new_norm < tol:
            break
        selected = trial
        residual = new_residual
        prev_norm = new_norm
    return selected


def _ridge_refit(
    Xs: np.ndarray, y: np.ndarray, basis: list[Subset], selected: list[int], ridge: float
) -> np.ndarray:
    if not selected:
        return np.zeros(0)
    penalties = np.array([0.0 if basis[j] == () else ridge for j in selected])
    A = Xs.T @ Xs + np.diag(penalties)
    b = Xs.T @ y
    return np.linalg.solve(A, b)


def brute_force_wht(values: np.ndarray) -> np.ndarray:
    """Exact normalized Walsh-Hadamard transform of a full 2^p value table.

    ``values[m]`` is indexed by the mask's little-endian integer encoding
    (bit j of m = feature j).  Returns coefficients indexed the same way:
    F_hat[S] = 2^-p * sum_m f(m) * (-1)^{|m & S|}.  Applying the transform
    twice and multiplying by 2^p recovers the input.
    """
    values = np.asarray(values, dtype=np.float64)
    size = values.shape[0]
    if size & (size - 1) != 0 or size == 0:
        raise FourierError(f"value table length {size} is not a power of two")
    p = size.bit_length() - 1
    if p > 14:
        raise FourierError(f"p={p} exceeds the brute-force limit of 14")
    out = values.copy()
    h = 1
    while h < size:
        for start in range(0, size, h * 2):
            a = out[start : start + h].copy()
            b = out[start + h : start + 2 * h].copy()
            out[start : start + h] = a + b
            out[start + h : start + 2 * h] = a - b
        h *= 2
    return out / size


def inverse_wht(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`brute_force_wht`."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    return brute_force_wht(coeffs) * coeffs.shape[0]


def mask_to_index(mask: np.ndarray) -> int:
    """Little-endian integer encoding of a bit mask."""
    return int(sum(int(b) << j for j, b in enumerate(mask)))


def subset_to_index(subset: Sequence[int]) -> int:
    return int(sum(1 << j for j in subset))


def index_to_subset(index: int) -> Subset:
    return tuple(j for j in range(index.bit_length()) if index >> j & 1)
