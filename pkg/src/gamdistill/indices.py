"""Game-theoretic interaction indices computed from tabulated set functions or
sparse Fourier surrogates, with exact definitional formulas.

Set functions are tabulated over an active feature set A; table index bit i
corresponds to the i-th (sorted) element of A being present.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from math import comb, factorial

import numpy as np

from .fourier import FourierSurrogate, Subset, eval_surrogate_batch

INDEX_KINDS = ("fbii", "fsii", "stii", "bii", "sii", "mobius", "fourier")


class IndexError_(ValueError):
    """Raised for invalid index computations (name avoids the builtin)."""


@dataclass(frozen=True)
class SetFunction:
    """Value table over all subsets of an active feature set."""

    active: tuple[int, ...]  # sorted global feature indices
    values: np.ndarray  # length 2^|active|

    def __post_init__(self):
        n = len(self.active)
        if n > 16:
            raise IndexError_(f"active set of size {n} exceeds the tabulation limit of 16")
        if self.values.shape != (1 << n,):
            raise IndexError_("value table length must be 2^|active|")
        if not np.all(np.isfinite(self.values)):
            raise IndexError_("set function values must be finite")
        if tuple(sorted(self.active)) != self.active:
            raise IndexError_("active indices must be sorted")

    @property
    def n(self) -> int:
        return len(self.active)

    def local_mask(self, subset: Subset) -> int:
        """Bitmask over active positions for a subset of global indices."""
        pos = {a: i for i, a in enumerate(self.active)}
        m = 0
        for j in subset:
            if j not in pos:
                raise IndexError_(f"feature {j} not in active set {self.active}")
            m |= 1 << pos[j]
        return m

    def global_subset(self, mask: int) -> Subset:
        return tuple(self.active[i] for i in range(self.n) if mask >> i & 1)


@dataclass(frozen=True)
class IndexScores:
    kind: str
    k: int
    scores: dict[Subset, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in INDEX_KINDS:
            raise IndexError_(f"unknown index kind {self.kind!r}")
        for s, v in self.scores.items():
            if len(s) > self.k:
                raise IndexError_(f"scored subset {s} exceeds order {self.k}")
            if not np.isfinite(v):
                raise IndexError_(f"non-finite score for {s}")

    def ranked(self, min_size: int = 0) -> list[tuple[Subset, float]]:
        items = [(s, v) for s, v in self.scores.items() if len(s) >= min_size]
        return sorted(items, key=lambda kv: (-abs(kv[1]), kv[0]))

    def to_json(self) -> str:
        entries = [{"subset": list(s), "score": v} for s, v in self.ranked()]
        return json.dumps({"kind": self.kind, "k": self.k, "entries": entries})


def _popcount_table(n: int) -> np.ndarray:
    return np.array([bin(m).count("1") for m in range(1 << n)], dtype=np.int64)


def discrete_derivative(f: SetFunction, S: Subset, T: Subset) -> float:
    """Alternating sum  sum_{W subset S} (-1)^{|S|-|W|} f(T | W)."""
    if set(S) & set(T):
        raise IndexError_(f"subsets {S} and {T} must be disjoint")
    s_mask = f.local_mask(tuple(S))
    t_mask = f.local_mask(tuple(T))
    return _derivative_masked(f.values, s_mask, t_mask)


def _derivative_masked(values: np.ndarray, s_mask: int, t_mask: int) -> float:
    s_bits = [i for i in range(s_mask.bit_length()) if s_mask >> i & 1]
    total = 0.0
    size_s = len(s_bits)
    for w in range(1 << size_s):
        w_mask = 0
        bits = 0
        for i, b in enumerate(s_bits):
            if w >> i & 1:
                w_mask |= 1 << b
                bits += 1
        sign = 1.0 if (size_s - bits) % 2 == 0 else -1.0
        total += sign * values[t_mask | w_mask]
    return total


def _submasks(mask: int):
    """All submasks of mask, including 0 and mask itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


def mobius(f: SetFunction) -> IndexScores:
    """Full Moebius (Harsanyi dividend) table; inverse is the zeta transform."""
    a = f.values.astype(np.float64).copy()
    n = f.n
    for i in range(n):
        bit = 1 << i
        for m in range(1 << n):
            if m & bit:
                a[m] -= a[m ^ bit]
    scores = {f.global_subset(m): float(a[m]) for m in range(1 << n)}
    return IndexScores(kind="mobius", k=max(n, 1), scores=scores)


def zeta(scores: IndexScores, active: tuple[int, ...]) -> SetFunction:
    """Reconstruct a set function from its Moebius table."""
    n = len(active)
    a = np.zeros(1 << n)
    pos = {j: i for i, j in enumerate(active)}
    for s, v in scores.scores.items():
        m = 0
        for j in s:
            m |= 1 << pos[j]
        a[m] = v
    for i in range(n):
        bit = 1 << i
        for m in range(1 << n):
            if m & bit:
                a[m] += a[m ^ bit]
    return SetFunction(active=tuple(active), values=a)


def bii(f: SetFunction, S: Subset) -> float:
    """Banzhaf interaction: mean discrete derivative over the complement cube."""
    s_mask = f.local_mask(tuple(S))
    comp = ((1 << f.n) - 1) ^ s_mask
    total = 0.0
    for t in _submasks(comp):
        total += _derivative_masked(f.values, s_mask, t)
    return total / (1 << (f.n - len(S)))


def sii(f: SetFunction, S: Subset) -> float:
    """Shapley interaction index; reduces to the Shapley value for |S|=1."""
    s_mask = f.local_mask(tuple(S))
    comp = ((1 << f.n) - 1) ^ s_mask
    n, s = f.n, len(S)
    denom = factorial(n - s + 1)
    total = 0.0
    for t in _submasks(comp):
        t_size = bin(t).count("1")
        w = factorial(n - t_size - s) * factorial(t_size) / denom
        total += w * _derivative_masked(f.values, s_mask, t)
    return total


def stii(f: SetFunction, k: int) -> IndexScores:
    """Shapley-Taylor interaction index up to order k."""
    n = f.n
    if not 1 <= k <= n:
        raise IndexError_(f"order k={k} out of range for |A|={n}")
    scores: dict[Subset, float] = {}
    for size in range(1, k + 1):
        for S in combinations(f.active, size):
            s_mask = f.local_mask(S)
            if size < k:
                scores[S] = _derivative_masked(f.values, s_mask, 0)
            else:
                comp = ((1 << n) - 1) ^ s_mask
                total = 0.0
                for t in _submasks(comp):
                    t_size = bin(t).count("1")
                    total += _derivative_masked(f.values, s_mask, t) / comb(n - 1, t_size)
                scores[S] = (k / n) * total
    return IndexScores(kind="stii", k=k, scores=scores)


def fsii(f: SetFunction, k: int) -> IndexScores:
    """Faithful-Shapley interaction: constrained weighted least squares in the
    multilinear basis with the Shapley kernel, interpolating f at the empty
    and grand coalitions."""
    n = f.n
    if n > 12:
        raise IndexError_(f"|A|={n} exceeds the dense-solve limit of 12")
    if k < 1:
        raise IndexError_(f"order k={k} must be >= 1")
    k = min(k, n)
    cols: list[int] = []  # local masks of monomial subsets, |W| <= k
    for size in range(0, k + 1):
        for W in combinations(range(n), size):
            m = 0
            for i in W:
                m |= 1 << i
            cols.append(m)
    size_tbl = _popcount_table(n)
    all_masks = np.arange(1 << n)
    interior = (all_masks != 0) & (all_masks != (1 << n) - 1)
    t_masks = all_masks[interior]
    weights = np.array(
        [(n - 1) / (comb(n, int(size_tbl[t])) * int(size_tbl[t]) * (n - int(size_tbl[t])))
         for t in t_masks]
    )
    X = np.array([[1.0 if (w & t) == w else 0.0 for w in cols] for t in t_masks])
    y = f.values[t_masks]

    n_cols = len(cols)
    C = np.zeros((2, n_cols))
    C[0, cols.index(0)] = 1.0  # p(empty) = f(empty)
    C[1, :] = 1.0  # p(A) = f(A): every monomial is 1 on the grand coalition
    d = np.array([f.values[0], f.values[-1]])

    XtW = X.T * weights
    H = 2.0 * (XtW @ X)
    g = 2.0 * (XtW @ y)
    kkt = np.zeros((n_cols + 2, n_cols + 2))
    kkt[:n_cols, :n_cols] = H
    kkt[:n_cols, n_cols:] = C.T
    kkt[n_cols:, :n_cols] = C
    rhs = np.concatenate([g, d])
    try:
        sol = np.linalg.solve(kkt, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError("non-finite solution")
    except np.linalg.LinAlgError:
        warnings.warn("singular faithful-Shapley system; regularizing with 1e-10 ridge")
        kkt[:n_cols, :n_cols] += 1e-10 * np.eye(n_cols)
        sol = np.linalg.solve(kkt, rhs)
    beta = sol[:n_cols]
    scores = {f.global_subset(m): float(b) for m, b in zip(cols, beta)}
    return IndexScores(kind="fsii", k=k, scores=scores)


def shapley_values(f: SetFunction) -> dict[int, float]:
    """Exact Shapley values via the permutation-weight formula (oracle path)."""
    return {j: sii(f, (j,)) for j in f.active}


def fbii_from_fourier(s: FourierSurrogate, k: int) -> IndexScores:
    """Faithful-Banzhaf interaction scores of order <= k.

    Equals the multilinear coefficients of the uniform-measure least-squares
    approximation of degree <= k:  FBII(W) = (-2)^|W| * sum of Fourier
    coefficients over support supersets of W with size <= k.
    """
    if k > s.max_order:
        raise IndexError_(f"k={k} exceeds surrogate order {s.max_order}")
    scores: dict[Subset, float] = {}
    for subset, coeff in zip(s.support, s.coefficients):
        if len(subset) > k:
            continue
        for size in range(0, len(subset) + 1):
            for W in combinations(subset, size):
                scores[W] = scores.get(W, 0.0) + ((-2.0) ** size) * float(coeff)
    return IndexScores(kind="fbii", k=k, scores=scores)


def fourier_index(s: FourierSurrogate) -> IndexScores:
    """Score each support subset by the magnitude of its coefficient."""
    scores = {sub: float(abs(c)) for sub, c in zip(s.support, s.coefficients)}
    k = max((len(sub) for sub in s.support), default=1)
    return IndexScores(kind="fourier", k=max(k, 1), scores=scores)


def mobius_from_fourier(s: FourierSurrogate) -> IndexScores:
    """Moebius coefficients of the surrogate in the kept-feature convention.

    The parity basis over kept-bits converts termwise: chi_S(x) expands to
    sum_{W subset S} (-2)^|W| prod_{j in W} x_j, and the Moebius table of a
    multilinear polynomial equals its monomial coefficients.
    """
    scores: dict[Subset, float] = {}
    for subset, coeff in zip(s.support, s.coefficients):
        for size in range(0, len(subset) + 1):
            for W in combinations(subset, size):
                scores[W] = scores.get(W, 0.0) + ((-2.0) ** size) * float(coeff)
    k = max((len(sub) for sub in s.support), default=1)
    return IndexScores(kind="mobius", k=max(k, 1), scores=scores)


def restrict_surrogate(s: FourierSurrogate) -> SetFunction:
    """Tabulate the surrogate over the union of its support features.

    Features outside the active set are fixed to 1 ("kept"); table entry T
    is the surrogate value with exactly the features in T kept inside A.
    """
    active = tuple(sorted({j for sub in s.support for j in sub}))
    n = len(active)
    if n > 16:
        raise IndexError_(f"surrogate active set of size {n} exceeds tabulation limit 16")
    masks = np.ones((1 << n, s.p), dtype=np.int64)
    for m in range(1 << n):
        for i, j in enumerate(active):
            if not (m >> i & 1):
                masks[m, j] = 0
    values = eval_surrogate_batch(s, masks) if s.p > 0 else np.zeros(1)
    return SetFunction(active=active, values=values)


def scores_from_set_function(f: SetFunction, kind: str, k: int) -> IndexScores:
    """Uniform entry point: score all subsets of size <= k by the named index."""
    if kind == "mobius":
        full = mobius(f)
        scores = {s: v for s, v in full.scores.items() if len(s) <= k}
        return IndexScores(kind="mobius", k=k, scores=scores)
    if kind == "stii":
        return stii(f, min(k, max(f.n, 1)))
    if kind == "fsii":
        return fsii(f, k)
    if kind in ("bii", "sii"):
        fn = bii if kind == "bii" else sii
        scores = {}
        for size in range(1, min(k, f.n) + 1):
            for S in combinations(f.active, size):
                scores[S] = fn(f, S)
        return IndexScores(kind=kind, k=k, scores=scores)
    raise IndexError_(f"index kind {kind!r} is not set-function based")
