"""Per-sample masked-query explanation of a fitted teacher, interaction-index
scoring, frequency aggregation, and top-k selection.

The value function substitutes baseline entries for masked-out features,
standardizes regression outputs by the training-target moments, and uses
clipped log-odds of the sample's own label for classification.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .data import BaselineVector, Dataset, TASK_REGRESSION
from .fourier import FourierSurrogate, Subset, fit_surrogate
from .indices import (
    INDEX_KINDS,
    IndexError_,
    IndexScores,
    fbii_from_fourier,
    fourier_index,
    mobius_from_fourier,
    restrict_surrogate,
    scores_from_set_function,
)
from .learners import Predictor

VALUE_KIND_LOGODDS = "logodds"

_LOGODDS_CLIP = 1e-6


class DistillError(ValueError):
    """Raised for invalid distillation configuration."""


@dataclass(frozen=True)
class DistillConfig:
    max_order: int = 3
    budget: int = 500
    n_explain: int | None = 100  # None = explain every training row
    per_sample_top: int = 5
    index: str = "fbii"
    n_interactions: int = 8
    seed: int = 0
    max_support: int = 20
    ridge: float = 1e-6
    score_threshold: float | None = None  # alternative to per_sample_top

    def __post_init__(self):
        if self.max_order < 2:
            raise DistillError("max_order must be >= 2 for interaction discovery")
        if self.per_sample_top < 1:
            raise DistillError("per_sample_top must be >= 1")
        if self.n_interactions < 1:
            raise DistillError("n_interactions must be >= 1")
        if self.budget < 50:
            raise DistillError("budget must be >= 50")
        if self.index not in INDEX_KINDS:
            raise DistillError(f"unknown index {self.index!r}; choose from {INDEX_KINDS}")

    def digest(self) -> str:
        payload = json.dumps(self.__dict__, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class InteractionRanking:
    """Frequency-ordered interaction list: (subset, count, total |score| mass)."""

    entries: tuple[tuple[Subset, int, float], ...]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for s, count, _ in self.entries:
            if count <= 0:
                raise DistillError(f"non-positive count for {s}")
            if len(s) < 2:
                raise DistillError(f"interaction subset {s} must have size >= 2")

    def subsets(self) -> list[Subset]:
        return [s for s, _, _ in self.entries]

    def truncate(self, n: int) -> "InteractionRanking":
        return InteractionRanking(entries=self.entries[:n], provenance=self.provenance)

    def to_json(self, feature_names: Sequence[str] | None = None) -> str:
        rows = []
        for s, count, mass in self.entries:
            row = {"indices": list(s), "count": count, "mass": mass}
            if feature_names is not None:
                row["features"] = [feature_names[j] for j in s]
            rows.append(row)
        return json.dumps({"interactions": rows, "provenance": self.provenance}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "InteractionRanking":
        obj = json.loads(text)
        entries = tuple(
            (tuple(r["indices"]), int(r["count"]), float(r["mass"]))
            for r in obj["interactions"]
        )
        return cls(entries=entries, provenance=obj.get("provenance", {}))


def value_function(
    teacher: Predictor,
    x: np.ndarray,
    y: float,
    baseline: BaselineVector,
    target_mean: float = 0.0,
    target_std: float = 1.0,
) -> Callable[[np.ndarray], np.ndarray]:
    """Batched mask -> real value function for one explained sample.

    Feature j comes from ``x`` where the mask bit is 1 and from the baseline
    where it is 0.  Regression outputs are standardized by the training-target
    moments; classification returns clipped log-odds of the sample's label.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != baseline.values.shape:
        raise DistillError(
            f"sample width {x.shape} does not match baseline {baseline.values.shape}"
        )
    if teacher.task != TASK_REGRESSION:
        label = int(y)
        if teacher.n_classes is None or not 0 <= label < teacher.n_classes:
            raise DistillError(f"label {y} out of range for {teacher.n_classes} classes")
    std = target_std if target_std > 0 else 1.0

    def evaluate(masks: np.ndarray) -> np.ndarray:
        masks = np.atleast_2d(np.asarray(masks))
        rows = np.where(masks.astype(bool), x[None, :], baseline.values[None, :])
        out = teacher.predict(rows)
        if teacher.task == TASK_REGRESSION:
            return (out - target_mean) / std
        p = np.clip(out[:, int(y)], _LOGODDS_CLIP, 1.0 - _LOGODDS_CLIP)
        return np.log(p / (1.0 - p))

    return evaluate


def _index_from_surrogate(surrogate: FourierSurrogate, kind: str, k: int) -> IndexScores:
    if kind == "fbii":
        return fbii_from_fourier(surrogate, k)
    if kind == "fourier":
        return fourier_index(surrogate)
    if kind == "mobius":
        return mobius_from_fourier(surrogate)
    f = restrict_surrogate(surrogate)
    return scores_from_set_function(f, kind, k)


def scores_for_surrogate(surrogate: FourierSurrogate, kind: str, k: int) -> tuple[IndexScores, bool]:
    """Index scores for one sample's surrogate; falls back to the
    Fourier-coefficient faithful-Banzhaf path when the surrogate's active set
    is too large to tabulate.  Returns (scores, fell_back)."""
    try:
        return _index_from_surrogate(surrogate, kind, k), False
    except IndexError_:
        return fbii_from_fourier(surrogate, k), True


def explain_sample(
    teacher: Predictor,
    x: np.ndarray,
    y: float,
    baseline: BaselineVector,
    cfg: DistillConfig,
    sample_seed: int = 0,
    target_mean: float = 0.0,
    target_std: float = 1.0,
) -> tuple[IndexScores, FourierSurrogate]:
    """Fit a surrogate to the sample's value function and score interactions,
    keeping only subsets of size >= 2."""
    p = len(x)
    if p > 30:
        raise DistillError(f"p={p} exceeds the surrogate limit of 30")
    vf = value_function(teacher, x, y, baseline, target_mean, target_std)
    surrogate = fit_surrogate(
        vf,
        p=p,
        max_order=cfg.max_order,
        budget=cfg.budget,
        max_support=cfg.max_support,
        ridge=cfg.ridge,
        seed=sample_seed,
    )
    scores, fell_back = scores_for_surrogate(surrogate, cfg.index, cfg.max_order)
    kept = {s: v for s, v in scores.scores.items() if len(s) >= 2}
    out = IndexScores(kind=scores.kind, k=scores.k, scores=kept)
    if fell_back:
        surrogate.diagnostics["index_fallback"] = "fbii"
    return out, surrogate


def aggregate(per_sample: Sequence[IndexScores], r: int,
              score_threshold: float | None = None) -> InteractionRanking:
    """Keep each sample's top-r subsets by |score| (or all above a threshold),
    then count across samples; order by count desc, mass desc, subset."""
    if r < 1:
        raise DistillError("per-sample top count must be >= 1")
    counts: dict[Subset, int] = {}
    mass: dict[Subset, float] = {}
    for scores in per_sample:
        ranked = scores.ranked(min_size=2)
        if score_threshold is not None:
            kept = [(s, v) for s, v in ranked if abs(v) >= score_threshold]
        else:
            kept = ranked[:r]
        for s, v in kept:
            counts[s] = counts.get(s, 0) + 1
            mass[s] = mass.get(s, 0.0) + abs(v)
    order = sorted(counts, key=lambda s: (-counts[s], -mass[s], s))
    entries = tuple((s, counts[s], mass[s]) for s in order)
    return InteractionRanking(entries=entries)


def fit_sample_surrogates(
    train: Dataset, teacher: Predictor, cfg: DistillConfig
) -> list[FourierSurrogate]:
    """Fit one masked-query surrogate per explained training row.

    Rows are a deterministic seeded shuffle's first ``n_explain`` entries; the
    per-sample surrogate seed is derived from the config seed and the row's
    position so reruns are identical."""
    rng = np.random.default_rng(cfg.seed)
    n = train.n_rows
    order = rng.permutation(n)
    n_explain = n if cfg.n_explain is None else min(cfg.n_explain, n)
    chosen = order[:n_explain]

    if train.task == TASK_REGRESSION:
        t_mean = float(train.target.mean())
        t_std = float(train.target.std())
    else:
        t_mean, t_std = 0.0, 1.0
    from .data import baseline_vector  # local import avoids cycle at module load

    baseline = baseline_vector(train)
    p = train.n_features
    if p > 30:
        raise DistillError(f"p={p} exceeds the surrogate limit of 30")
    surrogates: list[FourierSurrogate] = []
    for rank, i in enumerate(chosen):
        vf = value_function(
            teacher, train.features[i], float(train.target[i]), baseline, t_mean, t_std
        )
        surrogate = fit_surrogate(
            vf,
            p=p,
            max_order=cfg.max_order,
            budget=cfg.budget,
            max_support=cfg.max_support,
            ridge=cfg.ridge,
            seed=int(np.random.default_rng((cfg.seed, rank)).integers(2**31 - 1)),
        )
        surrogate.diagnostics["row"] = int(i)
        surrogates.append(surrogate)
    return surrogates


def ranking_from_surrogates(
    surrogates: Sequence[FourierSurrogate], cfg: DistillConfig,
    teacher_name: str = "",
) -> InteractionRanking:
    """Score each surrogate with the configured index, aggregate, truncate."""
    per_sample: list[IndexScores] = []
    diagnostics = []
    for surrogate in surrogates:
        scores, fell_back = scores_for_surrogate(surrogate, cfg.index, cfg.max_order)
        kept = {s: v for s, v in scores.scores.items() if len(s) >= 2}
        per_sample.append(IndexScores(kind=scores.kind, k=scores.k, scores=kept))
        diagnostics.append(
            {
                "row": surrogate.diagnostics.get("row"),
                "holdout_r2": surrogate.diagnostics.get("holdout_r2"),
                "n_queries": surrogate.diagnostics.get("n_queries"),
                "fallback": "fbii" if fell_back else None,
            }
        )
    ranking = aggregate(per_sample, cfg.per_sample_top, cfg.score_threshold)
    r2s = [d["holdout_r2"] for d in diagnostics if d["holdout_r2"] is not None]
    ranking = replace(
        ranking,
        provenance={
            "config_digest": cfg.digest(),
            "index": cfg.index,
            "n_explained": len(surrogates),
            "teacher": teacher_name,
            "mean_holdout_r2": float(np.nanmean(r2s)) if r2s else None,
            "per_sample": diagnostics,
        },
    )
    return ranking.truncate(cfg.n_interactions)


def distill(train: Dataset, teacher: Predictor, cfg: DistillConfig) -> InteractionRanking:
    """Algorithm: explain a deterministic subsample of training rows, count
    each sample's strongest interactions, return the most frequent ones."""
    surrogates = fit_sample_surrogates(train, teacher, cfg)
    return ranking_from_surrogates(surrogates, cfg, teacher_name=type(teacher).__name__)
