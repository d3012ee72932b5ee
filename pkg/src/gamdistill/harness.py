"""Evaluation harness: metrics, method ranking, selection-stability analysis,
and the synthetic/benchmark runners, with content-addressed cell caching.

Reports are long-format rows (dataset, method, metric, n_int, seed, value)
written as CSV, plus plot-ready summaries.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from .data import Dataset, TASK_REGRESSION, split
from .distill import (
    DistillConfig,
    InteractionRanking,
    distill,
    fit_sample_surrogates,
    ranking_from_surrogates,
)
from .gam import GamStudent, GamTrainConfig, fast_select_pairs, fit_gam
from .learners import (
    GradientBoostedTrees,
    KNearestNeighbors,
    Predictor,
    RandomForest,
    RidgeCV,
)
from .synthetic import (
    gen_cluster_classification,
    gen_fourier_sparse,
    make_tree_task,
    scenario_a_grids,
)

REGRESSION_METRICS = ("mse", "mae", "r2")
CLASSIFICATION_METRICS = ("accuracy", "f1", "auroc")
INDEX_METHODS = ("fbii", "fsii", "stii", "bii", "sii", "mobius", "fourier")
ALL_METHODS = INDEX_METHODS + ("fast",)

LOWER_IS_BETTER = {"mse", "mae"}


class HarnessError(ValueError):
    """Raised for malformed harness inputs."""


@dataclass
class MetricReport:
    rows: list[dict] = field(default_factory=list)

    def add(self, **row) -> None:
        self.rows.append(row)

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)

    def write_csv(self, path: str | Path) -> None:
        self.frame().to_csv(path, index=False)


@dataclass
class RankTable:
    table: pd.DataFrame  # columns: metric, n_int, method, avg_rank

    def write_csv(self, path: str | Path) -> None:
        self.table.to_csv(path, index=False)


# ---------------------------------------------------------------------------
# Metrics

def _auroc_binary(scores: np.ndarray, labels: np.ndarray) -> float | None:
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        return None
    ranks = rankdata(np.concatenate([pos, neg]))
    u = ranks[: len(pos)].sum() - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def _f1_binary(pred: np.ndarray, truth: np.ndarray) -> float:
    tp = float(np.sum((pred == 1) & (truth == 1)))
    fp = float(np.sum((pred == 1) & (truth == 0)))
    fn = float(np.sum((pred == 0) & (truth == 1)))
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2 * tp / (2 * tp + fp + fn)


def metrics(pred: np.ndarray, truth: np.ndarray, task: str) -> dict[str, float]:
    """Standard metric map; AUROC is omitted (not 0.5) when only one class
    is present in the truth."""
    truth = np.asarray(truth, dtype=np.float64)
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape[0] != truth.shape[0]:
        raise HarnessError("prediction/truth length mismatch")
    if task == TASK_REGRESSION:
        err = truth - pred
        ss_tot = float(np.sum((truth - truth.mean()) ** 2))
        ss_res = float(np.sum(err**2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
        return {
            "mse": float(np.mean(err**2)),
            "mae": float(np.mean(np.abs(err))),
            "r2": r2,
        }
    if pred.ndim != 2:
        raise HarnessError("classification metrics need probability rows")
    labels = np.argmax(pred, axis=1)
    out = {"accuracy": float(np.mean(labels == truth))}
    classes = np.arange(pred.shape[1])
    f1s = [
        _f1_binary((labels == c).astype(int), (truth == c).astype(int))
        for c in classes
        if np.any(truth == c) or np.any(labels == c)
    ]
    if pred.shape[1] == 2:
        out["f1"] = _f1_binary((labels == 1).astype(int), (truth == 1).astype(int))
        auroc = _auroc_binary(pred[:, 1], (truth == 1).astype(int))
    else:
        out["f1"] = float(np.mean(f1s)) if f1s else 0.0
        parts = [
            _auroc_binary(pred[:, c], (truth == c).astype(int)) for c in classes
        ]
        parts = [a for a in parts if a is not None]
        auroc = float(np.mean(parts)) if parts else None
    if auroc is not None:
        out["auroc"] = auroc
    return out


# ---------------------------------------------------------------------------
# Ranking and stability

def rank_methods(report: MetricReport) -> RankTable:
    """Average per-dataset competition ranks (ties share the mean rank) per
    (metric, n_int); rank 1 is best."""
    df = report.frame()
    required = {"dataset", "method", "metric", "n_int", "value"}
    if not required.issubset(df.columns):
        raise HarnessError(f"report rows need columns {sorted(required)}")
    df = df.groupby(["dataset", "method", "metric", "n_int"], as_index=False)[
        "value"
    ].mean()
    methods = sorted(df["method"].unique())
    out_rows = []
    for (metric, n_int), group in df.groupby(["metric", "n_int"]):
        per_dataset_ranks: dict[str, list[float]] = {m: [] for m in methods}
        for dataset, cell in group.groupby("dataset"):
            present = set(cell["method"])
            missing = [m for m in methods if m not in present]
            if missing:
                raise HarnessError(
                    f"missing cells for methods {missing} on dataset {dataset!r}, "
                    f"metric {metric!r}, n_int {n_int}"
                )
            values = cell.set_index("method")["value"].reindex(methods).to_numpy()
            keyed = values if metric in LOWER_IS_BETTER else -values
            ranks = rankdata(keyed, method="average")
            for m, r in zip(methods, ranks):
                per_dataset_ranks[m].append(float(r))
        for m in methods:
            out_rows.append(
                {
                    "metric": metric,
                    "n_int": n_int,
                    "method": m,
                    "avg_rank": float(np.mean(per_dataset_ranks[m])),
                }
            )
    return RankTable(table=pd.DataFrame(out_rows))


def overlap_stability(
    rankings: dict[int, InteractionRanking], reference_budget: int, top: int = 8
) -> dict[int, dict]:
    """Per-budget overlap of the top-``top`` interactions with the reference
    budget's selection."""
    if reference_budget not in rankings:
        raise HarnessError(f"reference budget {reference_budget} missing from rankings")
    ref = set(rankings[reference_budget].truncate(top).subsets())
    out: dict[int, dict] = {}
    for budget, ranking in rankings.items():
        got = set(ranking.truncate(top).subsets())
        denom = min(top, len(ref), len(got)) if (len(ref) < top or len(got) < top) else top
        flagged = denom < top
        if denom == 0:
            out[budget] = {"overlap": 0.0, "flagged": True}
            continue
        out[budget] = {"overlap": len(ref & got) / denom, "flagged": flagged}
    return out


# ---------------------------------------------------------------------------
# Cell cache

class CellCache:
    """Content-addressed JSON cache so interrupted sweeps resume."""

    def __init__(self, directory: str | Path | None):
        self.directory = Path(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)

    def key(self, payload: dict) -> str:
        text = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(text.encode()).hexdigest()[:24]

    def get(self, payload: dict) -> dict | None:
        if not self.directory:
            return None
        path = self.directory / f"{self.key(payload)}.json"
        if path.exists():
            return json.loads(path.read_text())
        return None

    def put(self, payload: dict, result: dict) -> None:
        if not self.directory:
            return
        path = self.directory / f"{self.key(payload)}.json"
        path.write_text(json.dumps(result))


# ---------------------------------------------------------------------------
# Scenario A (Fourier-sparse recovery)

def _default_scenario_a_learners(
    distill_cfg: DistillConfig, gam_cfg: GamTrainConfig
) -> dict[str, Callable[[], Predictor]]:
    return {
        "ridge": lambda: RidgeCV(),
        "forest": lambda: RandomForest(n_trees=100, max_depth=10),
        "knn": lambda: KNearestNeighbors(k=5),
        "gbt": lambda: GradientBoostedTrees(),
        "gam_distilled": lambda: _DistilledGam(distill_cfg, gam_cfg),
    }


class _DistilledGam(Predictor):
    """GBT-teacher distillation feeding interactions into a GAM student."""

    def __init__(self, distill_cfg: DistillConfig, gam_cfg: GamTrainConfig):
        self.distill_cfg = distill_cfg
        self.gam_cfg = gam_cfg
        self.ranking: InteractionRanking | None = None
        self._student: GamStudent | None = None

    def fit(self, train: Dataset) -> "_DistilledGam":
        self.task = train.task
        self.n_classes = train.n_classes
        teacher = GradientBoostedTrees(seed=self.distill_cfg.seed).fit(train)
        self.ranking = distill(train, teacher, self.distill_cfg)
        subsets = [s for s in self.ranking.subsets() if len(s) <= 3]
        self._student = GamStudent(subsets, self.gam_cfg).fit(train)
        return self

    def predict(self, rows: np.ndarray) -> np.ndarray:
        return self._student.predict(rows)


def run_scenario_a(
    experiments: Sequence[str] = ("exp1", "exp2", "exp3"),
    seeds: Sequence[int] = tuple(range(5)),
    learners: dict[str, Callable[[], Predictor]] | None = None,
    distill_cfg: DistillConfig | None = None,
    gam_cfg: GamTrainConfig | None = None,
    cache_dir: str | Path | None = None,
) -> MetricReport:
    """Fourier-sparse sweeps: fit each learner per grid cell and seed, record
    test R^2."""
    grids = scenario_a_grids()
    distill_cfg = distill_cfg or DistillConfig()
    gam_cfg = gam_cfg or GamTrainConfig()
    learners = learners or _default_scenario_a_learners(distill_cfg, gam_cfg)
    cache = CellCache(cache_dir)
    report = MetricReport()
    for exp in experiments:
        if exp not in grids:
            raise HarnessError(f"unknown experiment {exp!r}; choose from {list(grids)}")
        for cell in grids[exp]:
            for seed in seeds:
                task = gen_fourier_sparse(
                    n=cell["n"],
                    k=cell["k"],
                    noise_sd=cell["noise_sd"],
                    n_train=cell["n_train"],
                    n_test=cell["n_test"],
                    seed=seed,
                )
                for name, factory in learners.items():
                    payload = {"runner": "scenario_a", "exp": exp, "cell": cell,
                               "seed": seed, "learner": name,
                               "distill": distill_cfg.digest()}
                    cached = cache.get(payload)
                    if cached is None:
                        start = time.perf_counter()
                        model = factory()
                        model.fit(task.train)
                        pred = model.predict(task.test.features)
                        m = metrics(pred, task.test.target, TASK_REGRESSION)
                        cached = {"r2": m["r2"], "seconds": time.perf_counter() - start}
                        cache.put(payload, cached)
                    report.add(
                        dataset=exp,
                        method=name,
                        metric="r2",
                        n_int=distill_cfg.n_interactions,
                        seed=seed,
                        value=cached["r2"],
                        seconds=cached.get("seconds"),
                        **{k: cell[k] for k in ("n", "k", "noise_sd", "n_train")},
                    )
    return report


def scenario_a_panels(report: MetricReport) -> dict[str, pd.DataFrame]:
    """Plot-ready mean/std tables, one per experiment panel: R^2 against the
    swept variable for each learner."""
    df = report.frame()
    axes = {"exp1": "n_train", "exp2": "noise_sd", "exp3": "k"}
    panels = {}
    for exp, axis in axes.items():
        sub = df[df["dataset"] == exp]
        if sub.empty:
            continue
        agg = (
            sub.groupby([axis, "method"])["value"]
            .agg(["mean", "std", "count"])
            .reset_index()
            .rename(columns={"mean": "r2_mean", "std": "r2_std", "count": "n_seeds"})
        )
        panels[exp] = agg
    return panels


# ---------------------------------------------------------------------------
# Scenario B (tree-teacher fidelity)

class _TreePredictor(Predictor):
    """Adapter exposing a fitted CART as a black-box teacher."""

    def __init__(self, tree):
        self._tree = tree
        self.task = tree.task
        self.n_classes = tree.n_classes

    def fit(self, train: Dataset):
        return self

    def predict(self, rows: np.ndarray) -> np.ndarray:
        return self._tree.predict(rows)


def run_scenario_b(
    depths: Sequence[int] = tuple(range(1, 11)),
    seeds: Sequence[int] = tuple(range(10)),
    n_samples: int = 10000,
    p: int = 15,
    p_inf: int = 10,
    interaction_budget: int | None = None,
    distill_cfg: DistillConfig | None = None,
    gam_cfg: GamTrainConfig | None = None,
    cache_dir: str | Path | None = None,
) -> MetricReport:
    """Tree-teacher fidelity: students trained on pseudo-labels, scored
    against the teacher's predictions on the held-out split."""
    budget = interaction_budget if interaction_budget is not None else p_inf
    distill_cfg = distill_cfg or DistillConfig(n_interactions=budget)
    distill_cfg = replace(distill_cfg, n_interactions=budget)
    gam_cfg = gam_cfg or GamTrainConfig()
    cache = CellCache(cache_dir)
    report = MetricReport()
    for depth in depths:
        for seed in seeds:
            payload_base = {
                "runner": "scenario_b", "depth": depth, "seed": seed,
                "n": n_samples, "p": p, "p_inf": p_inf,
                "distill": distill_cfg.digest(),
            }
            cached = cache.get(payload_base)
            if cached is None:
                cached = _scenario_b_cell(
                    depth, seed, n_samples, p, p_inf, budget, distill_cfg, gam_cfg
                )
                cache.put(payload_base, cached)
            for student, m in cached.items():
                for metric, value in m.items():
                    report.add(
                        dataset="tree_fidelity",
                        method=student,
                        metric=metric,
                        n_int=budget,
                        seed=seed,
                        depth=depth,
                        value=value,
                    )
    return report


def _scenario_b_cell(depth, seed, n_samples, p, p_inf, budget, distill_cfg, gam_cfg):
    base = gen_cluster_classification(n_samples, p, p_inf, seed)
    task = make_tree_task(base, depth, seed)
    teacher = _TreePredictor(task.teacher)
    students: dict[str, Predictor] = {}
    students["gam_additive"] = GamStudent([], gam_cfg)
    ranking = distill(task.train, teacher, distill_cfg)
    students["gam_distilled"] = GamStudent(
        [s for s in ranking.subsets() if len(s) <= 3], gam_cfg
    )
    additive = fit_gam(task.train, [], gam_cfg)
    pairs = fast_select_pairs(task.train, additive, n_pairs=budget)
    students["gam_fast"] = GamStudent([s for s, _ in pairs], gam_cfg)
    out = {}
    for name, student in students.items():
        student.fit(task.train)
        pred = student.predict(task.test.features)
        out[name] = metrics(pred, task.test.target, task.test.task)
    return out


# ---------------------------------------------------------------------------
# Benchmark protocol

def run_benchmark(
    datasets: dict[str, Dataset],
    methods: Sequence[str] = ALL_METHODS,
    n_ints: Sequence[int] = tuple(range(1, 9)),
    seeds: Sequence[int] = (0,),
    train_fraction: float = 2.0 / 3.0,
    teacher_factory: Callable[[int], Predictor] | None = None,
    distill_cfg: DistillConfig | None = None,
    gam_cfg: GamTrainConfig | None = None,
    cache_dir: str | Path | None = None,
) -> tuple[MetricReport, RankTable, list[dict]]:
    """Full sweep: every method supplies interactions to the same GAM trainer;
    per-cell failures are recorded and skipped."""
    if len(datasets) < 1:
        raise HarnessError("benchmark needs at least one dataset")
    for m in methods:
        if m not in ALL_METHODS:
            raise HarnessError(f"unknown method {m!r}; choose from {ALL_METHODS}")
    distill_cfg = distill_cfg or DistillConfig()
    gam_cfg = gam_cfg or GamTrainConfig()
    teacher_factory = teacher_factory or (lambda seed: GradientBoostedTrees(seed=seed))
    cache = CellCache(cache_dir)
    report = MetricReport()
    failures: list[dict] = []
    max_n_int = max(n_ints)
    for name, dataset in datasets.items():
        for seed in seeds:
            train, test = split(dataset, train_fraction, seed)
            rankings: dict[str, InteractionRanking | list] = {}
            index_methods = [m for m in methods if m in INDEX_METHODS]
            try:
                if index_methods:
                    teacher = teacher_factory(seed)
                    teacher.fit(train)
                    surrogates = fit_sample_surrogates(train, teacher, distill_cfg)
                    for m in index_methods:
                        cfg_m = replace(
                            distill_cfg, index=m, n_interactions=max_n_int
                        )
                        rankings[m] = ranking_from_surrogates(
                            surrogates, cfg_m, teacher_name=type(teacher).__name__
                        )
                if "fast" in methods:
                    additive = fit_gam(train, [], gam_cfg)
                    pairs = fast_select_pairs(train, additive, n_pairs=max_n_int)
                    rankings["fast"] = [s for s, _ in pairs]
            except Exception as exc:  # record, skip the whole (dataset, seed) cell
                failures.append({"dataset": name, "seed": seed, "stage": "selection",
                                 "error": str(exc)})
                continue
            for method in methods:
                selection = rankings.get(method)
                if selection is None:
                    continue
                subsets = (
                    selection.subsets()
                    if isinstance(selection, InteractionRanking)
                    else list(selection)
                )
                subsets = [s for s in subsets if 2 <= len(s) <= 3]
                for n_int in n_ints:
                    payload = {
                        "runner": "benchmark", "dataset": name, "seed": seed,
                        "method": method, "n_int": n_int,
                        "subsets": [list(s) for s in subsets[:n_int]],
                        "gam": str(gam_cfg),
                    }
                    cached = cache.get(payload)
                    if cached is None:
                        try:
                            student = GamStudent(subsets[:n_int], gam_cfg).fit(train)
                            pred = student.predict(test.features)
                            cached = metrics(pred, test.target, dataset.task)
                        except Exception as exc:
                            failures.append(
                                {"dataset": name, "seed": seed, "method": method,
                                 "n_int": n_int, "stage": "gam", "error": str(exc)}
                            )
                            continue
                        cache.put(payload, cached)
                    for metric, value in cached.items():
                        report.add(
                            dataset=name, method=method, metric=metric,
                            n_int=n_int, seed=seed, value=value,
                        )
    rank_table = rank_methods(report) if report.rows else RankTable(pd.DataFrame())
    return report, rank_table, failures


# ---------------------------------------------------------------------------
# Stability protocol

def run_stability(
    dataset: Dataset,
    sample_sizes: Sequence[int] = (100, 200, 300, 400, 500),
    methods: Sequence[str] = ALL_METHODS,
    teacher_factory: Callable[[int], Predictor] | None = None,
    distill_cfg: DistillConfig | None = None,
    gam_cfg: GamTrainConfig | None = None,
    seed: int = 0,
    top: int = 8,
) -> pd.DataFrame:
    """Selection overlap against the largest-sample reference, per method."""
    distill_cfg = distill_cfg or DistillConfig()
    gam_cfg = gam_cfg or GamTrainConfig()
    teacher_factory = teacher_factory or (lambda s: GradientBoostedTrees(seed=s))
    reference = max(sample_sizes)
    index_methods = [m for m in methods if m in INDEX_METHODS]
    rows = []
    per_method: dict[str, dict[int, InteractionRanking]] = {m: {} for m in methods}
    for size in sample_sizes:
        cfg = replace(distill_cfg, n_explain=size, n_interactions=top, seed=seed)
        if index_methods:
            teacher = teacher_factory(seed)
            teacher.fit(dataset)
            surrogates = fit_sample_surrogates(dataset, teacher, cfg)
            for m in index_methods:
                per_method[m][size] = ranking_from_surrogates(
                    surrogates, replace(cfg, index=m)
                )
        if "fast" in methods:
            sub = dataset.take(
                np.random.default_rng(seed).permutation(dataset.n_rows)[:size]
            )
            additive = fit_gam(sub, [], gam_cfg)
            pairs = fast_select_pairs(sub, additive, n_pairs=top)
            per_method["fast"][size] = InteractionRanking(
                entries=tuple((s, 1, max(v, 0.0)) for s, v in pairs)
            )
    for m in methods:
        overlaps = overlap_stability(per_method[m], reference, top=top)
        for size in sample_sizes:
            rows.append(
                {
                    "method": m,
                    "sample_size": size,
                    "overlap": overlaps[size]["overlap"],
                    "flagged": overlaps[size]["flagged"],
                }
            )
    return pd.DataFrame(rows)
