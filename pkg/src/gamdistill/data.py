"""Dataset ingestion, encoding, binning, splitting, and baseline vectors.

Everything downstream (surrogate fitting, GAM training, the harness) consumes
the ``Dataset`` produced here.  Categoricals are ordinally encoded by
descending frequency so that interaction subsets stay defined over the
original feature indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import pandas as pd

TASK_REGRESSION = "regression"
TASK_BINARY = "binary"
TASK_MULTICLASS = "multiclass"

# extra spellings on top of pandas defaults; matching is case-insensitive
_MISSING_TOKENS = ["NA", "Na", "nA", "na", "NAN", "NaN", "nan", "Nan", ""]


class DataError(ValueError):
    """Raised for malformed or unusable input data."""


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    kind: str  # "numeric" | "categorical"
    categories: dict[str, int] | None = None  # raw value -> dense code


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (N, p) float64
    target: np.ndarray  # (N,) float64; class codes for classification
    task: str
    columns: tuple[ColumnMeta, ...]
    n_classes: int | None = None
    target_name: str = "target"

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DataError("features must be a 2-D matrix")
        n, p = self.features.shape
        if n < 1 or p < 1:
            raise DataError("dataset needs at least one row and one feature")
        if len(self.columns) != p:
            raise DataError("column metadata count does not match feature count")
        if self.target.shape != (n,):
            raise DataError("target length does not match row count")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features contain non-finite values after ingestion")
        if self.task not in (TASK_REGRESSION, TASK_BINARY, TASK_MULTICLASS):
            raise DataError(f"unknown task kind: {self.task!r}")
        if self.task != TASK_REGRESSION and self.n_classes is None:
            raise DataError("classification dataset requires n_classes")

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns]

    def is_classification(self) -> bool:
        return self.task in (TASK_BINARY, TASK_MULTICLASS)

    def take(self, idx: np.ndarray) -> "Dataset":
        """Row subset, preserving metadata."""
        return replace(self, features=self.features[idx], target=self.target[idx])


@dataclass(frozen=True)
class BinningSpec:
    """Per-feature strictly increasing cut points; bin = searchsorted(cuts, x)."""

    cuts: tuple[np.ndarray, ...]
    max_bins: int

    def n_bins(self, j: int) -> int:
        return len(self.cuts[j]) + 1

    def bin_index(self, j: int, values: np.ndarray) -> np.ndarray:
        return np.searchsorted(self.cuts[j], values, side="right")


@dataclass(frozen=True)
class BaselineVector:
    """Per-feature fill value used when a mask drops a feature: numeric mean,
    categorical mode."""

    values: np.ndarray  # (p,)

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)):
            raise DataError("baseline vector has non-finite entries")


def _is_numeric(series: pd.Series) -> bool:
    if pd.api.types.is_numeric_dtype(series):
        return True
    converted = pd.to_numeric(series.dropna(), errors="coerce")
    return not converted.isna().any()


def _encode_categorical(series: pd.Series) -> tuple[np.ndarray, dict[str, int]]:
    """Ordinal codes by descending frequency, alphabetical among ties."""
    filled = series.astype("string")
    counts = filled.dropna().value_counts()
    ordered = sorted(counts.index, key=lambda v: (-counts[v], str(v)))
    codes = {str(v): i for i, v in enumerate(ordered)}
    if not codes:
        raise DataError(f"column {series.name!r} has no observed values")
    mode_code = 0.0
    out = np.array(
        [codes[str(v)] if pd.notna(v) else mode_code for v in filled],
        dtype=np.float64,
    )
    return out, codes


def _integer_like(values: np.ndarray) -> bool:
    return bool(np.all(np.abs(values - np.round(values)) < 1e-9))


def load_csv(path: str, target_column: str, task: str | None = None) -> Dataset:
    """Load an RFC-4180 CSV with a header row into an encoded Dataset.

    Numeric columns are parsed as reals with median imputation; other columns
    are frequency-encoded with mode imputation.  Task is inferred from the
    target unless overridden.
    """
    try:
        frame = pd.read_csv(
            path, na_values=_MISSING_TOKENS, keep_default_na=True, skipinitialspace=True
        )
    except pd.errors.EmptyDataError:
        raise DataError(f"empty CSV file: {path}") from None
    if frame.shape[0] == 0:
        raise DataError(f"CSV has a header but no data rows: {path}")
    if target_column not in frame.columns:
        raise DataError(
            f"target column {target_column!r} not found in {path} "
            f"(columns: {list(frame.columns)})"
        )

    target_raw = frame[target_column]
    if target_raw.isna().all():
        raise DataError(f"target column {target_column!r} is entirely missing")
    feature_frame = frame.drop(columns=[target_column])
    if feature_frame.shape[1] == 0:
        raise DataError("CSV has no feature columns besides the target")

    columns: list[ColumnMeta] = []
    encoded = np.empty((frame.shape[0], feature_frame.shape[1]), dtype=np.float64)
    for j, name in enumerate(feature_frame.columns):
        col = feature_frame[name]
        if col.isna().all():
            raise DataError(f"column {name!r} is entirely missing")
        if _is_numeric(col):
            values = pd.to_numeric(col, errors="coerce").to_numpy(dtype=np.float64)
            median = float(np.nanmedian(values))
            values = np.where(np.isnan(values), median, values)
            encoded[:, j] = values
            columns.append(ColumnMeta(name=name, kind="numeric"))
        else:
            codes, code_map = _encode_categorical(col)
            encoded[:, j] = codes
            columns.append(ColumnMeta(name=name, kind="categorical", categories=code_map))

    # target: drop rows with missing target rather than impute it
    keep = ~target_raw.isna().to_numpy()
    encoded = encoded[keep]
    target_raw = target_raw[keep]

    target_is_numeric = _is_numeric(target_raw)
    if target_is_numeric:
        y = pd.to_numeric(target_raw, errors="coerce").to_numpy(dtype=np.float64)
    else:
        y, _ = _encode_categorical(target_raw)

    distinct = np.unique(y)
    if task is None:
        if not target_is_numeric:
            inferred_classification = True
        else:
            inferred_classification = len(distinct) <= 20 and _integer_like(distinct)
        task = _classification_kind(len(distinct)) if inferred_classification else TASK_REGRESSION
    elif task == "classification":
        task = _classification_kind(len(distinct))

    n_classes = None
    if task in (TASK_BINARY, TASK_MULTICLASS):
        # re-encode to dense [0, n_classes) codes, order by value
        codes = {v: i for i, v in enumerate(distinct)}
        y = np.array([codes[v] for v in y], dtype=np.float64)
        n_classes = len(distinct)
        if n_classes < 2:
            raise DataError("classification target has a single class")
        task = _classification_kind(n_classes)

    return Dataset(
        features=encoded,
        target=y,
        task=task,
        columns=tuple(columns),
        n_classes=n_classes,
        target_name=target_column,
    )


def _classification_kind(n_classes: int) -> str:
    return TASK_BINARY if n_classes <= 2 else TASK_MULTICLASS


def from_arrays(
    X: np.ndarray,
    y: np.ndarray,
    task: str,
    feature_names: Sequence[str] | None = None,
    n_classes: int | None = None,
) -> Dataset:
    """Wrap in-memory arrays (all numeric) as a Dataset."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    names = list(feature_names) if feature_names is not None else [
        f"x{j}" for j in range(X.shape[1])
    ]
    if task in (TASK_BINARY, TASK_MULTICLASS) and n_classes is None:
        n_classes = int(y.max()) + 1
    columns = tuple(ColumnMeta(name=n, kind="numeric") for n in names)
    return Dataset(features=X, target=y, task=task, columns=columns, n_classes=n_classes)


def split(d: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled split; stratified per class where counts permit."""
    if not 0.0 < train_fraction < 1.0:
        raise DataError(f"train_fraction must lie in (0,1), got {train_fraction}")
    if d.n_rows < 2:
        raise DataError("need at least 2 rows to split")
    rng = np.random.default_rng(seed)
    n = d.n_rows
    if d.is_classification():
        train_idx: list[np.ndarray] = []
        test_idx: list[np.ndarray] = []
        for c in np.unique(d.target):
            members = np.flatnonzero(d.target == c)
            perm = members[rng.permutation(len(members))]
            n_tr = int(round(train_fraction * len(members)))
            n_tr = min(max(n_tr, 1 if len(members) > 1 else len(members)), len(members))
            train_idx.append(perm[:n_tr])
            test_idx.append(perm[n_tr:])
        tr = np.sort(np.concatenate(train_idx))
        te = np.sort(np.concatenate(test_idx))
        if len(te) == 0:  # every class was too small to stratify a test row
            tr, te = tr[:-1], tr[-1:]
    else:
        perm = rng.permutation(n)
        n_tr = int(round(train_fraction * n))
        n_tr = min(max(n_tr, 1), n - 1)
        tr = np.sort(perm[:n_tr])
        te = np.sort(perm[n_tr:])
    return d.take(tr), d.take(te)


def build_bins(d: Dataset, max_bins: int) -> BinningSpec:
    """Quantile cut points at equal-mass boundaries, deduplicated.

    Features with at most ``max_bins`` distinct values get one bin per value
    (cuts at midpoints between consecutive distinct values).
    """
    if max_bins < 2:
        raise DataError(f"max_bins must be >= 2, got {max_bins}")
    cuts: list[np.ndarray] = []
    for j in range(d.n_features):
        col = d.features[:, j]
        distinct = np.unique(col)
        if len(distinct) <= max_bins:
            c = (distinct[:-1] + distinct[1:]) / 2.0
        else:
            qs = np.quantile(col, np.arange(1, max_bins) / max_bins)
            c = np.unique(qs)
        cuts.append(np.asarray(c, dtype=np.float64))
    return BinningSpec(cuts=tuple(cuts), max_bins=max_bins)


def baseline_vector(train: Dataset) -> BaselineVector:
    """Numeric features -> mean; categoricals -> modal code (smaller code wins ties)."""
    out = np.empty(train.n_features, dtype=np.float64)
    for j, meta in enumerate(train.columns):
        col = train.features[:, j]
        if meta.kind == "categorical":
            codes, counts = np.unique(col, return_counts=True)
            out[j] = codes[np.argmax(counts)]  # np.unique sorts, argmax takes first max
        else:
            out[j] = float(np.mean(col))
    return BaselineVector(values=out)
