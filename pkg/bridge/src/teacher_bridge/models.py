"""Model backends served over the wire.

Each backend exposes ``fit(X, y, task)`` and ``predict(X)``; classification
backends must return one probability row per input row.  Heavy optional
dependencies are imported lazily so listing or serving the always-available
models never requires them.
"""

from __future__ import annotations

import numpy as np


class BridgeModelError(RuntimeError):
    """A backend could not be created or refused a request."""


TASK_REGRESSION = "regression"


class EchoModel:
    """Degenerate reference backend: predicts the training-target mean
    (regression) or the training class frequencies (classification) for
    every row.  Used by the conformance suite."""

    def __init__(self) -> None:
        self._mean: float | None = None
        self._freq: np.ndarray | None = None
        self.task: str | None = None

    def fit(self, X: np.ndarray, y: np.ndarray, task: str) -> None:
        self.task = task
        if task == TASK_REGRESSION:
            self._mean = float(np.mean(y))
        else:
            labels = y.astype(int)
            counts = np.bincount(labels, minlength=int(labels.max()) + 1 if len(labels) else 1)
            self._freq = counts / counts.sum()

    def predict(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        if self.task == TASK_REGRESSION:
            if self._mean is None:
                raise BridgeModelError("predict before fit")
            return np.full(n, self._mean)
        if self._freq is None:
            raise BridgeModelError("predict before fit")
        return np.tile(self._freq, (n, 1))


class GbtModel:
    """Gradient-boosted-tree backend, byte-compatible with running the same
    trees in the client process (identical seed and hyperparameters give
    identical predictions)."""

    def __init__(self, n_rounds: int = 200, depth: int = 3,
                 learning_rate: float = 0.1, seed: int = 0) -> None:
        try:
            from gamdistill.learners import GradientBoostedTrees
        except ImportError as exc:  # pragma: no cover - environment-dependent
            raise BridgeModelError(
                "gbt backend needs the gamdistill package installed"
            ) from exc
        self._model = GradientBoostedTrees(
            n_rounds=n_rounds, depth=depth, learning_rate=learning_rate, seed=seed
        )

    def fit(self, X: np.ndarray, y: np.ndarray, task: str) -> None:
        from gamdistill.data import from_arrays

        self._model.fit(from_arrays(X, y, task=task))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self._model.predict(X)


class _SklearnStyleModel:
    """Shared adapter for fit/predict(_proba) estimators such as the
    tabular foundation models."""

    def __init__(self, regressor_cls, classifier_cls, **kwargs) -> None:
        self._reg_cls = regressor_cls
        self._cls_cls = classifier_cls
        self._kwargs = kwargs
        self._est = None
        self.task: str | None = None

    def fit(self, X: np.ndarray, y: np.ndarray, task: str) -> None:
        self.task = task
        cls = self._reg_cls if task == TASK_REGRESSION else self._cls_cls
        self._est = cls(**self._kwargs)
        self._est.fit(X, y if task == TASK_REGRESSION else y.astype(int))

    def predict(self, X: np.ndarray) -> np.ndarray:
        if self._est is None:
            raise BridgeModelError("predict before fit")
        if self.task == TASK_REGRESSION:
            return np.asarray(self._est.predict(X), dtype=np.float64)
        proba = np.asarray(self._est.predict_proba(X), dtype=np.float64)
        return proba / proba.sum(axis=1, keepdims=True)


def _make_tabpfn(**kwargs):
    try:
        from tabpfn import TabPFNClassifier, TabPFNRegressor
    except ImportError as exc:
        raise BridgeModelError("tabpfn backend needs the tabpfn package installed") from exc
    return _SklearnStyleModel(TabPFNRegressor, TabPFNClassifier, **kwargs)


def _make_tabicl(**kwargs):
    try:
        from tabicl import TabICLClassifier
    except ImportError as exc:
        raise BridgeModelError("tabicl backend needs the tabicl package installed") from exc

    def no_regressor(**_):
        raise BridgeModelError("tabicl backend supports classification only")

    return _SklearnStyleModel(no_regressor, TabICLClassifier, **kwargs)


_FACTORIES = {
    "echo": lambda **kwargs: EchoModel(),
    "gbt": GbtModel,
    "tabpfn": _make_tabpfn,
    "tabicl": _make_tabicl,
}


def available_models() -> tuple[str, ...]:
    return tuple(_FACTORIES)


def make_model(name: str, **kwargs):
    if name not in _FACTORIES:
        raise BridgeModelError(
            f"unknown model {name!r}; choose from {sorted(_FACTORIES)}"
        )
    return _FACTORIES[name](**kwargs)
