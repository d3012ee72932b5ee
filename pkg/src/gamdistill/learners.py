"""Teacher/student predictors sharing one contract: ``fit(train)`` then
``predict(rows)`` returning regression values or class-probability rows.

Includes from-scratch CART, bagged forest, gradient-boosted trees, ridge with
cross-validated penalty, distance-weighted kNN, and a newline-delimited-JSON
client for external teacher processes.
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess
import time
from dataclasses import dataclass

import numpy as np

from .data import Dataset, TASK_REGRESSION

_PROBA_TOL = 1e-9


class LearnerError(ValueError):
    """Raised for invalid learner configuration or unusable training data."""


class TeacherError(RuntimeError):
    """Raised when an external teacher bridge misbehaves."""


class Predictor:
    """Base contract. ``predict`` returns (N,) values for regression or
    (N, n_classes) probability rows for classification."""

    task: str = TASK_REGRESSION
    n_classes: int | None = None

    def fit(self, train: Dataset) -> "Predictor":
        raise NotImplementedError

    def predict(self, rows: np.ndarray) -> np.ndarray:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# CART

@dataclass
class _TreeNodes:
    feature: list
    threshold: list
    gap_lo: list  # largest observed value routed left at this split
    gap_hi: list  # smallest observed value routed right
    left: list
    right: list
    value: list  # leaf payload: float (regression) or class-distribution array


class DecisionTree(Predictor):
    """Greedy binary CART: Gini decrease for classification, variance
    reduction for regression.  Ties break toward the lowest feature index,
    then the lowest threshold."""

    def __init__(self, max_depth: int, min_leaf: int = 1, seed: int = 0,
                 feature_fraction: float = 1.0):
        if max_depth < 1:
            raise LearnerError(f"max_depth must be >= 1, got {max_depth}")
        if min_leaf < 1:
            raise LearnerError(f"min_leaf must be >= 1, got {min_leaf}")
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.seed = seed
        self.feature_fraction = feature_fraction
        self._nodes: _TreeNodes | None = None

    def fit(self, train: Dataset) -> "DecisionTree":
        if train.n_rows < 2 * self.min_leaf:
            raise LearnerError(
                f"need at least {2 * self.min_leaf} rows, got {train.n_rows}"
            )
        self.task = train.task
        self.n_classes = train.n_classes
        rng = np.random.default_rng(self.seed)
        X, y = train.features, train.target
        if train.is_classification():
            y_enc = np.zeros((len(y), train.n_classes))
            y_enc[np.arange(len(y)), y.astype(int)] = 1.0
        else:
            y_enc = y
        self._fit_values(X, y_enc, rng)
        return self

    def _fit_values(self, X: np.ndarray, y_enc: np.ndarray, rng) -> None:
        """Fit against raw targets (regression) or one-hot rows; used directly
        by the boosting loop with gradient targets."""
        self._nodes = _TreeNodes([], [], [], [], [], [], [])
        self._grow(X, y_enc, depth=0, rng=rng)

    def _leaf(self, y_enc: np.ndarray) -> int:
        nodes = self._nodes
        nodes.feature.append(-1)
        nodes.threshold.append(0.0)
        nodes.gap_lo.append(0.0)
        nodes.gap_hi.append(0.0)
        nodes.left.append(-1)
        nodes.right.append(-1)
        if y_enc.ndim == 2:
            dist = y_enc.mean(axis=0)
            nodes.value.append(dist)
        else:
            nodes.value.append(float(y_enc.mean()))
        return len(nodes.feature) - 1

    def _grow(self, X: np.ndarray, y_enc: np.ndarray, depth: int, rng) -> int:
        n = X.shape[0]
        pure = (
            np.allclose(y_enc, y_enc[0]) if y_enc.ndim == 1
            else bool((y_enc == y_enc[0]).all())
        )
        if depth >= self.max_depth or n < 2 * self.min_leaf or pure:
            return self._leaf(y_enc)
        feat, thr, gap_lo, gap_hi = self._best_split(X, y_enc, rng)
        if feat is None:
            return self._leaf(y_enc)
        go_left = X[:, feat] <= thr
        nodes = self._nodes
        nodes.feature.append(feat)
        nodes.threshold.append(thr)
        nodes.gap_lo.append(gap_lo)
        nodes.gap_hi.append(gap_hi)
        nodes.left.append(-1)
        nodes.right.append(-1)
        nodes.value.append(None)
        idx = len(nodes.feature) - 1
        nodes.left[idx] = self._grow(X[go_left], y_enc[go_left], depth + 1, rng)
        nodes.right[idx] = self._grow(X[~go_left], y_enc[~go_left], depth + 1, rng)
        return idx

    def _best_split(self, X: np.ndarray, y_enc: np.ndarray, rng):
        n, p = X.shape
        candidates = np.arange(p)
        if self.feature_fraction < 1.0:
            m = max(1, int(round(self.feature_fraction * p)))
            candidates = np.sort(rng.choice(p, size=m, replace=False))
        best_gain, best_feat, best_thr = 0.0, None, None
        best_lo, best_hi = 0.0, 0.0
        for j in candidates:
            order = np.argsort(X[:, j], kind="stable")
            xs = X[order, j]
            ys = y_enc[order]
            lo, hi = self.min_leaf, n - self.min_leaf
            if lo > hi:
                continue
            valid = np.zeros(n - 1, dtype=bool)
            valid[lo - 1:hi] = xs[lo - 1:hi] < xs[lo:hi + 1]
            if not valid.any():
                continue
            if y_enc.ndim == 2:
                csum = np.cumsum(ys, axis=0)
                total = csum[-1]
                nl = np.arange(1, n)[:, None]
                left = csum[:-1]
                right = total[None, :] - left
                gini_l = 1.0 - ((left / nl) ** 2).sum(axis=1)
                gini_r = 1.0 - ((right / (n - nl)) ** 2).sum(axis=1)
                parent = 1.0 - ((total / n) ** 2).sum()
                gains = parent - (nl[:, 0] * gini_l + (n - nl[:, 0]) * gini_r) / n
            else:
                csum = np.cumsum(ys)
                csum2 = np.cumsum(ys ** 2)
                nl = np.arange(1, n)
                sse_l = csum2[:-1] - csum[:-1] ** 2 / nl
                sse_r = (csum2[-1] - csum2[:-1]) - (csum[-1] - csum[:-1]) ** 2 / (n - nl)
                sse_parent = csum2[-1] - csum[-1] ** 2 / n
                gains = (sse_parent - sse_l - sse_r) / n
            gains = np.where(valid, gains, -np.inf)
            i = int(np.argmax(gains))
            if gains[i] > best_gain + 1e-15:
                best_gain = float(gains[i])
                best_feat = int(j)
                best_thr = float((xs[i] + xs[i + 1]) / 2.0)
                best_lo, best_hi = float(xs[i]), float(xs[i + 1])
        return best_feat, best_thr, best_lo, best_hi

    def predict_raw(self, rows: np.ndarray) -> np.ndarray:
        """Leaf payloads without task post-processing.

        Split thresholds lie strictly inside the open gap between the largest
        value routed left and the smallest value routed right, so the tree has
        no training evidence about behavior inside that gap.  A query value
        strictly inside it descends both branches, weighted by its linear
        position in the gap; every observed training value still follows a
        single hard path.  At a baseline row built from feature means this
        fractional routing averages the branches with the empirical marginal
        weights, so masked queries see a smoothed response instead of an
        arbitrary side of the jump."""
        nodes = self._nodes
        rows = np.asarray(rows, dtype=np.float64)
        n = rows.shape[0]
        first = nodes.value[0]
        if isinstance(first, np.ndarray) or (
            nodes.feature[0] >= 0 and any(isinstance(v, np.ndarray) for v in nodes.value)
        ):
            width = next(len(v) for v in nodes.value if isinstance(v, np.ndarray))
            out = np.zeros((n, width))
        else:
            out = np.zeros(n)
        stack = [(0, np.arange(n), np.ones(n))]
        while stack:
            node, idx, w = stack.pop()
            if len(idx) == 0:
                continue
            if nodes.feature[node] < 0:
                if out.ndim == 2:
                    out[idx] += w[:, None] * nodes.value[node][None, :]
                else:
                    out[idx] += w * nodes.value[node]
                continue
            x = rows[idx, nodes.feature[node]]
            lo = nodes.gap_lo[node]
            hi = nodes.gap_hi[node]
            mid = (x > lo) & (x < hi)
            if mid.any():
                frac = np.zeros(len(x))
                frac[mid] = (x[mid] - lo) / (hi - lo)
                go_left = x <= lo
                left_idx = np.concatenate([idx[go_left], idx[mid]])
                left_w = np.concatenate([w[go_left], w[mid] * (1.0 - frac[mid])])
                go_right = x >= hi
                right_idx = np.concatenate([idx[go_right], idx[mid]])
                right_w = np.concatenate([w[go_right], w[mid] * frac[mid]])
                stack.append((nodes.left[node], left_idx, left_w))
                stack.append((nodes.right[node], right_idx, right_w))
            else:
                go_left = x <= nodes.threshold[node]
                stack.append((nodes.left[node], idx[go_left], w[go_left]))
                stack.append((nodes.right[node], idx[~go_left], w[~go_left]))
        return out

    def predict(self, rows: np.ndarray) -> np.ndarray:
        out = self.predict_raw(rows)
        if self.task != TASK_REGRESSION and out.ndim == 2:
            out = out / np.maximum(out.sum(axis=1, keepdims=True), _PROBA_TOL)
        return out

    @property
    def depth(self) -> int:
        def node_depth(i: int) -> int:
            if self._nodes.feature[i] < 0:
                return 0
            return 1 + max(node_depth(self._nodes.left[i]), node_depth(self._nodes.right[i]))

        return node_depth(0)


def train_cart(d: Dataset, max_depth: int, min_leaf: int = 1, seed: int = 0) -> DecisionTree:
    return DecisionTree(max_depth=max_depth, min_leaf=min_leaf, seed=seed).fit(d)


# ---------------------------------------------------------------------------
# Bagged forest

class RandomForest(Predictor):
    def __init__(self, n_trees: int = 100, max_depth: int = 10,
                 feature_fraction: float = 1.0, min_leaf: int = 1, seed: int = 0,
                 bootstrap: bool = True):
        if n_trees < 1:
            raise LearnerError(f"n_trees must be >= 1, got {n_trees}")
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.feature_fraction = feature_fraction
        self.min_leaf = min_leaf
        self.seed = seed
        self.bootstrap = bootstrap
        self.trees: list[DecisionTree] = []

    def fit(self, train: Dataset) -> "RandomForest":
        self.task = train.task
        self.n_classes = train.n_classes
        rng = np.random.default_rng(self.seed)
        self.trees = []
        for _ in range(self.n_trees):
            if self.bootstrap:
                idx = rng.integers(0, train.n_rows, size=train.n_rows)
            else:
                idx = np.arange(train.n_rows)
            tree = DecisionTree(
                max_depth=self.max_depth,
                min_leaf=self.min_leaf,
                seed=int(rng.integers(0, 2**31 - 1)),
                feature_fraction=self.feature_fraction,
            )
            tree.fit(train.take(idx))
            self.trees.append(tree)
        return self

    def predict(self, rows: np.ndarray) -> np.ndarray:
        preds = [t.predict(rows) for t in self.trees]
        out = np.mean(preds, axis=0)
        if self.task != TASK_REGRESSION:
            out = out / np.maximum(out.sum(axis=1, keepdims=True), _PROBA_TOL)
        return out


def train_forest(d: Dataset, n_trees: int = 100, max_depth: int = 10,
                 feature_fraction: float = 1.0, seed: int = 0) -> RandomForest:
    return RandomForest(
        n_trees=n_trees, max_depth=max_depth, feature_fraction=feature_fraction, seed=seed
    ).fit(d)


# ---------------------------------------------------------------------------
# Gradient-boosted trees

def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class GradientBoostedTrees(Predictor):
    """Stagewise regression trees on loss gradients: squared loss for
    regression, one-vs-rest log loss (softmax-normalized at predict time)
    for classification."""

    def __init__(self, n_rounds: int = 200, depth: int = 3, learning_rate: float = 0.1,
                 min_leaf: int = 1, seed: int = 0):
        if n_rounds < 1:
            raise LearnerError(f"n_rounds must be >= 1, got {n_rounds}")
        if not 0.0 < learning_rate <= 1.0:
            raise LearnerError(f"learning_rate must lie in (0,1], got {learning_rate}")
        self.n_rounds = n_rounds
        self.depth = depth
        self.learning_rate = learning_rate
        self.min_leaf = min_leaf
        self.seed = seed
        self._stages: list = []
        self._base: np.ndarray | float = 0.0

    def fit(self, train: Dataset) -> "GradientBoostedTrees":
        self.task = train.task
        self.n_classes = train.n_classes
        X, y = train.features, train.target
        rng = np.random.default_rng(self.seed)
        self._stages = []
        if train.is_classification():
            onehot = np.zeros((len(y), train.n_classes))
            onehot[np.arange(len(y)), y.astype(int)] = 1.0
            self._base = np.zeros(train.n_classes)
            scores = np.zeros_like(onehot)
            for _ in range(self.n_rounds):
                residual = onehot - _sigmoid(scores)
                stage = []
                for c in range(train.n_classes):
                    tree = DecisionTree(self.depth, self.min_leaf,
                                        seed=int(rng.integers(0, 2**31 - 1)))
                    tree._fit_values(X, residual[:, c], rng)
                    scores[:, c] += self.learning_rate * tree.predict_raw(X)
                    stage.append(tree)
                self._stages.append(stage)
        else:
            self._base = float(y.mean())
            pred = np.full(len(y), self._base)
            for _ in range(self.n_rounds):
                tree = DecisionTree(self.depth, self.min_leaf,
                                    seed=int(rng.integers(0, 2**31 - 1)))
                tree._fit_values(X, y - pred, rng)
                pred += self.learning_rate * tree.predict_raw(X)
                self._stages.append(tree)
        return self

    def decision_scores(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if self.task == TASK_REGRESSION:
            out = np.full(rows.shape[0], self._base)
            for tree in self._stages:
                out += self.learning_rate * tree.predict_raw(rows)
            return out
        out = np.tile(self._base, (rows.shape[0], 1))
        for stage in self._stages:
            for c, tree in enumerate(stage):
                out[:, c] += self.learning_rate * tree.predict_raw(rows)
        return out

    def predict(self, rows: np.ndarray) -> np.ndarray:
        scores = self.decision_scores(rows)
        if self.task == TASK_REGRESSION:
            return scores
        return _softmax(scores)


def train_gbt(d: Dataset, n_rounds: int = 200, depth: int = 3,
              learning_rate: float = 0.1, seed: int = 0) -> GradientBoostedTrees:
    return GradientBoostedTrees(
        n_rounds=n_rounds, depth=depth, learning_rate=learning_rate, seed=seed
    ).fit(d)


# ---------------------------------------------------------------------------
# Ridge with cross-validated penalty

DEFAULT_RIDGE_ALPHAS = (0.01, 0.1, 1.0, 10.0, 100.0)


class RidgeCV(Predictor):
    def __init__(self, alphas=DEFAULT_RIDGE_ALPHAS, n_folds: int = 5):
        self.alphas = tuple(alphas)
        self.n_folds = n_folds
        self.alpha_: float | None = None
        self._coef: np.ndarray | None = None
        self._intercept = 0.0
        self._center: np.ndarray | None = None

    @staticmethod
    def _solve(Xc: np.ndarray, yc: np.ndarray, alpha: float) -> np.ndarray:
        p = Xc.shape[1]
        return np.linalg.solve(Xc.T @ Xc + alpha * np.eye(p), Xc.T @ yc)

    def fit(self, train: Dataset) -> "RidgeCV":
        if train.task != TASK_REGRESSION:
            raise LearnerError("ridge requires a regression task")
        if train.n_rows < self.n_folds:
            raise LearnerError(
                f"need at least {self.n_folds} rows for {self.n_folds}-fold CV"
            )
        self.task = train.task
        X, y = train.features, train.target
        folds = np.array_split(np.arange(train.n_rows), self.n_folds)
        errors = {a: 0.0 for a in self.alphas}
        for i in range(self.n_folds):
            val = folds[i]
            tr = np.concatenate([folds[j] for j in range(self.n_folds) if j != i])
            center = X[tr].mean(axis=0)
            Xc, yc = X[tr] - center, y[tr] - y[tr].mean()
            for a in self.alphas:
                coef = self._solve(Xc, yc, a)
                pred = (X[val] - center) @ coef + y[tr].mean()
                errors[a] += float(np.mean((y[val] - pred) ** 2))
        self.alpha_ = min(self.alphas, key=lambda a: (errors[a], a))
        self._center = X.mean(axis=0)
        self._coef = self._solve(X - self._center, y - y.mean(), self.alpha_)
        self._intercept = float(y.mean())
        return self

    def predict(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        return (rows - self._center) @ self._coef + self._intercept


def train_ridge_cv(d: Dataset, alphas=DEFAULT_RIDGE_ALPHAS) -> RidgeCV:
    return RidgeCV(alphas=alphas).fit(d)


# ---------------------------------------------------------------------------
# kNN

class KNearestNeighbors(Predictor):
    def __init__(self, k: int = 5):
        self.k = k
        self._X: np.ndarray | None = None
        self._y: np.ndarray | None = None
        self._mean: np.ndarray | None = None
        self._std: np.ndarray | None = None

    def fit(self, train: Dataset) -> "KNearestNeighbors":
        if self.k > train.n_rows:
            raise LearnerError(f"k={self.k} exceeds training size {train.n_rows}")
        self.task = train.task
        self.n_classes = train.n_classes
        self._mean = train.features.mean(axis=0)
        self._std = train.features.std(axis=0)
        self._std = np.where(self._std > 0, self._std, 1.0)
        self._X = (train.features - self._mean) / self._std
        self._y = train.target
        return self

    def predict(self, rows: np.ndarray) -> np.ndarray:
        rows = (np.asarray(rows, dtype=np.float64) - self._mean) / self._std
        d2 = ((rows[:, None, :] - self._X[None, :, :]) ** 2).sum(axis=2)
        dist = np.sqrt(d2)
        nn = np.argpartition(dist, self.k - 1, axis=1)[:, : self.k]
        if self.task == TASK_REGRESSION:
            out = np.empty(rows.shape[0])
        else:
            out = np.zeros((rows.shape[0], self.n_classes))
        for i in range(rows.shape[0]):
            idx = nn[i]
            d = dist[i, idx]
            exact = d < 1e-12
            if exact.any():
                labels = self._y[idx[exact]]
                if self.task == TASK_REGRESSION:
                    out[i] = labels.mean()
                else:
                    for c in labels.astype(int):
                        out[i, c] += 1.0 / len(labels)
            else:
                w = 1.0 / d
                w = w / w.sum()
                labels = self._y[idx]
                if self.task == TASK_REGRESSION:
                    out[i] = float(w @ labels)
                else:
                    for c, wi in zip(labels.astype(int), w):
                        out[i, c] += wi
        return out


def train_knn(d: Dataset, k: int = 5) -> KNearestNeighbors:
    return KNearestNeighbors(k=k).fit(d)


# ---------------------------------------------------------------------------
# External teacher client (newline-delimited JSON over stdio or TCP)

class ExternalPredictor(Predictor):
    """Client for an external teacher process speaking the bridge protocol.

    ``command`` spawns a child process (stdio transport); ``address`` connects
    to host:port (TCP).  A failed request is retried once before raising."""

    def __init__(self, command: str | None = None, address: str | None = None,
                 timeout: float = 30.0):
        if (command is None) == (address is None):
            raise LearnerError("specify exactly one of command or address")
        self.command = command
        self.address = address
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._sock_file = None
        self._next_id = 0
        self._train: Dataset | None = None

    # -- transport --------------------------------------------------------

    def _connect(self) -> None:
        if self.command is not None:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        else:
            host, _, port = self.address.rpartition(":")
            sock = socket.create_connection((host, int(port)), timeout=self.timeout)
            self._sock_file = sock.makefile("rw", encoding="utf-8", newline="\n")

    def _stderr_tail(self) -> str:
        if self._proc is None or self._proc.stderr is None:
            return ""
        try:
            self._proc.stdin.close()
        except Exception:
            pass
        try:
            tail = self._proc.stderr.read() or ""
        except Exception:
            return ""
        return tail[-2000:]

    def _send_line(self, line: str) -> None:
        if self._proc is not None:
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        else:
            self._sock_file.write(line + "\n")
            self._sock_file.flush()

    def _read_line(self) -> str:
        deadline = time.monotonic() + self.timeout
        if self._proc is not None:
            line = self._proc.stdout.readline()
        else:
            line = self._sock_file.readline()
        if not line:
            raise TeacherError("bridge closed the connection")
        if time.monotonic() > deadline:
            raise TeacherError(f"bridge reply timed out after {self.timeout}s")
        return line

    def _request_once(self, payload: dict) -> dict:
        req_id = self._next_id
        self._next_id += 1
        payload = {"id": req_id, **payload}
        self._send_line(json.dumps(payload))
        try:
            reply = json.loads(self._read_line())
        except TeacherError as exc:
            raise TeacherError(f"request {req_id} ({payload.get('cmd')}): {exc}") from None
        except json.JSONDecodeError as exc:
            raise TeacherError(f"request {req_id}: malformed bridge reply: {exc}") from None
        if reply.get("id") != req_id:
            raise TeacherError(
                f"bridge replied with id {reply.get('id')} to request {req_id}"
            )
        if "error" in reply:
            raise TeacherError(f"bridge error for request {req_id}: {reply['error']}")
        return reply

    def _request(self, payload: dict) -> dict:
        try:
            return self._request_once(payload)
        except TeacherError as first:
            if "bridge error" in str(first):
                raise  # protocol-level refusal, not a transport fault
            try:
                self.close()
                self._connect()
                if self._train is not None:
                    self._request_once(self._init_payload())
                    self._request_once(self._fit_payload())
                return self._request_once(payload)
            except (TeacherError, OSError) as second:
                tail = self._stderr_tail()
                suffix = f"; bridge stderr: {tail}" if tail else ""
                raise TeacherError(f"{first}; retry failed: {second}{suffix}") from first

    # -- protocol ---------------------------------------------------------

    def _init_payload(self) -> dict:
        return {
            "cmd": "init",
            "task": self._train.task,
            "n_features": self._train.n_features,
        }

    def _fit_payload(self) -> dict:
        return {
            "cmd": "fit",
            "X": self._train.features.tolist(),
            "y": self._train.target.tolist(),
        }

    def _handshake(self) -> None:
        if self._train is None:
            return
        self._request(self._init_payload())

    def _send_fit(self, train: Dataset) -> None:
        self._request(self._fit_payload())

    def fit(self, train: Dataset) -> "ExternalPredictor":
        self.task = train.task
        self.n_classes = train.n_classes
        self._train = train
        if self._proc is None and self._sock_file is None:
            self._connect()
        self._handshake()
        self._send_fit(train)
        return self

    def predict(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        reply = self._request({"cmd": "predict", "X": rows.tolist()})
        if self.task == TASK_REGRESSION:
            if "pred" not in reply:
                raise TeacherError("bridge predict reply lacks 'pred'")
            out = np.asarray(reply["pred"], dtype=np.float64)
            if out.shape != (rows.shape[0],):
                raise TeacherError("bridge prediction length mismatch")
        else:
            if "proba" not in reply:
                raise TeacherError("bridge predict reply lacks 'proba'")
            out = np.asarray(reply["proba"], dtype=np.float64)
            if out.shape[0] != rows.shape[0]:
                raise TeacherError("bridge probability row-count mismatch")
            sums = out.sum(axis=1)
            if not np.allclose(sums, 1.0, atol=1e-6):
                raise TeacherError("bridge probability rows do not sum to 1")
        if not np.all(np.isfinite(out)):
            raise TeacherError("bridge returned non-finite predictions")
        return out

    def close(self) -> None:
        try:
            if self._proc is not None:
                try:
                    self._send_line(json.dumps({"id": self._next_id, "cmd": "shutdown"}))
                    self._next_id += 1
                except Exception:
                    pass
                self._proc.terminate()
                self._proc.wait(timeout=5)
            if self._sock_file is not None:
                self._sock_file.close()
        except Exception:
            pass
        self._proc = None
        self._sock_file = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def connect_external(command: str | None = None, address: str | None = None,
                     timeout: float = 30.0) -> ExternalPredictor:
    return ExternalPredictor(command=command, address=address, timeout=timeout)


# ---------------------------------------------------------------------------

BUILTIN_TEACHERS = ("gbt", "forest", "cart", "ridge", "knn")


def make_teacher(name: str, seed: int = 0, **kwargs) -> Predictor:
    """Construct an unfitted built-in teacher by name."""
    if name == "gbt":
        return GradientBoostedTrees(seed=seed, **kwargs)
    if name == "forest":
        return RandomForest(seed=seed, **kwargs)
    if name == "cart":
        return DecisionTree(max_depth=kwargs.pop("max_depth", 10), seed=seed, **kwargs)
    if name == "ridge":
        return RidgeCV(**kwargs)
    if name == "knn":
        return KNearestNeighbors(**kwargs)
    raise LearnerError(f"unknown teacher {name!r}; choose from {BUILTIN_TEACHERS}")
