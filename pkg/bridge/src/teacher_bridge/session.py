"""Per-connection protocol state machine.

One session per connection; requests are handled serially.  Invariants
enforced here: ``init`` precedes ``fit`` precedes ``predict``; request ids
are strictly increasing; every reply echoes the id of its request; malformed
input produces an error reply (never a silent exit)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .models import BridgeModelError, TASK_REGRESSION

PROTOCOL_VERSION = 1

VALID_TASKS = ("regression", "binary", "multiclass")


@dataclass
class BridgeSession:
    model: object
    model_name: str
    task: str | None = None
    n_features: int | None = None
    fitted: bool = False
    last_id: int | None = None
    closed: bool = field(default=False, init=False)

    # -- message handling --------------------------------------------------

    def handle_line(self, line: str) -> str:
        """Process one request line, returning the reply line."""
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            return json.dumps({"id": None, "error": f"malformed message: {exc}"})
        if not isinstance(msg, dict):
            return json.dumps({"id": None, "error": "message must be a JSON object"})
        req_id = msg.get("id")
        try:
            return json.dumps({"id": req_id, **self._dispatch(msg)})
        except BridgeError as exc:
            return json.dumps({"id": req_id, "error": str(exc)})

    def _dispatch(self, msg: dict) -> dict:
        req_id = msg.get("id")
        if not isinstance(req_id, int):
            raise BridgeError("request id must be an integer")
        if self.last_id is not None and req_id <= self.last_id:
            raise BridgeError(
                f"request id {req_id} not greater than previous id {self.last_id}"
            )
        self.last_id = req_id
        cmd = msg.get("cmd")
        handlers = {
            "init": self._init,
            "fit": self._fit,
            "predict": self._predict,
            "shutdown": self._shutdown,
        }
        if cmd not in handlers:
            raise BridgeError(f"unknown command {cmd!r}")
        return handlers[cmd](msg)

    # -- commands ----------------------------------------------------------

    def _init(self, msg: dict) -> dict:
        task = msg.get("task")
        if task not in VALID_TASKS:
            raise BridgeError(f"task must be one of {VALID_TASKS}, got {task!r}")
        n_features = msg.get("n_features")
        if not isinstance(n_features, int) or n_features < 1:
            raise BridgeError("n_features must be a positive integer")
        self.task = task
        self.n_features = n_features
        self.fitted = False
        return {
            "ok": True,
            "v": PROTOCOL_VERSION,
            "model": self.model_name,
            "limits": getattr(self.model, "limits", {}),
        }

    def _fit(self, msg: dict) -> dict:
        if self.task is None:
            raise BridgeError("fit before init")
        X = self._parse_matrix(msg.get("X"))
        y = msg.get("y")
        if not isinstance(y, list) or len(y) != X.shape[0]:
            raise BridgeError("y must be a list with one entry per row of X")
        y = np.asarray(y, dtype=np.float64)
        try:
            self.model.fit(X, y, self.task)
        except BridgeModelError as exc:
            raise BridgeError(str(exc)) from exc
        except Exception as exc:
            raise BridgeError(f"model fit failed: {exc}") from exc
        self.fitted = True
        return {"ok": True}

    def _predict(self, msg: dict) -> dict:
        if not self.fitted:
            raise BridgeError("predict before fit")
        X = self._parse_matrix(msg.get("X"))
        try:
            out = np.asarray(self.model.predict(X), dtype=np.float64)
        except BridgeModelError as exc:
            raise BridgeError(str(exc)) from exc
        except Exception as exc:
            raise BridgeError(f"model predict failed: {exc}") from exc
        if not np.all(np.isfinite(out)):
            raise BridgeError("model produced non-finite predictions")
        if self.task == TASK_REGRESSION:
            if out.shape != (X.shape[0],):
                raise BridgeError("regression prediction length mismatch")
            return {"pred": out.tolist()}
        if out.ndim != 2 or out.shape[0] != X.shape[0]:
            raise BridgeError("probability output must have one row per input row")
        sums = out.sum(axis=1)
        if not np.allclose(sums, 1.0, atol=1e-6):
            raise BridgeError("probability rows must sum to 1")
        return {"proba": out.tolist()}

    def _shutdown(self, msg: dict) -> dict:
        self.closed = True
        return {"ok": True}

    # -- helpers -----------------------------------------------------------

    def _parse_matrix(self, raw) -> np.ndarray:
        if not isinstance(raw, list) or not raw:
            raise BridgeError("X must be a non-empty list of rows")
        try:
            X = np.asarray(raw, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise BridgeError(f"X is not numeric: {exc}") from exc
        if X.ndim != 2:
            raise BridgeError("X must be a two-dimensional list of rows")
        if self.n_features is not None and X.shape[1] != self.n_features:
            raise BridgeError(
                f"expected {self.n_features} features per row, got {X.shape[1]}"
            )
        return X


class BridgeError(RuntimeError):
    """Protocol-level failure answered with an error reply."""
