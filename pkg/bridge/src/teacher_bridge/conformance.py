"""Black-box conformance checks for any bridge command.

``conformance_suite`` launches the command, drives the wire protocol through
handshake, fit, batched predict (with a row-order probe on an asymmetric
fixture), malformed-message recovery, session-invariant probes, and
shutdown, and returns a pass/fail report.  Failures are report rows, never
exceptions."""

from __future__ import annotations

import json
import math
import shlex
import subprocess
from dataclasses import dataclass, field


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ConformanceReport:
    command: str
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def table(self) -> str:
        width = max(len(c.name) for c in self.checks) if self.checks else 0
        lines = [
            f"{'PASS' if c.passed else 'FAIL'}  {c.name:<{width}}  {c.detail}"
            for c in self.checks
        ]
        lines.append(f"{'PASS' if self.passed else 'FAIL'}  overall")
        return "\n".join(lines)


class _Client:
    """Minimal raw-protocol client over a child process's stdio."""

    def __init__(self, command: str, timeout: float = 30.0):
        self.timeout = timeout
        self.proc = subprocess.Popen(
            shlex.split(command),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self.next_id = 0

    def send_raw(self, line: str) -> dict:
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()
        reply = self.proc.stdout.readline()
        if not reply:
            raise ConnectionError("bridge closed the connection")
        return json.loads(reply)

    def request(self, payload: dict, req_id: int | None = None) -> dict:
        if req_id is None:
            req_id = self.next_id
            self.next_id = req_id + 1
        return self.send_raw(json.dumps({"id": req_id, **payload}))

    def close(self) -> int:
        try:
            self.proc.stdin.close()
        except Exception:
            pass
        try:
            return self.proc.wait(timeout=self.timeout)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            return -1


# asymmetric fixture: row-dependent targets so a row-order fault is visible
# in any model that actually looks at its input
_REG_X = [[float(i), float(i % 3)] for i in range(12)]
_REG_Y = [float(i) for i in range(12)]
_CLS_X = [[float(i), 1.0 - float(i % 2)] for i in range(12)]
_CLS_Y = [float(i % 2) for i in range(12)]


def conformance_suite(command: str, timeout: float = 30.0) -> ConformanceReport:
    report = ConformanceReport(command=command)
    check = report.checks.append

    # fresh process: fit before init must be refused, not crash
    try:
        probe = _Client(command, timeout)
        reply = probe.request({"cmd": "fit", "X": _REG_X, "y": _REG_Y})
        check(CheckResult(
            "fit-before-init refused", "error" in reply,
            reply.get("error", "no error reply")))
        probe.close()
    except Exception as exc:
        check(CheckResult("fit-before-init refused", False, f"transport failure: {exc}"))

    try:
        client = _Client(command, timeout)
    except Exception as exc:
        check(CheckResult("handshake", False, f"could not launch bridge: {exc}"))
        return report

    try:
        _run_main_session(client, check)
    except Exception as exc:
        check(CheckResult("session", False, f"aborted: {exc}"))
        client.close()
        return report

    exit_code = client.close()
    check(CheckResult("clean shutdown", exit_code == 0, f"exit code {exit_code}"))
    return report


def _run_main_session(client: _Client, check) -> None:
    reply = client.request({"cmd": "init", "task": "regression", "n_features": 2})
    check(CheckResult(
        "handshake",
        reply.get("ok") is True and reply.get("v") == 1 and reply.get("id") == 0,
        f"init reply: {reply}"))

    reply = client.request({"cmd": "fit", "X": _REG_X, "y": _REG_Y})
    check(CheckResult("fit accepted", reply.get("ok") is True, f"fit reply: {reply}"))

    forward = client.request({"cmd": "predict", "X": _REG_X})
    pred = forward.get("pred")
    shape_ok = isinstance(pred, list) and len(pred) == len(_REG_X)
    check(CheckResult(
        "regression predict shape", shape_ok,
        f"{len(pred) if isinstance(pred, list) else 'missing'} predictions "
        f"for {len(_REG_X)} rows"))
    finite = shape_ok and all(
        isinstance(v, (int, float)) and math.isfinite(v) for v in pred
    )
    check(CheckResult("finite predictions", finite, "" if finite else f"pred={pred}"))

    # row-order probe: a batch must equal its halves predicted separately
    # and concatenated; a bridge that permutes rows within a batch fails on
    # the asymmetric fixture, while any deterministic row-wise model passes
    half = len(_REG_X) // 2
    first = client.request({"cmd": "predict", "X": _REG_X[:half]}).get("pred")
    second = client.request({"cmd": "predict", "X": _REG_X[half:]}).get("pred")
    order_ok = (
        shape_ok and isinstance(first, list) and isinstance(second, list)
        and all(abs(a - b) <= 1e-9 for a, b in zip(first + second, pred))
    )
    check(CheckResult(
        "row order preserved", order_ok,
        "split batches match the full batch" if order_ok
        else f"full={pred} halves={first}+{second}"))

    # ids must echo and be strictly increasing: a stale id is refused
    stale = client.request({"cmd": "predict", "X": _REG_X}, req_id=0)
    check(CheckResult(
        "stale request id refused", "error" in stale, str(stale)))

    garbage = client.send_raw("this is not json")
    check(CheckResult(
        "malformed message answered",
        isinstance(garbage, dict) and "error" in garbage and garbage.get("id") is None,
        str(garbage)))
    after = client.request({"cmd": "predict", "X": _REG_X})
    check(CheckResult(
        "recovery after malformed message", "pred" in after,
        "next request answered" if "pred" in after else str(after)))

    # re-init for classification: probability rows must sum to 1
    reply = client.request({"cmd": "init", "task": "binary", "n_features": 2})
    ok = reply.get("ok") is True
    if ok:
        reply = client.request({"cmd": "fit", "X": _CLS_X, "y": _CLS_Y})
        ok = reply.get("ok") is True
    proba = None
    if ok:
        proba = client.request({"cmd": "predict", "X": _CLS_X}).get("proba")
    proba_ok = (
        isinstance(proba, list) and len(proba) == len(_CLS_X)
        and all(abs(sum(row) - 1.0) <= 1e-6 for row in proba)
    )
    check(CheckResult(
        "probability rows sum to 1", proba_ok,
        "" if proba_ok else f"proba={proba}"))

    reply = client.request({"cmd": "shutdown"})
    check(CheckResult("shutdown acknowledged", reply.get("ok") is True, str(reply)))
