"""Wire-protocol server wrapping tabular predictors as black-box teachers.

The server speaks newline-delimited JSON over stdio (default) or TCP:
``init`` declares the task and feature count, ``fit`` ships the training
table, ``predict`` returns regression values or class-probability rows, and
``shutdown`` ends the session.  Every reply carries the id of its request;
failures come back as ``{"id": ..., "error": "..."}`` replies, never as
silent exits.
"""

from .conformance import CheckResult, ConformanceReport, conformance_suite
from .models import BridgeModelError, available_models, make_model
from .session import BridgeSession, PROTOCOL_VERSION
from .server import serve

__all__ = [
    "BridgeModelError",
    "BridgeSession",
    "CheckResult",
    "ConformanceReport",
    "PROTOCOL_VERSION",
    "available_models",
    "conformance_suite",
    "make_model",
    "serve",
]
