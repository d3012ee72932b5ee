"""Command-line entry points: ``serve`` runs a bridge, ``conformance``
exercises one and prints the pass/fail table."""

from __future__ import annotations

import argparse
import sys

from .conformance import conformance_suite
from .models import BridgeModelError, available_models
from .server import serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="teacher-bridge")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("serve", help="run a bridge server")
    s.add_argument("--model", required=True, choices=available_models())
    s.add_argument("--transport", choices=["stdio", "tcp"], default="stdio")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=0)
    s.add_argument("--n-rounds", dest="n_rounds", type=int)
    s.add_argument("--depth", type=int)
    s.add_argument("--learning-rate", dest="learning_rate", type=float)
    s.add_argument("--seed", type=int)

    c = sub.add_parser("conformance", help="check a bridge command")
    c.add_argument("--command", required=True,
                   help="shell command that starts the bridge under test")
    c.add_argument("--timeout", type=float, default=30.0)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        kwargs = {
            k: getattr(args, k)
            for k in ("n_rounds", "depth", "learning_rate", "seed")
            if getattr(args, k) is not None
        }
        try:
            return serve(args.model, transport=args.transport, host=args.host,
                         port=args.port, model_kwargs=kwargs)
        except BridgeModelError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
        except KeyboardInterrupt:
            return 0
    report = conformance_suite(args.command, timeout=args.timeout)
    print(report.table())
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
