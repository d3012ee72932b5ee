"""Command-line entry point: distill, fit, scenario, bench, and stability
commands wiring JSON configs and flag overrides to the pipeline.

Exit codes: 1 config error, 2 data error, 3 teacher error.  Every run writes
its resolved configuration next to its outputs; report commands render
figures alongside the CSV files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plots
from .data import DataError, Dataset, load_csv, split
from .distill import DistillConfig, DistillError, InteractionRanking, distill
from .gam import GamError, GamModel, GamTrainConfig, fit_gam, predict_gam
from .harness import (
    HarnessError,
    metrics,
    rank_methods,
    run_benchmark,
    run_scenario_a,
    run_scenario_b,
    run_stability,
    scenario_a_panels,
    ALL_METHODS,
)
from .learners import (
    BUILTIN_TEACHERS,
    LearnerError,
    Predictor,
    TeacherError,
    connect_external,
    make_teacher,
)

EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_TEACHER = 3


class ConfigError(ValueError):
    pass


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        obj = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return obj


def _merge(args: argparse.Namespace, config: dict) -> dict:
    """Config-file values fill in; explicit flags win."""
    merged = dict(config)
    sub = getattr(args, "_parser", None)
    defaults = {a.dest: a.default for a in sub._actions} if sub else {}
    for key, value in vars(args).items():
        if key in ("command", "config") or key.startswith("_"):
            continue
        explicit = value != defaults.get(key)
        if explicit or key not in merged:
            merged[key] = value
    return merged


def _prepare_out(cfg: dict) -> Path:
    out = Path(cfg.get("out") or "runs/latest")
    out.mkdir(parents=True, exist_ok=True)
    (out / "logs").mkdir(exist_ok=True)
    resolved = {k: v for k, v in cfg.items() if not k.startswith("_")}
    (out / "config.json").write_text(json.dumps(resolved, indent=2, default=str))
    return out


def _build_teacher(cfg: dict, seed: int) -> Predictor:
    name = cfg.get("teacher") or "gbt"
    cmd = cfg.get("teacher_cmd")
    addr = cfg.get("teacher_addr")
    if sum(x is not None for x in (cmd, addr)) > 1:
        raise ConfigError("specify at most one of --teacher-cmd and --teacher-addr")
    if cmd or addr:
        return connect_external(command=cmd, address=addr)
    if name not in BUILTIN_TEACHERS:
        raise ConfigError(f"unknown teacher {name!r}; choose from {BUILTIN_TEACHERS}")
    return make_teacher(name, seed=seed)


def _distill_config(cfg: dict) -> DistillConfig:
    try:
        return DistillConfig(
            max_order=int(cfg.get("max_order", 3)),
            budget=int(cfg.get("budget", 500)),
            n_explain=None if cfg.get("n_explain") in (None, "all")
            else int(cfg.get("n_explain", 100)),
            per_sample_top=int(cfg.get("per_sample_top", 5)),
            index=str(cfg.get("index", "fbii")),
            n_interactions=int(cfg.get("n_int", 8)),
            seed=int(cfg.get("seed", 0)),
        )
    except DistillError as exc:
        raise ConfigError(str(exc)) from None


def _gam_config(cfg: dict) -> GamTrainConfig:
    try:
        return GamTrainConfig(
            max_bins=int(cfg.get("max_bins", 256)),
            outer_bags=int(cfg.get("outer_bags", 4)),
            learning_rate=float(cfg.get("learning_rate", 0.05)),
            max_rounds=int(cfg.get("max_rounds", 3000)),
            seed=int(cfg.get("seed", 0)),
        )
    except GamError as exc:
        raise ConfigError(str(exc)) from None


def _load_dataset(cfg: dict) -> Dataset:
    path = cfg.get("data")
    target = cfg.get("target")
    if not path:
        raise ConfigError("--data is required")
    if not target:
        raise ConfigError("--target is required")
    if not Path(path).exists():
        raise DataError(f"data file not found: {path}")
    return load_csv(path, target, task=cfg.get("task"))


def _print_ranking(ranking: InteractionRanking, names: list[str]) -> None:
    print(f"{'rank':>4}  {'interaction':<40} {'count':>6} {'mass':>10}")
    for i, (s, count, mass) in enumerate(ranking.entries, 1):
        label = " x ".join(names[j] for j in s)
        print(f"{i:>4}  {label:<40} {count:>6} {mass:>10.4f}")
    if not ranking.entries:
        print("(no interactions found)")


def cmd_distill(cfg: dict) -> int:
    dcfg = _distill_config(cfg)
    d = _load_dataset(cfg)
    teacher = _build_teacher(cfg, seed=dcfg.seed)
    out = _prepare_out(cfg)
    try:
        teacher.fit(d)
        ranking = distill(d, teacher, dcfg)
    finally:
        if hasattr(teacher, "close"):
            teacher.close()
    (out / "ranking.json").write_text(ranking.to_json(d.feature_names))
    _print_ranking(ranking, d.feature_names)
    print(f"wrote {out / 'ranking.json'}")
    return 0


def _parse_interactions(text: str) -> list[tuple[int, ...]]:
    out = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            out.append(tuple(sorted(int(x) for x in part.split(","))))
        except ValueError:
            raise ConfigError(f"cannot parse interaction {part!r}") from None
    return out


def cmd_fit(cfg: dict) -> int:
    if cfg.get("ranking") and cfg.get("interactions"):
        raise ConfigError("give either --ranking or --interactions, not both")
    gam_cfg = _gam_config(cfg)
    d = _load_dataset(cfg)
    out = _prepare_out(cfg)
    n_int = int(cfg.get("n_int", 8))
    if cfg.get("ranking"):
        path = Path(cfg["ranking"])
        if not path.exists():
            raise DataError(f"ranking file not found: {path}")
        ranking = InteractionRanking.from_json(path.read_text())
        subsets = [s for s in ranking.subsets() if len(s) <= 3][:n_int]
    elif cfg.get("interactions"):
        subsets = _parse_interactions(cfg["interactions"])
    else:
        subsets = []
    seed = int(cfg.get("seed", 0))
    train, test = split(d, float(cfg.get("train_fraction", 2.0 / 3.0)), seed)
    model = fit_gam(train, subsets, gam_cfg)
    pred = predict_gam(model, test.features)
    report = metrics(pred, test.target, d.task)
    (out / "model.json").write_text(model.to_json())
    (out / "report.csv").write_text(
        "metric,value\n" + "\n".join(f"{k},{v}" for k, v in report.items()) + "\n"
    )
    terms_dir = out / "terms"
    terms_dir.mkdir(exist_ok=True)
    for t in model.terms:
        tag = "_".join(str(j) for j in t.subset)
        header = ",".join(f"bin_{j}" for j in t.subset) + ",value"
        lines = [header]
        if t.table.ndim == len(t.subset):
            for cell in np.ndindex(*t.grid_shape):
                lines.append(",".join(str(c) for c in cell) + f",{t.table[cell]}")
        else:
            for cell in np.ndindex(*t.grid_shape):
                vals = ",".join(str(v) for v in t.table[cell])
                lines.append(",".join(str(c) for c in cell) + f",{vals}")
        (terms_dir / f"term_{tag}.csv").write_text("\n".join(lines) + "\n")
    plots.plot_gam_terms(model, out / "figures", feature_names=d.feature_names)
    for k, v in report.items():
        print(f"{k}: {v:.4f}")
    print(f"wrote {out / 'model.json'}")
    return 0


def cmd_scenario(cfg: dict) -> int:
    which = cfg.get("which")
    if which not in ("a", "b"):
        raise ConfigError("--which must be 'a' or 'b'")
    out = _prepare_out(cfg)
    seeds = tuple(range(int(cfg.get("seeds", 5))))
    fast = bool(cfg.get("fast"))
    gam_cfg = _gam_config(cfg)
    if which == "a":
        experiments = ("exp1", "exp2", "exp3")
        if cfg.get("experiment"):
            experiments = (f"exp{int(cfg['experiment'])}",)
        dcfg = _distill_config(cfg)
        if fast:
            dcfg = replace(dcfg, budget=200, n_explain=30)
        report = run_scenario_a(
            experiments=experiments, seeds=seeds, distill_cfg=dcfg,
            gam_cfg=gam_cfg, cache_dir=out / "cache",
        )
        report.write_csv(out / "report.csv")
        panels = scenario_a_panels(report)
        for exp, frame in panels.items():
            frame.to_csv(out / f"panel_{exp}.csv", index=False)
        plots.plot_scenario_a(panels, out / "figures")
    else:
        n_samples = 2000 if fast else int(cfg.get("n_samples", 10000))
        dcfg = _distill_config(cfg)
        if fast:
            dcfg = replace(dcfg, budget=200, n_explain=30)
        report = run_scenario_b(
            depths=tuple(range(1, int(cfg.get("max_depth", 10)) + 1)),
            seeds=seeds, n_samples=n_samples, distill_cfg=dcfg,
            gam_cfg=gam_cfg, cache_dir=out / "cache",
        )
        report.write_csv(out / "report.csv")
        plots.plot_scenario_b(report.frame(), out / "figures")
    print(f"wrote {out / 'report.csv'}")
    return 0


def cmd_bench(cfg: dict) -> int:
    paths = cfg.get("data") or []
    if isinstance(paths, str):
        paths = [paths]
    if not paths:
        raise ConfigError("--data requires at least one CSV path")
    target = cfg.get("target")
    if not target:
        raise ConfigError("--target is required")
    datasets = {}
    for p in paths:
        if not Path(p).exists():
            raise DataError(f"data file not found: {p}")
        datasets[Path(p).stem] = load_csv(p, target, task=cfg.get("task"))
    out = _prepare_out(cfg)
    methods = tuple(cfg.get("methods") or ALL_METHODS)
    n_ints = tuple(range(1, int(cfg.get("max_n_int", 8)) + 1))
    seeds = tuple(range(int(cfg.get("seeds", 1))))
    report, ranks, failures = run_benchmark(
        datasets, methods=methods, n_ints=n_ints, seeds=seeds,
        distill_cfg=_distill_config(cfg), gam_cfg=_gam_config(cfg),
        cache_dir=out / "cache",
    )
    report.write_csv(out / "report.csv")
    ranks.write_csv(out / "ranks.csv")
    (out / "failures.json").write_text(json.dumps(failures, indent=2))
    if not ranks.table.empty:
        plots.plot_rank_table(ranks.table, out / "figures")
    print(f"{len(datasets)} datasets, {len(methods)} methods "
          f"(RuleFit excluded: out of scope), {len(failures)} failed cells")
    print(f"wrote {out / 'report.csv'} and {out / 'ranks.csv'}")
    return 0


def cmd_stability(cfg: dict) -> int:
    d = _load_dataset(cfg)
    out = _prepare_out(cfg)
    sizes = cfg.get("sizes") or "100,200,300,400,500"
    if isinstance(sizes, str):
        sizes = tuple(int(s) for s in sizes.split(","))
    frame = run_stability(
        d, sample_sizes=sizes, distill_cfg=_distill_config(cfg),
        gam_cfg=_gam_config(cfg), seed=int(cfg.get("seed", 0)),
    )
    frame.to_csv(out / "report.csv", index=False)
    plots.plot_stability(frame, out / "figures")
    matrix = frame.pivot(index="method", columns="sample_size", values="overlap")
    print(matrix.to_string(float_format=lambda v: f"{v:.2f}"))
    print(f"wrote {out / 'report.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gamdistill",
        description="Distill black-box feature interactions into boosted GAMs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override it")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(_parser=p)

    p = sub.add_parser("distill", help="rank interactions from a fitted teacher")
    add_common(p)
    p.add_argument("--data")
    p.add_argument("--target")
    p.add_argument("--task", choices=["regression", "classification"])
    p.add_argument("--teacher", default="gbt")
    p.add_argument("--teacher-cmd", dest="teacher_cmd")
    p.add_argument("--teacher-addr", dest="teacher_addr")
    p.add_argument("--index", default="fbii")
    p.add_argument("--n-int", dest="n_int", type=int, default=8)
    p.add_argument("--budget", type=int, default=500)
    p.add_argument("--max-order", dest="max_order", type=int, default=3)
    p.add_argument("--n-explain", dest="n_explain", default=100)

    p = sub.add_parser("fit", help="fit a GAM with selected interactions")
    add_common(p)
    p.add_argument("--data")
    p.add_argument("--target")
    p.add_argument("--task", choices=["regression", "classification"])
    p.add_argument("--ranking", help="ranking.json from the distill command")
    p.add_argument("--interactions", help='explicit list, e.g. "0,1;2,3,4"')
    p.add_argument("--n-int", dest="n_int", type=int, default=8)
    p.add_argument("--train-fraction", dest="train_fraction", type=float,
                   default=2.0 / 3.0)
    p.add_argument("--outer-bags", dest="outer_bags", type=int, default=4)
    p.add_argument("--max-bins", dest="max_bins", type=int, default=256)
    p.add_argument("--max-rounds", dest="max_rounds", type=int, default=3000)

    p = sub.add_parser("scenario", help="run a synthetic scenario")
    add_common(p)
    p.add_argument("--which", choices=["a", "b"])
    p.add_argument("--experiment", help="scenario a: restrict to one experiment")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--fast", action="store_true", help="reduced sizes for CI")
    p.add_argument("--n-samples", dest="n_samples", type=int, default=10000)
    p.add_argument("--max-depth", dest="max_depth", type=int, default=10)
    p.add_argument("--max-rounds", dest="max_rounds", type=int, default=3000)

    p = sub.add_parser("bench", help="benchmark methods across datasets")
    add_common(p)
    p.add_argument("--data", nargs="+")
    p.add_argument("--target")
    p.add_argument("--task", choices=["regression", "classification"])
    p.add_argument("--max-n-int", dest="max_n_int", type=int, default=8)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--budget", type=int, default=500)
    p.add_argument("--n-explain", dest="n_explain", default=100)
    p.add_argument("--max-rounds", dest="max_rounds", type=int, default=3000)

    p = sub.add_parser("stability", help="selection overlap across sample sizes")
    add_common(p)
    p.add_argument("--data")
    p.add_argument("--target")
    p.add_argument("--task", choices=["regression", "classification"])
    p.add_argument("--sizes", default="100,200,300,400,500")
    p.add_argument("--budget", type=int, default=500)

    return parser


COMMANDS = {
    "distill": cmd_distill,
    "fit": cmd_fit,
    "scenario": cmd_scenario,
    "bench": cmd_bench,
    "stability": cmd_stability,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        config = _load_config_file(getattr(args, "config", None))
        merged = _merge(args, config)
        return COMMANDS[args.command](merged)
    except (ConfigError, DistillError, GamError, LearnerError, HarnessError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TeacherError as exc:
        print(f"teacher error: {exc}", file=sys.stderr)
        return EXIT_TEACHER


if __name__ == "__main__":
    sys.exit(main())
