"""Command-line entry point: ``qbranch solve|gen|train|eval|sweep|graph-dump``.

Log verbosity is read from ``QBRANCH_LOG_LEVEL`` (default ``WARNING``).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import pickle
import sys
from pathlib import Path

from . import config as run_config
from .cnf import DimacsError, load_dataset, read_dimacs
from .datasets import generate_dataset, split, write_dataset
from .graph_net import CheckpointError, GraphNetParams, load_params, save_params

log = logging.getLogger("qbranch")

EXIT_SAT = 10
EXIT_UNSAT = 20
EXIT_ERROR = 1
EXIT_USAGE = 2

LOG_FILE = "log.jsonl"
STATE_FILE = "trainer_state.pkl"
CONFIG_SNAPSHOT = "config.resolved"


class CliError(Exception):
    """User-facing failure; reported on stderr with a non-zero exit code."""

    def __init__(self, message: str, code: int = EXIT_ERROR):
        super().__init__(message)
        self.code = code


def _parse_cap(text):
    try:
        return run_config.parse_cap(text)
    except run_config.ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _read_formula(path):
    try:
        return read_dimacs(path)
    except (OSError, DimacsError, UnicodeDecodeError) as exc:
        raise CliError(f"{path}: {exc}") from None


def _load_model(path, expected=None) -> GraphNetParams:
    try:
        return load_params(path, expected)
    except (OSError, CheckpointError) as exc:
        raise CliError(str(exc)) from None


def _load_dir(path) -> list:
    if not path or not Path(path).is_dir():
        raise CliError(f"dataset directory not found: {path!r}")
    try:
        formulas = load_dataset(path)
    except DimacsError as exc:
        raise CliError(f"{path}: {exc}") from None
    if not formulas:
        raise CliError(f"no .cnf files in {path}")
    return formulas


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_series(path: Path, header: tuple[str, ...], rows) -> None:
    """Whitespace-separated x/y columns with a ``#`` header, ready for plotting tools."""
    lines = ["# " + " ".join(header)]
    for row in rows:
        lines.append(" ".join("nan" if v is None else repr(v) if isinstance(v, float) else str(v)
                              for v in row))
    path.write_text("\n".join(lines) + "\n")


# -- solve --------------------------------------------------------------------

def cmd_solve(args) -> int:
    from .env import solve_hybrid
    from .solver import SolverConfig, solve

    formula = _read_formula(args.file)
    cfg = SolverConfig(restarts=args.restarts)
    if args.model:
        params = _load_model(args.model)
        verdict, stats, calls = solve_hybrid(formula, params, args.cap, cfg)
    else:
        verdict, stats = solve(formula, config=cfg)
        calls = 0
    if verdict.is_sat:
        print("s SATISFIABLE")
        lits = [v if verdict.assignment[v] else -v for v in sorted(verdict.assignment)]
        print("v " + " ".join(map(str, lits + [0])))
    elif verdict.is_unsat:
        print("s UNSATISFIABLE")
    else:
        print("s UNKNOWN")
    for key, value in {**stats.as_dict(), "model_calls": calls}.items():
        print(f"c {key}={value}", file=sys.stderr)
    return EXIT_SAT if verdict.is_sat else EXIT_UNSAT if verdict.is_unsat else 0


# -- gen ----------------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.count < 0:
        raise CliError("count must be non-negative", EXIT_USAGE)
    formulas = generate_dataset(args.vars, args.clauses, args.count, args.seed, args.want)
    try:
        paths = write_dataset(formulas, args.outdir)
    except OSError as exc:
        raise CliError(f"cannot write to {args.outdir}: {exc}") from None
    for p in paths:
        print(p)
    return 0


# -- train --------------------------------------------------------------------

def _training_sets(cfg: run_config.RunConfig):
    if cfg.train_dir or cfg.val_dir:
        if not (cfg.train_dir and cfg.val_dir):
            raise CliError("train_dir and val_dir must be given together")
        return _load_dir(cfg.train_dir), _load_dir(cfg.val_dir)
    if not cfg.dataset_dir:
        raise CliError("config sets neither dataset_dir nor train_dir/val_dir")
    formulas = _load_dir(cfg.dataset_dir)
    try:
        train_set, val_set, _ = split(formulas, cfg.n_train, cfg.n_val, cfg.n_test)
    except ValueError as exc:
        raise CliError(f"{cfg.dataset_dir}: {exc}") from None
    return train_set, val_set


def cmd_train(args) -> int:
    from .dqn import new_trainer, train

    try:
        cfg = run_config.load(args.config)
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}") from None
    except run_config.ConfigError as exc:
        raise CliError(f"{args.config}: {exc}") from None
    out = Path(args.output_dir or cfg.output_dir)
    dqn_cfg = cfg.dqn_config()
    train_set, val_set = _training_sets(cfg)
    out.mkdir(parents=True, exist_ok=True)

    resume = None
    if args.resume:
        state_path = out / STATE_FILE
        if not state_path.exists():
            raise CliError(f"nothing to resume: {state_path} is missing")
        with open(state_path, "rb") as fh:
            resume = pickle.load(fh)
        if resume.config.network != dqn_cfg.network:
            raise CliError("resumed state was trained with different network dimensions")
        resume.config = dqn_cfg
        resume.schedule = type(resume.schedule)(dqn_cfg.eps_start, dqn_cfg.eps_end,
                                                dqn_cfg.eps_decay_steps)
        mode = "a"
    else:
        mode = "w"
    run_config.save(cfg, out / CONFIG_SNAPSHOT)

    with open(out / LOG_FILE, mode) as fh:
        def on_record(rec):
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
            fh.flush()
            log.info("%s", rec)

        if dqn_cfg.batch_updates == 0 and resume is None:
            trainer = new_trainer(dqn_cfg, cfg.seed)
            on_record({"event": "start", "env_steps": 0, "batch_updates": 0, "loss": None,
                       "epsilon": trainer.schedule(0), "episode_return": None})
            save_params(trainer.online, out / "best.ckpt")
            return 0
        result = train(train_set, val_set, dqn_cfg, seed=cfg.seed, resume=resume,
                       on_record=on_record)
    save_params(result.best_params, out / "best.ckpt")
    save_params(result.last_params, out / "last.ckpt")
    with open(out / STATE_FILE, "wb") as fh:
        pickle.dump(result.trainer, fh)
    print(f"best validation MRIR {result.best_validation_mrir} at update {result.best_at}")
    return 0


# -- eval ---------------------------------------------------------------------

_CSV_FIELDS = ("seed", "problem_id", "verdict", "baseline_no_restart", "baseline_restart",
               "agent_iterations", "ratio", "model_calls", "agent_restarts_used",
               "agent_props_per_step", "baseline_props_per_step")


def _checkpoints(pattern: str, seeds):
    if "{seed}" in pattern:
        if not seeds:
            raise CliError("checkpoint path contains {seed} but no --seeds were given", EXIT_USAGE)
        return [(s, pattern.format(seed=s)) for s in seeds]
    if seeds and len(seeds) > 1:
        raise CliError("several --seeds need a checkpoint pattern containing {seed}", EXIT_USAGE)
    return [(seeds[0] if seeds else None, pattern)]


def cmd_eval(args) -> int:
    from .evaluation import BaselineCache, aggregate_runs, compute_mrir, evaluate_problems
    from .graph_net import GraphNetConfig

    dataset = _load_dir(args.dataset)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    expected = GraphNetConfig()
    if args.config:
        expected = run_config.load(args.config).dqn_config().network
    cache = BaselineCache(dataset)
    runs, rows = [], []
    for seed, path in _checkpoints(args.checkpoint, args.seeds):
        params = _load_model(path, expected)
        results = evaluate_problems(params, dataset, args.cap, cache)
        rep = compute_mrir(results)
        runs.append({"seed": seed, "checkpoint": path, "mrir": rep.median,
                     "excluded": rep.excluded})
        ratio = dict(zip(rep.problem_ids, rep.ratios))
        for r in results:
            row = {k: getattr(r, k) for k in _CSV_FIELDS if hasattr(r, k)}
            row.update(seed=seed, ratio=ratio.get(r.problem_id))
            rows.append(row)
        runs[-1]["report"] = rep
    reports = [r.pop("report") for r in runs]
    summary = {"dataset": str(args.dataset), "cap": args.cap, "problems": len(dataset),
               "runs": runs, "aggregate": aggregate_runs(reports)}
    _write_json(out / "report.json", summary)
    with open(out / "per_problem.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
        w.writeheader()
        w.writerows(rows)
    _write_series(out / "ratios.dat", ("seed", "problem_index", "ratio"),
                  [(run["seed"], i, x) for run, rep in zip(runs, reports)
                   for i, x in enumerate(rep.ratios)])
    print(f"MRIR {summary['aggregate']['average']:.4f} over {len(runs)} run(s)")
    return 0


# -- sweep --------------------------------------------------------------------

def cmd_sweep(args) -> int:
    from . import evaluation as ev

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "caps":
        params = _load_model(args.checkpoint)
        dataset = _load_dir(args.dataset)
        rows = ev.decision_cap_sweep(params, dataset, args.caps)
        series = [(r["cap"], r["mrir"]) for r in rows]
        _write_json(out / "caps.json", [{"cap": c, "mrir": m} for c, m in series])
        _write_series(out / "caps.dat", ("cap", "mrir"), series)
    elif args.kind == "data":
        cfg = run_config.load(args.config)
        train_set, val_set = _training_sets(cfg)
        eval_set = _load_dir(args.dataset)
        rows = ev.data_efficiency_sweep(train_set, val_set, eval_set, args.sizes, args.seeds,
                                        cfg.dqn_config(), run_config.parse_cap(cfg.eval_cap))
        _write_json(out / "data.json", rows)
        _write_series(out / "data.dat", ("size", "average", "min", "max"),
                      [(r["size"], r["average"], r["min"], r["max"]) for r in rows])
    elif args.kind == "props":
        dataset = _load_dir(args.dataset)
        result = {"vsids": ev.propagation_stats(dataset)}
        if args.checkpoint:
            result["agent"] = ev.propagation_stats(dataset, _load_model(args.checkpoint), args.cap)
        _write_json(out / "props.json", result)
        for name, r in result.items():
            _write_series(out / f"props_{name}.dat", ("problem_index", "assignments_per_step"),
                          list(enumerate(r["per_problem"])))
    else:
        from .graph_net import init_params

        params = _load_model(args.checkpoint) if args.checkpoint else init_params(0)
        result = ev.inference_scaling_probe(params, args.sizes, repeats=args.repeats)
        _write_json(out / "scaling.json", result)
        _write_series(out / "scaling.dat", ("vertices", "macs", "wall_time"),
                      list(zip(result["vertices"], result["macs"], result["wall_times"])))
    print(f"wrote {args.kind} sweep to {out}")
    return 0


# -- graph-dump ---------------------------------------------------------------

def cmd_graph_dump(args) -> int:
    from .solver import SolverCore
    from .state_graph import build_state_graph, dump_graph

    core = SolverCore(_read_formula(args.file))
    print(dump_graph(build_state_graph(core) if core.active else None), end="")
    return 0


# -- argument parsing ---------------------------------------------------------

def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _cap_list(text: str) -> list:
    return [_parse_cap(x.strip()) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qbranch", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a DIMACS file")
    p.add_argument("file")
    p.add_argument("--restarts", action="store_true", help="enable Luby restarts")
    p.add_argument("--model", help="checkpoint that picks the first decisions")
    p.add_argument("--cap", type=_parse_cap, default=None,
                   help="model-call cap before handing off to VSIDS (default unlimited)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("gen", help="generate random 3-SAT instances")
    p.add_argument("--vars", type=int, required=True)
    p.add_argument("--clauses", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--outdir", required=True)
    p.add_argument("--want", choices=("sat", "unsat"), default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a branching model from a config file")
    p.add_argument("config")
    p.add_argument("--output-dir", help="override the config's output_dir")
    p.add_argument("--resume", action="store_true", help="continue from the saved trainer state")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="MRIR of checkpoint(s) on a dataset directory")
    p.add_argument("checkpoint", help="checkpoint path; may contain {seed}")
    p.add_argument("dataset")
    p.add_argument("--cap", type=_parse_cap, default=None)
    p.add_argument("--seeds", type=_int_list, default=None)
    p.add_argument("--config", help="run config giving the expected network dimensions")
    p.add_argument("--out", default="eval-out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="plot-ready sweeps")
    p.add_argument("kind", choices=("caps", "data", "props", "scaling"))
    p.add_argument("--checkpoint")
    p.add_argument("--dataset")
    p.add_argument("--config")
    p.add_argument("--caps", type=_cap_list, default=[0, 10, 50, 100, 300, 500, 1000])
    p.add_argument("--sizes", type=_int_list, default=None)
    p.add_argument("--seeds", type=_int_list, default=[0])
    p.add_argument("--cap", type=_parse_cap, default=None)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out", default="sweep-out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("graph-dump", help="print the initial state graph of a DIMACS file")
    p.add_argument("file")
    p.set_defaults(func=cmd_graph_dump)
    return ap


_SWEEP_NEEDS = {"caps": ("checkpoint", "dataset"), "data": ("config", "dataset", "sizes"),
                "props": ("dataset",), "scaling": ("sizes",)}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("QBRANCH_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "sweep":
        missing = [k for k in _SWEEP_NEEDS[args.kind] if getattr(args, k) is None]
        if missing:
            parser.error(f"sweep {args.kind} needs --{', --'.join(missing)}")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"qbranch: {exc}", file=sys.stderr)
        return exc.code
    except run_config.ConfigError as exc:
        print(f"qbranch: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
