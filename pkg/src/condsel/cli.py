"""Command-line entry point: ``condsel {gen,select,sweep,exhaustive,gradcheck}``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .data import ColumnManifest, Dataset, load_csv, manifest_for, write_csv
from .errors import CondSelError
from .generators import gen_open_defect, gen_planted, gen_tuning
from .gradcheck import gradcheck_condsel
from .oracle import DEFAULT_BUDGET, EvalConfig, exhaustive_search, oracle_sweep, prepare, write_audit_csv
from .selector import (SelectionReport, compare_with_oracle, fm_select, select_top_k, subset_sweep,
                       write_importance_csv, write_sweep_csv)
from .train import TrainConfig


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


TRAIN_FLAGS = {
    "epochs": int, "batch_size": int, "learning_rate": float, "adam_beta1": float,
    "adam_beta2": float, "adam_eps": float, "temperature": float, "early_stop_patience": int,
}


def _add_train_flags(p):
    for name, typ in TRAIN_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), type=typ, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--test-fraction", type=float, default=None)
    p.add_argument("--split-seed", type=int, default=None)


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="directory with data.csv + manifest.json, or a CSV file")
    p.add_argument("--manifest", default=None, help="manifest JSON (default: manifest.json next to the CSV)")
    p.add_argument("--out", default=None, help="output directory")


def build_parser():
    parser = _Parser(prog="condsel", description="Conditional variable selection with a learned feature mask.")
    parser.add_argument("--config", default=None, help="JSON file of flag defaults; command-line flags win")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    g = sub.add_parser("gen", help="write a synthetic dataset (data.csv + manifest.json)")
    g.add_argument("--kind", choices=("tuning", "open-defect", "planted"), required=True)
    g.add_argument("--n", type=int, default=None)
    g.add_argument("--n-defective", type=int, default=1000)
    g.add_argument("--n-ok", type=int, default=1000)
    g.add_argument("--d-c", type=int, default=6)
    g.add_argument("--d-p", type=int, default=1)
    g.add_argument("--relevant", type=_int_list, default=[0, 3])
    g.add_argument("--task", choices=("regression", "classification"), default="regression")
    g.add_argument("--noise", type=float, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    s = sub.add_parser("select", help="train the selection network and report candidate importance")
    _add_data_flags(s)
    _add_train_flags(s)
    s.add_argument("--k", type=int, default=None, help="number of candidates to choose")

    w = sub.add_parser("sweep", help="held-out metric over total subset sizes K")
    _add_data_flags(w)
    _add_train_flags(w)
    w.add_argument("--ks", type=_int_list, required=True)
    w.add_argument("--importance", default=None, help="report.json from a previous select run")
    w.add_argument("--with-oracle", action="store_true", help="also run the exhaustive sweep and compare")
    w.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    w.add_argument("--jobs", type=int, default=1)

    e = sub.add_parser("exhaustive", help="evaluate every size-k candidate subset")
    _add_data_flags(e)
    _add_train_flags(e)
    e.add_argument("--k", type=int, required=True)
    e.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    e.add_argument("--jobs", type=int, default=1)

    c = sub.add_parser("gradcheck", help="finite-difference check of the full model")
    c.add_argument("--task", choices=("regression", "classification"), default="regression")
    c.add_argument("--d-p", type=int, default=1)
    c.add_argument("--d-c", type=int, default=10)
    c.add_argument("--batch", type=int, default=8)
    c.add_argument("--eps", type=float, default=1e-5)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", default=None)
    return parser


def _resolve(parser, argv):
    """Parse ``argv``; values from ``--config`` become defaults, so explicit flags win."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    pre.add_argument("command", nargs="?")
    args, _ = pre.parse_known_args(argv)
    subparsers = parser._subparsers._group_actions[0].choices
    if not args.config or args.command not in subparsers:
        return parser.parse_args(argv)
    with open(args.config, encoding="utf-8") as fh:
        file_values = {k.replace("-", "_"): v for k, v in json.load(fh).items()}
    sub = subparsers[args.command]
    known = {a.dest for a in sub._actions}
    unknown = sorted(set(file_values) - known)
    if unknown:
        raise UsageError(f"unknown keys {unknown} in config file {args.config}")
    for action in sub._actions:
        if action.dest in file_values:
            action.required = False
    sub.set_defaults(**file_values)
    return parser.parse_args(argv)


def _train_config(args, task):
    defaults = TrainConfig()
    kw = {k: getattr(args, k) for k in TRAIN_FLAGS if getattr(args, k) is not None}
    return replace(defaults, task=task, seed=args.seed if args.seed is not None else 0, **kw)


def _eval_config(args, task):
    return EvalConfig(_train_config(args, task),
                      test_fraction=args.test_fraction if args.test_fraction is not None else 0.25,
                      split_seed=args.split_seed if args.split_seed is not None else 0)


def _load(args) -> Dataset:
    path = args.data
    if os.path.isdir(path):
        csv_path, manifest_path = os.path.join(path, "data.csv"), os.path.join(path, "manifest.json")
    else:
        csv_path, manifest_path = path, os.path.join(os.path.dirname(path) or ".", "manifest.json")
    manifest_path = args.manifest or manifest_path
    return load_csv(csv_path, ColumnManifest.read(manifest_path))


def _out_dir(args, default_name):
    out = args.out
    if out is None:
        base = args.data if os.path.isdir(args.data) else os.path.dirname(args.data) or "."
        out = os.path.join(base, default_name)
    os.makedirs(out, exist_ok=True)
    return out


def _write_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def _run_record(args, **resolved):
    record = {
        "command": args.command,
        "args": {k: v for k, v in sorted(vars(args).items()) if k != "config"},
        "resolved": resolved,
        "versions": {"condsel": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }
    return record


def cmd_gen(args):
    if args.kind == "tuning":
        kw = {} if args.noise is None else {"noise_scale": args.noise}
        d = gen_tuning(args.n or 5000, args.seed, **kw)
    elif args.kind == "open-defect":
        kw = {} if args.noise is None else {"noise_scale": args.noise}
        d = gen_open_defect(args.n_defective, args.n_ok, args.seed, **kw)
    else:
        kw = {} if args.noise is None else {"noise": args.noise}
        d = gen_planted(args.n or 5000, args.d_c, args.d_p, args.relevant, args.task, args.seed, **kw)
    os.makedirs(args.out, exist_ok=True)
    write_csv(d, os.path.join(args.out, "data.csv"))
    manifest_for(d).write(os.path.join(args.out, "manifest.json"))
    _write_json(_run_record(args), os.path.join(args.out, "run.json"))
    print(f"wrote {d.n} rows, {d.d_p} preselected + {d.d_c} candidates to {args.out}")


def cmd_select(args):
    d = _load(args)
    ecfg = _eval_config(args, d.task)
    out = _out_dir(args, "select")
    train_d, _ = prepare(d, ecfg)
    result = fm_select(train_d, ecfg.train)
    chosen = select_top_k(result.importance, args.k) if args.k else []
    report = SelectionReport(list(d.candidates), list(d.preselected), result.importance, chosen=chosen,
                             timings={"fm_train": result.seconds})
    report.write(os.path.join(out, "report.json"), include_timings=False)
    write_importance_csv(report, os.path.join(out, "importance.csv"))
    _write_json({"fm_train": result.seconds}, os.path.join(out, "timings.json"))
    _write_json(_run_record(args, eval=ecfg.to_dict()), os.path.join(out, "run.json"))
    for r, i in enumerate(report.ranking, start=1):
        print(f"{r:3d}  {d.candidates[i]:<12s} {report.importance[i]:.6f}")


def cmd_sweep(args):
    d = _load(args)
    ecfg = _eval_config(args, d.task)
    out = _out_dir(args, "sweep")
    prepared = prepare(d, ecfg)
    if args.importance:
        report = SelectionReport.read(args.importance)
        if list(report.candidates) != list(d.candidates):
            raise CondSelError("importance report was produced for different candidate columns")
        scores = np.array(report.importance)
    else:
        scores = fm_select(prepared[0], ecfg.train).importance
    rows = subset_sweep(d, scores, args.ks, ecfg, prepared)
    write_sweep_csv(rows, os.path.join(out, "sweep.csv"))
    if args.with_oracle:
        oracle = oracle_sweep(d, args.ks, ecfg, args.budget, args.jobs)
        write_sweep_csv(oracle, os.path.join(out, "oracle_sweep.csv"))
        rows = compare_with_oracle(rows, oracle)
        write_sweep_csv(rows, os.path.join(out, "compare.csv"))
    _write_json(_run_record(args, eval=ecfg.to_dict()), os.path.join(out, "run.json"))
    for row in rows:
        print("  ".join(str(x) for x in row))


def cmd_exhaustive(args):
    d = _load(args)
    ecfg = _eval_config(args, d.task)
    out = _out_dir(args, "exhaustive")
    best, records = exhaustive_search(d, args.k, ecfg, args.budget, args.jobs)
    write_audit_csv(records, d.candidates, os.path.join(out, "audit.csv"))
    best_doc = {"k": args.k, "indices": list(best.indices), "names": [d.candidates[i] for i in best.indices],
                "metric": best.metric, "evaluated": len(records),
                "preselected": list(d.preselected), "task": d.task}
    _write_json(best_doc, os.path.join(out, "best.json"))
    _write_json({"total_seconds": sum(r.seconds for r in records)}, os.path.join(out, "timings.json"))
    _write_json(_run_record(args, eval=ecfg.to_dict()), os.path.join(out, "run.json"))
    print(f"best of {len(records)}: {'|'.join(best_doc['names'])}  metric={best.metric!r}")


def cmd_gradcheck(args):
    err = gradcheck_condsel(args.d_p, args.d_c, args.task, args.batch, args.seed, args.eps)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _write_json(_run_record(args, max_relative_error=err), os.path.join(args.out, "run.json"))
    print(f"max relative error: {err:.3e}")


COMMANDS = {"gen": cmd_gen, "select": cmd_select, "sweep": cmd_sweep, "exhaustive": cmd_exhaustive,
            "gradcheck": cmd_gradcheck}


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = _resolve(parser, argv)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        COMMANDS[args.command](args)
    except (CondSelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
