"""Command-line front end.

Every command resolves its parameters as ``defaults < --config file < flags``,
runs, and writes plot-ready CSV files, JSON fit sidecars and a
``manifest.json`` with the resolved parameters.  Passing that manifest back
with ``--config`` reproduces the CSV files byte for byte.

Exit codes: 0 success, 1 experiment failure, 2 usage or configuration error,
3 missing dataset files, 4 output directory not writable.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

from . import __version__
from .datasets import DatasetModelSpec, geometric_grid, load_cora, run_gap_sweep_dataset
from .experiments import (
    SweepConfig,
    check_weyl,
    run_gap_sweep_synthetic,
    run_output_convergence,
    run_sampling_consistency,
    run_spectrum_convergence,
    write_fit_json,
    write_records_csv,
    write_summary_csv,
)
from .fitting import FitError, loglog_fit
from .manifolds import make_manifold
from .training import TrainConfig

OUT_ENV = "MANIFOLD_GNN_OUT"
CORA_ENV = "CORA_DIR"

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_DATASET = 3
EXIT_OUTPUT = 4


class UsageError(Exception):
    pass


class DatasetMissing(Exception):
    pass


class OutputNotWritable(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# (flag, parameter name, type, help); every flag defaults to None so that only
# explicitly given flags override the config file
_SWEEP_FLAGS = {
    "manifold": ("--manifold", str, "circle or sphere"),
    "N_list": ("--n", _ints, "comma-separated sample sizes"),
    "seeds": ("--seeds", int, "seeds per N"),
    "c": ("--c", float, "epsilon constant"),
    "normalization": ("--normalization", str, "kernel normalization: consistent or paper"),
    "M": ("--M", int, "bandwidth index"),
    "K": ("--k", int, "eigenpairs"),
    "taps": ("--taps", _floats, "heat filter taps"),
    "activation": ("--activation", str, "relu, abs, tanh or identity"),
    "signal": ("--signal", _floats, "input signal coefficients"),
    "depth": ("--depth", int, "layers"),
    "quadrature": ("--quadrature", int, "quadrature size for deep manifold networks"),
    "teacher_taps": ("--teacher-taps", _floats, "taps of the target filter"),
    "student_taps": ("--student-taps", int, "taps of the trained filter"),
    "features": ("--features", int, "input and output features of the regression task"),
    "task_seed": ("--task-seed", int, "seed of the generated signals and teacher"),
    "R": ("--R", int, "resampled graphs for the statistical risk"),
    "epochs": ("--epochs", int, "training epochs"),
    "lr": ("--lr", float, "learning rate"),
}

COMMANDS = {
    "spectrum": {
        "flags": ["manifold", "N_list", "seeds", "K", "c", "normalization"],
        "defaults": {"N_list": [250, 500, 1000, 2000], "seeds": 10, "K": 9},
    },
    "converge": {
        "flags": ["manifold", "N_list", "seeds", "M", "taps", "activation", "signal", "depth", "quadrature", "c", "normalization"],
        "defaults": {"N_list": [125, 250, 500, 1000, 2000], "seeds": 10, "M": 5},
    },
    "sampling": {
        "flags": ["manifold", "N_list", "seeds", "M", "signal"],
        "defaults": {"N_list": [100, 300, 1000, 3000, 10000], "seeds": 20, "M": 5},
    },
    "weyl": {"flags": ["manifold"], "defaults": {"manifold": "circle", "count": 100}},
    "gap-synthetic": {
        "flags": [
            "N_list", "seeds", "R", "epochs", "lr", "M", "features", "task_seed", "signal",
            "teacher_taps", "student_taps", "c", "normalization",
        ],
        "defaults": {"N_list": [64, 128, 256, 512, 1024, 2048], "seeds": 5, "R": 50},
    },
    "gap-dataset": {"flags": [], "defaults": {}},
    "fit": {"flags": [], "defaults": {}},
}

DATASET_DEFAULTS = {
    "cora_dir": None,
    "content": None,
    "cites": None,
    "N_list": None,
    "n_min": 270,
    "n_max": 2100,
    "n_count": 8,
    "trials": 10,
    "layers": 2,
    "hidden": 16,
    "taps": 2,
    "features": "l1",
    "mode": "induced",
    "normalized_laplacian": False,
    "epochs": 1000,
    "lr": 0.005,
    "save_predictions": False,
}

FIT_DEFAULTS = {"in": None, "x": "N", "y": "mean", "abs": False}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="manifold-gnn", description="Graph and manifold neural network experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, info in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON file with parameters (a manifest.json works)")
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV}/<command> or runs/<command>)")
        p.add_argument("--seed", type=int, dest="master_seed", help="master seed")
        p.add_argument("--jobs", type=int, help="worker processes (default 1)")
        for key in info["flags"]:
            flag, typ, hlp = _SWEEP_FLAGS[key]
            p.add_argument(flag, type=typ, dest=key, help=hlp)
        if name == "weyl":
            p.add_argument("--count", type=int, help="eigenvalues used")
        if name == "gap-dataset":
            p.add_argument("--cora-dir", dest="cora_dir", help=f"directory with cora.content and cora.cites (or ${CORA_ENV})")
            p.add_argument("--content", help="path to cora.content")
            p.add_argument("--cites", help="path to cora.cites")
            p.add_argument("--n", type=_ints, dest="N_list", help="training sizes (default: geometric grid)")
            p.add_argument("--n-min", type=int, dest="n_min")
            p.add_argument("--n-max", type=int, dest="n_max")
            p.add_argument("--n-count", type=int, dest="n_count")
            p.add_argument("--trials", type=int)
            p.add_argument("--layers", type=int)
            p.add_argument("--hidden", type=int)
            p.add_argument("--taps", type=int)
            p.add_argument("--features", choices=("l1", "none"))
            p.add_argument("--mode", choices=("induced", "masked"))
            p.add_argument("--normalized-laplacian", type=_bool, dest="normalized_laplacian")
            p.add_argument("--epochs", type=int)
            p.add_argument("--lr", type=float)
            p.add_argument("--save-predictions", type=_bool, dest="save_predictions")
        if name == "fit":
            p.add_argument("--in", dest="in", help="CSV file")
            p.add_argument("--x", help="column for x")
            p.add_argument("--y", help="column for y")
            p.add_argument("--abs", type=_bool, help="fit |y|")
    return parser


def _load_config(path) -> tuple[dict, str | None]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config {path} must hold a JSON object")
    if "params" in data:
        return dict(data["params"]), data.get("command")
    return data, None


def resolve_params(args: argparse.Namespace) -> dict:
    command = args.command
    if command == "gap-dataset":
        params = dict(DATASET_DEFAULTS)
    elif command == "fit":
        params = dict(FIT_DEFAULTS)
    else:
        params = dict(COMMANDS[command]["defaults"])
    params.setdefault("master_seed", 0)
    params.setdefault("jobs", 1)
    if args.config:
        loaded, loaded_command = _load_config(args.config)
        if loaded_command not in (None, command):
            raise UsageError(f"manifest was written by {loaded_command!r}, not {command!r}")
        params.update(loaded)
    for key, value in vars(args).items():
        if key in ("command", "config", "out") or value is None:
            continue
        params[key] = value
    return params


def _output_dir(args, command) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        out = Path(os.environ.get(OUT_ENV, "runs")) / command
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OutputNotWritable(f"output directory {out} is not writable: {exc}") from exc
    return out


def _sweep_config(params: dict) -> SweepConfig:
    keys = set(SweepConfig.__dataclass_fields__)
    try:
        return SweepConfig.from_dict({k: v for k, v in params.items() if k in keys})
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


def _write_report(report, out: Path, stem: str, extra_metrics=()) -> list[str]:
    write_records_csv(report, out / f"{stem}.csv")
    write_summary_csv(report.summary, out / f"{stem}_summary.csv")
    write_fit_json(report.fit, out / "fit.json")
    files = [f"{stem}.csv", f"{stem}_summary.csv", "fit.json"]
    for metric, use_abs in extra_metrics:
        write_summary_csv(report.summary_of(metric), out / f"{stem}_{metric}_summary.csv")
        write_fit_json(report.fit_of(metric, use_abs), out / f"fit_{metric}.json")
        files += [f"{stem}_{metric}_summary.csv", f"fit_{metric}.json"]
    return files


def _print_fit(label, fit):
    r = "undefined" if fit.pearson is None else f"{fit.pearson:.4f}"
    print(f"{label}: slope {fit.slope:.4f}, intercept {fit.intercept:.4f}, pearson {r}, points {fit.n_points}")


def _run_sweep(command, params, out, jobs):
    config = _sweep_config(params)
    if command == "spectrum":
        report = run_spectrum_convergence(config, jobs=jobs)
        files = _write_report(report, out, "spectrum")
    elif command == "converge":
        report = run_output_convergence(config, jobs=jobs)
        files = _write_report(report, out, "converge", [("filter", False)])
    elif command == "sampling":
        report = run_sampling_consistency(config, jobs=jobs)
        files = _write_report(report, out, "sampling")
    else:
        report = run_gap_sweep_synthetic(config, jobs=jobs)
        files = _write_report(report, out, "gap", [("empirical", False), ("statistical", False)])
        (out / "gap_task.json").write_text(json.dumps(report.task, indent=2, sort_keys=True) + "\n")
        files.append("gap_task.json")
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    _print_fit(f"{command} {report.metric}", report.fit)
    params.update(report.config)
    return files


def _run_weyl(params, out):
    count = int(params["count"])
    fit = check_weyl(params["manifold"], count)
    lam = make_manifold(params["manifold"], count).eigenvalues
    with open(out / "weyl.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "eigenvalue"])
        for i, v in enumerate(lam, start=1):
            w.writerow([i, repr(float(v))])
    write_fit_json(fit, out / "fit.json")
    print(f"weyl exponent {fit.slope:.4f}")
    return ["weyl.csv", "fit.json"]


def _dataset_paths(params):
    content, cites = params.get("content"), params.get("cites")
    if not (content and cites):
        base = params.get("cora_dir") or os.environ.get(CORA_ENV)
        if not base:
            raise DatasetMissing(f"no dataset given: pass --cora-dir, --content/--cites or set ${CORA_ENV}")
        content, cites = Path(base) / "cora.content", Path(base) / "cora.cites"
    for p in (content, cites):
        if not Path(p).is_file():
            raise DatasetMissing(f"dataset file not found: {p}")
    return str(content), str(cites)


def _run_dataset(params, out, jobs):
    content, cites = _dataset_paths(params)
    params["content"], params["cites"] = content, cites
    dataset = load_cora(content, cites)
    N_list = params.get("N_list") or list(geometric_grid(params["n_min"], params["n_max"], params["n_count"]))
    params["N_list"] = list(N_list)
    try:
        spec = DatasetModelSpec(
            layers=params["layers"],
            hidden=params["hidden"],
            taps=params["taps"],
            features=params["features"],
            normalized_laplacian=bool(params["normalized_laplacian"]),
            mode=params["mode"],
        )
        config = TrainConfig(lr=params["lr"], epochs=params["epochs"], loss="cross_entropy")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    preds = out / "predictions" if params["save_predictions"] else None
    report = run_gap_sweep_dataset(
        dataset, N_list, params["trials"], spec, config, params["master_seed"], jobs, preds
    )
    files = _write_report(report, out, "gap_dataset", [("loss_gap", True)])
    for metric in ("train_acc", "test_acc", "train_loss", "test_loss"):
        write_summary_csv(report.summary_of(metric), out / f"gap_dataset_{metric}_summary.csv")
        files.append(f"gap_dataset_{metric}_summary.csv")
    _print_fit("accuracy gap", report.fit)
    _print_fit("loss gap", report.fits["loss_gap"])
    return files


def _run_fit(params, out):
    if not params.get("in"):
        raise UsageError("fit needs --in")
    path = Path(params["in"])
    try:
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    x_col, y_col = params["x"], params["y"]
    if not rows or x_col not in rows[0] or y_col not in rows[0]:
        raise UsageError(f"{path} needs columns {x_col!r} and {y_col!r}")
    xs = [float(r[x_col]) for r in rows]
    ys = [float(r[y_col]) for r in rows]
    fit = loglog_fit(xs, ys, use_abs=bool(params["abs"]))
    write_fit_json(fit, out / "fit.json")
    _print_fit(f"log {y_col} vs log {x_col}", fit)
    if fit.n_dropped:
        print(f"dropped {fit.n_dropped} nonpositive point(s)")
    return ["fit.json"]


def run(args: argparse.Namespace) -> int:
    command = args.command
    params = resolve_params(args)
    out = _output_dir(args, command)
    jobs = int(params.get("jobs") or 1)
    if command in ("spectrum", "converge", "sampling", "gap-synthetic"):
        files = _run_sweep(command, params, out, jobs)
    elif command == "weyl":
        files = _run_weyl(params, out)
    elif command == "gap-dataset":
        files = _run_dataset(params, out, jobs)
    else:
        files = _run_fit(params, out)
    manifest = {"command": command, "version": __version__, "params": params, "outputs": sorted(files)}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(files) + 1} file(s) to {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return run(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DatasetMissing as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except OutputNotWritable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    except (FitError, ValueError, RuntimeError, ArithmeticError) as exc:
        print(f"error: experiment failed: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
