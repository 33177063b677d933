"""Command-line interface: fit, evaluate, predict, simulate, sweep, export-dynamics.

Any flag may also come from a JSON file given with ``--config``; flags on the
command line win. Log verbosity is read from ``DYNHAWKES_LOG_LEVEL``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys

import numpy as np

from .dynamics import export_grid
from .evaluate import evaluate as evaluate_report
from .events import SplitSpec, chronological_split, count_events, grid_boundaries, load_events
from .kernels import KernelSpec
from .models import DhpModel, _HawkesFamily, inject_dynamics, model_from_dict
from .simulate import SimConfig, thinning_simulate, write_simulation
from .training import SweepSpec, TrainConfig, fit, sweep, template_model, write_sweep_csv

log = logging.getLogger("dynhawkes")

LOG_ENV = "DYNHAWKES_LOG_LEVEL"
MODEL_TYPES = ("dhp", "hawkes", "hpp", "rpp", "selfcorrecting")
KERNELS = ("exp", "pwl", "ray")

# flags that must be present once the config file has been merged
REQUIRED = {
    "fit": ("data", "out"),
    "evaluate": ("model", "data"),
    "predict": ("model", "data", "out"),
    "simulate": ("model", "horizon", "out"),
    "sweep": ("data", "out"),
    "export-dynamics": ("model", "out"),
}


class CliError(Exception):
    pass


def _int_list(text):
    try:
        return tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text):
    return tuple(x.strip().lower() for x in str(text).split(",") if x.strip())


LIST_FLAGS = {"kernels": _str_list, "mixtures": _int_list, "layers": _int_list}


def _add_data_flags(p):
    p.add_argument("--data", help="events file (csv with time,mark header, or jsonl)")
    p.add_argument("--format", choices=("csv", "jsonl"), help="override format detection")
    p.add_argument("--manifest", help="JSON array of mark labels fixing the mark order")
    p.add_argument("--sort", action="store_true", help="sort unsorted input instead of rejecting it")
    p.add_argument("--time-scale", type=float, help="multiply all times by this factor on load")
    p.add_argument("--horizon", type=float, help="observation end (default: derived from the data)")


def _add_train_flags(p):
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--epochs", type=int, default=100)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--split", default="0.7,0.1,0.2", help="train,val,test fractions")
    p.add_argument("--hidden", type=int, default=8)


def _add_window_flags(p):
    p.add_argument("--window", choices=("train", "val", "test", "all"),
                   help="scoring window from the checkpoint's split (default test)")
    p.add_argument("--start", type=float, help="explicit window start (excludes --window)")
    p.add_argument("--end", type=float, help="explicit window end (excludes --window)")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="dynhawkes", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file supplying default flag values")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = subs["fit"] = sub.add_parser("fit", help="train a model and write a checkpoint")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--model-type", choices=MODEL_TYPES, default="dhp")
    p.add_argument("--kernel", choices=KERNELS, default="pwl")
    p.add_argument("--power-exponent", type=float, default=2.0, help="PWL exponent p > 1")
    p.add_argument("--mixtures", type=int, default=3)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--per-dimension", action="store_true", help="separate mixture weights per dimension")
    p.add_argument("--full-beta", action="store_true", help="one decay per (target, source) pair")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="checkpoint JSON path")
    p.add_argument("--log", help="training log path (default: <out>.log.jsonl)")

    p = subs["evaluate"] = sub.add_parser("evaluate", help="score a checkpoint on a window")
    p.add_argument("--model")
    _add_data_flags(p)
    _add_window_flags(p)
    p.add_argument("--width", type=float, default=900.0, help="MAPE interval width in data time units")
    p.add_argument("--no-residuals", action="store_true")
    p.add_argument("--out", help="report JSON path (default stdout)")
    p.add_argument("--csv", help="also append a flat CSV row here")

    p = subs["predict"] = sub.add_parser("predict", help="expected counts per interval")
    p.add_argument("--model")
    _add_data_flags(p)
    _add_window_flags(p)
    p.add_argument("--width", type=float, default=900.0)
    p.add_argument("--out")

    p = subs["simulate"] = sub.add_parser("simulate", help="sample events by thinning")
    p.add_argument("--model")
    p.add_argument("--horizon", type=float, help="simulation end in data time units")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-events", type=int, default=100_000)
    p.add_argument("--refresh", type=float, help="bound lookahead window (default horizon/50)")
    p.add_argument("--inject", help='analytic dynamics JSON, e.g. {"type": "constant", "value": 2}')
    p.add_argument("--out", help="events CSV path; a .json sidecar is written next to it")

    p = subs["sweep"] = sub.add_parser("sweep", help="grid search over kernels, mixtures and layers")
    _add_data_flags(p)
    _add_train_flags(p)
    p.add_argument("--kernels", type=_str_list, default=("pwl",))
    p.add_argument("--mixtures", type=_int_list, default=(3,))
    p.add_argument("--layers", type=_int_list, default=(2,))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    p = subs["export-dynamics"] = sub.add_parser("export-dynamics", help="write (t, f, F) per dimension")
    p.add_argument("--model")
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--end", type=float, help="grid end (default: the training horizon)")
    p.add_argument("--out", help="output prefix; writes <out>_<label>.csv per dimension")
    return parser, subs


def parse_args(argv):
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(cfg, dict):
            parser.error("config file must hold a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in cfg.items()}
        known = {a.dest for a in subs[args.command]._actions}
        unknown = sorted(set(cfg) - known - {"config", "command"})
        if unknown:
            parser.error(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        if args.command == "sweep":
            # list flags may be JSON arrays; defaults bypass argparse's type conversion
            for key, conv in LIST_FLAGS.items():
                if key in cfg:
                    v = cfg[key]
                    items = v if isinstance(v, (list, tuple)) else [v]
                    cfg[key] = conv(",".join(str(x) for x in items))
        subs[args.command].set_defaults(**cfg)
        args = parser.parse_args(argv)
    missing = [f"--{name.replace('_', '-')}" for name in REQUIRED[args.command] if getattr(args, name) is None]
    if missing:
        subs[args.command].error(f"missing required flags: {', '.join(missing)}")
    if getattr(args, "window", None) and (args.start is not None or args.end is not None):
        subs[args.command].error("--window cannot be combined with --start/--end")
    return args


# -- helpers ------------------------------------------------------------------------------


def _scale(args, meta=None) -> float:
    """Factor from file time units to model time units."""
    if args.time_scale is not None:
        return args.time_scale
    return (meta or {}).get("time_scale", 1.0)


def _load_data(args, meta=None):
    meta = meta or {}
    scale = _scale(args, meta)
    manifest = args.manifest
    if manifest is None and meta.get("mark_labels"):
        manifest = list(meta["mark_labels"])
    return load_events(args.data, fmt=args.format, manifest=manifest, sort=args.sort,
                       horizon=args.horizon, time_scale=scale)


def _load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _window(args, model, seq):
    """Scoring window in model time units; explicit --start/--end are in file units."""
    scale = _scale(args, model.meta)
    if args.start is not None or args.end is not None:
        start = seq.start if args.start is None else args.start * scale
        end = seq.horizon if args.end is None else args.end * scale
        return start, end
    name = args.window or "test"
    if name == "all":
        return seq.start, seq.horizon
    windows = model.meta.get("windows")
    if windows is None:
        windows = _split_windows(seq, SplitSpec())
    return tuple(windows[name])


def _split_windows(seq, spec):
    train, val, test = chronological_split(seq, spec)
    return {"train": [train.start, train.horizon], "val": [val.start, val.horizon],
            "test": [test.start, test.horizon]}


# -- commands -------------------------------------------------------------------------


def cmd_fit(args):
    seq = _load_data(args)
    spec = SplitSpec.parse(args.split)
    train, val, _ = chronological_split(seq, spec)
    kspec = KernelSpec.parse(args.kernel, args.power_exponent)
    model = template_model(args.model_type, train, kspec, args.mixtures, args.layers, args.hidden, args.seed,
                           args.per_dimension, args.full_beta)
    config = TrainConfig(learning_rate=args.lr, batch_size=args.batch_size, max_epochs=args.epochs,
                         patience=args.patience, seed=args.seed)
    log_path = args.log or args.out + ".log.jsonl"
    records = []
    best, report = fit(model, train, val, config, progress=records.append)
    with open(log_path, "w") as fh:
        for r in records:
            fh.write(json.dumps({"epoch": r["epoch"], "train_nll": r["train_nll"], "val_nll": r["val_nll"],
                                 "seconds": round(r["seconds"], 3)}) + "\n")
    best.meta.update(
        mark_labels=list(seq.mark_labels), time_unit=seq.time_unit,
        time_scale=args.time_scale if args.time_scale is not None else 1.0,
        split=[spec.train_fraction, spec.val_fraction, spec.test_fraction],
        windows=_split_windows(seq, spec), best_val_nll=report.best_val_nll, best_epoch=report.best_epoch,
        seed=args.seed, horizon=seq.horizon,
    )
    _write_json(best.to_dict(), args.out)
    log.info("best epoch %d, val NLL %.6f", report.best_epoch, report.best_val_nll)
    return 0


def cmd_evaluate(args):
    model = _load_model(args.model)
    seq = _load_data(args, model.meta)
    start, end = _window(args, model, seq)
    scale = _scale(args, model.meta)
    report = evaluate_report(model, seq, start, end, args.width * scale, residuals=not args.no_residuals)
    report.width, report.window = args.width, (start / scale, end / scale)
    _write_json(report.to_dict(), args.out)
    if args.csv:
        row = report.csv_row()
        new = not os.path.exists(args.csv) or os.path.getsize(args.csv) == 0
        with open(args.csv, "a", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(row))
            if new:
                writer.writeheader()
            writer.writerow(row)
    return 0


def cmd_predict(args):
    model = _load_model(args.model)
    seq = _load_data(args, model.meta)
    start, end = _window(args, model, seq)
    scale = _scale(args, model.meta)
    edges = grid_boundaries(start, end, args.width * scale)
    pred = model.predict_counts(seq, edges)
    obs = count_events(seq.all_times, seq.all_marks, edges, seq.num_marks)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    labels = seq.mark_labels
    writer.writerow(["start", "end"] + [f"predicted_{l}" for l in labels] + [f"observed_{l}" for l in labels])
    for s in range(len(edges) - 1):
        writer.writerow([repr(float(edges[s] / scale)), repr(float(edges[s + 1] / scale))]
                        + [repr(float(v)) for v in pred[s]] + [int(v) for v in obs[s]])
    with open(args.out, "w") as fh:
        fh.write(buf.getvalue())
    return 0


def cmd_simulate(args):
    model = _load_model(args.model)
    if args.inject:
        if not isinstance(model, _HawkesFamily):
            raise CliError("--inject needs a Hawkes or DHP checkpoint")
        model = inject_dynamics(model, json.loads(args.inject))
    # --horizon, --refresh and the written times are in file units
    scale = model.meta.get("time_scale", 1.0)
    config = SimConfig(horizon=args.horizon * scale, seed=args.seed, max_events=args.max_events,
                       refresh_interval=None if args.refresh is None else args.refresh * scale)
    labels = tuple(model.meta.get("mark_labels", ()))
    seq, stats = thinning_simulate(model, config, mark_labels=labels, return_stats=True)
    if scale != 1.0:
        seq = seq.scaled(1.0 / scale)
    write_simulation(seq, args.out, model, config, stats)
    return 0


def cmd_sweep(args):
    seq = _load_data(args)
    train, val, _ = chronological_split(seq, SplitSpec.parse(args.split))
    spec = SweepSpec(layers=args.layers, mixtures=args.mixtures, kernels=args.kernels, hidden=args.hidden)
    config = TrainConfig(learning_rate=args.lr, batch_size=args.batch_size, max_epochs=args.epochs,
                         patience=args.patience, seed=args.seed)
    rows, best = sweep(spec, train, val, config)
    write_sweep_csv(rows, args.out)
    if best is not None:
        log.info("best cell: %s", rows[best])
    return 0


def cmd_export_dynamics(args):
    model = _load_model(args.model)
    if not isinstance(model, DhpModel):
        raise CliError("export-dynamics needs a DHP checkpoint")
    # the grid is in file units; f and F stay on the model's time scale
    scale = model.meta.get("time_scale", 1.0)
    if args.end is not None:
        end = args.end * scale
    else:
        end = model.meta.get("windows", {}).get("train", [0.0, None])[1] or getattr(model.dynamics, "t_scale", 1.0)
    labels = model.meta.get("mark_labels") or [str(m) for m in range(model.num_marks)]
    for m, label in enumerate(labels):
        rows = export_grid(model.dynamics, m, args.start * scale, end, args.points)
        with open(f"{args.out}_{label}.csv", "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "f", "F"])
            for t, f, F in rows:
                writer.writerow([repr(float(t / scale)), repr(float(f)), repr(float(F))])
    return 0


COMMANDS = {
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "predict": cmd_predict,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "export-dynamics": cmd_export_dynamics,
}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args = parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (CliError, ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"dynhawkes {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
