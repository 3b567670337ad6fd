"""Command-line harness.

Subcommands: train, eval, sweep, verify, demo-hopfield, gen-data. Exit
codes: 0 success, 1 invariant or training failure, 2 usage error. Flags
named after config keys override values from --config files.
"""

import argparse
import os
import sys
from dataclasses import fields, replace

import numpy as np

from .config import CONFIG_KEYS, RunConfig, load_config
from .fusion import PatternPair, hopfield_energy, hopfield_update
from .metrics import build_data, run_experiment
from .numeric import ContractError
from .rng import RngState
from .sweep import SWEEP_AXES, sweep, write_loss_trace_csv, write_metrics_csv
from .tensor_io import dump_tensor
from .train import TrainingDiverged
from .verify import run_verification

_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _float_list(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list: {text!r}") from None


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad integer list: {text!r}") from None


def _add_config_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="flat key = value config file")
    for key in CONFIG_KEYS:
        kind = _FIELD_TYPES[key]
        if kind is int or kind == "int":
            parser.add_argument(f"--{key}", type=int, default=None)
        elif kind is float or kind == "float":
            parser.add_argument(f"--{key}", type=float, default=None)
        elif key == "scheme":
            parser.add_argument("--scheme", choices=("add", "gated"), default=None)
        else:
            parser.add_argument(f"--{key}", default=None)


def _config_from(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = load_config(args.config, cfg)
    overrides = {
        key: getattr(args, key)
        for key in CONFIG_KEYS
        if getattr(args, key, None) is not None
    }
    return replace(cfg, **overrides) if overrides else cfg


def _print_row(row):
    print(f"run_id: {row.run_id}")
    for i, v in enumerate(row.iou):
        print(f"iou_class_{i}: {v:.6f}")
    print(f"miou: {row.miou:.6f}")
    print(f"depth_mae: {row.depth_mae:.6f}")
    print(f"mean_energy_plain: {row.mean_energy_plain:.6f}")
    print(f"mean_energy_fused: {row.mean_energy_fused:.6f}")


def cmd_train(args) -> int:
    cfg = _config_from(args)
    row, trace = run_experiment(cfg, run_id="train")
    os.makedirs(cfg.out_dir, exist_ok=True)
    metrics_path = os.path.join(cfg.out_dir, "metrics.csv")
    trace_path = os.path.join(cfg.out_dir, "loss_trace.csv")
    write_metrics_csv([row], cfg.k, metrics_path)
    write_loss_trace_csv(trace, trace_path)
    _print_row(row)
    print(f"wrote {metrics_path} and {trace_path}")
    return 0


def cmd_eval(args) -> int:
    # no checkpoints exist by design: rebuild the run deterministically
    cfg = _config_from(args)
    row, _ = run_experiment(cfg, run_id="eval")
    _print_row(row)
    return 0


def cmd_sweep(args) -> int:
    cfg = _config_from(args)
    rows = sweep(cfg, args.axis, args.values, args.seeds)
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, "metrics.csv")
    write_metrics_csv(rows, cfg.k, path)
    print(f"wrote {path} ({len(rows)} runs)")
    return 0


def cmd_verify(_args) -> int:
    report = run_verification()
    print(report.text())
    return 0 if report.ok else 1


def cmd_demo_hopfield(args) -> int:
    cfg = _config_from(args)
    rng = RngState(cfg.seed, (99,))
    d, m = 8, 5
    nu = rng.normal(d, m, 1.0)
    nu = nu / np.linalg.norm(nu, axis=0, keepdims=True)
    target_col = 0
    xi = nu[:, [target_col]] + rng.normal(d, 1, 0.2)
    print(f"retrieving stored pattern {target_col} from a noisy probe")
    for it in range(10):
        energy = hopfield_energy(xi, nu)
        nxt = hopfield_update(PatternPair(xi, nu), cfg.gamma, 1)
        delta = float(np.linalg.norm(nxt - xi))
        print(f"iter {it:2d}  energy {energy: .6f}  step size {delta:.2e}")
        xi = nxt
    sims = (nu.T @ xi).ravel() / np.linalg.norm(xi)
    print(f"closest stored pattern: {int(np.argmax(sims))}")
    return 0


def cmd_gen_data(args) -> int:
    cfg = _config_from(args)
    source, target = build_data(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    manifest = []
    for name, scenes in (("source", source), ("target", target)):
        for i, scene in enumerate(scenes):
            stem = f"{name}_{i:03d}"
            dump_tensor(scene.features, os.path.join(cfg.out_dir, f"{stem}_features.txt"))
            dump_tensor(scene.depth, os.path.join(cfg.out_dir, f"{stem}_depth.txt"))
            labels = scene.labels.labels.astype(np.float64).reshape(1, -1)
            dump_tensor(labels, os.path.join(cfg.out_dir, f"{stem}_labels.txt"))
            manifest.append(stem)
    with open(os.path.join(cfg.out_dir, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(manifest) + "\n")
    print(f"wrote {2 * cfg.n_scenes} scenes to {cfg.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="energyfuse",
        description="Energy-based feature fusion on synthetic paired-domain scenes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, extra in (
        ("train", cmd_train, "train on the configured scenes and write CSVs"),
        ("eval", cmd_eval, "retrain deterministically and print target metrics"),
        ("sweep", cmd_sweep, "run a hyperparameter sweep and write metrics.csv"),
        ("demo-hopfield", cmd_demo_hopfield, "print energies of a retrieval run"),
        ("gen-data", cmd_gen_data, "write the configured scenes as tensor dumps"),
    ):
        p = sub.add_parser(name, help=extra)
        _add_config_flags(p)
        p.set_defaults(handler=fn)
        if name == "sweep":
            p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
            p.add_argument("--values", required=True, type=_float_list)
            p.add_argument("--seeds", type=_int_list, default=[0])

    p = sub.add_parser("verify", help="run every invariant suite and report")
    p.set_defaults(handler=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ContractError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except TrainingDiverged as err:
        print(f"training diverged: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
