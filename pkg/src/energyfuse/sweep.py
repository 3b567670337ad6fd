"""Hyperparameter sweeps and deterministic CSV output.

Every run is independent (fresh data, fresh model), rows are ordered by
(axis value, seed) no matter how runs are scheduled, and floats are
printed at 17 significant digits, so rerunning a sweep reproduces
metrics.csv byte for byte. A run that raises is kept as a row of nan
metrics and the sweep moves on.
"""

import sys
from dataclasses import replace

from .config import CONFIG_KEYS, RunConfig, config_echo
from .metrics import MetricsRow, run_experiment
from .numeric import ContractError
from .tensor_io import format_value

SWEEP_AXES = {
    "gamma": "gamma",
    "beta": "beta",
    "steps": "steps",
    "threshold": "pseudo_threshold",
}


def metrics_header(k: int) -> list:
    cols = ["run_id"]
    cols.extend(CONFIG_KEYS)
    cols.extend(f"iou_class_{i}" for i in range(k))
    cols.extend(["miou", "depth_mae", "mean_energy_plain", "mean_energy_fused"])
    return cols


def _cell(value) -> str:
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_value(value)
    return str(value)


def metrics_csv_rows(rows: list, k: int) -> list:
    """Header plus one comma-joined line per MetricsRow."""
    out = [",".join(metrics_header(k))]
    for row in rows:
        cells = [row.run_id]
        cells.extend(_cell(row.config[key]) for key in CONFIG_KEYS)
        iou = list(row.iou) + [float("nan")] * (k - len(row.iou))
        cells.extend(format_value(v) for v in iou[:k])
        cells.extend(
            format_value(v)
            for v in (
                row.miou,
                row.depth_mae,
                row.mean_energy_plain,
                row.mean_energy_fused,
            )
        )
        out.append(",".join(cells))
    return out


def write_metrics_csv(rows: list, k: int, path: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(metrics_csv_rows(rows, k)) + "\n")


def write_loss_trace_csv(trace: list, path: str):
    header = "step,phase,seg_total,dep_total,supervised,rfa,overall"
    lines = [header]
    for entry in trace:
        b = entry.bundle
        lines.append(
            ",".join(
                [str(entry.step), str(entry.phase)]
                + [
                    format_value(v)
                    for v in (b.seg_total, b.dep_total, b.supervised, b.rfa, b.overall)
                ]
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _failure_row(cfg: RunConfig, run_id: str, err: Exception) -> MetricsRow:
    print(f"sweep: run {run_id} failed: {err}", file=sys.stderr)
    nan = float("nan")
    row = MetricsRow(
        iou=[nan] * cfg.k,
        miou=nan,
        depth_mae=nan,
        mean_energy_plain=nan,
        mean_energy_fused=nan,
        run_id=run_id,
    )
    row.config = config_echo(cfg)
    return row


def sweep(base: RunConfig, axis: str, values: list, seeds: list) -> list:
    """One full run per (value, seed), rows ordered by (value, seed)."""
    if axis not in SWEEP_AXES:
        raise ContractError(f"unknown sweep axis {axis!r}")
    if not values:
        raise ContractError("sweep needs at least one value")
    if not seeds:
        raise ContractError("sweep needs at least one seed")
    key = SWEEP_AXES[axis]
    rows = []
    for value in sorted(values):
        if key == "steps":
            value = int(value)
        for seed in sorted(seeds):
            run_id = f"{axis}={format(value, 'g')}_seed={seed}"
            cfg = replace(base, **{key: value, "seed": int(seed)})
            try:
                row, _ = run_experiment(cfg, run_id)
            except Exception as err:  # record the failure, keep sweeping
                row = _failure_row(cfg, run_id, err)
            rows.append(row)
    return rows
