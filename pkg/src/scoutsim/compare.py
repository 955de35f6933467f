"""Multi-trial aggregation: per-(world, method) mean/std summaries,
relative path-length deltas, and failure counts, from archived trial
directories."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

from scoutsim import metrics

SUMMARY_FIELDS = ("bac", "ate_rmse_m", "loops_per_m", "wheel_rot_per_m",
                  "path_length_m", "normalized_entropy")


@dataclass
class Cell:
    """All trials of one (world, method) pair."""
    world: str
    method: str
    trials: list = field(default_factory=list)   # summary dicts

    @property
    def failures(self):
        return sum(1 for s in self.trials if s.get("status") != metrics.STATUS_OK)

    def stat(self, key):
        vals = [derive_metrics(s)[key] for s in self.trials]
        return mean_std(vals)


def derive_metrics(summary):
    """Per-trial derived scalars from a flat summary dict."""
    path = float(summary.get("path_length_m", 0.0))
    denom = path if path > 1e-9 else float("nan")
    return {
        "bac": float(summary.get("bac", float("nan"))),
        "ate_rmse_m": float(summary.get("ate_rmse_m", float("nan"))),
        "loops_per_m": float(summary.get("loop_closures", 0)) / denom,
        "wheel_rot_per_m": float(summary.get("wheel_rotation_rad", 0.0)) / denom,
        "path_length_m": path,
        "normalized_entropy": float(summary.get("normalized_entropy", float("nan"))),
    }


def mean_std(vals):
    vals = [v for v in vals if not math.isnan(v)]
    if not vals:
        return float("nan"), float("nan")
    m = sum(vals) / len(vals)
    var = sum((v - m) ** 2 for v in vals) / len(vals)
    return m, math.sqrt(var)


def collect_runs(runs_dir):
    """Scan a runs directory for trial folders (identified by their
    summary.txt) and group them into cells."""
    cells = {}
    missing = []
    for summary_path in sorted(Path(runs_dir).glob("**/summary.txt")):
        s = metrics.read_summary(summary_path)
        if "world" not in s or "method" not in s:
            missing.append(str(summary_path))
            continue
        key = (str(s["world"]), str(s["method"]))
        cells.setdefault(key, Cell(world=key[0], method=key[1])).trials.append(s)
    return cells, missing


def path_length_deltas(cells, reference="A"):
    """Relative mean-path-length difference of every method vs. the
    reference method, per world: (mean - ref_mean) / ref_mean."""
    out = {}
    by_world = {}
    for (world, method), cell in cells.items():
        by_world.setdefault(world, {})[method] = cell
    for world, row in by_world.items():
        if reference not in row:
            continue
        ref_mean, _ = row[reference].stat("path_length_m")
        if not ref_mean or math.isnan(ref_mean):
            continue
        for method, cell in row.items():
            m, _ = cell.stat("path_length_m")
            out[(world, method)] = (m - ref_mean) / ref_mean
    return out


def write_report(cells, report_path, reference="A"):
    """CSV summary plus an aligned text table next to it."""
    report_path = Path(report_path)
    deltas = path_length_deltas(cells, reference)
    header = ["world", "method", "n_trials", "failures"]
    for f in SUMMARY_FIELDS:
        header += [f + "_mean", f + "_std"]
    header.append("path_delta_vs_" + reference)

    rows = []
    for key in sorted(cells):
        cell = cells[key]
        row = [cell.world, cell.method, len(cell.trials), cell.failures]
        for f in SUMMARY_FIELDS:
            m, s = cell.stat(f)
            row += [f"{m:.6f}", f"{s:.6f}"]
        d = deltas.get(key)
        row.append("" if d is None else f"{d:+.1%}")
        rows.append(row)

    with report_path.open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)

    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(str(v).ljust(w) for v, w in zip(r, widths))
             for r in [header] + rows]
    report_path.with_suffix(".txt").write_text("\n".join(lines) + "\n")
    return rows
