"""Trial metric time series, 2-second bucketing with forward fill, and
CSV serialization."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

COLUMNS = ("t", "explored_area_m2", "coverage", "normalized_entropy", "bac",
           "path_length_m", "wheel_rotation_rad", "loop_closures",
           "ate_rmse_m")

STATUS_OK = "ok"
STATUS_FAILED = "failed"
STATUS_COLLISION = "collision"


@dataclass
class TrialMetrics:
    world: str
    method: str
    seed: int
    rows: list = field(default_factory=list)   # tuples matching COLUMNS
    status: str = STATUS_OK

    def add_sample(self, t, explored_area, coverage, normalized_entropy, bac,
                   path_length, wheel_rotation, loop_closures, ate_rmse):
        if self.rows and t < self.rows[-1][0]:
            raise ValueError("timestamps must be nondecreasing")
        self.rows.append((t, explored_area, coverage, normalized_entropy, bac,
                          path_length, wheel_rotation, loop_closures, ate_rmse))

    def final(self):
        """Last sample as a dict, plus identity and status."""
        out = {"world": self.world, "method": self.method, "seed": self.seed,
               "status": self.status}
        if self.rows:
            out.update(dict(zip(COLUMNS, self.rows[-1])))
        return out

    def series(self, column):
        i = COLUMNS.index(column)
        return [r[i] for r in self.rows]


def bucket_metrics(rows, bin_s=2.0):
    """Last-value-per-bin bucketing with forward fill.

    Output row i covers [i*bin_s, (i+1)*bin_s) and holds the last sample
    falling in that window, or the previous bucket's value when the
    window is empty. Timestamps must be nondecreasing."""
    if not rows:
        return []
    out = []
    last = None
    for row in rows:
        t = row[0]
        if last is not None and t < last[0]:
            raise ValueError("timestamps must be nondecreasing")
        b = int(math.floor(t / bin_s))
        while len(out) <= b:
            i = len(out)
            out.append((i * bin_s,) + tuple(out[-1][1:] if out else row[1:]))
        out[b] = (b * bin_s,) + tuple(row[1:])
        last = row
    return out


def write_csv(path, rows, header=COLUMNS):
    with Path(path).open("w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def read_csv(path):
    """(header, rows) with numeric conversion."""
    with Path(path).open(newline="") as f:
        r = csv.reader(f)
        header = next(r)
        rows = [tuple(float(v) for v in row) for row in r]
    return header, rows


def write_summary(path, summary: dict):
    lines = [f"{k} = {_fmt(v)}" for k, v in summary.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_summary(path):
    out = {}
    for line in Path(path).read_text().splitlines():
        if "=" not in line:
            continue
        k, _, v = line.partition("=")
        k = k.strip()
        v = v.strip()
        try:
            out[k] = int(v)
        except ValueError:
            try:
                out[k] = float(v)
            except ValueError:
                out[k] = v
    return out


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6f}"
    return v
