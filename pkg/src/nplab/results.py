"""Run histories and their CSV/JSON serializations."""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractError

# Columns written to the per-epoch CSV, in order.  Columns that a method
# never fills are dropped; cells a method fills only at some epochs are empty.
CSV_COLUMNS = (
    "epoch",
    "loss",
    "loss_residual",
    "loss_initial",
    "loss_boundary",
    "loss_data",
    "lr",
    "abs_l1",
    "rel_l1",
    "abs_linf",
    "lambda",
    "y0",
)
PLOT_HEADER = "epoch,metric,value"


def format_float(x):
    """Shortest round-trip representation; empty string for missing values."""
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


@dataclass
class RunResult:
    """Per-epoch history plus a final summary of one training run.

    ``columns`` maps metric names to lists aligned with ``columns["epoch"]``;
    ``None`` marks epochs where a metric was not evaluated.  Wall-clock
    seconds since the start of training are kept in ``wall_seconds``.
    """

    method: str
    problem: str
    seed: int
    columns: dict = field(default_factory=dict)
    wall_seconds: list = field(default_factory=list)
    status: str = "ok"
    message: str = ""
    summary: dict = field(default_factory=dict)
    snapshot: list = field(default_factory=list)
    params: object = field(default=None, repr=False)

    def add_row(self, epoch, wall, **metrics):
        epochs = self.columns.setdefault("epoch", [])
        if epochs and epoch <= epochs[-1]:
            raise ContractError("epochs must be strictly increasing")
        if self.wall_seconds and wall < self.wall_seconds[-1]:
            wall = self.wall_seconds[-1]
        n = len(epochs)
        epochs.append(int(epoch))
        self.wall_seconds.append(float(wall))
        for name, value in metrics.items():
            col = self.columns.get(name)
            if col is None:
                col = self.columns[name] = [None] * n
            col.append(None if value is None else float(value))
        for name, col in self.columns.items():
            if len(col) < n + 1:
                col.append(None)

    def __len__(self):
        return len(self.columns.get("epoch", []))

    def metric(self, name):
        """A metric column as a float array with NaN for missing entries."""
        return np.array([np.nan if v is None else v for v in self.columns[name]], dtype=float)

    def last(self, name):
        """Most recent non-missing value of a metric."""
        for v in reversed(self.columns.get(name, [])):
            if v is not None:
                return v
        return None

    @property
    def metric_names(self):
        return [c for c in CSV_COLUMNS if c in self.columns and c != "epoch"] + sorted(
            c for c in self.columns if c not in CSV_COLUMNS)

    def to_csv(self):
        names = ["epoch"] + self.metric_names
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(names)
        for i, epoch in enumerate(self.columns.get("epoch", [])):
            writer.writerow([str(epoch)] + [format_float(self.columns[n][i]) for n in names[1:]])
        return buf.getvalue()

    def summary_dict(self):
        out = {
            "method": self.method,
            "problem": self.problem,
            "seed": self.seed,
            "status": self.status,
            "message": self.message,
            "epochs_recorded": len(self),
            "final_epoch": self.columns["epoch"][-1] if len(self) else None,
            "wall_seconds": self.wall_seconds[-1] if self.wall_seconds else 0.0,
            "final": {n: self.last(n) for n in self.metric_names},
        }
        losses = [v for v in self.columns.get("loss", []) if v is not None]
        if losses:
            out["best_loss"] = min(losses)
        out.update(self.summary)
        return out

    def to_json(self):
        return json.dumps(self.summary_dict(), indent=2, sort_keys=True, default=_jsonable)


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def emit_plot_data(result):
    """Long-format CSV with one ``epoch,metric,value`` row per logged value."""
    if not len(result):
        raise ContractError("empty result")
    lines = [PLOT_HEADER]
    names = result.metric_names
    for i, epoch in enumerate(result.columns["epoch"]):
        for name in names:
            value = result.columns[name][i]
            if value is not None:
                lines.append(f"{epoch},{name},{format_float(value)}")
    return "\n".join(lines) + "\n"


def read_csv(text):
    """Parse a per-epoch CSV back into ``{column: list of float or None}``."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    out = {name: [] for name in header}
    for row in body:
        for name, cell in zip(header, row):
            out[name].append(None if cell == "" else (int(cell) if name == "epoch" else float(cell)))
    return out


def read_plot_data(text):
    lines = text.splitlines()
    if lines[0] != PLOT_HEADER:
        raise ContractError(f"unexpected header {lines[0]!r}")
    out = []
    for line in lines[1:]:
        epoch, name, value = line.split(",")
        out.append((int(epoch), name, float(value)))
    return out
