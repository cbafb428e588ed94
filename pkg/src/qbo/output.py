"""Run manifests, CSV emission and static plots.

Every output file starts with `#`-prefixed manifest lines sufficient to
reproduce the run: command, tool version, timestamp, seeds and the fully
resolved configuration.  CSV is the authoritative artifact; floats are
written with 17 significant digits so parsing them back is exact.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .experiments import Dataset

__all__ = ["RunManifest", "emit_csv", "emit_plot", "format_float"]


@dataclass(frozen=True)
class RunManifest:
    command: str
    config: dict = field(default_factory=dict)
    seeds: tuple = ()
    version: str = __version__
    timestamp: str = ""

    def __post_init__(self):
        if not self.timestamp:
            stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
            object.__setattr__(self, "timestamp", stamp)
        object.__setattr__(self, "config", dict(self.config))
        object.__setattr__(self, "seeds", tuple(self.seeds))

    def lines(self):
        out = [
            f"# qbo-command: {self.command}",
            f"# qbo-version: {self.version}",
            f"# timestamp: {self.timestamp}",
        ]
        if self.seeds:
            out.append("# seeds: " + ",".join(str(s) for s in self.seeds))
        for key in sorted(self.config):
            out.append(f"# config {key}={_fmt_value(self.config[key])}")
        return out


def format_float(v: float) -> str:
    return format(float(v), ".17g")


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt_value(x) for x in v)
    return str(v)


def emit_csv(dataset: Dataset, path, manifest: RunManifest | None = None) -> None:
    """Write the dataset as UTF-8 CSV under its manifest/meta header."""
    lines = []
    if manifest is not None:
        lines.extend(manifest.lines())
    for key in sorted(dataset.meta):
        lines.append(f"# {key}={_fmt_value(dataset.meta[key])}")
    lines.append(",".join(dataset.columns))
    for row in dataset.rows:
        lines.append(",".join(format_float(v) for v in row))
    text = "\n".join(lines) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_csv(path) -> Dataset:
    """Inverse of emit_csv (manifest/meta lines land in Dataset.meta)."""
    meta = {}
    columns = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip().removeprefix("config ").strip()] = value
                continue
            if columns is None:
                columns = tuple(line.split(","))
            else:
                rows.append([float(v) for v in line.split(",")])
    if columns is None:
        raise ValueError(f"no header row found in {path}")
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(columns)))
    return Dataset(columns=columns, rows=data, meta=meta)


def emit_plot(dataset: Dataset, path, axes: str = "loglog") -> None:
    """Static vector plot of the dataset (first column is the abscissa).

    Log-log for the sweep figures (quantum solid, classical dashed), linear
    for kurtosis series with the Gaussian reference line at 3.  Degenerate
    single-point datasets fall back to markers.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if axes not in ("loglog", "linear"):
        raise ValueError(f"axes must be 'loglog' or 'linear', got {axes!r}")
    if len(dataset.columns) < 2:
        raise ValueError("plot needs at least two columns")

    x = dataset.rows[:, 0]
    fig, ax = plt.subplots(figsize=(5.0, 3.6))
    styles = {
        "var_quantum": dict(linestyle="-", color="tab:blue"),
        "var_classical": dict(linestyle="--", color="tab:orange"),
        "kappa_harmonic": dict(linestyle="-", color="tab:blue"),
        "kappa_free": dict(linestyle=":", color="tab:orange"),
    }
    markers_only = len(x) < 2
    for j, name in enumerate(dataset.columns[1:], start=1):
        if name.startswith(("ref_", "var_x_")):
            continue
        style = styles.get(name, dict(linestyle="-"))
        if markers_only:
            ax.plot(x, dataset.rows[:, j], marker="o", linestyle="none", label=name)
        else:
            ax.plot(x, dataset.rows[:, j], label=name, **style)
    if axes == "loglog" and not markers_only:
        ax.set_xscale("log")
        ax.set_yscale("log")
    if dataset.meta.get("kind") == "kurtosis":
        ax.axhline(3.0, color="gray", linewidth=0.8, label="gaussian kappa=3")
    ax.set_xlabel(dataset.columns[0])
    ax.legend(fontsize=8)
    ax.set_title(dataset.meta.get("panel", dataset.meta.get("kind", "")))
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
