"""Deterministic SVG plots of convergence tables and variation profiles."""
from __future__ import annotations

import csv
import io
import os
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

KINDS = ("convergence", "profile")
X_COLUMNS = ("h", "delta", "scale")
Y_COLUMNS = ("relative", "defect", "delta_I", "residual", "value")
GROUP_COLUMNS = ("stage", "series", "family")
FIGSIZE = (6.0, 4.0)


def read_table(path_or_text):
    """Rows of a CSV file (or CSV text) as ``(header, list of dicts)``."""
    if isinstance(path_or_text, os.PathLike) or (isinstance(path_or_text, str)
                                                  and "\n" not in path_or_text):
        text = Path(path_or_text).read_text()
    else:
        text = str(path_or_text)
    reader = csv.DictReader(io.StringIO(text))
    rows = list(reader)
    return list(reader.fieldnames or []), rows


def _pick(header, choices, kind, what):
    for c in choices:
        if c in header:
            return c
    raise ConfigurationError(f"{kind} table needs a {what} column (one of {choices}); got {header}")


def _groups(header, rows):
    g = next((c for c in GROUP_COLUMNS if c in header), None)
    if g is None:
        return {"": rows}
    out = {}
    for r in rows:
        out.setdefault(r[g], []).append(r)
    return out


def _floats(rows, col):
    try:
        return np.array([float(r[col]) for r in rows])
    except ValueError as exc:
        raise ConfigurationError(f"column {col!r} is not numeric: {exc}") from None


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "kerrgap"
    matplotlib.rcParams["svg.fonttype"] = "path"
    return plt, plt.figure(figsize=FIGSIZE)


def render(header, rows, kind):
    """SVG text for a parsed table."""
    if kind not in KINDS:
        raise ConfigurationError(f"unknown plot kind {kind!r}; expected one of {KINDS}")
    plt, fig = _figure()
    ax = fig.add_subplot(111)
    try:
        if kind == "convergence":
            xc = _pick(header, X_COLUMNS, kind, "x")
            yc = _pick(header, Y_COLUMNS, kind, "y")
            ax.set_xscale("log")
            ax.set_yscale("log")
            ax.set_xlabel(xc)
            ax.set_ylabel(f"|{yc}|")
            for name, grp in _groups(header, rows).items():
                x, y = _floats(grp, xc), np.abs(_floats(grp, yc))
                keep = (x > 0) & (y > 0)
                if np.any(keep):
                    ax.plot(x[keep], y[keep], marker="o", label=name or yc)
        else:
            for c in ("t", "E"):
                if c not in header:
                    raise ConfigurationError(f"profile table needs columns t and E; got {header}")
            ax.set_xlabel("t")
            ax.set_ylabel("E(t)")
            ax2 = None
            for name, grp in _groups(header, rows).items():
                t = _floats(grp, "t")
                ax.plot(t, _floats(grp, "E"), marker=".", label=name or "E")
                if "second_diff" in header:
                    ax2 = ax2 or ax.twinx()
                    ax2.plot(t, _floats(grp, "second_diff"), linestyle="--", color="gray")
                    ax2.set_ylabel("second difference")
        if ax.get_legend_handles_labels()[0]:
            ax.legend(loc="best", fontsize="small")
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None, "Creator": None})
        return buf.getvalue()
    finally:
        plt.close(fig)


def plot(table, kind, out=None):
    """Render a CSV table (path or text) to SVG; writes ``out`` atomically when given."""
    header, rows = read_table(table)
    svg = render(header, rows, kind)
    if out is None:
        return svg
    write_atomic(out, svg)
    return out


def write_atomic(path, text):
    """Write ``text`` via a temp file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
    return path
