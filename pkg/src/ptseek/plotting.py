"""SVG figures for recorded trajectories.

Figures are drawn on bare :class:`matplotlib.figure.Figure` objects (no pyplot
state) and saved as SVG.  A fixed hash salt and a
``None`` date make the SVG byte-identical for identical input.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib
from matplotlib.figure import Figure

from .sim import Trajectory, TrajectoryFormatError, read_csv

_RC = {
    "svg.hashsalt": "ptseek",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.0,
}
_META = {"Date": None, "Creator": "ptseek"}


@dataclass(frozen=True)
class PlotMeta:
    """What the figures annotate: source marker, peak line and horizon marker."""
    source: tuple[float, float] | None = None
    peak: float | None = None
    t_horizon: float | None = None


def read_report_meta(csv_path) -> PlotMeta:
    """Pick annotations out of the ``<stem>.report.txt`` written next to a run's CSV."""
    path = Path(csv_path)
    report = path.with_name(path.stem + ".report.txt")
    if not report.is_file():
        return PlotMeta()
    vals = {}
    for line in report.read_text().splitlines():
        key, sep, value = line.partition(" = ")
        if sep:
            vals[key.strip()] = value.strip()

    def num(key):
        try:
            return float(vals[key])
        except (KeyError, ValueError):
            return None

    source = None
    if "source" in vals:
        try:
            a, b = (float(v) for v in vals["source"].split(","))
            source = (a, b)
        except ValueError:
            source = None
    horizon = None
    if num("t0") is not None and num("T") is not None:
        horizon = num("t0") + num("T")
    return PlotMeta(source, num("peak"), horizon)


def _save(fig: Figure, path: Path) -> Path:
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata=_META)
    return path


def _new_figure(size=(5.0, 3.6)) -> Figure:
    with matplotlib.rc_context(_RC):
        return Figure(figsize=size, layout="constrained")


def _position_figure(trajs, labels, meta: PlotMeta) -> Figure:
    fig = _new_figure((4.6, 4.2))
    with matplotlib.rc_context(_RC):
        ax = fig.add_subplot()
        for tr, label in zip(trajs, labels):
            x = tr.positions
            (line,) = ax.plot(x[:, 0], x[:, 1], label=label)
            ax.plot(x[0, 0], x[0, 1], "o", color=line.get_color(), ms=4)
        if meta.source is not None:
            ax.plot(*meta.source, "k*", ms=10, label="source")
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
        ax.set_aspect("equal", adjustable="datalim")
        ax.legend(loc="best", fontsize=7)
    return fig


def _value_figure(trajs, labels, meta: PlotMeta) -> Figure:
    fig = _new_figure()
    with matplotlib.rc_context(_RC):
        ax = fig.add_subplot()
        for tr, label in zip(trajs, labels):
            ax.plot(tr.times, tr.field_values, label=label)
        if meta.peak is not None:
            ax.axhline(meta.peak, color="k", ls="--", lw=0.8, label="peak")
        if meta.t_horizon is not None:
            ax.axvline(meta.t_horizon, color="0.4", ls=":", lw=0.8, label="t0 + T")
        ax.set_xlabel("t")
        ax.set_ylabel("y = F(x)")
        ax.legend(loc="best", fontsize=7)
    return fig


def _input_figure(trajs, labels, meta: PlotMeta) -> Figure:
    saturated = any("u2dot_sat" in tr.extras for tr in trajs)
    rows = 3 if saturated else 2
    fig = _new_figure((5.0, 1.7 * rows + 0.6))
    with matplotlib.rc_context(_RC):
        axes = fig.subplots(rows, 1, sharex=True)
        for tr, label in zip(trajs, labels):
            axes[0].plot(tr.times, tr.column("u1"), label=label)
            axes[1].plot(tr.times, tr.column("u2"), label=label)
            if saturated and "u2dot_sat" in tr.extras:
                axes[2].plot(tr.times, tr.extras["u2dot_sat"], label=label)
        axes[0].set_ylabel("u1")
        axes[1].set_ylabel("u2")
        if saturated:
            axes[2].set_ylabel("u2dot_sat")
        for ax in axes:
            if meta.t_horizon is not None:
                ax.axvline(meta.t_horizon, color="0.4", ls=":", lw=0.8)
        axes[-1].set_xlabel("t")
        axes[0].legend(loc="best", fontsize=7)
    return fig


def render(trajs: list[Trajectory], labels: list[str], name: str, out_dir,
           meta: PlotMeta = PlotMeta()) -> list[Path]:
    """Write ``<name>_xy.svg``, ``<name>_y.svg`` and, for seekers, ``<name>_u.svg``."""
    if not trajs:
        raise ValueError("nothing to plot")
    kinds = {tr.kind for tr in trajs}
    if "scalar" in kinds:
        raise TrajectoryFormatError("scalar trajectories have no planar path to plot")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [
        _save(_position_figure(trajs, labels, meta), out / f"{name}_xy.svg"),
        _save(_value_figure(trajs, labels, meta), out / f"{name}_y.svg"),
    ]
    with_inputs = [(tr, lb) for tr, lb in zip(trajs, labels) if tr.inputs is not None]
    if with_inputs:
        written.append(_save(_input_figure([t for t, _ in with_inputs], [lb for _, lb in with_inputs],
                                           meta), out / f"{name}_u.svg"))
    return written


def plot_csv_files(paths, out_dir=None, overlay: bool = False, name: str | None = None,
                   meta: PlotMeta | None = None) -> list[Path]:
    """Render figures for trajectory CSVs, one set per file or a single overlaid set."""
    paths = [Path(p) for p in paths]
    if not paths:
        raise ValueError("no CSV files given")
    trajs = [read_csv(p) for p in paths]
    metas = [meta or read_report_meta(p) for p in paths]
    written = []
    if overlay:
        merged = metas[0]
        out = Path(out_dir) if out_dir else paths[0].parent
        stem = name or "_".join(p.stem for p in paths)
        written += render(trajs, [p.stem for p in paths], stem, out, merged)
    else:
        for p, tr, m in zip(paths, trajs, metas):
            out = Path(out_dir) if out_dir else p.parent
            written += render([tr], [p.stem], name or p.stem, out, m)
    return written
