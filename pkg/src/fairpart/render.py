"""Pictures of planar partitions: a hand-written SVG and matplotlib figures.

The SVG writer formats every number with a fixed precision, so equal inputs
give byte-identical documents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .geometry import CellRef, Tree, UnsupportedDimensionError, cell_polytope, cells, polygon_area
from .measures import MeasureSet

THIEF_COLORS = ("#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#b07aa1", "#76b7b2", "#edc948", "#9c755f")
MEASURE_COLORS = ("#1b1b1b", "#7f3b08", "#2d004b", "#00441b", "#67001f", "#053061", "#40004b", "#3f3f3f")


@dataclass(frozen=True)
class RenderSpec:
    bbox: tuple[float, float, float, float] = (-1.0, -1.0, 1.0, 1.0)
    width: int = 480
    height: int = 480
    palette: Sequence[str] = THIEF_COLORS
    point_radius: float = 2.0
    stroke_width: float = 1.0

    def __post_init__(self):
        xmin, ymin, xmax, ymax = self.bbox
        if not (xmin < xmax and ymin < ymax):
            raise ValueError(f"empty bounding box {self.bbox}")
        if self.width < 64 or self.height < 64:
            raise ValueError("width and height must be at least 64 pixels")


def bbox_for(ms: MeasureSet, margin: float = 0.1) -> tuple[float, float, float, float]:
    """Bounding box of all points, padded by ``margin`` times its size."""
    pts = ms.packed_points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    lo, hi = lo - margin * span, hi + margin * span
    return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])


def cell_polygons(tree: Tree, bbox) -> list[tuple[CellRef, list[tuple[float, float]]]]:
    """``(cell, polygon)`` for every nonempty clipped cell, in cell order."""
    out = []
    for c in cells(tree):
        poly = cell_polytope(tree, c, bbox)
        if poly and polygon_area(poly) > 0.0:
            out.append((c, poly))
    return out


def _fmt(x: float) -> str:
    s = f"{x:.3f}"
    return "0.000" if s == "-0.000" else s


def render_svg(tree: Tree, ms: Optional[MeasureSet], spec: RenderSpec = RenderSpec()) -> str:
    if tree.dim != 2:
        raise UnsupportedDimensionError(f"rendering needs d = 2, got d = {tree.dim}")
    if ms is not None and ms.dim != 2:
        raise UnsupportedDimensionError(f"rendering needs planar measures, got d = {ms.dim}")
    xmin, ymin, xmax, ymax = spec.bbox
    sx = spec.width / (xmax - xmin)
    sy = spec.height / (ymax - ymin)

    def px(x, y):
        return _fmt((x - xmin) * sx), _fmt((ymax - y) * sy)

    lines = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{spec.width}" '
        f'height="{spec.height}" viewBox="0 0 {spec.width} {spec.height}">',
        '<g id="cells">',
    ]
    for cell, poly in cell_polygons(tree, spec.bbox):
        color = spec.palette[(cell.thief - 1) % len(spec.palette)]
        pts = " ".join(",".join(px(x, y)) for x, y in poly)
        lines.append(
            f'<polygon class="thief-{cell.thief}" data-leaf="{cell.leaf_index}" points="{pts}" '
            f'fill="{color}" fill-opacity="0.45" '
            f'stroke="#000000" stroke-width="{_fmt(spec.stroke_width)}"/>'
        )
    lines.append("</g>")
    if ms is not None:
        lines.append('<g id="measures">')
        for k, m in enumerate(ms):
            color = MEASURE_COLORS[k % len(MEASURE_COLORS)]
            lines.append(f'<g class="measure" data-name="{escape(m.name, {chr(34): "&quot;"})}" fill="{color}">')
            mean_w = 1.0 / len(m)
            for (x, y), w in zip(m.points, m.weights):
                rad = spec.point_radius * math.sqrt(w / mean_w)
                cx, cy = px(x, y)
                lines.append(f'<circle cx="{cx}" cy="{cy}" r="{_fmt(rad)}"/>')
            lines.append("</g>")
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


# -- matplotlib ----------------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_partition(ax, tree: Tree, ms: Optional[MeasureSet], bbox, palette=THIEF_COLORS):
    from matplotlib.patches import Polygon

    for cell, poly in cell_polygons(tree, bbox):
        ax.add_patch(Polygon(poly, closed=True, facecolor=palette[(cell.thief - 1) % len(palette)],
                             alpha=0.45, edgecolor="k", linewidth=0.8))
    if ms is not None:
        for k, m in enumerate(ms):
            ax.scatter(m.points[:, 0], m.points[:, 1], s=4, color=MEASURE_COLORS[k % len(MEASURE_COLORS)],
                       label=m.name, zorder=3)
    ax.set_xlim(bbox[0], bbox[2])
    ax.set_ylim(bbox[1], bbox[3])
    ax.set_aspect("equal")
    return ax


def save_partition_figure(path, tree: Tree, ms: Optional[MeasureSet], bbox=None, title: str = "") -> None:
    if tree.dim != 2:
        raise UnsupportedDimensionError(f"figures need d = 2, got d = {tree.dim}")
    plt = _pyplot()
    if bbox is None:
        bbox = bbox_for(ms) if ms is not None else (-1.0, -1.0, 1.0, 1.0)
    fig, ax = plt.subplots(figsize=(5, 5))
    plot_partition(ax, tree, ms, bbox)
    if title:
        ax.set_title(title, fontsize=10)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_probe_figure(path, report: dict, tree: Optional[Tree] = None, ms: Optional[MeasureSet] = None) -> None:
    """Bar chart of the probe attempts, next to the best partition when planar."""
    plt = _pyplot()
    planar = tree is not None and tree.dim == 2
    fig, axes = plt.subplots(1, 2 if planar else 1, figsize=(10 if planar else 5, 4.5))
    ax = axes[0] if planar else axes
    attempts = report["attempts"]
    labels = [f"T{a['template']}\n{a['method']}" for a in attempts]
    ax.bar(range(len(attempts)), [a["discrepancy"] for a in attempts], color="#4e79a7")
    ax.axhline(report["best_discrepancy"], color="#e15759", linestyle="--", linewidth=1)
    ax.set_xticks(range(len(attempts)), labels, fontsize=6)
    ax.set_ylabel("discrepancy (max |phi|)")
    ax.set_title(f"probe evidence: best {report['best_discrepancy']:.4g}", fontsize=10)
    if planar:
        plot_partition(axes[1], tree, ms, bbox_for(ms) if ms is not None else (-1.0, -1.0, 1.0, 1.0))
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
