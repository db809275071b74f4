"""Weighted point clouds, thief shares and the fairness test map.

Point clouds stand in for absolutely continuous measures. Where a continuous
measure gives zero mass to cell boundaries, a cloud can put an atom right on
one; the tie rules of :mod:`fairpart.geometry` decide where such atoms go.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Sequence

import numpy as np

from .geometry import Tree, assign_points


class MeasureError(ValueError):
    """Malformed or inconsistent measure input."""


@dataclass(frozen=True, eq=False)
class Measure:
    """A probability measure supported on finitely many points."""

    name: str
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        w = np.array(self.weights, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise MeasureError(f"measure {self.name!r}: points must be a nonempty N x d array")
        if w.shape != (pts.shape[0],):
            raise MeasureError(
                f"measure {self.name!r}: {pts.shape[0]} points but {w.size} weights"
            )
        if not np.all(np.isfinite(pts)):
            raise MeasureError(f"measure {self.name!r}: non-finite coordinates")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            bad = int(np.argmax(~np.isfinite(w) | (w <= 0)))
            raise MeasureError(
                f"measure {self.name!r}: weight {bad} is {w[bad]!r}; weights must be positive"
            )
        w = w / w.sum()
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, name: str, points) -> "Measure":
        pts = np.asarray(points, dtype=float)
        return cls(name, pts, np.ones(pts.shape[0]))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True, eq=False)
class MeasureSet:
    dim: int
    measures: tuple[Measure, ...]
    # Concatenated view used by the evaluators: all points, owning measure, weight.
    packed_points: np.ndarray = field(init=False, repr=False)
    packed_owner: np.ndarray = field(init=False, repr=False)
    packed_weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ms = tuple(self.measures)
        if not ms:
            raise MeasureError("a measure set needs at least one measure")
        for k, m in enumerate(ms):
            if m.dim != self.dim:
                raise MeasureError(
                    f"measure {k} ({m.name!r}) has dimension {m.dim}, expected {self.dim}"
                )
        object.__setattr__(self, "measures", ms)
        pts = np.concatenate([m.points for m in ms])
        owner = np.concatenate([np.full(len(m), k, dtype=np.int64) for k, m in enumerate(ms)])
        w = np.concatenate([m.weights for m in ms])
        for arr in (pts, owner, w):
            arr.setflags(write=False)
        object.__setattr__(self, "packed_points", pts)
        object.__setattr__(self, "packed_owner", owner)
        object.__setattr__(self, "packed_weights", w)

    @classmethod
    def of(cls, measures: Sequence[Measure]) -> "MeasureSet":
        if not measures:
            raise MeasureError("a measure set needs at least one measure")
        return cls(measures[0].dim, tuple(measures))

    def __len__(self) -> int:
        return len(self.measures)

    def __iter__(self):
        return iter(self.measures)

    def __getitem__(self, k: int) -> Measure:
        return self.measures[k]

    def with_measures(self, extra: Sequence[Measure]) -> "MeasureSet":
        return MeasureSet(self.dim, self.measures + tuple(extra))


# -- file I/O -------------------------------------------------------------------


def measures_from_dict(obj) -> MeasureSet:
    if not isinstance(obj, dict):
        raise MeasureError("measure file: top level must be an object")
    if "dim" not in obj or "measures" not in obj:
        raise MeasureError("measure file: fields 'dim' and 'measures' are required")
    dim = obj["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise MeasureError(f"measure file: 'dim' must be a positive integer, got {dim!r}")
    raw = obj["measures"]
    if not isinstance(raw, list) or not raw:
        raise MeasureError("measure file: 'measures' must be a nonempty list")
    out = []
    for k, entry in enumerate(raw):
        where = f"measures[{k}]"
        if not isinstance(entry, dict):
            raise MeasureError(f"{where}: expected an object")
        name = entry.get("name", f"mu{k + 1}")
        pts = entry.get("points")
        if not isinstance(pts, list) or not pts:
            raise MeasureError(f"{where}.points: expected a nonempty list of points")
        for j, p in enumerate(pts):
            if not isinstance(p, list) or len(p) != dim:
                got = len(p) if isinstance(p, list) else type(p).__name__
                raise MeasureError(f"{where}.points[{j}]: dimension {got}, file declares dim {dim}")
            if not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in p):
                raise MeasureError(f"{where}.points[{j}]: coordinates must be numbers")
        weights = entry.get("weights", [1.0] * len(pts))
        if not isinstance(weights, list) or len(weights) != len(pts):
            raise MeasureError(f"{where}.weights: expected {len(pts)} numbers")
        for j, w in enumerate(weights):
            if isinstance(w, bool) or not isinstance(w, (int, float)) or not w > 0:
                raise MeasureError(f"{where}.weights[{j}]: weights must be positive, got {w!r}")
        try:
            out.append(Measure(str(name), np.asarray(pts, dtype=float), np.asarray(weights, dtype=float)))
        except MeasureError as exc:
            raise MeasureError(f"{where}: {exc}") from None
    return MeasureSet(dim, tuple(out))


def load_measures(source: IO | str | bytes) -> MeasureSet:
    """Read a measure file (JSON) from a stream, text or bytes."""
    if hasattr(source, "read"):
        source = source.read()
    try:
        obj = json.loads(source)
    except json.JSONDecodeError as exc:
        raise MeasureError(f"measure file: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return measures_from_dict(obj)


def measures_to_dict(ms: MeasureSet) -> dict:
    return {
        "dim": ms.dim,
        "measures": [
            {"name": m.name, "points": m.points.tolist(), "weights": m.weights.tolist()}
            for m in ms
        ],
    }


# -- shares and the test map --------------------------------------------------------------


def _check_dims(tree: Tree, ms: MeasureSet) -> None:
    if tree.dim != ms.dim:
        raise MeasureError(f"tree lives in R^{tree.dim} but the measures live in R^{ms.dim}")


def thief_shares(tree: Tree, ms: MeasureSet) -> np.ndarray:
    """M x r matrix; entry (i, s) is the mass of measure i handed to thief s+1."""
    _check_dims(tree, ms)
    _, cell = assign_points(tree, ms.packed_points)
    r = tree.r
    flat = ms.packed_owner * r + cell
    shares = np.bincount(flat, weights=ms.packed_weights, minlength=len(ms) * r)
    return shares.reshape(len(ms), r)


def phi_from_shares(shares: np.ndarray) -> np.ndarray:
    shares = np.asarray(shares, dtype=float)
    r = shares.shape[1]
    return shares - shares.sum(axis=1, keepdims=True) / r


def phi(tree: Tree, ms: MeasureSet) -> np.ndarray:
    """The test map: M blocks of r deviations from the fair share.

    Each block lies in the zero-sum subspace; the vector vanishes exactly
    when the labeled partition is a fair distribution.
    """
    return phi_from_shares(thief_shares(tree, ms))


def discrepancy(tree: Tree, ms: MeasureSet) -> float:
    """Largest absolute coordinate of :func:`phi`."""
    return float(np.max(np.abs(phi(tree, ms))))


def share_report(tree: Tree, ms: MeasureSet) -> dict:
    shares = thief_shares(tree, ms)
    p = phi_from_shares(shares)
    return {
        "shares": shares.tolist(),
        "phi": p.tolist(),
        "discrepancy": float(np.max(np.abs(p))),
    }
