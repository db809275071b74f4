"""Iterated labeled convex partitions of R^d.

A partition is a binary tree. Internal nodes hold an oriented hyperplane
``(v, a)`` with ``a`` allowed to be ``+inf``/``-inf``; the left subtree lives
on the closed side ``<x, v> >= a`` and the right subtree on ``<x, v> <= a``.
Leaves are power diagrams: ``r`` affine functionals, where cell ``i`` is the
set on which functional ``i`` attains the maximum. Leaf cell ``i`` always
belongs to thief ``i``, so a tree with ``t`` leaves has ``r * t`` labeled
cells and every thief owns exactly ``t`` of them.

Extended reals are plain floats; ``math.inf`` and ``-math.inf`` are the two
points at infinity.

Ties are broken deterministically because point clouds put mass on
boundaries: a point on a node hyperplane goes left (the plus side) and a
point on a leaf boundary goes to the lowest functional index.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

UNIT_TOL = 1e-12
DISTINCT_TOL = 1e-12


class GeometryError(ValueError):
    """Invalid geometric input (dimension mismatch, bad hyperplane, ...)."""


class UnsupportedDimensionError(GeometryError):
    pass


class Side(enum.Enum):
    PLUS = "plus"
    MINUS = "minus"
    BOUNDARY = "boundary"


def _dot(x: np.ndarray, v: np.ndarray) -> np.ndarray:
    # Fixed left-to-right summation so that scalar and batched evaluation
    # produce bit-identical values.
    x = np.asarray(x, dtype=float)
    total = x[..., 0] * v[0]
    for k in range(1, len(v)):
        total = total + x[..., k] * v[k]
    return total


def _as_point(x, dim: int) -> np.ndarray:
    p = np.asarray(x, dtype=float)
    if p.ndim != 1 or p.shape[0] != dim:
        raise GeometryError(f"point has dimension {p.shape[-1] if p.ndim else 0}, expected {dim}")
    return p


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class OrientedHyperplane:
    """The pair ``(v, a)``; ``v`` is a unit vector, ``a`` an extended real."""

    v: np.ndarray
    a: float

    def __post_init__(self):
        v = _readonly(self.v)
        if v.ndim != 1 or v.size == 0:
            raise GeometryError("hyperplane direction must be a nonempty vector")
        if not np.all(np.isfinite(v)) or abs(float(np.linalg.norm(v)) - 1.0) > UNIT_TOL:
            raise GeometryError(f"hyperplane direction {v.tolist()} is not a unit vector")
        a = float(self.a)
        if math.isnan(a):
            raise GeometryError("hyperplane offset is NaN")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "a", a)

    @property
    def dim(self) -> int:
        return self.v.shape[0]

    def __eq__(self, other):
        if not isinstance(other, OrientedHyperplane):
            return NotImplemented
        return self.a == other.a and np.array_equal(self.v, other.v)

    __hash__ = None


def halfspace_side(h: OrientedHyperplane, x) -> Side:
    """Which closed side of ``h`` contains ``x``.

    At ``a = +inf`` the plus side is empty, so every point is on the minus
    side; at ``a = -inf`` every point is on the plus side.
    """
    p = _as_point(x, h.dim)
    if h.a == math.inf:
        return Side.MINUS
    if h.a == -math.inf:
        return Side.PLUS
    s = float(_dot(p, h.v))
    if s > h.a:
        return Side.PLUS
    if s < h.a:
        return Side.MINUS
    return Side.BOUNDARY


def normalize_direction(v: Sequence[float]) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = float(np.linalg.norm(v))
    if n == 0.0 or not math.isfinite(n):
        raise GeometryError("cannot normalize a zero or non-finite direction")
    return v / n


@dataclass(frozen=True)
class AffineFunctional:
    """``x -> <x, gradient> + offset``."""

    gradient: tuple[float, ...]
    offset: float

    def __post_init__(self):
        g = tuple(float(c) for c in self.gradient)
        if not all(math.isfinite(c) for c in g) or not math.isfinite(float(self.offset)):
            raise GeometryError("affine functional entries must be finite")
        object.__setattr__(self, "gradient", g)
        object.__setattr__(self, "offset", float(self.offset))

    def __call__(self, x) -> float:
        p = _as_point(x, len(self.gradient))
        return float(_dot(p, np.asarray(self.gradient))) + self.offset

    def as_row(self) -> np.ndarray:
        return np.array([*self.gradient, self.offset])


@dataclass(frozen=True, eq=False)
class Leaf:
    """A power diagram given by the rows of ``functionals``.

    Row ``i`` is ``[g_1, ..., g_d, offset]`` for functional ``a_i``.
    """

    functionals: np.ndarray

    def __post_init__(self):
        f = _readonly(self.functionals)
        if f.ndim != 2 or f.shape[0] < 1 or f.shape[1] < 2:
            raise GeometryError("leaf functionals must be an r x (d+1) array with r >= 1, d >= 1")
        if not np.all(np.isfinite(f)):
            raise GeometryError("leaf functionals must be finite")
        r = f.shape[0]
        for i in range(r):
            for j in range(i + 1, r):
                if float(np.linalg.norm(f[i] - f[j])) <= DISTINCT_TOL:
                    raise GeometryError(
                        f"leaf functionals {i + 1} and {j + 1} are not pairwise distinct"
                    )
        object.__setattr__(self, "functionals", f)

    @classmethod
    def from_functionals(cls, functionals: Sequence[AffineFunctional]) -> "Leaf":
        return cls(np.array([f.as_row() for f in functionals]))

    @property
    def dim(self) -> int:
        return self.functionals.shape[1] - 1

    @property
    def r(self) -> int:
        return self.functionals.shape[0]

    def affine(self, i: int) -> AffineFunctional:
        row = self.functionals[i]
        return AffineFunctional(tuple(row[:-1]), row[-1])

    def values(self, x: np.ndarray) -> np.ndarray:
        """Functional values, shape ``(..., r)``."""
        g = self.functionals[:, :-1]
        c = self.functionals[:, -1]
        cols = [_dot(x, g[i]) + c[i] for i in range(self.r)]
        return np.stack(cols, axis=-1)

    def __eq__(self, other):
        if not isinstance(other, Leaf):
            return NotImplemented
        return np.array_equal(self.functionals, other.functionals)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Node:
    """Join of ``left`` (restricted to H+) and ``right`` (restricted to H-)."""

    v: np.ndarray
    a: float
    left: "Tree"
    right: "Tree"

    def __post_init__(self):
        h = OrientedHyperplane(self.v, self.a)
        object.__setattr__(self, "v", h.v)
        object.__setattr__(self, "a", h.a)
        if self.left.dim != h.dim or self.right.dim != h.dim:
            raise GeometryError(
                f"join of trees in dimensions {self.left.dim}, {self.right.dim} "
                f"along a direction in dimension {h.dim}"
            )
        if self.left.r != self.right.r:
            raise GeometryError(f"join of trees with {self.left.r} and {self.right.r} cells per leaf")

    @property
    def hyperplane(self) -> OrientedHyperplane:
        return OrientedHyperplane(self.v, self.a)

    @property
    def dim(self) -> int:
        return self.v.shape[0]

    @property
    def r(self) -> int:
        return self.left.r

    def __eq__(self, other):
        if not isinstance(other, Node):
            return NotImplemented
        return (
            self.a == other.a
            and np.array_equal(self.v, other.v)
            and self.left == other.left
            and self.right == other.right
        )

    __hash__ = None


Tree = Union[Leaf, Node]


@dataclass(frozen=True)
class CellRef:
    """One labeled cell: 1-based leaf (left-to-right), cell and thief."""

    leaf_index: int
    cell_index: int

    @property
    def thief(self) -> int:
        return self.cell_index


def leaves(tree: Tree) -> Iterator[Leaf]:
    if isinstance(tree, Leaf):
        yield tree
    else:
        yield from leaves(tree.left)
        yield from leaves(tree.right)


def leaf_count(tree: Tree) -> int:
    return sum(1 for _ in leaves(tree))


def cells(tree: Tree) -> list[CellRef]:
    """All labeled cells in order; thief labels read ``1..r`` per leaf."""
    return [CellRef(k + 1, i + 1) for k, leaf in enumerate(leaves(tree)) for i in range(leaf.r)]


def power_cell_index(leaf: Leaf, x) -> int:
    """1-based index of the maximizing functional, lowest index on ties."""
    p = _as_point(x, leaf.dim)
    vals = leaf.values(p)
    return int(np.argmax(vals)) + 1


def assign_point(tree: Tree, x) -> CellRef:
    p = _as_point(x, tree.dim)
    offset = 0
    node = tree
    while isinstance(node, Node):
        if halfspace_side(node.hyperplane, p) is Side.MINUS:
            offset += leaf_count(node.left)
            node = node.right
        else:
            node = node.left
    return CellRef(offset + 1, power_cell_index(node, p))


def assign_points(tree: Tree, X) -> tuple[np.ndarray, np.ndarray]:
    """Batched :func:`assign_point`.

    Returns 0-based ``(leaf_index, cell_index)`` integer arrays of length N.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != tree.dim:
        raise GeometryError(f"points must be an N x {tree.dim} array")
    n = X.shape[0]
    leaf_idx = np.empty(n, dtype=np.int64)
    cell_idx = np.empty(n, dtype=np.int64)

    def descend(node: Tree, rows: np.ndarray, first_leaf: int) -> int:
        if isinstance(node, Leaf):
            if rows.size:
                leaf_idx[rows] = first_leaf
                cell_idx[rows] = np.argmax(node.values(X[rows]), axis=1)
            return 1
        if node.a == math.inf:
            plus = np.zeros(rows.size, dtype=bool)
        elif node.a == -math.inf:
            plus = np.ones(rows.size, dtype=bool)
        else:
            plus = _dot(X[rows], node.v) >= node.a
        nl = descend(node.left, rows[plus], first_leaf)
        nr = descend(node.right, rows[~plus], first_leaf + nl)
        return nl + nr

    descend(tree, np.arange(n), 0)
    return leaf_idx, cell_idx


def join_trees(left: Tree, right: Tree, v, a: float) -> Node:
    """Join two partitions along the oriented hyperplane ``(v, a)``.

    The resulting cell list is the left tree's cells (cut to the plus side)
    followed by the right tree's cells (cut to the minus side), with labels
    carried over unchanged.
    """
    return Node(np.asarray(v, dtype=float), a, left, right)


def _check_permutation(images: Sequence[int], r: int) -> np.ndarray:
    perm = np.asarray(images, dtype=np.int64)
    if perm.shape != (r,) or sorted(perm.tolist()) != list(range(1, r + 1)):
        raise GeometryError(f"{list(images)} is not a permutation of 1..{r}")
    return perm


def apply_symmetry(perm: Sequence[int], tree: Tree) -> Tree:
    """Act by ``perm`` (1-based images) on every leaf of ``tree``.

    The new leaf's functional ``j`` is the old functional ``perm[j]``, so a
    point that used to be labeled ``s`` is now labeled ``perm^{-1}(s)``.
    """
    p = _check_permutation(perm, tree.r) - 1

    def act(node: Tree) -> Tree:
        if isinstance(node, Leaf):
            return Leaf(node.functionals[p])
        return Node(node.v, node.a, act(node.left), act(node.right))

    return act(tree)


def permute_block(perm: Sequence[int], values) -> np.ndarray:
    """Reindex the last axis of ``values`` so that new entry j is old entry perm[j].

    This is how :func:`apply_symmetry` moves thief columns.
    """
    values = np.asarray(values)
    p = _check_permutation(perm, values.shape[-1]) - 1
    return values[..., p]


# -- 2D cell polygons ---------------------------------------------------------


def clip_halfplane(poly: list[tuple[float, float]], g, c: float) -> list[tuple[float, float]]:
    """Clip a convex polygon to ``{x : <g, x> + c >= 0}``."""
    if not poly:
        return []
    g0, g1 = float(g[0]), float(g[1])
    if g0 == 0.0 and g1 == 0.0:
        return list(poly) if c >= 0 else []
    vals = [g0 * x + g1 * y + c for x, y in poly]
    out = []
    n = len(poly)
    for k in range(n):
        p, q = poly[k], poly[(k + 1) % n]
        fp, fq = vals[k], vals[(k + 1) % n]
        if fp >= 0:
            out.append(p)
        if (fp >= 0) != (fq >= 0):
            s = fp / (fp - fq)
            out.append((p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])))
    if len(out) < 3:
        return []
    return out


def polygon_area(poly: Sequence[tuple[float, float]]) -> float:
    """Shoelace area (unsigned)."""
    n = len(poly)
    if n < 3:
        return 0.0
    s = 0.0
    for k in range(n):
        x0, y0 = poly[k]
        x1, y1 = poly[(k + 1) % n]
        s += x0 * y1 - x1 * y0
    return abs(s) / 2.0


def _path_to_leaf(tree: Tree, leaf_number: int):
    """Node/side chain from the root to the 0-based leaf."""
    chain = []
    node = tree
    first = 0
    while isinstance(node, Node):
        nl = leaf_count(node.left)
        if leaf_number < first + nl:
            chain.append((node, True))
            node = node.left
        else:
            chain.append((node, False))
            first += nl
            node = node.right
    return chain, node


def cell_polytope(tree: Tree, cell: CellRef, bbox) -> list[tuple[float, float]]:
    """Vertices (counter-clockwise) of ``cell`` clipped to ``bbox``.

    ``bbox`` is ``(xmin, ymin, xmax, ymax)``. Returns ``[]`` for an empty
    region. Only planar trees are supported.
    """
    if tree.dim != 2:
        raise UnsupportedDimensionError(f"cell polygons need d = 2, got d = {tree.dim}")
    xmin, ymin, xmax, ymax = map(float, bbox)
    if not (xmin < xmax and ymin < ymax):
        raise GeometryError(f"empty bounding box {bbox}")
    n_leaves = leaf_count(tree)
    if not (1 <= cell.leaf_index <= n_leaves and 1 <= cell.cell_index <= tree.r):
        raise GeometryError(f"{cell} does not exist in this tree")
    poly = [(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)]
    chain, leaf = _path_to_leaf(tree, cell.leaf_index - 1)
    for node, plus in chain:
        if node.a == math.inf:
            if plus:
                return []
            continue
        if node.a == -math.inf:
            if not plus:
                return []
            continue
        if plus:
            poly = clip_halfplane(poly, node.v, -node.a)
        else:
            poly = clip_halfplane(poly, -node.v, node.a)
        if not poly:
            return []
    i = cell.cell_index - 1
    f = leaf.functionals
    for j in range(leaf.r):
        if j != i:
            diff = f[i] - f[j]
            poly = clip_halfplane(poly, diff[:2], diff[2])
            if not poly:
                return []
    return poly


# -- JSON tree files ----------------------------------------------------------


def encode_extended(a: float):
    if a == math.inf:
        return "+inf"
    if a == -math.inf:
        return "-inf"
    return float(a)


def decode_extended(value, where: str = "a") -> float:
    if value == "+inf":
        return math.inf
    if value == "-inf":
        return -math.inf
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise GeometryError(f"{where}: expected a number, '+inf' or '-inf', got {value!r}")
    a = float(value)
    if not math.isfinite(a):
        raise GeometryError(f"{where}: infinite offsets must be written as '+inf'/'-inf'")
    return a


def tree_to_dict(tree: Tree) -> dict:
    if isinstance(tree, Leaf):
        return {"type": "leaf", "functionals": tree.functionals.tolist()}
    return {
        "type": "node",
        "v": tree.v.tolist(),
        "a": encode_extended(tree.a),
        "left": tree_to_dict(tree.left),
        "right": tree_to_dict(tree.right),
    }


def tree_from_dict(obj, where: str = "$") -> Tree:
    if not isinstance(obj, dict):
        raise GeometryError(f"{where}: expected an object")
    kind = obj.get("type")
    if kind not in ("leaf", "node"):
        raise GeometryError(f"{where}: unknown type {kind!r}")
    fields = ("functionals",) if kind == "leaf" else ("v", "a", "left", "right")
    for name in fields:
        if name not in obj:
            raise GeometryError(f"{where}: missing field {name!r}")
    if kind == "node":
        left = tree_from_dict(obj["left"], f"{where}.left")
        right = tree_from_dict(obj["right"], f"{where}.right")
        a = decode_extended(obj["a"], f"{where}.a")
    try:
        if kind == "leaf":
            return Leaf(np.asarray(obj["functionals"], dtype=float))
        return Node(np.asarray(obj["v"], dtype=float), a, left, right)
    except (TypeError, ValueError) as exc:
        raise GeometryError(f"{where}: {exc}") from None
