"""Ground truth for small instances and the known extremal configurations.

* exhaustive necklace splitting,
* brute-force grid search over a template's parameters,
* closed-form bounds on the maximal number of fairly splittable measures,
* generators for the configurations behind the upper bounds (simplex,
  pentagon, concentric spheres),
* infeasibility probes, which gather numerical evidence (never proof) that
  a configuration admits no fair distribution for a given template.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .geometry import Leaf, Node, _dot
from .measures import Measure, MeasureSet, measures_to_dict, phi_from_shares, thief_shares
from .solver import (
    SolveConfig,
    TemplateLeaf,
    TemplateNode,
    TreeTemplate,
    _Evaluator,
    constant_leaf,
    solve_fair,
)


class OracleError(ValueError):
    pass


# -- necklaces ---------------------------------------------------------------------

NECKLACE_MAX_BEADS = 24
NECKLACE_MAX_THIEVES = 3
NECKLACE_MAX_TYPES = 4


@dataclass(frozen=True)
class Necklace:
    """Beads are 1-based type ids; ``thieves`` must divide every type count."""

    beads: tuple[int, ...]
    thieves: int = 2

    def __post_init__(self):
        beads = tuple(int(b) for b in self.beads)
        if not beads:
            raise OracleError("empty necklace")
        if min(beads) < 1:
            raise OracleError("bead types are 1-based")
        if self.thieves < 1:
            raise OracleError("need at least one thief")
        object.__setattr__(self, "beads", beads)
        for t, c in self.counts().items():
            if c % self.thieves:
                raise OracleError(
                    f"type {t} occurs {c} times, not divisible among {self.thieves} thieves"
                )

    @classmethod
    def parse(cls, text: str, thieves: int = 2) -> "Necklace":
        """Letters (``"AABB"``) or a JSON-style list of integers (``"[1,1,2,2]"``)."""
        text = text.strip()
        if text.startswith("["):
            import json

            try:
                beads = json.loads(text)
            except ValueError as exc:
                raise OracleError(f"cannot parse bead list: {exc}") from None
            if not isinstance(beads, list) or not all(isinstance(b, int) for b in beads):
                raise OracleError("bead list must contain integers")
            return cls(tuple(beads), thieves)
        if not text.isalpha():
            raise OracleError("beads must be letters or a list of integers")
        alphabet = sorted(set(text))
        return cls(tuple(alphabet.index(ch) + 1 for ch in text), thieves)

    @property
    def types(self) -> int:
        return max(self.beads)

    def counts(self) -> dict[int, int]:
        out: dict[int, int] = {}
        for b in self.beads:
            out[b] = out.get(b, 0) + 1
        return out


@dataclass(frozen=True)
class NecklaceSplit:
    """``cuts`` are gap positions (cut after bead ``i``, 1-based); one label per piece."""

    cuts: tuple[int, ...]
    labels: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"cuts": list(self.cuts), "labels": list(self.labels)}


def _canonical(beads: Sequence[int]) -> tuple[int, ...]:
    seen: dict[int, int] = {}
    return tuple(seen.setdefault(b, len(seen)) for b in beads)


@lru_cache(maxsize=65536)
def _split_canonical(beads: tuple[int, ...], r: int) -> Optional[tuple[tuple[int, ...], tuple[int, ...]]]:
    # beads are 0-based canonical type ids. The result depends only on this
    # canonical form since renaming types preserves validity and order.
    n = len(beads)
    m = max(beads) + 1
    prefix = [[0] * m]
    for b in beads:
        row = prefix[-1][:]
        row[b] += 1
        prefix.append(row)
    target = [c // r for c in prefix[-1]]

    def label(pieces):
        loads = [[0] * m for _ in range(r)]
        out = []

        def place(j):
            if j == len(pieces):
                return all(loads[s] == target for s in range(r))
            vec = pieces[j]
            for s in range(r):
                load = loads[s]
                if all(load[k] + vec[k] <= target[k] for k in range(m)):
                    for k in range(m):
                        load[k] += vec[k]
                    out.append(s + 1)
                    if place(j + 1):
                        return True
                    out.pop()
                    for k in range(m):
                        load[k] -= vec[k]
            return False

        return tuple(out) if place(0) else None

    for k in range(0, min((r - 1) * m, n - 1) + 1):
        for cuts in itertools.combinations(range(1, n), k):
            bounds = (0,) + cuts + (n,)
            pieces = [
                [prefix[bounds[j + 1]][t] - prefix[bounds[j]][t] for t in range(m)]
                for j in range(k + 1)
            ]
            labels = label(pieces)
            if labels is not None:
                return cuts, labels
    return None


def necklace_split_exact(nk: Necklace) -> NecklaceSplit:
    """Fewest-cut fair split, first in lexicographic (cuts, labels) order.

    Cut sets are tried by increasing size, so no split with fewer cuts
    exists than the one returned. At most ``(r - 1) * m`` cuts are needed.
    """
    n = len(nk.beads)
    m = len(set(nk.beads))
    if n > NECKLACE_MAX_BEADS or nk.thieves > NECKLACE_MAX_THIEVES or m > NECKLACE_MAX_TYPES:
        raise OracleError(
            f"necklace too large for exhaustive search ({n} beads, {nk.thieves} thieves, {m} types; "
            f"limits {NECKLACE_MAX_BEADS}, {NECKLACE_MAX_THIEVES}, {NECKLACE_MAX_TYPES})"
        )
    found = _split_canonical(_canonical(nk.beads), nk.thieves)
    if found is None:  # pragma: no cover - excluded by the necklace theorem
        raise OracleError("no fair split found within (r-1)m cuts")
    return NecklaceSplit(*found)


def check_necklace_split(nk: Necklace, split: NecklaceSplit) -> bool:
    """Recount every thief's beads from scratch."""
    n = len(nk.beads)
    cuts = list(split.cuts)
    if cuts != sorted(set(cuts)) or any(not 1 <= c < n for c in cuts):
        return False
    if len(split.labels) != len(cuts) + 1:
        return False
    if any(not 1 <= s <= nk.thieves for s in split.labels):
        return False
    got: dict[tuple[int, int], int] = {}
    piece = 0
    for pos, b in enumerate(nk.beads, start=1):
        s = split.labels[piece]
        got[(s, b)] = got.get((s, b), 0) + 1
        if piece < len(cuts) and pos == cuts[piece]:
            piece += 1
    for t, c in nk.counts().items():
        for s in range(1, nk.thieves + 1):
            if got.get((s, t), 0) * nk.thieves != c:
                return False
    return True


# -- bounds ---------------------------------------------------------------------------


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    return all(n % p for p in range(2, int(math.isqrt(n)) + 1))


@dataclass
class BoundsReport:
    """Known bounds on M (convex), M' (iterated) and M'' (hyperplane cuts).

    A ``None`` field does not apply to ``(n, r, d)``.
    """

    n: int
    r: int
    d: int
    lower_M_prime: Optional[int] = None
    lower_M_dprime: Optional[int] = None
    upper_M_dprime: Optional[int] = None
    upper_M: Optional[int] = None
    exact_M: Optional[int] = None
    exact_M_dprime: Optional[int] = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "r": self.r,
            "d": self.d,
            "lower_M_prime": self.lower_M_prime,
            "lower_M_dprime": self.lower_M_dprime,
            "upper_M_dprime": self.upper_M_dprime,
            "upper_M": self.upper_M,
            "exact_M": self.exact_M,
            "exact_M_dprime": self.exact_M_dprime,
            "applies": {
                "iterated_prime_lower": self.lower_M_prime is not None,
                "two_thieves_lower": self.lower_M_dprime is not None,
                "cut_counting_upper": self.upper_M_dprime is not None,
                "convex_upper": self.upper_M is not None,
            },
            "notes": list(self.notes),
        }


def bounds(n: int, r: int, d: int) -> BoundsReport:
    if n < 1 or d < 1 or r < 2:
        raise OracleError("bounds need n >= 1, d >= 1, r >= 2")
    rep = BoundsReport(n, r, d)
    if _is_prime(r) and n % r == 0:
        t = n // r
        # ceil((t d (r-1) + t) / (r-1) - 1), in integers
        rep.lower_M_prime = -(-(t * d * (r - 1) + t) // (r - 1)) - 1
        rep.notes.append(f"iterated partitions, r prime, t = {t}: M'(n,r,d) >= {rep.lower_M_prime}")
    if r == 2:
        t = n // 2
        rep.lower_M_dprime = t * (d + 1) - 1 if n % 2 == 0 else t * (d + 1)
        rep.notes.append(f"two thieves, hyperplane cuts: M''(n,2,d) >= {rep.lower_M_dprime}")
    rep.upper_M_dprime = d * (n - 1) // (r - 1)
    rep.notes.append(f"cut counting: M''(n,r,d) <= {rep.upper_M_dprime}")
    if n == 2 * r - 1:
        rep.upper_M = d + 1
        rep.notes.append(f"simplex configuration: M(2r-1,r,d) <= {d + 1}")
    if (n, r, d) == (5, 2, 2):
        rep.upper_M = 7 if rep.upper_M is None else min(rep.upper_M, 7)
        rep.notes.append("pentagon configuration: M(5,2,2) <= 7")
    if n == r:
        rep.exact_M = d
    if d == 1:
        rep.exact_M = (n - 1) // (r - 1)
    if r == 2 and n in (2, 3):
        rep.exact_M_dprime = d + n - 2
    elif r == 2 and d == 1:
        rep.exact_M_dprime = n - 1
    elif n == r and r % 2 == 1:
        rep.exact_M_dprime = 1
        rep.notes.append("concentric spheres: M''(r,r,d) = 1 for odd r")
    if rep.exact_M is not None and rep.upper_M is not None:
        rep.upper_M = min(rep.upper_M, rep.exact_M)
    return rep


# -- configurations -----------------------------------------------------------------------

SIMPLEX = "simplex"
PENTAGON = "pentagon"
SPHERES = "spheres"


@dataclass
class NamedConfig:
    kind: str
    measures: MeasureSet
    metadata: dict

    def to_dict(self) -> dict:
        out = measures_to_dict(self.measures)
        out["metadata"] = dict(self.metadata, kind=self.kind)
        return out


def _ball_cloud(rng: np.random.Generator, center, eps: float, n: int) -> np.ndarray:
    d = len(center)
    g = rng.normal(size=(n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    radius = eps * rng.uniform(size=(n, 1)) ** (1.0 / d)
    return np.asarray(center, dtype=float) + radius * g


def _sphere_cloud(rng: np.random.Generator, d: int, radius: float, n: int) -> np.ndarray:
    g = rng.normal(size=(n, d))
    return radius * g / np.linalg.norm(g, axis=1, keepdims=True)


def _orient_sign(facet_pts: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Sign of the determinant [p_1 - q, ..., p_d - q] for batched facets."""
    return np.sign(np.linalg.det(facet_pts - q[None, None, :]))


def simplex_hull_check(clouds: Sequence[np.ndarray], center: np.ndarray, max_combos: int = 300_000) -> dict:
    """Is ``center`` inside conv(p_0..p_d) for every choice p_i in cloud i?

    For each facet, every combination of facet points is checked against
    all points of the opposite cloud.
    """
    d = len(center)
    for i in range(d + 1):
        others = [clouds[j] for j in range(d + 1) if j != i]
        combos = math.prod(len(c) for c in others)
        if combos > max_combos:
            return {"checked": False, "reason": f"{combos} facet combinations exceed {max_combos}"}
    for i in range(d + 1):
        others = [clouds[j] for j in range(d + 1) if j != i]
        idx = np.array(list(itertools.product(*[range(len(c)) for c in others])))
        facets = np.stack([others[k][idx[:, k]] for k in range(d)], axis=1)  # C x d x d
        s_center = _orient_sign(facets, np.asarray(center, dtype=float))
        if np.any(s_center == 0):
            return {"checked": True, "ok": False, "facet": i}
        for q in clouds[i]:
            if np.any(_orient_sign(facets, q) != s_center):
                return {"checked": True, "ok": False, "facet": i}
    return {"checked": True, "ok": True}


def _pentagon_vertices() -> np.ndarray:
    ang = math.pi / 2 + 2 * math.pi * np.arange(5) / 5
    return np.column_stack([np.cos(ang), np.sin(ang)])


def _triangle_depth(tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Signed distance from points to the triangle boundary (positive inside)."""
    depth = np.full(pts.shape[0], np.inf)
    u, w = tri[1] - tri[0], tri[2] - tri[0]
    area_sign = np.sign(u[0] * w[1] - u[1] * w[0])
    for k in range(3):
        a, b = tri[k], tri[(k + 1) % 3]
        e = b - a
        dist = area_sign * (e[0] * (pts[:, 1] - a[1]) - e[1] * (pts[:, 0] - a[0])) / np.linalg.norm(e)
        depth = np.minimum(depth, dist)
    return depth


def pentagon_stabbing_report(centers: np.ndarray, eps: float) -> dict:
    verts = _pentagon_vertices()
    rows = []
    ok = True
    for tri_idx in itertools.combinations(range(5), 3):
        depth = _triangle_depth(verts[list(tri_idx)], np.asarray(centers))
        best = float(depth.max())
        rows.append({"triangle": list(tri_idx), "best_depth": best, "stabbed": best > eps})
        ok &= best > eps
    return {"ok": bool(ok), "eps": eps, "triangles": rows, "min_depth": min(r["best_depth"] for r in rows)}


def _search_pentagon_centers(step: float = 0.05) -> np.ndarray:
    """Three interior points maximizing the worst triangle's best depth."""
    verts = _pentagon_vertices()
    xs = np.arange(-1.0, 1.0 + 1e-9, step)
    cand = np.array([(x, y) for x in xs for y in xs])
    inside = np.min(
        [
            (verts[(k + 1) % 5, 0] - verts[k, 0]) * (cand[:, 1] - verts[k, 1])
            - (verts[(k + 1) % 5, 1] - verts[k, 1]) * (cand[:, 0] - verts[k, 0])
            for k in range(5)
        ],
        axis=0,
    ) > 0
    cand = cand[inside]
    tris = list(itertools.combinations(range(5), 3))
    D = np.stack([_triangle_depth(verts[list(t)], cand) for t in tris], axis=1)  # C x 10
    # Keep candidates that are deep in at least one triangle.
    keep = np.argsort(-D.max(axis=1))[:150]
    cand, D = cand[keep], D[keep]
    best_val, best = -np.inf, None
    n = len(cand)
    for i in range(n):
        for j in range(i + 1, n):
            pair = np.maximum(D[i], D[j])
            vals = np.maximum(pair[None, :], D[j + 1 :]).min(axis=1)
            if vals.size:
                k = int(np.argmax(vals))
                if vals[k] > best_val:
                    best_val, best = float(vals[k]), (i, j, j + 1 + k)
    return cand[list(best)]


def generate(kind: str, d: int = 2, r: int = 2, eps: Optional[float] = None, npoints: int = 50,
             seed: int = 0) -> NamedConfig:
    """Build one of the named configurations.

    ``eps`` (cloud radius) defaults to 1% of the configuration's diameter.
    """
    rng = np.random.default_rng(seed)
    if npoints < 1:
        raise OracleError("npoints must be positive")
    if kind == SIMPLEX:
        verts = np.vstack([np.zeros(d), np.eye(d)])
        centroid = verts.mean(axis=0)
        diameter = math.sqrt(2.0) if d > 1 else 1.0
        eps = 0.01 * diameter if eps is None else eps
        clouds = [_ball_cloud(rng, v, eps, npoints) for v in verts]
        center_cloud = _ball_cloud(rng, centroid, eps, npoints)
        measures = [Measure.uniform(f"vertex{k}", c) for k, c in enumerate(clouds)]
        measures.append(Measure.uniform("centroid", center_cloud))
        check = simplex_hull_check(clouds, centroid)
        meta = {"eps": eps, "centers": np.vstack([verts, centroid]).tolist(), "validation": check}
        return NamedConfig(SIMPLEX, MeasureSet(d, tuple(measures)), meta)
    if kind == PENTAGON:
        if d != 2:
            raise OracleError("the pentagon configuration lives in the plane")
        verts = _pentagon_vertices()
        diameter = float(np.linalg.norm(verts[0] - verts[2]))
        eps = 0.01 * diameter if eps is None else eps
        centers = _search_pentagon_centers()
        report = pentagon_stabbing_report(centers, eps)
        if not report["ok"]:
            raise OracleError(
                f"pentagon centers fail the stabbing property at eps = {eps} "
                f"(min depth {report['min_depth']:.4g})"
            )
        clouds = [_ball_cloud(rng, v, eps, npoints) for v in verts]
        clouds += [_ball_cloud(rng, c, eps, npoints) for c in centers]
        names = [f"outer{k}" for k in range(5)] + [f"inner{k}" for k in range(3)]
        measures = [Measure.uniform(nm, c) for nm, c in zip(names, clouds)]
        meta = {"eps": eps, "centers": np.vstack([verts, centers]).tolist(), "validation": report}
        return NamedConfig(PENTAGON, MeasureSet(2, tuple(measures)), meta)
    if kind == SPHERES:
        if d < 2:
            raise OracleError("spheres need d >= 2")
        eps = 0.01 * 4.0 if eps is None else eps
        clouds = [_sphere_cloud(rng, d, rad, npoints) for rad in (1.0, 2.0)]
        measures = [Measure.uniform(f"sphere{rad:g}", c) for rad, c in zip((1.0, 2.0), clouds)]
        radii = [float(np.linalg.norm(c, axis=1).max()) for c in clouds]
        meta = {"eps": eps, "radii": [1.0, 2.0], "circumradii": radii, "r": r,
                "validation": {"ok": all(abs(a - b) <= eps for a, b in zip(radii, (1.0, 2.0)))}}
        return NamedConfig(SPHERES, MeasureSet(d, tuple(measures)), meta)
    raise OracleError(f"unknown configuration kind {kind!r}")


def level_offsets(m: Measure, v, level: float) -> Optional[tuple[float, float]]:
    """Offsets ``a`` in ``(lo, hi]`` with ``m({<x,v> >= a}) == level`` exactly, or None."""
    proj = np.sort(_dot(m.points, np.asarray(v, dtype=float)))[::-1]
    # weights sorted consistently with proj
    order = np.argsort(-_dot(m.points, np.asarray(v, dtype=float)), kind="stable")
    w = m.weights[order]
    cum = np.cumsum(w)
    k = int(np.searchsorted(cum, level - 1e-12))
    if k >= len(cum) - 1 or abs(cum[k] - level) > 1e-12 or proj[k] == proj[k + 1]:
        return None
    return float(proj[k + 1]), float(proj[k])


def spheres_obstruction_check(cfg: NamedConfig, r: int = 3, directions: int = 16) -> dict:
    """For each direction and level k/r, the two spheres' level offsets are disjoint."""
    if cfg.kind != SPHERES:
        raise OracleError("obstruction check needs the spheres configuration")
    d = cfg.measures.dim
    rng = np.random.default_rng(0)
    rows = []
    ok = True
    for _ in range(directions):
        v = rng.normal(size=d)
        v /= np.linalg.norm(v)
        for k in range(1, r):
            ivs = [level_offsets(m, v, k / r) for m in cfg.measures]
            disjoint = None in ivs or ivs[0][1] < ivs[1][0] or ivs[1][1] < ivs[0][0]
            rows.append({"v": v.tolist(), "level": k / r, "intervals": ivs, "disjoint": bool(disjoint)})
            ok &= bool(disjoint)
    return {"ok": ok, "checks": rows}


# -- brute force ---------------------------------------------------------------------------

MAX_GRID = 10**7


def _leaf_coords(leaf_slot_r: int, d: int, k: int):
    """Grid axes for one free leaf.

    Two-cell leaves use d-1 direction angles and one compactified offset
    (the gradient's length is irrelevant); others use raw coordinates in [-1, 1].
    """
    if leaf_slot_r == 2:
        # in R^1 the only directions are +1 and -1
        azimuth = np.array([0.0, math.pi]) if d == 1 else np.linspace(0.0, 2 * math.pi, k, endpoint=False)
        angles = [azimuth] + [
            np.linspace(0.0, math.pi, k) for _ in range(d - 2)
        ]
        return angles + [np.linspace(-1.0, 1.0, k)]
    return [np.linspace(-1.0, 1.0, k) for _ in range((leaf_slot_r - 1) * (d + 1))]


def _sphere_dir(angles: Sequence[float], d: int) -> np.ndarray:
    # hyperspherical coordinates: angles[0] azimuth, the rest polar
    if d == 1:
        return np.array([math.copysign(1.0, math.cos(angles[0]))])
    v = np.empty(d)
    v[0] = math.cos(angles[0])
    v[1] = math.sin(angles[0])
    for j, phi in enumerate(angles[1:], start=2):
        v[:j] *= math.sin(phi)
        v[j] = math.cos(phi)
    return v


def grid_axes(template: TreeTemplate, k: int) -> list[np.ndarray]:
    axes: list[np.ndarray] = []
    for kind, slot in template._slots:
        if kind == "node" and slot.a is None:
            axes.append(np.linspace(-1.0, 1.0, k))
        elif kind == "leaf" and slot.fixed is None:
            axes.extend(_leaf_coords(template.r, template.dim, k))
    return axes


def _grid_to_params(template: TreeTemplate, point: Sequence[float]) -> np.ndarray:
    """Map a grid point to the template's ParamVector."""
    out: list[float] = []
    pos = 0
    d, r = template.dim, template.r
    for kind, slot in template._slots:
        if kind == "node" and slot.a is None:
            out.append(point[pos])
            pos += 1
        elif kind == "leaf" and slot.fixed is None:
            if r == 2:
                n_ang = max(d - 1, 1)
                angles = point[pos : pos + n_ang]
                u = point[pos + n_ang]
                pos += n_ang + 1
                g = _sphere_dir(angles, d)
                if u >= 1.0:
                    row = np.concatenate([np.zeros(d), [-1.0]])  # everything to thief 2
                elif u <= -1.0:
                    row = np.concatenate([np.zeros(d), [1.0]])  # everything to thief 1
                else:
                    row = np.concatenate([g, [-template.offset_scale * math.tan(math.pi / 2 * u)]])
                out.extend(row.tolist())
            else:
                size = template.leaf_size
                out.extend(point[pos : pos + size])
                pos += size
    return np.array(out, dtype=float)


def brute_force_fair(ms: MeasureSet, template: TreeTemplate, grid: int | Sequence[np.ndarray] = 11):
    """Exact minimizer of the hard discrepancy over a parameter grid.

    ``grid`` is a per-axis resolution or explicit axes (see :func:`grid_axes`).
    Node offsets range over the compactified interval ``[-1, 1]`` including
    the endpoints at infinity. Ties go to the lexicographically first grid
    point. Returns ``(params, discrepancy)``.
    """
    axes = grid_axes(template, grid) if isinstance(grid, (int, np.integer)) else [np.asarray(a) for a in grid]
    total = math.prod(len(a) for a in axes)
    if total > MAX_GRID:
        raise OracleError(f"grid has {total} points, more than {MAX_GRID}")
    ev = _Evaluator(template, ms)
    best_val, best_p = math.inf, None
    for point in itertools.product(*axes):
        p = _grid_to_params(template, point)
        val = float(np.max(np.abs(phi_from_shares(ev.hard_shares(p)))))
        if val < best_val:
            best_val, best_p = val, p
    if best_p is None:
        best_p = _grid_to_params(template, [a[0] for a in axes]) if axes else np.zeros(0)
        best_val = float(np.max(np.abs(phi_from_shares(ev.hard_shares(best_p)))))
    return best_p, best_val


def largest_grid(template: TreeTemplate, max_points: int) -> int:
    n_axes = len(grid_axes(template, 2))
    if n_axes == 0:
        return 1
    k = max(2, int(math.floor(min(max_points, MAX_GRID) ** (1.0 / n_axes))))
    while k > 2 and k**n_axes > min(max_points, MAX_GRID):
        k -= 1
    return k


# -- probes --------------------------------------------------------------------------------


def three_cell_templates(d: int, directions: Sequence[Sequence[float]]) -> list[TreeTemplate]:
    """Two hyperplane cuts, two thieves: a free line on one side of a fixed-direction
    cut and a single-thief piece on the other, in every arrangement."""
    out = []
    for v in directions:
        v = np.asarray(v, dtype=float) / np.linalg.norm(v)
        for s in (1, 2):
            const = TemplateLeaf(constant_leaf(s, 2, d))
            out.append(TreeTemplate(TemplateNode(v, TemplateLeaf(), const), 2, d))
            out.append(TreeTemplate(TemplateNode(v, const, TemplateLeaf()), 2, d))
    return out


def probe_templates(n: int, d: int, r: int, directions: Sequence[Sequence[float]]) -> list[TreeTemplate]:
    """Iterated templates with ``n`` cells for two thieves: ``t = n // 2`` free
    leaves in a left-leaning chain plus, for odd ``n``, one single-thief leaf."""
    if r != 2:
        raise OracleError("probe templates are built for two thieves")
    t, odd = divmod(n, 2)
    out = []
    for v in directions:
        v = np.asarray(v, dtype=float) / np.linalg.norm(v)
        base_leaves = [TemplateLeaf() for _ in range(t)]
        variants = [base_leaves]
        if odd:
            variants = [base_leaves + [TemplateLeaf(constant_leaf(s, 2, d))] for s in (1, 2)]
            variants += [[TemplateLeaf(constant_leaf(s, 2, d))] + base_leaves for s in (1, 2)]
        for leaves_ in variants:
            node = leaves_[-1]
            for leaf in reversed(leaves_[:-1]):
                node = TemplateNode(v, leaf, node)
            out.append(TreeTemplate(node, 2, d))
    return out


@dataclass
class ProbeReport:
    best_discrepancy: float
    attempts: list
    best_params: list
    best_template: int
    evals: int
    label: str = "evidence"

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "best_discrepancy": self.best_discrepancy,
            "best_params": self.best_params,
            "best_template": self.best_template,
            "evals": self.evals,
            "attempts": self.attempts,
        }


def infeasibility_probe(cfg: NamedConfig | MeasureSet, templates: TreeTemplate | Sequence[TreeTemplate],
                        budget: int = 10_000, seed: int = 0) -> ProbeReport:
    """Search hard for a fair distribution and report how close it got.

    The budget (objective evaluations) is split evenly over the templates;
    each template gets half for the multistart solver and half for a
    brute-force grid. The smaller minimum is reported. A positive value is
    evidence of infeasibility, not a certificate.
    """
    if budget < 1000:
        raise OracleError("probe budget must be at least 1000 evaluations")
    ms = cfg.measures if isinstance(cfg, NamedConfig) else cfg
    if isinstance(templates, TreeTemplate):
        templates = [templates]
    per = budget // len(templates)
    attempts = []
    best = (math.inf, None, -1)
    evals = 0
    for ti, tpl in enumerate(templates):
        restarts = 4
        scfg = SolveConfig(tolerance=1e-9, restarts=restarts, max_evals=max(1, per // 2 // restarts),
                           seed=seed + 7919 * ti)
        res = solve_fair(tpl, ms, scfg)
        evals += res.evals_used
        attempts.append({"template": ti, "method": "search", "discrepancy": res.discrepancy,
                         "evals": res.evals_used})
        if res.discrepancy < best[0]:
            best = (res.discrepancy, res.params, ti)
        if tpl.n_params:
            k = largest_grid(tpl, per - per // 2)
            p, val = brute_force_fair(ms, tpl, k)
            n_grid = k ** len(grid_axes(tpl, 2))
            evals += n_grid
            attempts.append({"template": ti, "method": "grid", "resolution": k, "discrepancy": val,
                             "evals": n_grid})
            if val < best[0]:
                best = (val, p, ti)
    d, p, ti = best
    return ProbeReport(float(d), attempts, [float(x) for x in p], ti, evals)


def probe_replay(ms: MeasureSet, template: TreeTemplate, params: Sequence[float]) -> float:
    """Recompute a probe's discrepancy from its reported parameters."""
    tree = template.decode(np.asarray(params, dtype=float))
    return float(np.max(np.abs(phi_from_shares(thief_shares(tree, ms)))))
