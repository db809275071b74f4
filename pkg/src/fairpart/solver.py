"""Numerical search for fair iterated partitions.

A :class:`TreeTemplate` fixes the shape of a partition tree and the node
directions; what remains free is one offset per node and the functionals of
every leaf. :func:`solve_fair` searches that parameter space for a zero of
the test map. The hard (point-assignment) objective is piecewise constant,
so the search descends on a smoothed version first: node sides become
sigmoids and leaf argmaxes become softmaxes, with a temperature that is
annealed towards zero. Every reported discrepancy is a hard one,
recomputed by :func:`fairpart.measures.thief_shares`.

Node offsets are compactified. A free offset is stored as ``u`` and decoded
as ``a = offset_scale * tan(pi/2 * clip(u, -1, 1))``, so ``u >= 1`` means
``a = +inf`` (empty plus side) and ``u <= -1`` means ``a = -inf``.

Leaf parameters are gauge fixed: the last functional of a free leaf is the
zero functional, which is harmless because adding a common functional to
all of them does not move any cell.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit

from .geometry import (
    GeometryError,
    Leaf,
    Node,
    OrientedHyperplane,
    Tree,
    _dot,
    decode_extended,
    encode_extended,
    normalize_direction,
    tree_to_dict,
)
from .measures import Measure, MeasureError, MeasureSet, phi_from_shares, thief_shares


class TemplateError(ValueError):
    pass


class ResolutionError(RuntimeError):
    """The angular grid was too coarse to bracket a ham-sandwich direction."""


# -- templates ------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TemplateLeaf:
    """A leaf slot; ``fixed`` is None when its functionals are free."""

    fixed: Optional[Leaf] = None


@dataclass(frozen=True, eq=False)
class TemplateNode:
    """A node slot with a fixed direction; ``a`` is None when the offset is free."""

    v: np.ndarray
    left: "TemplateTree"
    right: "TemplateTree"
    a: Optional[float] = None

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if abs(float(np.linalg.norm(v)) - 1.0) > 1e-12:
            raise TemplateError(f"template direction {v.tolist()} is not a unit vector")
        object.__setattr__(self, "v", v)


TemplateTree = Union[TemplateLeaf, TemplateNode]


def constant_leaf(thief: int, r: int, d: int) -> Leaf:
    """A leaf that hands all of space to ``thief`` (1-based)."""
    f = np.zeros((r, d + 1))
    f[:, -1] = -np.arange(r, dtype=float)  # distinct constants
    f[thief - 1, -1] = 1.0
    return Leaf(f)


class TreeTemplate:
    """Shape, directions and free-parameter manifest of a partition tree."""

    def __init__(self, root: TemplateTree, r: int, dim: int, offset_scale: float = 1.0):
        if r < 1 or dim < 1:
            raise TemplateError("need r >= 1 and d >= 1")
        if not offset_scale > 0:
            raise TemplateError("offset_scale must be positive")
        self.root = root
        self.r = r
        self.dim = dim
        self.offset_scale = float(offset_scale)
        self._slots: list[tuple[str, object]] = []
        self._walk(root)
        self.t = sum(1 for kind, _ in self._slots if kind == "leaf")

    def _walk(self, node: TemplateTree) -> None:
        if isinstance(node, TemplateLeaf):
            if node.fixed is not None and (node.fixed.r != self.r or node.fixed.dim != self.dim):
                raise TemplateError(
                    f"fixed leaf has r={node.fixed.r}, d={node.fixed.dim}; "
                    f"template has r={self.r}, d={self.dim}"
                )
            self._slots.append(("leaf", node))
            return
        if node.v.shape != (self.dim,):
            raise TemplateError(f"direction {node.v.tolist()} is not in R^{self.dim}")
        self._slots.append(("node", node))
        self._walk(node.left)
        self._walk(node.right)

    @property
    def leaf_size(self) -> int:
        return (self.r - 1) * (self.dim + 1)

    @property
    def n_params(self) -> int:
        n = 0
        for kind, slot in self._slots:
            if kind == "node" and slot.a is None:
                n += 1
            elif kind == "leaf" and slot.fixed is None:
                n += self.leaf_size
        return n

    def free_node_slots(self) -> list[TemplateNode]:
        return [s for k, s in self._slots if k == "node" and s.a is None]

    def free_leaf_count(self) -> int:
        return sum(1 for k, s in self._slots if k == "leaf" and s.fixed is None)

    # offsets <-> unconstrained parameters
    def offset_from_u(self, u: float) -> float:
        if u >= 1.0:
            return math.inf
        if u <= -1.0:
            return -math.inf
        return self.offset_scale * math.tan(math.pi / 2 * u)

    def u_from_offset(self, a: float) -> float:
        if a == math.inf:
            return 1.0
        if a == -math.inf:
            return -1.0
        return 2.0 / math.pi * math.atan(a / self.offset_scale)

    def decode(self, p: Sequence[float], validate: bool = True) -> Tree:
        """Build the concrete tree for parameter vector ``p``."""
        p = np.asarray(p, dtype=float)
        if p.shape != (self.n_params,):
            raise TemplateError(f"parameter vector has length {p.size}, template needs {self.n_params}")
        if not np.all(np.isfinite(p)):
            raise TemplateError("parameter vector has non-finite entries")
        pos = 0

        def build(node: TemplateTree) -> Tree:
            nonlocal pos
            if isinstance(node, TemplateLeaf):
                if node.fixed is not None:
                    return node.fixed
                f = np.zeros((self.r, self.dim + 1))
                f[:-1] = p[pos : pos + self.leaf_size].reshape(self.r - 1, self.dim + 1)
                pos += self.leaf_size
                try:
                    return Leaf(f)
                except GeometryError as exc:
                    raise TemplateError(f"decoded leaf is invalid: {exc}") from None
            if node.a is None:
                a = self.offset_from_u(float(p[pos]))
                pos += 1
            else:
                a = node.a
            left = build(node.left)
            right = build(node.right)
            return Node(node.v, a, left, right)

        return build(self.root)

    def encode(self, tree: Tree) -> np.ndarray:
        """Inverse of :meth:`decode` for trees of this template's shape.

        Free leaves must already be gauge fixed (last functional zero); use
        :func:`gauge_fix` first otherwise.
        """
        out: list[float] = []

        def walk(node: TemplateTree, t: Tree) -> None:
            if isinstance(node, TemplateLeaf):
                if not isinstance(t, Leaf):
                    raise TemplateError("tree shape does not match template")
                if node.fixed is None:
                    if np.any(t.functionals[-1] != 0):
                        raise TemplateError("free leaf is not gauge fixed")
                    out.extend(t.functionals[:-1].ravel().tolist())
                return
            if not isinstance(t, Node):
                raise TemplateError("tree shape does not match template")
            if node.a is None:
                out.append(self.u_from_offset(t.a))
            walk(node.left, t.left)
            walk(node.right, t.right)

        walk(self.root, tree)
        return np.array(out)

    def to_dict(self) -> dict:
        def enc(node: TemplateTree) -> dict:
            if isinstance(node, TemplateLeaf):
                if node.fixed is None:
                    return {"type": "leaf", "functionals": None, "r": self.r}
                return tree_to_dict(node.fixed)
            return {
                "type": "node",
                "v": node.v.tolist(),
                "a": None if node.a is None else encode_extended(node.a),
                "left": enc(node.left),
                "right": enc(node.right),
            }

        out = enc(self.root)
        out["dim"] = self.dim
        return out


def gauge_fix(leaf: Leaf) -> Leaf:
    """Subtract the last functional from all of them; cells do not move."""
    return Leaf(leaf.functionals - leaf.functionals[-1])


def template_from_dict(obj, r: Optional[int] = None, where: str = "$") -> TreeTemplate:
    """Parse a template: a tree file where ``"a": null`` and
    ``"functionals": null`` mark free parameters. Free leaves carry ``"r"``
    unless ``r`` is given."""
    dims: set[int] = set()
    rs: set[int] = set() if r is None else {r}

    def parse(o, w: str) -> TemplateTree:
        if not isinstance(o, dict):
            raise TemplateError(f"{w}: expected an object")
        kind = o.get("type")
        if kind == "leaf":
            if "functionals" not in o:
                raise TemplateError(f"{w}: missing field 'functionals'")
            if o["functionals"] is None:
                if "r" in o:
                    rs.add(int(o["r"]))
                return TemplateLeaf()
            try:
                leaf = Leaf(np.asarray(o["functionals"], dtype=float))
            except (GeometryError, TypeError, ValueError) as exc:
                raise TemplateError(f"{w}: {exc}") from None
            dims.add(leaf.dim)
            rs.add(leaf.r)
            return TemplateLeaf(leaf)
        if kind == "node":
            for name in ("v", "left", "right"):
                if name not in o:
                    raise TemplateError(f"{w}: missing field {name!r}")
            try:
                v = normalize_direction(o["v"])
            except (GeometryError, TypeError, ValueError) as exc:
                raise TemplateError(f"{w}.v: {exc}") from None
            dims.add(v.size)
            a = o.get("a")
            if a is not None:
                try:
                    a = decode_extended(a, f"{w}.a")
                except GeometryError as exc:
                    raise TemplateError(str(exc)) from None
            return TemplateNode(v, parse(o["left"], f"{w}.left"), parse(o["right"], f"{w}.right"), a)
        raise TemplateError(f"{w}: unknown type {kind!r}")

    root = parse(obj, where)
    if len(rs) != 1:
        raise TemplateError(f"{where}: cannot determine a single r (found {sorted(rs) or 'none'})")
    if len(dims) > 1:
        raise TemplateError(f"{where}: mixed dimensions {sorted(dims)}")
    dim = dims.pop() if dims else obj.get("dim") if isinstance(obj, dict) else None
    if dim is None:
        raise TemplateError(f"{where}: cannot determine the dimension; add \"dim\" to the root")
    return TreeTemplate(root, rs.pop(), int(dim))


def balanced_template(t: int, r: int, dim: int, directions: Optional[Sequence] = None) -> TreeTemplate:
    """Balanced tree with ``t`` free leaves.

    Node directions are taken from ``directions`` in preorder, cycling; the
    default cycles through the canonical basis ``e_1, ..., e_d``.
    """
    if t < 1:
        raise TemplateError("need at least one leaf")
    if directions is None:
        directions = list(np.eye(dim))
    directions = [normalize_direction(v) for v in directions]
    counter = 0

    def build(k: int) -> TemplateTree:
        nonlocal counter
        if k == 1:
            return TemplateLeaf()
        v = directions[counter % len(directions)]
        counter += 1
        kl = (k + 1) // 2
        return TemplateNode(v, build(kl), build(k - kl))

    return TreeTemplate(build(t), r, dim)


def single_cut_template(dim: int, v=None, r: int = 2) -> TreeTemplate:
    """One free offset between two constant leaves: thief 1 on the plus side, thief 2 on the minus side."""
    v = normalize_direction(np.eye(dim)[0] if v is None else v)
    return TreeTemplate(
        TemplateNode(v, TemplateLeaf(constant_leaf(1, r, dim)), TemplateLeaf(constant_leaf(2, r, dim))),
        r,
        dim,
    )


# -- evaluation ------------------------------------------------------------------------


class _Evaluator:
    """Fast hard/soft share computation for one (template, measure set) pair.

    Node directions are fixed, so projections are computed once. Arrays are
    kept full length and combined with ``np.where`` instead of routing rows.
    """

    def __init__(self, template: TreeTemplate, ms: MeasureSet):
        if template.dim != ms.dim:
            raise MeasureError(f"template lives in R^{template.dim} but the measures live in R^{ms.dim}")
        self.template = template
        self.ms = ms
        self.X = ms.packed_points
        self.owner = ms.packed_owner
        self.weights = ms.packed_weights
        self.M = len(ms)
        self.r = template.r
        n = self.X.shape[0]
        # Data scale for temperatures.
        self.scale = float(np.sqrt(np.mean(np.var(self.X, axis=0)))) or 1.0
        self._proj = {}
        for _, slot in template._slots:
            if isinstance(slot, TemplateNode):
                self._proj[id(slot)] = _dot(self.X, slot.v)
        self._Xh = np.hstack([self.X, np.ones((n, 1))])
        self._flat_base = self.owner * self.r
        # measure-by-point weight matrix: shares = W @ thief_prob
        self._W = np.zeros((self.M, n))
        self._W[self.owner, np.arange(n)] = self.weights
        self._row_mass = self._W.sum(axis=1)
        self._fixed_cells = {}
        self._fixed_vals = {}
        for _, slot in template._slots:
            if isinstance(slot, TemplateLeaf) and slot.fixed is not None:
                vals = slot.fixed.values(self.X)
                self._fixed_cells[id(slot)] = np.argmax(vals, axis=1)
                self._fixed_vals[id(slot)] = vals
        self.evals = 0

    def _split(self, p: np.ndarray):
        """Per-slot values in preorder: offsets for nodes, functional arrays for leaves."""
        t = self.template
        pos = 0
        out = []
        for kind, slot in t._slots:
            if kind == "node":
                if slot.a is None:
                    out.append(t.offset_from_u(float(p[pos])))
                    pos += 1
                else:
                    out.append(slot.a)
            elif slot.fixed is None:
                f = np.zeros((self.r, t.dim + 1))
                f[:-1] = p[pos : pos + t.leaf_size].reshape(self.r - 1, t.dim + 1)
                pos += t.leaf_size
                out.append(f)
            else:
                out.append(None)
        return out

    def hard_cells(self, p: np.ndarray) -> np.ndarray:
        vals = iter(self._split(p))
        n = self.X.shape[0]

        def walk(node):
            value = next(vals)
            if isinstance(node, TemplateLeaf):
                if value is None:
                    return self._fixed_cells[id(node)]
                cols = [_dot(self.X, value[i, :-1]) + value[i, -1] for i in range(self.r)]
                return np.argmax(np.stack(cols, axis=-1), axis=1)
            left = walk(node.left)
            right = walk(node.right)
            if value == math.inf:
                return right
            if value == -math.inf:
                return left
            return np.where(self._proj[id(node)] >= value, left, right)

        return walk(self.template.root)

    def hard_shares(self, p: np.ndarray) -> np.ndarray:
        self.evals += 1
        cell = self.hard_cells(p)
        shares = np.bincount(self._flat_base + cell, weights=self.weights, minlength=self.M * self.r)
        return shares.reshape(self.M, self.r)

    def soft_thief_prob(self, p: np.ndarray, temperature: float) -> np.ndarray:
        """N x r thief probabilities at ``temperature`` (in data units)."""
        probs = self._soft(p, temperature)
        if self.r == 2:
            return np.column_stack([probs, 1.0 - probs])
        return probs

    def _soft(self, p: np.ndarray, temperature: float) -> np.ndarray:
        # For r == 2 this returns only the thief-1 probability (1D).
        vals = iter(self._split(p))
        inv_t = 1.0 / temperature
        two = self.r == 2

        def walk(node):
            value = next(vals)
            if isinstance(node, TemplateLeaf):
                if value is None:
                    cells = self._fixed_cells[id(node)]
                    return (cells == 0).astype(float) if two else np.eye(self.r)[cells]
                f = value
                g = f[:, :-1]
                if two:
                    # Signed distance to the leaf boundary, squashed.
                    norm = max(float(np.sqrt(g[0] @ g[0])), 1e-300)
                    z = self._Xh @ f[0]
                    return 0.5 + 0.5 * np.tanh(z * (inv_t / norm))
                spread = float(np.sqrt(np.mean(np.sum((g - g.mean(axis=0)) ** 2, axis=1))))
                spread = max(spread, 1e-300)
                z = (self._Xh @ f.T) * (inv_t / spread)
                z -= z.max(axis=1, keepdims=True)
                np.exp(z, out=z)
                z /= z.sum(axis=1, keepdims=True)
                return z
            left = walk(node.left)
            right = walk(node.right)
            if value == math.inf:
                return right
            if value == -math.inf:
                return left
            pl = 0.5 + 0.5 * np.tanh((self._proj[id(node)] - value) * (2.0 * inv_t))
            if not two:
                pl = pl[:, None]
            return right + pl * (left - right)

        return walk(self.template.root)

    def _aggregate(self, thief_prob: np.ndarray) -> np.ndarray:
        return self._W @ thief_prob

    def soft_shares(self, p: np.ndarray, temperature: float) -> np.ndarray:
        self.evals += 1
        probs = self._soft(p, temperature)
        if self.r == 2:
            s1 = self._W @ probs
            return np.column_stack([s1, self._row_mass - s1])
        return self._W @ probs


def _sq(phi_vals: np.ndarray) -> float:
    return float(np.sum(phi_vals * phi_vals))


# -- config and results ----------------------------------------------------------------


@dataclass(frozen=True)
class SolveConfig:
    tolerance: float = 1e-6
    restarts: int = 8
    max_evals: int = 20000
    seed: int = 0
    init_scale: float = 1.0
    # Temperatures relative to the data scale, hottest first.
    schedule: tuple[float, ...] = (1.0, 0.3, 0.1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5)
    final_temperature: float = 1e-9
    stop_on_fair: bool = True
    # A restart whose hard discrepancy is still above ``abandon_above`` after
    # stage ``abandon_stage`` is dropped early; None keeps every restart going.
    abandon_above: Optional[float] = 0.05
    abandon_stage: int = 2

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        if self.max_evals < 1:
            raise ValueError("max_evals must be at least 1")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be positive")

    def to_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "restarts": self.restarts,
            "max_evals": self.max_evals,
            "seed": self.seed,
            "init_scale": self.init_scale,
            "schedule": list(self.schedule),
            "final_temperature": self.final_temperature,
            "stop_on_fair": self.stop_on_fair,
            "abandon_above": self.abandon_above,
            "abandon_stage": self.abandon_stage,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "SolveConfig":
        obj = dict(obj)
        if "schedule" in obj:
            obj["schedule"] = tuple(obj["schedule"])
        return cls(**obj)


FAIR = "Fair"
BEST_EFFORT = "BestEffort"


@dataclass
class SolveResult:
    status: str
    tree: Tree
    params: np.ndarray
    shares: np.ndarray
    discrepancy: float
    evals_used: int
    restart_index: int
    seed: int
    soft_hard_gap: float = float("nan")
    trace: list = field(default_factory=list)

    @property
    def fair(self) -> bool:
        return self.status == FAIR

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "discrepancy": self.discrepancy,
            "shares": self.shares.tolist(),
            "phi": phi_from_shares(self.shares).tolist(),
            "tree": tree_to_dict(self.tree),
            "params": self.params.tolist(),
            "evals_used": self.evals_used,
            "restart_index": self.restart_index,
            "seed": self.seed,
            "soft_hard_gap": self.soft_hard_gap,
        }


# -- search ------------------------------------------------------------------------------


class _Budget(Exception):
    pass


def _initial_params(template: TreeTemplate, ev: _Evaluator, rng: np.random.Generator, scale: float) -> np.ndarray:
    """Random start: node cuts at random quantiles of the pooled data, leaf
    boundaries through random data points with random normals."""
    p = []
    X = ev.X
    center = X.mean(axis=0)
    for kind, slot in template._slots:
        if kind == "node" and slot.a is None:
            proj = ev._proj[id(slot)]
            q = rng.uniform(0.15, 0.85)
            p.append(template.u_from_offset(float(np.quantile(proj, q))))
        elif kind == "leaf" and slot.fixed is None:
            rows = []
            for _ in range(template.r - 1):
                g = rng.normal(0.0, scale, template.dim)
                anchor = X[rng.integers(X.shape[0])] * 0.5 + center * 0.5
                rows.append(np.concatenate([g, [-float(g @ anchor)]]))
            p.extend(np.concatenate(rows).tolist())
    return np.array(p, dtype=float)


def _run_restart(template, ev, cfg, restart_index, deadline):
    rng = np.random.default_rng([cfg.seed, restart_index])
    start_evals = ev.evals
    budget_end = start_evals + cfg.max_evals
    tol = cfg.tolerance
    x = _initial_params(template, ev, rng, cfg.init_scale)
    n = x.size
    best_hard = (math.inf, x.copy())
    trace = []

    def check_hard(x):
        if ev.evals >= budget_end:
            raise _Budget
        d = float(np.max(np.abs(phi_from_shares(ev.hard_shares(x)))))
        if d < best_hard[0]:
            best_hard_update(d, x)
        return d

    def best_hard_update(d, x):
        nonlocal best_hard
        best_hard = (d, x.copy())

    try:
        if n == 0:
            check_hard(x)
            return best_hard, trace
        for stage, tau in enumerate(cfg.schedule):
            T = tau * ev.scale

            def f(z, T=T):
                if ev.evals >= budget_end or (deadline is not None and time.monotonic() > deadline):
                    raise _Budget
                z = np.clip(z, -1e6, 1e6)
                return _sq(phi_from_shares(ev.soft_shares(z, T)))

            step = max(0.3 * min(tau, 1.0), 1e-5) * max(1.0, float(np.max(np.abs(x))))
            for _ in range(3):
                simplex = np.vstack([x] + [x + step * rng.normal(size=n) for _ in range(n)])
                res = minimize(
                    f,
                    x,
                    method="Nelder-Mead",
                    options={
                        "initial_simplex": simplex,
                        "maxfev": 400 * n,
                        "xatol": 1e-10,
                        "fatol": 1e-16,
                        "adaptive": n > 4,
                    },
                )
                improved = res.fun < f(x) - 1e-18
                x = res.x
                if not improved:
                    break
                step *= 0.3
            d = check_hard(x)
            trace.append({"restart": restart_index, "stage": stage, "temperature": T, "soft": float(res.fun), "hard": d})
            if d < tol:
                break
            if (cfg.abandon_above is not None and stage >= cfg.abandon_stage
                    and best_hard[0] > cfg.abandon_above and restart_index < cfg.restarts - 1):
                break
    except _Budget:
        pass
    return best_hard, trace


def solve_fair(template: TreeTemplate, ms: MeasureSet, cfg: SolveConfig = SolveConfig(),
               time_limit: Optional[float] = None) -> SolveResult:
    """Multistart annealed simplex search for a fair distribution.

    Returns ``status == "Fair"`` when the hard discrepancy of the best tree
    is below ``cfg.tolerance``; running out of budget yields a
    ``"BestEffort"`` result, never an exception.
    """
    ev = _Evaluator(template, ms)
    deadline = None if time_limit is None else time.monotonic() + time_limit
    best = None  # (discrepancy, restart, params)
    trace = []
    for k in range(cfg.restarts):
        (d, x), tr = _run_restart(template, ev, cfg, k, deadline)
        trace.extend(tr)
        if best is None or d < best[0]:
            best = (d, k, x)
        if cfg.stop_on_fair and best[0] < cfg.tolerance:
            break
        if deadline is not None and time.monotonic() > deadline:
            break
    d, k, x = best
    tree = _decode_robust(template, x)
    shares = thief_shares(tree, ms)
    disc = float(np.max(np.abs(phi_from_shares(shares))))
    gap = float("nan")
    if template.n_params:
        soft = ev._aggregate(ev.soft_thief_prob(x, cfg.final_temperature * ev.scale))
        gap = float(np.max(np.abs(soft - shares)))
    return SolveResult(
        status=FAIR if disc < cfg.tolerance else BEST_EFFORT,
        tree=tree,
        params=x,
        shares=shares,
        discrepancy=disc,
        evals_used=ev.evals,
        restart_index=k,
        seed=cfg.seed,
        soft_hard_gap=gap,
        trace=trace,
    )


def _decode_robust(template: TreeTemplate, x: np.ndarray) -> Tree:
    try:
        return template.decode(x)
    except TemplateError:
        # Coinciding functionals: nudge by a relative 1e-9 and retry.
        return template.decode(x + 1e-9 * (1.0 + np.abs(x)))


# -- one-dimensional quantiles and the planar ham sandwich ---------------------------------------

_CUM_SLACK = 1e-12


def _quantile_index(values: np.ndarray, weights: np.ndarray, q: float):
    """Sorted values, and the index of the smallest atom with cumulative weight >= q."""
    order = np.argsort(values, kind="stable")
    v = values[order]
    w = weights[order]
    cum = np.cumsum(w)
    k = int(np.searchsorted(cum, q - _CUM_SLACK, side="left"))
    k = min(k, v.size - 1)
    return v, cum, k


def bisect_1d(m: Measure, q: float) -> float:
    """Smallest ``a`` whose left tail ``{x <= a}`` carries at least ``q`` mass.

    Cumulative sums are compared with a slack of 1e-12 so that, e.g., fifty
    weights of 0.01 reach 1/2.
    """
    if m.dim != 1:
        raise MeasureError(f"bisect_1d needs a measure on the line, got d = {m.dim}")
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    v, _, k = _quantile_index(m.points[:, 0], m.weights, q)
    return float(v[k])


def _bisecting_interval(proj: np.ndarray, weights: np.ndarray):
    """Offsets ``a`` in ``(lo, hi]`` put exactly half the mass on ``{proj >= a}``.

    Returns ``(lo, hi, exact)``; ``exact`` is False when an atom straddles
    the median so no offset halves the measure.
    """
    v, cum, k = _quantile_index(proj, weights, 0.5)
    lo = v[k]
    exact = abs(cum[k] - 0.5) <= _CUM_SLACK
    above = v[v > lo]
    hi = float(above[0]) if above.size else lo
    return float(lo), float(hi), exact and above.size > 0


def _direction(theta: float) -> np.ndarray:
    return np.array([math.cos(theta), math.sin(theta)])


def ham_sandwich_2d(m1: Measure, m2: Measure, grid: int = 720, strict: bool = True) -> OrientedHyperplane:
    """A line ``(v, a)`` whose closed plus side holds half of each measure.

    The direction angle is swept over ``[0, pi]``; for each angle both
    measures' bisecting offsets are found by 1D quantiles, and the gap
    between the two gap midpoints is root-found (grid bracket, then
    bisection). The gap flips sign between ``0`` and ``pi``.

    With ``strict`` (default) a failure to reach an exact bisector raises
    :class:`ResolutionError`; otherwise the best cut found is returned and
    :func:`ham_sandwich_report` can be used to inspect it.
    """
    return ham_sandwich_report(m1, m2, grid=grid, strict=strict)["hyperplane"]


def _line_shares(h: OrientedHyperplane, m: Measure) -> float:
    proj = _dot(m.points, h.v)
    if h.a == math.inf:
        return 0.0
    return float(m.weights[proj >= h.a].sum())


def ham_sandwich_report(m1: Measure, m2: Measure, grid: int = 720, strict: bool = True) -> dict:
    if m1.dim != 2 or m2.dim != 2:
        raise MeasureError("ham_sandwich_2d needs two planar measures")
    if grid < 2:
        raise ValueError("grid must be at least 2")

    def gap(theta: float):
        v = _direction(theta)
        lo1, hi1, e1 = _bisecting_interval(_dot(m1.points, v), m1.weights)
        lo2, hi2, e2 = _bisecting_interval(_dot(m2.points, v), m2.weights)
        return 0.5 * (lo1 + hi1) - 0.5 * (lo2 + hi2), (lo1, hi1, lo2, hi2, e1 and e2)

    thetas = np.linspace(0.0, math.pi, grid + 1)
    values = [gap(float(t))[0] for t in thetas]
    bracket = None
    for k in range(grid):
        if values[k] == 0.0:
            bracket = (float(thetas[k]), float(thetas[k]))
            break
        if (values[k] < 0) != (values[k + 1] < 0):
            bracket = (float(thetas[k]), float(thetas[k + 1]))
            break
    if bracket is None:
        raise ResolutionError(
            f"no sign change of the bisector gap on a {grid}-point angular grid; refine the grid"
        )
    lo_t, hi_t = bracket
    g_lo = gap(lo_t)[0]
    for _ in range(200):
        if hi_t - lo_t <= 1e-15:
            break
        mid = 0.5 * (lo_t + hi_t)
        g_mid = gap(mid)[0]
        if g_mid == 0.0:
            lo_t = hi_t = mid
            break
        if (g_mid < 0) == (g_lo < 0):
            lo_t, g_lo = mid, g_mid
        else:
            hi_t = mid

    best = None
    for theta in (lo_t, hi_t):
        v = _direction(theta)
        _, (lo1, hi1, lo2, hi2, exact) = gap(theta)
        lo, hi = max(lo1, lo2), min(hi1, hi2)
        a = 0.5 * (lo + hi) if lo < hi else 0.5 * (0.5 * (lo1 + hi1) + 0.5 * (lo2 + hi2))
        h = OrientedHyperplane(v, a)
        s1, s2 = _line_shares(h, m1), _line_shares(h, m2)
        err = max(abs(s1 - 0.5), abs(s2 - 0.5))
        if best is None or err < best["error"]:
            best = {"hyperplane": h, "shares": (s1, s2), "error": err, "theta": theta}
    best["status"] = FAIR if best["error"] <= 1e-9 else BEST_EFFORT
    if strict and best["status"] != FAIR:
        raise ResolutionError(
            f"no exact bisecting line found (best error {best['error']:.3g}); "
            "inputs may admit no exact bisector (odd or straddling atoms)"
        )
    return best


def hyperplane_tree(h: OrientedHyperplane, r: int = 2) -> Tree:
    """Tree giving the closed plus side of ``h`` to thief 1, the rest to thief 2."""
    d = h.dim
    if math.isinf(h.a):
        return constant_leaf(2 if h.a > 0 else 1, r, d)
    f = np.zeros((r, d + 1))
    f[0, :d] = h.v
    f[0, d] = -h.a
    for s in range(2, r):
        f[s, d] = -1.0 - s  # always below functional 2, which is zero
    return Leaf(f)


def result_to_json(result: SolveResult) -> str:
    return json.dumps(result.to_dict(), indent=2)
