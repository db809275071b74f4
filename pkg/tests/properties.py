"""Randomized property checks. Each returns the number of violations in ``trials`` runs."""

from __future__ import annotations

import numpy as np

from fairpart.geometry import (
    Leaf,
    OrientedHyperplane,
    Side,
    apply_symmetry,
    assign_point,
    cell_polytope,
    cells,
    halfspace_side,
    permute_block,
    polygon_area,
    power_cell_index,
)
from fairpart.measures import phi, thief_shares

from conftest import random_measures, random_tree, reference_membership


def _setup(rng):
    t = int(rng.integers(1, 5))
    r = int(rng.integers(2, 5))
    d = int(rng.integers(1, 4))
    return t, r, d


def partition_of_unity(trials: int, seed: int = 0) -> int:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        t, r, d = _setup(rng)
        tree = random_tree(rng, t, r, d, inf_prob=0.2)
        ms = random_measures(rng, int(rng.integers(1, 4)), d, int(rng.integers(1, 30)))
        rows = thief_shares(tree, ms).sum(axis=1)
        bad += int(np.any(np.abs(rows - 1.0) > 1e-12))
    return bad


def phi_blocks_sum_to_zero(trials: int, seed: int = 1) -> int:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        t, r, d = _setup(rng)
        tree = random_tree(rng, t, r, d, inf_prob=0.2)
        ms = random_measures(rng, int(rng.integers(1, 4)), d, int(rng.integers(1, 30)))
        bad += int(np.any(np.abs(phi(tree, ms).sum(axis=1)) > 1e-12))
    return bad


def symmetry_equivariance(trials: int, seed: int = 2) -> int:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        t, r, d = _setup(rng)
        tree = random_tree(rng, t, r, d, inf_prob=0.2)
        ms = random_measures(rng, int(rng.integers(1, 4)), d, int(rng.integers(1, 30)))
        perm = (rng.permutation(r) + 1).tolist()
        lhs = phi(apply_symmetry(perm, tree), ms)
        rhs = permute_block(perm, phi(tree, ms))
        bad += int(not np.allclose(lhs, rhs, atol=1e-12, rtol=0))
    return bad


def _tie_free(leaf: Leaf, x, gap: float = 1e-9) -> bool:
    v = np.sort(leaf.values(np.asarray(x)))
    return v.size < 2 or v[-1] - v[-2] > gap


def argmax_invariance(trials: int, seed: int = 3) -> int:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        _, r, d = _setup(rng)
        f = rng.normal(size=(r, d + 1))
        leaf = Leaf(f)
        shifted = Leaf(f + rng.normal(size=d + 1))
        scaled = Leaf(f * rng.uniform(0.01, 100.0))
        x = rng.normal(size=d) * 3
        if not _tie_free(leaf, x):
            continue
        i = power_cell_index(leaf, x)
        bad += int(power_cell_index(shifted, x) != i or power_cell_index(scaled, x) != i)
    return bad


def membership_oracle(trials: int, seed: int = 4) -> int:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        t, r, d = _setup(rng)
        tree = random_tree(rng, t, r, d, inf_prob=0.2)
        x = rng.normal(size=d) * 2
        hits = reference_membership(tree, x)
        got = assign_point(tree, x)
        bad += int(len(hits) != 1 or hits[0] != (got.leaf_index, got.cell_index))
    return bad


def clipped_areas(trials: int, seed: int = 5) -> int:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        t = int(rng.integers(1, 5))
        r = int(rng.integers(2, 5))
        tree = random_tree(rng, t, r, 2, inf_prob=0.1)
        x0, y0 = rng.normal(size=2)
        w, h = rng.uniform(0.5, 4.0, size=2)
        bbox = (x0, y0, x0 + w, y0 + h)
        total = sum(polygon_area(cell_polytope(tree, c, bbox)) for c in cells(tree))
        bad += int(abs(total - w * h) > 1e-6)
    return bad


def two_cell_reduction(trials: int, seed: int = 6) -> int:
    """A two-functional leaf is the hyperplane of a1 - a2."""
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(trials):
        d = int(rng.integers(1, 4))
        f = rng.normal(size=(2, d + 1))
        leaf = Leaf(f)
        g = f[0, :d] - f[1, :d]
        norm = float(np.linalg.norm(g))
        h = OrientedHyperplane(g / norm, (f[1, d] - f[0, d]) / norm)
        x = rng.normal(size=d)
        side = halfspace_side(h, x)
        if abs(float(x @ h.v) - h.a) < 1e-9:
            continue
        bad += int((power_cell_index(leaf, x) == 1) != (side is Side.PLUS))
    return bad


PROPERTIES = {
    "partition of unity": partition_of_unity,
    "phi blocks sum to zero": phi_blocks_sum_to_zero,
    "symmetric-group equivariance of phi": symmetry_equivariance,
    "argmax invariance (shift, scale)": argmax_invariance,
    "assign_point vs membership oracle": membership_oracle,
    "clipped cell areas sum to box area": clipped_areas,
}
