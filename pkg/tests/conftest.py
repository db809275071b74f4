"""Shared builders and independent reference oracles for the test suite."""

from __future__ import annotations

import math

import numpy as np
import pytest

from fairpart.geometry import Leaf, Node
from fairpart.measures import Measure, MeasureSet


def random_leaf(rng: np.random.Generator, r: int, d: int) -> Leaf:
    return Leaf(rng.normal(size=(r, d + 1)))


def random_tree(rng: np.random.Generator, t: int, r: int, d: int, inf_prob: float = 0.0):
    """Random tree with ``t`` leaves; node offsets occasionally infinite."""
    if t == 1:
        return random_leaf(rng, r, d)
    v = rng.normal(size=d)
    v /= np.linalg.norm(v)
    a = float(rng.normal(scale=0.5))
    if rng.random() < inf_prob:
        a = math.inf if rng.random() < 0.5 else -math.inf
    k = int(rng.integers(1, t))
    return Node(v, a, random_tree(rng, k, r, d, inf_prob), random_tree(rng, t - k, r, d, inf_prob))


def random_measures(rng: np.random.Generator, m: int, d: int, n: int = 40) -> MeasureSet:
    return MeasureSet.of(
        [Measure(f"m{k}", rng.normal(size=(n, d)), rng.uniform(0.1, 2.0, size=n)) for k in range(m)]
    )


def gaussian_instance(seed: int, m: int, n: int) -> MeasureSet:
    """Random anisotropic Gaussian samples with random centers, equal weights."""
    rng = np.random.default_rng(seed)
    out = []
    for k in range(m):
        mean = rng.normal(0.0, 1.0, 2)
        A = rng.normal(0.0, 0.5, (2, 2))
        out.append(Measure.uniform(f"m{k}", rng.normal(size=(n, 2)) @ A.T + mean))
    return MeasureSet.of(out)


def reference_membership(tree, x):
    """Brute-force membership oracle.

    Enumerates every (leaf, cell) pair and tests each defining inequality of
    the cell directly: the root-to-leaf halfspace chain (closed plus side,
    open minus side) and the leaf's argmax with lowest-index ties. Exactly
    one pair must pass.
    """
    chains = []

    def collect(node, chain):
        if isinstance(node, Leaf):
            chains.append((node, chain))
            return
        collect(node.left, chain + [(node, True)])
        collect(node.right, chain + [(node, False)])

    collect(tree, [])
    hits = []
    for li, (leaf, chain) in enumerate(chains):
        ok = True
        for node, plus in chain:
            if node.a == math.inf:
                inside = False
            elif node.a == -math.inf:
                inside = True
            else:
                s = sum(float(x[k]) * float(node.v[k]) for k in range(len(x)))
                inside = s >= node.a
            if inside != plus:
                ok = False
                break
        if not ok:
            continue
        vals = [sum(float(x[k]) * float(row[k]) for k in range(len(x))) + float(row[-1]) for row in leaf.functionals]
        for i in range(leaf.r):
            if all(vals[i] > vals[j] for j in range(i)) and all(vals[i] >= vals[j] for j in range(i + 1, leaf.r)):
                hits.append((li + 1, i + 1))
    return hits


def tally_shares(tree, ms: MeasureSet) -> np.ndarray:
    """Per-point tally of thief shares via :func:`reference_membership`."""
    out = np.zeros((len(ms.measures), tree.r))
    for i, m in enumerate(ms.measures):
        for x, w in zip(m.points, m.weights):
            ((_, thief),) = reference_membership(tree, x)
            out[i, thief - 1] += w
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ----------------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, passed: bool, detail: str) -> str:
    line = f"{'PASS' if passed else 'FAIL'}  {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
