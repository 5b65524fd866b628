"""Tree trajectories and their additive functionals."""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _core
from .kernel import BifurcatingKernel, NBARModel
from .tree import IndexSet, check_depth, subtree_size


@dataclass(frozen=True)
class TreeSample:
    """One trajectory on T_depth.

    ``values[k]`` is X_k for ``k = 1 .. 2**(depth+1) - 1``; ``values[0]`` is
    NaN so that labels index the array directly.
    """

    depth: int
    values: np.ndarray
    seed: tuple[int, int]

    def __post_init__(self):
        self.values.setflags(write=False)

    @property
    def size(self) -> int:
        return subtree_size(self.depth)

    def generation(self, r: int) -> np.ndarray:
        return self.values[1 << r:1 << (r + 1)]


@dataclass(frozen=True)
class Functional:
    """Test function applied to single values or to (X_i, X_2i, X_2i+1).

    ``f`` must accept numpy arrays. For triples ``lip`` is the Lipschitz
    constant with respect to the l1 metric on the triple.
    """

    arity: str
    f: Callable
    lip: float
    name: str = "custom"

    def __post_init__(self):
        if self.arity not in ("node", "triple"):
            raise ValueError(f"arity must be 'node' or 'triple', got {self.arity!r}")
        if not (0 < self.lip < np.inf):
            raise ValueError("declared Lipschitz constant must be positive and finite")

    @classmethod
    def identity(cls) -> "Functional":
        return cls("node", lambda x: x, 1.0, "identity")

    @classmethod
    def constant(cls, c: float) -> "Functional":
        # the zero function has lip 0; any positive value is a valid bound
        return cls("node", lambda x: np.full(np.shape(x), float(c)), 1.0, f"constant({c})")

    @classmethod
    def innovation(cls, model: NBARModel) -> "Functional":
        """(x, y, z) -> y + z - f0(x) - f1(x), the sum of the two noise terms."""
        f0, f1 = model.f0, model.f1
        lip = max(1.0, f0.lip + f1.lip)
        return cls("triple", lambda x, y, z: y + z - f0(x) - f1(x), lip, "innovation")


def simulate_tree(k: BifurcatingKernel, n: int, seed: tuple[int, int] | int) -> TreeSample:
    """Draw X_i for i in T_n. ``seed`` is ``(master, replicate)``."""
    check_depth(n)
    master, replicate = (seed, 0) if isinstance(seed, (int, np.integer)) else seed
    key = _core.stream_key(int(master), int(replicate))
    u_root = _core.counter_uniforms(key, np.array([(1 << 2) | _core.COORD_INIT], dtype=np.uint64))
    x1 = float(k.initial.from_uniform(u_root)[0])
    fast = k.fast_params()
    if fast is not None:
        values = _core.fill_tree(key, n, x1, *fast)
    else:
        values = np.empty(1 << (n + 1))
        values[0] = np.nan
        values[1] = x1
        for r in range(1, n + 1):
            lo, hi = 1 << r, 1 << (r + 1)
            u = _core.node_uniforms(key, lo, hi, _core.COORD_NOISE)
            y, z = k.sample(values[lo >> 1:hi >> 1], u[0::2], u[1::2])
            values[lo:hi:2] = y
            values[lo + 1:hi:2] = z
    return TreeSample(n, values, (int(master), int(replicate)))


def _triple_views(values: np.ndarray, lo: int, hi: int):
    return values[lo:hi], values[2 * lo:2 * hi:2], values[2 * lo + 1:2 * hi:2]


def functional_sum(s: TreeSample, I: IndexSet, g: Functional) -> float:
    """M_I(g): the sum of g over the index set."""
    v = s.values
    limit = s.size if g.arity == "node" else subtree_size(s.depth - 1) if s.depth >= 1 else 0
    if len(I) and I.max_node > limit:
        raise IndexError(
            f"index set {I.describe()} reaches node {I.max_node}, beyond the "
            f"{'tree' if g.arity == 'node' else 'nodes with children'} of depth {s.depth}"
        )
    bounds = I.slice_bounds()
    if bounds is not None:
        # generations one at a time keeps the triple views strided, never copied
        total = 0.0
        lo_all, hi_all = bounds
        r = lo_all.bit_length() - 1
        lo = lo_all
        while lo < hi_all:
            hi = min(1 << (r + 1), hi_all)
            if g.arity == "node":
                total += float(np.sum(g.f(v[lo:hi])))
            else:
                total += float(np.sum(g.f(*_triple_views(v, lo, hi))))
            lo, r = hi, r + 1
        return total
    idx = np.asarray(I.members(), dtype=np.int64)
    if g.arity == "node":
        return float(np.sum(g.f(v[idx])))
    return float(np.sum(g.f(v[idx], v[2 * idx], v[2 * idx + 1])))


def empirical_mean(s: TreeSample, I: IndexSet, g: Functional) -> float:
    """M_I(g) / |I|."""
    if len(I) == 0:
        raise ValueError("empty index set")
    return functional_sum(s, I, g) / len(I)


def affine_node_means(model: NBARModel, depth: int) -> np.ndarray:
    """Exact E[X_k] for every node of T_depth (slot 0 is NaN)."""
    if not model.is_affine:
        raise ValueError("exact means need affine f0 and f1")
    check_depth(depth)
    m = np.empty(1 << (depth + 1))
    m[0] = np.nan
    m[1] = model.initial.mean
    a0, b0, a1, b1 = model.f0.a, model.f0.b, model.f1.a, model.f1.b
    for r in range(1, depth + 1):
        lo, hi = 1 << r, 1 << (r + 1)
        parents = m[lo >> 1:hi >> 1]
        m[lo:hi:2] = a0 * parents + b0
        m[lo + 1:hi:2] = a1 * parents + b1
    return m


def expected_mean_affine(model: NBARModel, I: IndexSet) -> float:
    """E[mean of X_i over I] for an affine model, computed exactly."""
    if not model.is_affine:
        raise ValueError("exact means need affine f0 and f1")
    if len(I) == 0:
        raise ValueError("empty index set")
    depth = I.depth
    if depth > 26:
        # the generation means obey the scalar recursion m_{r+1} = a m_r + b
        return _generation_recursion_mean(model, I)
    m = affine_node_means(model, depth)
    bounds = I.slice_bounds()
    if bounds is not None:
        return float(np.mean(m[bounds[0]:bounds[1]]))
    return float(np.mean(m[np.asarray(I.members(), dtype=np.int64)]))


def _generation_recursion_mean(model: NBARModel, I: IndexSet) -> float:
    if I.kind == "explicit":
        raise ValueError("explicit index sets deeper than 26 generations are not supported")
    a = (model.f0.a + model.f1.a) / 2.0
    b = (model.f0.b + model.f1.b) / 2.0
    mean = model.initial.mean
    gens = [mean]
    for _ in range(I.m):
        mean = a * mean + b
        gens.append(mean)
    if I.kind == "generation":
        return gens[-1]
    weights = np.array([2.0**r for r in range(I.m + 1)])
    return float(np.dot(weights, gens) / weights.sum())


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("BIFURCATE_THREADS", "1") or 1)
    return max(1, int(threads))


def map_replicates(k: BifurcatingKernel, n: int, master: int, replicates: Iterable[int] | int,
                   reducer: Callable[[TreeSample], object], threads: int | None = None) -> list:
    """Simulate each replicate and apply ``reducer``; results come back in replicate order.

    The thread count changes only the schedule: every replicate's draws are a
    function of ``(master, replicate)`` alone.
    """
    reps = list(range(replicates)) if isinstance(replicates, int) else list(replicates)

    def work(rep):
        return reducer(simulate_tree(k, n, (master, rep)))

    workers = resolve_threads(threads)
    if workers == 1:
        return [work(r) for r in reps]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(work, reps))


def dump_csv(samples: Sequence[TreeSample], path) -> None:
    """Write ``replicate,node,generation,value`` rows to a path or an open text file."""
    if hasattr(path, "write"):
        _write_rows(samples, path)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(samples, fh)


def _write_rows(samples, fh):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["replicate", "node", "generation", "value"])
    for s in samples:
        rep = s.seed[1]
        for r in range(s.depth + 1):
            for node in range(1 << r, 1 << (r + 1)):
                w.writerow([rep, node, r, f"{s.values[node]:.17g}"])
