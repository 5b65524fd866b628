"""Index arithmetic on the regular binary tree.

Nodes are positive integers with the root at 1; the children of ``n`` are
``2n`` and ``2n + 1``. Generation ``r`` holds the labels ``2**r .. 2**(r+1) - 1``
and the subtree of depth ``r`` holds generations ``0..r``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

MAX_DEPTH = 40


class DepthError(ValueError):
    """Raised when a depth exceeds :data:`MAX_DEPTH` or is negative."""


class RootPathError(ValueError):
    """The root has an empty ancestry path."""


def check_depth(m: int) -> int:
    if m < 0 or m > MAX_DEPTH:
        raise DepthError(f"depth must be in [0, {MAX_DEPTH}], got {m}")
    return int(m)


def generation(n: int) -> int:
    """Generation of node ``n``, i.e. ``floor(log2(n))``."""
    if n < 1:
        raise ValueError(f"node labels start at 1, got {n}")
    return int(n).bit_length() - 1


def parent(n: int) -> int:
    if n < 2:
        raise RootPathError("the root has no parent")
    return n >> 1


def children(n: int) -> tuple[int, int]:
    return 2 * n, 2 * n + 1


def subtree_size(m: int) -> int:
    """``|T_m| = 2**(m+1) - 1``."""
    return (1 << (check_depth(m) + 1)) - 1


@dataclass(frozen=True)
class IndexSet:
    """A set of node labels: a generation, a subtree, or an explicit list.

    Members are produced lazily for the first two kinds; iterating
    ``IndexSet.subtree(30)`` never allocates a list.
    """

    kind: str
    m: int = 0
    nodes: tuple[int, ...] = ()

    @classmethod
    def generation(cls, m: int) -> "IndexSet":
        return cls("generation", check_depth(m))

    @classmethod
    def subtree(cls, m: int) -> "IndexSet":
        return cls("subtree", check_depth(m))

    @classmethod
    def explicit(cls, nodes: Iterable[int]) -> "IndexSet":
        uniq = tuple(sorted(set(int(i) for i in nodes)))
        if uniq and uniq[0] < 1:
            raise ValueError("node labels start at 1")
        return cls("explicit", 0, uniq)

    def members(self) -> Sequence[int]:
        if self.kind == "generation":
            return range(1 << self.m, 1 << (self.m + 1))
        if self.kind == "subtree":
            return range(1, 1 << (self.m + 1))
        if self.kind == "explicit":
            return self.nodes
        raise ValueError(f"unknown index set kind {self.kind!r}")

    def __iter__(self) -> Iterator[int]:
        return iter(self.members())

    def __len__(self) -> int:
        return len(self.members())

    @property
    def max_node(self) -> int:
        members = self.members()
        return members[-1] if len(members) else 0

    @property
    def depth(self) -> int:
        """Deepest generation touched by the set."""
        return generation(self.max_node) if len(self) else 0

    def slice_bounds(self) -> tuple[int, int] | None:
        """``(start, stop)`` when the members form a contiguous label range."""
        if self.kind in ("generation", "subtree"):
            r = self.members()
            return r.start, r.stop
        return None

    def describe(self) -> str:
        if self.kind == "explicit":
            return f"explicit({len(self.nodes)})"
        return f"{self.kind}({self.m})"


def members(s: IndexSet) -> Sequence[int]:
    return s.members()


@dataclass(frozen=True)
class AncestryPath:
    """Types along the path from the root to a node.

    ``bits[i-1]`` is the type (0 even, 1 odd) of the ancestor in generation
    ``i``; the last bit is the node's own type. ``a[k]`` counts the type-1
    ancestors among the last ``k`` generations of the path.
    """

    node: int
    bits: tuple[int, ...]
    a: tuple[int, ...]

    def reconstruct(self) -> int:
        n = 1
        for b in self.bits:
            n = 2 * n + b
        return n


def ancestry(n: int) -> AncestryPath:
    """Path bits and suffix counts of type-1 ancestors for node ``n >= 2``."""
    if n < 2:
        raise RootPathError("the root has an empty ancestry path")
    depth = generation(n)
    bits = tuple((n >> (depth - i)) & 1 for i in range(1, depth + 1))
    a = [0]
    for k in range(1, depth):
        a.append(a[-1] + bits[depth - k])
    return AncestryPath(n, bits, tuple(a))
