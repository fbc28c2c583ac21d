"""Breadth-first boolean-array model of an adaptive-mesh-refinement tree.

A mesh over the unit box refines recursively: a refined cell splits into
2**dim equal children, the x coordinate varying fastest within a sibling
block. The whole hierarchy is a single boolean per node in breadth-first
order, True for refined nodes and False for leaves. Level L+1 holds
exactly 2**dim entries for every True entry of level L, sibling blocks
ordered by their father's position, so the level sizes follow from the
booleans alone and the array is self-describing.

A useful consequence of that ordering: the sibling blocks tile the node
range [1, n) contiguously, and the g-th block's father is the g-th
refined node in breadth-first order. Child lookup, father lookup and
level lookup are all O(1) after one pass over the array.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

from .errors import MalformedTree

FIELD_DTYPE = np.float64


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AmrTree:
    """Refinement structure of one mesh, immutable after construction.

    Build instances through :func:`build_tree`, which validates the
    breadth-first sequence and fills in the level sizes.
    """

    dim: int
    refinement: np.ndarray
    level_counts: tuple[int, ...]

    @property
    def n_children(self) -> int:
        return 1 << self.dim

    @property
    def node_count(self) -> int:
        return int(self.refinement.size)

    @property
    def depth(self) -> int:
        """Deepest level present (root is level 0)."""
        return len(self.level_counts) - 1

    @property
    def group_count(self) -> int:
        """Number of sibling blocks, one per refined node."""
        return (self.node_count - 1) // self.n_children

    # Derived index tables. All are O(n) once and cached; the dataclass is
    # frozen but cached_property writes straight into __dict__, which is fine.

    @cached_property
    def _level_starts(self) -> np.ndarray:
        return _readonly(np.concatenate(([0], np.cumsum(self.level_counts, dtype=np.int64))))

    @cached_property
    def _refined_index(self) -> np.ndarray:
        """Breadth-first indices of refined nodes; entry g is the father of block g."""
        return _readonly(np.flatnonzero(self.refinement))

    @cached_property
    def _refined_rank(self) -> np.ndarray:
        """For refined nodes, their rank among refined nodes; junk elsewhere."""
        return _readonly(np.cumsum(self.refinement, dtype=np.int64) - 1)

    @cached_property
    def _group_level_offsets(self) -> np.ndarray:
        """Prefix sums of refined-node counts per level.

        Blocks whose father sits at level L occupy the group-id range
        [offsets[L], offsets[L+1]).
        """
        starts = self._level_starts
        per = [
            int(self.refinement[starts[L]:starts[L + 1]].sum())
            for L in range(len(self.level_counts))
        ]
        return _readonly(np.concatenate(([0], np.cumsum(per, dtype=np.int64))))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, AmrTree)
            and self.dim == other.dim
            and np.array_equal(self.refinement, other.refinement)
        )

    __hash__ = None  # type: ignore[assignment]


def build_tree(dim: int, refinement) -> AmrTree:
    """Parse a breadth-first boolean sequence into a validated tree.

    Raises MalformedTree when the sequence ends mid-level or carries
    trailing entries after the last (all-leaf) level.
    """
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim!r}")
    bits = np.array(refinement, dtype=bool).ravel()
    if bits.size == 0:
        raise MalformedTree("empty refinement sequence")
    nch = 1 << dim
    n = bits.size
    counts = []
    start, width = 0, 1
    while True:
        if start + width > n:
            raise MalformedTree(
                f"level {len(counts)} needs {width} nodes but the sequence "
                f"ends after {n - start}"
            )
        counts.append(width)
        refined = int(bits[start:start + width].sum())
        start += width
        if refined == 0:
            break
        width = refined * nch
    if start != n:
        raise MalformedTree(f"{n - start} trailing entries after the final all-leaf level")
    return AmrTree(dim=dim, refinement=_readonly(bits), level_counts=tuple(counts))


def node_level(tree: AmrTree, idx: int) -> int:
    _check_index(tree, idx)
    return int(np.searchsorted(tree._level_starts, idx, side="right")) - 1


def node_levels(tree: AmrTree) -> np.ndarray:
    """Per-node level as one int64 array."""
    return np.repeat(
        np.arange(len(tree.level_counts), dtype=np.int64),
        np.asarray(tree.level_counts, dtype=np.int64),
    )


def children_of(tree: AmrTree, idx: int) -> np.ndarray:
    """Indices of idx's children (empty for a leaf), in x-fastest order."""
    _check_index(tree, idx)
    if not tree.refinement[idx]:
        return np.empty(0, dtype=np.int64)
    nch = tree.n_children
    start = 1 + int(tree._refined_rank[idx]) * nch
    return np.arange(start, start + nch, dtype=np.int64)


def father_of(tree: AmrTree, idx: int) -> int | None:
    """Father index, or None for the root."""
    _check_index(tree, idx)
    if idx == 0:
        return None
    return int(tree._refined_index[(idx - 1) // tree.n_children])


@dataclass(frozen=True)
class CellGeometry:
    level: int
    origin: tuple[Fraction, ...]
    size: Fraction


def cell_geometry(tree: AmrTree, idx: int) -> CellGeometry:
    """Exact box of a node in the unit domain, in rational arithmetic.

    The origin is the corner nearest the coordinate origin; the box is
    [origin, origin + size) per axis with size = 2**-level.
    """
    level = node_level(tree, idx)
    nch = tree.n_children
    offsets = [0] * tree.dim
    i = idx
    # Walk up to the root, accumulating the child position at each step
    # on the integer lattice of the starting level.
    steps = 0
    while i != 0:
        rank = (i - 1) % nch
        for ax in range(tree.dim):
            offsets[ax] |= ((rank >> ax) & 1) << steps
        steps += 1
        i = int(tree._refined_index[(i - 1) // nch])
    size = Fraction(1, 1 << level)
    origin = tuple(Fraction(offsets[ax], 1 << level) for ax in range(tree.dim))
    return CellGeometry(level=level, origin=origin, size=size)


def lattice_origins(tree: AmrTree) -> np.ndarray:
    """Integer cell origins, shape (n, dim), on each node's own-level lattice.

    Node at level L sits at origin * 2**-L; entries lie in [0, 2**L).
    """
    n = tree.node_count
    out = np.zeros((n, tree.dim), dtype=np.int64)
    if n == 1:
        return out
    nch = tree.n_children
    ranks = np.arange(nch, dtype=np.int64)
    offsets = np.stack([(ranks >> ax) & 1 for ax in range(tree.dim)], axis=1)
    starts = tree._level_starts
    goff = tree._group_level_offsets
    for L in range(tree.depth):
        fathers = tree._refined_index[goff[L]:goff[L + 1]]
        if fathers.size == 0:
            continue
        child_lo = 1 + goff[L] * nch
        child_hi = 1 + goff[L + 1] * nch
        out[child_lo:child_hi] = (
            np.repeat(out[fathers] * 2, nch, axis=0) + np.tile(offsets, (fathers.size, 1))
        )
    return out


def node_centers(tree: AmrTree) -> np.ndarray:
    """Cell centers as float64, shape (n, dim). Exact for levels <= 52."""
    lat = lattice_origins(tree).astype(np.float64)
    sizes = np.ldexp(1.0, -node_levels(tree))
    return (lat + 0.5) * sizes[:, None]


def _check_index(tree: AmrTree, idx: int) -> None:
    if not 0 <= idx < tree.node_count:
        raise IndexError(f"node index {idx} outside [0, {tree.node_count})")


def _child_blocks(tree: AmrTree, arr: np.ndarray) -> np.ndarray:
    """View of arr[1:] as (group_count, 2**dim) sibling blocks."""
    return arr[1:].reshape(tree.group_count, tree.n_children)


def propagate_any_up(tree: AmrTree, flags) -> np.ndarray:
    """Bottom-up OR: leaf entries kept, refined entries become any(children)."""
    out = np.array(flags, dtype=bool).copy()
    if tree.node_count == 1:
        return out
    blocks = _child_blocks(tree, out)
    goff = tree._group_level_offsets
    for L in range(tree.depth - 1, -1, -1):
        g0, g1 = int(goff[L]), int(goff[L + 1])
        if g0 == g1:
            continue
        out[tree._refined_index[g0:g1]] = blocks[g0:g1].any(axis=1)
    return out


def propagate_mean_up(tree: AmrTree, values) -> np.ndarray:
    """Bottom-up means: leaf entries kept, refined entries become mean(children)."""
    out = np.array(values, dtype=FIELD_DTYPE).copy()
    if tree.node_count == 1:
        return out
    blocks = _child_blocks(tree, out)
    goff = tree._group_level_offsets
    for L in range(tree.depth - 1, -1, -1):
        g0, g1 = int(goff[L]), int(goff[L + 1])
        if g0 == g1:
            continue
        out[tree._refined_index[g0:g1]] = blocks[g0:g1].mean(axis=1)
    return out


def _coerce_fields(fields) -> dict[str, np.ndarray]:
    return {
        str(name): _readonly(np.asarray(vals, dtype=FIELD_DTYPE).copy())
        for name, vals in fields.items()
    }


@dataclass(frozen=True, eq=False)
class DomainTree:
    """One contributor's view of the mesh: tree, ownership and node fields.

    Ownership marks nodes with at least one owned descendant leaf (a leaf
    counting as its own descendant); everything else is ghost structure
    kept for context. Field arrays cover every node, coarse and leaf.
    """

    tree: AmrTree
    ownership: np.ndarray
    fields: dict[str, np.ndarray]
    domain_id: int

    def __post_init__(self):
        object.__setattr__(self, "ownership", _readonly(np.asarray(self.ownership, dtype=bool).copy()))
        object.__setattr__(self, "fields", _coerce_fields(self.fields))

    def __eq__(self, other) -> bool:
        """Bit-exact equality, NaN payloads included."""
        return (
            isinstance(other, DomainTree)
            and self.domain_id == other.domain_id
            and self.tree == other.tree
            and np.array_equal(self.ownership, other.ownership)
            and _fields_bit_equal(self.fields, other.fields)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class GlobalTree:
    """The undecomposed mesh: tree, per-leaf owner ids and node fields.

    leaf_owner is aligned with the node array; refined nodes carry -1.
    """

    tree: AmrTree
    leaf_owner: np.ndarray
    fields: dict[str, np.ndarray]

    def __post_init__(self):
        object.__setattr__(self, "leaf_owner", _readonly(np.asarray(self.leaf_owner, dtype=np.int64).copy()))
        object.__setattr__(self, "fields", _coerce_fields(self.fields))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, GlobalTree)
            and self.tree == other.tree
            and np.array_equal(self.leaf_owner, other.leaf_owner)
            and _fields_bit_equal(self.fields, other.fields)
        )

    __hash__ = None  # type: ignore[assignment]


def _fields_bit_equal(a: dict[str, np.ndarray], b: dict[str, np.ndarray]) -> bool:
    if set(a) != set(b):
        return False
    return all(
        a[k].size == b[k].size and np.array_equal(a[k].view(np.uint64), b[k].view(np.uint64))
        for k in a
    )


@dataclass(frozen=True)
class Violation:
    """First failed domain invariant, for validate_domain."""

    invariant: str
    node: int | None = None
    detail: str = ""

    def __str__(self) -> str:
        where = f" at node {self.node}" if self.node is not None else ""
        tail = f": {self.detail}" if self.detail else ""
        return f"violated {self.invariant}{where}{tail}"


def validate_domain(dt: DomainTree) -> Violation | None:
    """Check domain invariants; None means the domain is well-formed.

    Checks run in a fixed order (alignment, ownership consistency,
    owned-leaf existence) and report the first failure only.
    """
    n = dt.tree.node_count
    if dt.ownership.size != n:
        return Violation("alignment", detail=f"ownership has {dt.ownership.size} entries for {n} nodes")
    for name, vals in dt.fields.items():
        if vals.size != n:
            return Violation("alignment", detail=f"field {name!r} has {vals.size} entries for {n} nodes")
    expected = propagate_any_up(dt.tree, dt.ownership)
    bad = np.flatnonzero(expected != dt.ownership)
    if bad.size:
        return Violation("ownership consistency", node=int(bad[0]))
    if not bool((dt.ownership & ~dt.tree.refinement).any()):
        return Violation("owned leaf exists")
    return None
