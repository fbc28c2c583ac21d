"""Removal of fully-ghost subtrees from a domain tree.

A refined node that owns no descendant leaf carries structure the domain
only mirrors for context; collapsing it to a leaf loses nothing the
domain is responsible for. The sweep walks father levels bottom-up: each
still-refined ghost node flips to a leaf and its sibling blocks drop out
of the refinement, ownership and every field array. Ownership
consistency guarantees all descendants of a ghost node are ghosts, so
one sweep reaches a fixpoint and pruning twice changes nothing. The
collapsed node keeps its own field values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MalformedTree
from .tree import AmrTree, DomainTree, build_tree, validate_domain


@dataclass(frozen=True)
class PruneStats:
    nodes_before: int
    nodes_after: int
    removed_fraction: float


def prune_domain(dt: DomainTree) -> tuple[DomainTree, PruneStats]:
    """Collapse every ghost subtree; returns the smaller domain and counts."""
    violation = validate_domain(dt)
    if violation is not None:
        raise MalformedTree(str(violation))
    tree = dt.tree
    n = tree.node_count
    nch = tree.n_children
    keep = np.ones(n, dtype=bool)
    new_ref = tree.refinement.copy()
    own = dt.ownership
    goff = tree._group_level_offsets
    ranks = np.arange(nch, dtype=np.int64)
    for L in range(tree.depth - 1, -1, -1):
        g0, g1 = int(goff[L]), int(goff[L + 1])
        if g0 == g1:
            continue
        fathers = tree._refined_index[g0:g1]
        ghost = ~own[fathers]
        if not ghost.any():
            continue
        new_ref[fathers[ghost]] = False
        ghost_groups = np.flatnonzero(ghost) + g0
        # Direct children only: deeper descendants were dropped when the
        # ghost children themselves were processed one level further down.
        keep[(1 + ghost_groups[:, None] * nch + ranks).ravel()] = False

    pruned = DomainTree(
        tree=build_tree(tree.dim, new_ref[keep]),
        ownership=own[keep],
        fields={name: vals[keep] for name, vals in dt.fields.items()},
        domain_id=dt.domain_id,
    )
    after = int(keep.sum())
    stats = PruneStats(
        nodes_before=n,
        nodes_after=after,
        removed_fraction=1.0 - after / n,
    )
    return pruned, stats
