"""Shared builders for the test suite.

The tree builders here construct refinement sequences level by level,
independently of the package's own parser, so they double as oracles
for the level-count recurrence.
"""

import numpy as np
import pytest

from amrstore import DomainTree, build_tree


def random_refinement(rng, dim, max_nodes=400, p=0.5):
    """Random valid breadth-first refinement sequence.

    Walks the frontier one level at a time and stops refining once the
    node budget is spent, so the result always parses.
    """
    nch = 2 ** dim
    bits = []
    frontier = 1
    total = 1
    while frontier:
        level = []
        for _ in range(frontier):
            refine = total + nch <= max_nodes and rng.random() < p
            level.append(refine)
            if refine:
                total += nch
        bits.extend(level)
        frontier = nch * sum(level)
    return np.asarray(bits, dtype=bool)


def random_tree(rng, dim=None, max_nodes=400, p=0.5):
    d = dim if dim is not None else int(rng.integers(1, 4))
    return build_tree(d, random_refinement(rng, d, max_nodes=max_nodes, p=p))


def consistent_ownership(rng, tree, p_leaf=0.6):
    """Ownership flags where every owner also owns all its ancestors."""
    own = np.zeros(tree.node_count, dtype=bool)
    leaves = np.flatnonzero(~tree.refinement)
    picked = leaves[rng.random(leaves.size) < p_leaf]
    if picked.size == 0:
        picked = leaves[:1]
    own[picked] = True
    # walk up from every owned leaf
    from amrstore import father_of

    for idx in picked.tolist():
        j = idx
        while j is not None and not (own[j] and j != idx):
            own[j] = True
            j = father_of(tree, j)
    return own


def random_domain(rng, dim=None, max_nodes=400, n_fields=1, domain_id=0):
    tree = random_tree(rng, dim=dim, max_nodes=max_nodes)
    own = consistent_ownership(rng, tree)
    fields = {
        f"f{i}": rng.standard_normal(tree.node_count) for i in range(n_fields)
    }
    return DomainTree(tree=tree, ownership=own, fields=fields, domain_id=domain_id)


@pytest.fixture
def rng():
    return np.random.default_rng(20260817)
