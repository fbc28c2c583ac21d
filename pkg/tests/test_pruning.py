from collections import deque

import numpy as np
import pytest

from amrstore import (
    DomainTree,
    MalformedTree,
    build_tree,
    children_of,
    prune_domain,
    validate_domain,
)

from conftest import random_domain


def reference_prune(dt):
    """Subtree-scan reference: a refined node stays refined only while it
    is owned; everything below a flipped node disappears. Returns the
    surviving original indices in breadth-first order."""
    keep_refined = dt.tree.refinement & dt.ownership
    order = []
    q = deque([0])
    while q:
        i = q.popleft()
        order.append(i)
        if keep_refined[i]:
            q.extend(children_of(dt.tree, i).tolist())
    return np.asarray(order), keep_refined


def thirteen_node_fixture():
    """dim 2: root refined; c0 refined with 4 owned leaves; c1 refined
    with 4 ghost leaves; c2, c3 ghost leaves."""
    bits = [True, True, True, False, False] + [False] * 8
    tree = build_tree(2, bits)
    own = np.zeros(13, dtype=bool)
    own[[0, 1]] = True          # root and c0
    own[[5, 6, 7, 8]] = True    # c0's sons
    fields = {"density": np.arange(13.0)}
    return DomainTree(tree=tree, ownership=own, fields=fields, domain_id=0)


class TestFixture:
    def test_ghost_subtree_collapses(self):
        dt = thirteen_node_fixture()
        out, stats = prune_domain(dt)
        assert stats.nodes_before == 13
        assert stats.nodes_after == 9
        assert stats.removed_fraction == pytest.approx(4 / 13)
        assert out.tree.node_count == 9
        # c1 is now a leaf but keeps its coarse value
        assert not out.tree.refinement[2]
        assert out.fields["density"][2] == 2.0
        assert not out.ownership[2]

    def test_owned_data_untouched(self):
        dt = thirteen_node_fixture()
        out, _ = prune_domain(dt)
        np.testing.assert_array_equal(out.fields["density"][5:], [5, 6, 7, 8])
        assert out.ownership[[0, 1, 5, 6, 7, 8]].all()

    def test_idempotent(self):
        out1, _ = prune_domain(thirteen_node_fixture())
        out2, stats = prune_domain(out1)
        assert out2 == out1
        assert stats.removed_fraction == 0.0

    def test_result_still_valid(self):
        out, _ = prune_domain(thirteen_node_fixture())
        assert validate_domain(out) is None


class TestGhostChains:
    def test_three_ghost_levels_collapse_in_one_call(self):
        # dim 1: root refined; left branch owned leaf, right branch a
        # chain of three ghost refinements ending in ghost leaves
        bits = [True, False, True, True, False, True, False, False, False]
        tree = build_tree(1, bits)
        own = np.zeros(tree.node_count, dtype=bool)
        own[[0, 1]] = True
        dt = DomainTree(tree=tree, ownership=own, fields={}, domain_id=0)
        out, stats = prune_domain(dt)
        assert out.tree.node_count == 3
        assert out.tree.level_counts == (1, 2)
        assert stats.nodes_before == tree.node_count
        # nothing further to remove
        again, stats2 = prune_domain(out)
        assert again == out and stats2.removed_fraction == 0.0


class TestAgainstReference:
    def test_random_domains(self, rng):
        for _ in range(60):
            dt = random_domain(rng, max_nodes=300, n_fields=2)
            out, stats = prune_domain(dt)
            order, keep_refined = reference_prune(dt)
            assert out.tree.node_count == order.size
            np.testing.assert_array_equal(out.tree.refinement, keep_refined[order])
            np.testing.assert_array_equal(out.ownership, dt.ownership[order])
            for name, vals in dt.fields.items():
                np.testing.assert_array_equal(out.fields[name], vals[order])
            assert stats.nodes_after == order.size
            assert stats.removed_fraction == pytest.approx(
                1 - order.size / dt.tree.node_count
            )
            assert validate_domain(out) is None

    def test_fully_owned_domain_is_untouched(self, rng):
        dt = random_domain(rng, max_nodes=200)
        dt = DomainTree(
            tree=dt.tree,
            ownership=np.ones(dt.tree.node_count, dtype=bool),
            fields=dt.fields,
            domain_id=dt.domain_id,
        )
        out, stats = prune_domain(dt)
        assert out == dt
        assert stats.removed_fraction == 0.0


class TestErrors:
    def test_inconsistent_domain_rejected(self):
        tree = build_tree(2, [True, False, False, False, False])
        dt = DomainTree(
            tree=tree,
            ownership=[False, True, False, False, False],
            fields={},
            domain_id=0,
        )
        with pytest.raises(MalformedTree):
            prune_domain(dt)
