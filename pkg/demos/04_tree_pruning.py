"""Dropping ghost subtrees before writing a domain to disk.

A domain stores its own cells plus ghost context from neighbours. Any
ghost cell that is still refined carries a whole subtree nobody reading
this domain will need; pruning flips it to a leaf (keeping its coarse
value) and drops the descendants, in a single bottom-up pass.
"""

import numpy as np

from amrstore import (
    DomainTree,
    GenSpec,
    GhostPolicy,
    ShellRule,
    build_tree,
    decompose,
    generate_global,
    prune_domain,
)


def main():
    # the 13-node walk-through: root splits into c0..c3, c0 and c1 split
    # again; this domain owns c0's corner of the square
    bits = [True, True, True, False, False] + [False] * 8
    tree = build_tree(2, bits)
    own = np.zeros(13, dtype=bool)
    own[[0, 1, 5, 6, 7, 8]] = True
    dt = DomainTree(tree=tree, ownership=own,
                    fields={"density": np.arange(13.0)}, domain_id=0)

    out, stats = prune_domain(dt)
    print(f"before: {stats.nodes_before} nodes, after: {stats.nodes_after}, "
          f"removed {stats.removed_fraction:.1%}")
    print(f"c1 kept its coarse density {out.fields['density'][2]}, "
          f"but its four sons are gone\n")

    # at scale: a shell mesh cut into 16 domains with a coarse skeleton
    g = generate_global(GenSpec(dim=3, level_min=3, level_max=6,
                                rule=ShellRule(0.35, 0.05)))
    domains = decompose(g, 16, ghosts=GhostPolicy.coarse_skeleton(3))
    fractions = []
    for d in domains:
        _, s = prune_domain(d)
        fractions.append(s.removed_fraction)
    print(f"16 shell-mesh domains: pruning removes "
          f"{min(fractions):.1%} to {max(fractions):.1%} of stored nodes "
          f"(mean {np.mean(fractions):.1%})")

    # with minimal ghosts there is nothing to prune
    lean = decompose(g, 16, ghosts=GhostPolicy.minimal())
    assert all(prune_domain(d)[1].removed_fraction == 0.0 for d in lean)
    print("minimal-ghost domains are already tight: nothing removed")


if __name__ == "__main__":
    main()
