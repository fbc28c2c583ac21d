"""A guided tour of the boolean-array tree model.

An adaptive mesh over the unit box is just one boolean per cell, listed
breadth-first: True means "this cell splits into 2^dim children", False
means "this cell is a leaf". Everything else (levels, child blocks,
geometry) is derived.
"""

import numpy as np

from amrstore import build_tree, cell_geometry, children_of, father_of
from amrstore.tree import node_levels


def main():
    # dim=2: the root splits, its second child splits again
    bits = [True] + [False, True, False, False] + [False, False, False, False]
    tree = build_tree(2, bits)

    print(f"{tree.node_count} nodes across levels {tree.level_counts}")
    print(f"depth {tree.depth}, {2 ** tree.dim} children per refined node")
    print()

    levels = node_levels(tree)
    for idx in range(tree.node_count):
        geo = cell_geometry(tree, idx)
        kids = children_of(tree, idx)
        dad = father_of(tree, idx)
        kind = "refined" if tree.refinement[idx] else "leaf"
        print(
            f"node {idx}: level {levels[idx]}, {kind:7s} "
            f"origin ({float(geo.origin[0]):.2f}, {float(geo.origin[1]):.2f}) "
            f"size {float(geo.size):.2f} "
            f"father {dad if dad is not None else '-'} "
            f"children {kids.tolist() or '-'}"
        )

    # leaves tile the unit square exactly: their areas sum to 1
    leaf_area = sum(
        float(cell_geometry(tree, i).size) ** 2
        for i in np.flatnonzero(~tree.refinement)
    )
    print(f"\nleaf areas sum to {leaf_area} (the whole unit square)")


if __name__ == "__main__":
    main()
