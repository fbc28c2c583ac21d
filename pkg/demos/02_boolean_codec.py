"""Run-length text encoding for the tree's boolean arrays.

The first character records the value of the first run ('0' or '1');
after that, each run length is written as (length - 1) in base 26,
lowercase digits except an uppercase final digit that closes the
numeral. Long runs become a handful of letters.
"""

import numpy as np

from amrstore import (
    GenSpec,
    ShellRule,
    bool_stats,
    decode_bools,
    decompose,
    encode_bools,
    generate_global,
)


def show(label, bits):
    text = encode_bools(bits)
    stats = bool_stats(bits)
    shown = text if len(text) <= 48 else text[:45] + "..."
    print(f"{label:28s} n={bits.size:<8d} -> {len(text):>7d} chars  "
          f"ratio vs bitfield {stats.ratio_vs_bitfield:+.4f}   {shown}")
    assert np.array_equal(decode_bools(text), bits)


def main():
    show("five trues", np.ones(5, dtype=bool))
    show("30 trues, one false", np.r_[np.ones(30, bool), np.zeros(1, bool)])
    show("a million trues", np.ones(10 ** 6, dtype=bool))
    show("worst case: alternating", np.tile([True, False], 500).astype(bool))

    # real payloads: one domain of a shell mesh cut into 16 pieces
    g = generate_global(GenSpec(dim=3, level_min=3, level_max=6, rule=ShellRule(0.35, 0.05)))
    dt = decompose(g, 16)[5]
    show("domain refinement", dt.tree.refinement)
    show("domain ownership", dt.ownership)
    print("\nownership clusters into long runs (a domain owns a contiguous")
    print("stretch of the curve), so it squeezes down harder than the")
    print("refinement pattern does.")


if __name__ == "__main__":
    main()
