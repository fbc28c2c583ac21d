"""The aggregated on-disk container.

Many writers share few files: domain d lands in file group d // ncf,
each group an append-only log of framed records plus one plain-text
index committed atomically at the end. Two flavors exist: 'checkpoint'
stores raw blobs for exact restart, 'postproc' stores self-describing
compressed tree objects.
"""

import tempfile
from pathlib import Path

import numpy as np

from amrstore import (
    AmrObjectPayload,
    DbParams,
    GenSpec,
    GhostPolicy,
    ShellRule,
    create_db,
    decompose,
    generate_global,
    open_db,
    prune_domain,
)


def main():
    root = Path(tempfile.mkdtemp(prefix="amrstore-demo-"))

    # checkpoint flavor: raw bytes, 8 writers into 2 file groups
    ck = create_db(root / "checkpoint", DbParams(kind="checkpoint", ncf=4))
    blobs = {d: np.random.default_rng(d).bytes(2000) for d in range(8)}
    for d, blob in blobs.items():
        ck.write_domain(0, d, blob)
    ck.commit()
    print(f"checkpoint db: 8 domains -> {ck.file_count()} data files")
    ck.close()

    ro = open_db(root / "checkpoint")
    assert all(ro.read_domain(0, d) == blobs[d] for d in range(8))
    print("reopened read-only: every blob identical")
    ro.close()

    # postproc flavor: pruned domains, compressed, one field kept
    g = generate_global(GenSpec(dim=3, level_min=2, level_max=5,
                                rule=ShellRule(0.35, 0.1)))
    domains = [prune_domain(d)[0]
               for d in decompose(g, 8, ghosts=GhostPolicy.coarse_skeleton(2))]
    pp = create_db(root / "postproc",
                   DbParams(kind="postproc", ncf=4, field_selection=("density",)))
    raw = comp = 0
    for dt in domains:
        payload = AmrObjectPayload.from_domain(dt).select_fields(("density",))
        raw += dt.tree.node_count * 8 + (dt.tree.node_count * 2 + 7) // 8
        comp += len(payload.encode())
        pp.write_domain(0, dt.domain_id, payload)
    pp.commit()
    print(f"postproc db: 8 domains, {pp.file_count()} data files, "
          f"{comp} bytes stored vs {raw} as flat density + bitfields")

    back = pp.read_domain(0, 3).to_domain(3)
    assert list(back.fields) == ["density"]
    assert back.tree == domains[3].tree
    print("domain 3 decodes to the identical pruned tree, density only")
    pp.close()

    # small files roll over rather than grow forever
    tiny = create_db(root / "tiny", DbParams(kind="checkpoint", ncf=8,
                                             max_file_size=1024))
    for d in range(3):
        tiny.write_domain(0, d, b"x" * 600)
    tiny.commit()
    print(f"rollover: three 600-byte records at 1 KiB cap -> "
          f"{tiny.file_count()} files in one group")
    tiny.close()

    print(f"\neverything under {root}")


if __name__ == "__main__":
    main()
