"""Command-line pipeline over the storage engine.

Subcommands cover the whole workflow: gen a synthetic mesh into a
database, decompose it across domains, prune ghost structure, assemble
it back, report stats, checkpoint/restart raw state, run the write
benchmark, export leaves as plain text, and drive a stepped loop that
emits checkpoints and post-processing output at separate cadences.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Every command
is deterministic under a fixed --seed; only benchmark timings vary.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from .boolcodec import bool_stats
from .container import (
    AmrObjectPayload,
    DbParams,
    create_db,
    open_db,
)
from .deltacodec import compress_field, delta_stats
from .errors import AmrStoreError
from .synthgen import (
    FIELD_NAMES,
    GenSpec,
    GhostPolicy,
    RandomRule,
    ShellRule,
    assemble,
    decompose,
    generate_global,
)
from .pruning import prune_domain
from .tree import DomainTree, GlobalTree, lattice_origins, node_levels


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AmrStoreError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amrstore",
        description="Storage engine for adaptive-mesh simulation output.",
    )
    parser.add_argument("--seed", type=int, default=0, help="seed for every random choice")
    parser.add_argument("--verbose", action="store_true", help="chatter about intermediate steps")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic mesh into a database")
    _add_gen_flags(p)
    p.add_argument("--out", required=True, help="database directory to create")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("decompose", help="split a database's mesh across domains")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--domains", type=int, required=True)
    p.add_argument("--curve", choices=("morton", "hilbert"), default="hilbert")
    p.add_argument("--ghosts", default="minimal",
                   help="'minimal' or 'coarse:<level>' for a shared coarse skeleton")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("prune", help="drop fully-ghost subtrees from every domain")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="write per-domain numbers here")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("assemble", help="merge domains back into one global mesh")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("stats", help="codec and size numbers per domain")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--csv", help="write the table here as CSV")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("checkpoint", help="write synthetic worker state as raw blobs")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=4)
    p.add_argument("--bytes-per-worker", type=int, default=65536)
    p.set_defaults(func=cmd_checkpoint)

    p = sub.add_parser("restart", help="reload a checkpoint, re-serialize, verify bit-identity")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_restart)

    p = sub.add_parser("bench", help="file-per-worker vs aggregated write benchmark")
    p.add_argument("--out", required=True, help="scratch directory for benchmark files")
    p.add_argument("--mode", choices=("legacy", "aggregated", "both"), default="both")
    p.add_argument("--workers", type=int, default=8)
    p.add_argument("--ncf", type=int, default=16)
    p.add_argument("--bytes-per-worker", type=int, default=262144)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--max-file-size", type=int, default=bench_mod.DEFAULT_MAX_FILE_SIZE)
    p.add_argument("--csv", help="write rows and aggregates here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("export", help="dump leaves as plain text for external plotting")
    p.add_argument("--in", dest="src", required=True)
    p.add_argument("--out", required=True, help="text file to write")
    p.add_argument("--domain", type=int, default=None,
                   help="dump this stored domain instead of the assembled mesh")
    p.add_argument("--owned-only", action="store_true", help="skip ghost leaves")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("drive", help="stepped loop writing checkpoints and post-processing output")
    _add_gen_flags(p)
    p.add_argument("--steps", type=int, default=8)
    p.add_argument("--checkpoint-every", type=int, default=4)
    p.add_argument("--postproc-every", type=int, default=2)
    p.add_argument("--checkpoint-db", required=True)
    p.add_argument("--postproc-db", required=True)
    p.set_defaults(func=cmd_drive)

    return parser


def _add_gen_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", type=int, choices=(1, 2, 3), default=3)
    p.add_argument("--level-min", type=int, default=2)
    p.add_argument("--level-max", type=int, default=5)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--shell", nargs=2, type=float, metavar=("R0", "WIDTH"),
                       default=None, help="refine a spherical shell band")
    group.add_argument("--random", type=float, metavar="P", default=None,
                       help="refine each eligible cell with probability P")
    p.add_argument("--fields", default=",".join(FIELD_NAMES),
                   help="comma-separated subset of " + ",".join(FIELD_NAMES))


def _spec_from_args(args) -> GenSpec:
    if args.shell is not None:
        rule = ShellRule(r0=args.shell[0], width=args.shell[1])
    elif args.random is not None:
        rule = RandomRule(p_refine=args.random, seed=args.seed)
    else:
        rule = ShellRule(r0=0.35, width=0.1)
    fields = tuple(f for f in args.fields.split(",") if f)
    return GenSpec(
        dim=args.dim, level_min=args.level_min, level_max=args.level_max,
        rule=rule, fields=fields,
    )


def _say(args, msg: str) -> None:
    if args.verbose:
        print(msg)


def _global_as_domain(g: GlobalTree) -> DomainTree:
    return DomainTree(
        tree=g.tree,
        ownership=np.ones(g.tree.node_count, dtype=bool),
        fields=g.fields,
        domain_id=0,
    )


def _write_domains(path: str, domains) -> None:
    with create_db(path, DbParams(kind="postproc")) as db:
        for dt in domains:
            db.write_domain(0, dt.domain_id, AmrObjectPayload.from_domain(dt))
        db.commit()


def _read_domains(path: str) -> list[DomainTree]:
    db = open_db(path)
    ctxs = db.list_contexts()
    if not ctxs:
        raise AmrStoreError(f"{path} holds no committed records")
    ctx = ctxs[0]
    return [db.read_domain(ctx, d).to_domain(d) for d in db.list_domains(ctx)]


def cmd_gen(args) -> int:
    g = generate_global(_spec_from_args(args))
    _say(args, f"generated {g.tree.node_count} nodes over {g.tree.depth + 1} levels")
    _write_domains(args.out, [_global_as_domain(g)])
    print(f"gen: {g.tree.node_count} nodes, depth {g.tree.depth} -> {args.out}")
    return 0


def _parse_ghosts(text: str) -> GhostPolicy:
    if text == "minimal":
        return GhostPolicy.minimal()
    if text.startswith("coarse:"):
        return GhostPolicy.coarse_skeleton(int(text.split(":", 1)[1]))
    raise AmrStoreError(f"bad ghost policy {text!r}, expected 'minimal' or 'coarse:<level>'")


def cmd_decompose(args) -> int:
    g = assemble(_read_domains(args.src))
    domains = decompose(g, args.domains, curve=args.curve, ghosts=_parse_ghosts(args.ghosts))
    _write_domains(args.out, domains)
    stored = sum(dt.tree.node_count for dt in domains)
    print(
        f"decompose: {len(domains)} domains via {args.curve}, "
        f"{stored} stored nodes for {g.tree.node_count} global -> {args.out}"
    )
    return 0


def cmd_prune(args) -> int:
    domains = _read_domains(args.src)
    pruned, rows = [], []
    for dt in domains:
        slim, st = prune_domain(dt)
        pruned.append(slim)
        rows.append((dt.domain_id, st.nodes_before, st.nodes_after, st.removed_fraction))
    _write_domains(args.out, pruned)
    print("domain  before  after  removed%")
    for dom, before, after, frac in rows:
        print(f"{dom:6d} {before:7d} {after:6d} {100 * frac:9.2f}")
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["domain", "nodes_before", "nodes_after", "removed_fraction"])
            for dom, before, after, frac in rows:
                w.writerow([dom, before, after, f"{frac:.6f}"])
    return 0


def cmd_assemble(args) -> int:
    g = assemble(_read_domains(args.src))
    _write_domains(args.out, [_global_as_domain(g)])
    print(f"assemble: {g.tree.node_count} nodes -> {args.out}")
    return 0


def cmd_stats(args) -> int:
    domains = _read_domains(args.src)
    header = f"{'domain':>6} {'nodes':>7} {'ref%':>7} {'own%':>7} {'field':>9} {'rate%':>7} {'zeros':>6} {'MB/s':>8}"
    print(header)
    rows = []
    ref_ratios, own_ratios = [], []
    for dt in domains:
        rs = bool_stats(dt.tree.refinement)
        os_ = bool_stats(dt.ownership)
        ref_ratios.append(rs.ratio_vs_bitfield)
        own_ratios.append(os_.ratio_vs_bitfield)
        for name, vals in dt.fields.items():
            t0 = time.perf_counter()
            cf = compress_field(dt.tree, vals)
            elapsed = time.perf_counter() - t0
            st = delta_stats(cf, input_bytes=8 * vals.size, elapsed=elapsed)
            rows.append([
                dt.domain_id, dt.tree.node_count,
                rs.ratio_vs_bitfield, os_.ratio_vs_bitfield,
                name, st.compression_rate, st.mean_removed_zeros, st.throughput_mb_s,
            ])
            print(
                f"{dt.domain_id:6d} {dt.tree.node_count:7d} "
                f"{100 * rs.ratio_vs_bitfield:7.2f} {100 * os_.ratio_vs_bitfield:7.2f} "
                f"{name:>9} {100 * st.compression_rate:7.2f} "
                f"{st.mean_removed_zeros:6.2f} {st.throughput_mb_s:8.1f}"
            )
    mean_ref = sum(ref_ratios) / len(ref_ratios)
    mean_own = sum(own_ratios) / len(own_ratios)
    print(f"mean refinement ratio {100 * mean_ref:.2f}%  mean ownership ratio {100 * mean_own:.2f}%")
    if args.csv:
        with open(args.csv, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["domain", "nodes", "refinement_ratio", "ownership_ratio",
                        "field", "compression_rate", "mean_removed_zeros", "throughput_mb_s"])
            for row in rows:
                w.writerow(row)
    return 0


def _state_blobs(seed: int, workers: int, nbytes: int) -> list[bytes]:
    rng = np.random.default_rng(seed)
    return [rng.integers(0, 256, nbytes, dtype=np.uint8).tobytes() for _ in range(workers)]


def cmd_checkpoint(args) -> int:
    blobs = _state_blobs(args.seed, args.workers, args.bytes_per_worker)
    with create_db(args.out, DbParams(kind="checkpoint")) as db:
        for w, blob in enumerate(blobs):
            db.write_domain(0, w, blob)
        db.commit()
    print(f"checkpoint: {args.workers} workers x {args.bytes_per_worker} bytes -> {args.out}")
    return 0


def cmd_restart(args) -> int:
    src = open_db(args.src)
    ctxs = src.list_contexts()
    if not ctxs:
        raise AmrStoreError(f"{args.src} holds no committed records")
    ctx = ctxs[0]
    n = max(src.list_domains(ctx)) + 1
    blobs = [src.read_domain(ctx, d) for d in range(n)]
    with create_db(args.out, DbParams(kind="checkpoint")) as db:
        for d, blob in enumerate(blobs):
            db.write_domain(ctx, d, blob)
        db.commit()
    back = open_db(args.out)
    identical = all(back.read_domain(ctx, d) == blobs[d] for d in range(n))
    if not identical:
        print("restart: re-serialized state DIFFERS", file=sys.stderr)
        return 1
    print(f"restart: {n} domains restored and re-serialized, payloads identical")
    return 0


def cmd_bench(args) -> int:
    modes = ("legacy", "aggregated") if args.mode == "both" else (args.mode,)
    reports = []
    for mode in modes:
        cfg = bench_mod.BenchConfig(
            mode=mode, n_workers=args.workers, bytes_per_worker=args.bytes_per_worker,
            output=Path(args.out), ncf=args.ncf, repetitions=args.reps,
            max_file_size=args.max_file_size, seed=args.seed,
        )
        rep = bench_mod.run_write_bench(cfg)
        reports.append(rep)
        print(
            f"bench {mode}: {rep.mean_gb_per_s:.3f} GB/s "
            f"(stddev {rep.stddev_gb_per_s:.3f}) over {len(rep.rows)} runs, "
            f"{rep.file_count} files"
        )
    if args.csv:
        bench_mod.emit_csv(reports, args.csv)
    return 0


def _export_lines(dt: DomainTree, owned_only: bool) -> list[str]:
    tree = dt.tree
    leaves = np.flatnonzero(~tree.refinement)
    if owned_only:
        leaves = leaves[dt.ownership[leaves]]
    levels = node_levels(tree)
    lat = lattice_origins(tree)
    names = list(dt.fields)
    lines = []
    for idx in leaves.tolist():
        lv = int(levels[idx])
        size = 2.0 ** -lv
        coords = [float(lat[idx, ax] + 0.5) * size if ax < tree.dim else 0.0 for ax in range(3)]
        vals = " ".join(repr(float(dt.fields[n][idx])) for n in names)
        lines.append(f"{lv} {coords[0]!r} {coords[1]!r} {coords[2]!r} {size!r} {vals}")
    return lines


def cmd_export(args) -> int:
    domains = _read_domains(args.src)
    if args.domain is None:
        dt = _global_as_domain(assemble(domains))
    else:
        match = [d for d in domains if d.domain_id == args.domain]
        if not match:
            raise AmrStoreError(f"domain {args.domain} not in {args.src}")
        dt = match[0]
    lines = _export_lines(dt, args.owned_only)
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"export: {len(lines)} leaves -> {args.out}")
    return 0


def cmd_drive(args) -> int:
    if args.steps < 1 or args.checkpoint_every < 1 or args.postproc_every < 1:
        raise AmrStoreError("steps and cadences must be >= 1")
    g = generate_global(_spec_from_args(args))
    dt = _global_as_domain(g)
    state = np.concatenate([v for v in g.fields.values()]) if g.fields else np.zeros(1)
    n_ckpt = n_post = 0
    with create_db(args.checkpoint_db, DbParams(kind="checkpoint")) as ckpt, \
            create_db(args.postproc_db, DbParams(kind="postproc")) as post:
        for step in range(args.steps):
            if step % args.checkpoint_every == 0:
                ckpt.write_domain(step, 0, (state * (1.0 + step)).tobytes())
                n_ckpt += 1
            if step % args.postproc_every == 0:
                post.write_domain(step, 0, AmrObjectPayload.from_domain(dt))
                n_post += 1
        ckpt.commit()
        post.commit()
    print(
        f"drive: {args.steps} steps -> {n_ckpt} checkpoints (every {args.checkpoint_every}), "
        f"{n_post} post-processing dumps (every {args.postproc_every})"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
