"""Desk-scale write benchmark: one-file-per-worker vs aggregation.

Legacy mode writes two files per worker (a chunked structure file and a
heavier payload file). Aggregated mode funnels all workers through the
shared container with ncf contributors per file. The interesting number
at this scale is the file count; throughput is hardware-dependent and
printed for flavor.
"""

import tempfile
from pathlib import Path

from amrstore import BenchConfig, emit_csv, run_write_bench


def main():
    root = Path(tempfile.mkdtemp(prefix="amrstore-bench-"))
    reports = []
    for mode, ncf in (("legacy", 1), ("aggregated", 16)):
        cfg = BenchConfig(
            mode=mode,
            n_workers=64,
            bytes_per_worker=256 * 1024,
            output=root / mode,
            ncf=ncf,
            repetitions=5,
        )
        rep = run_write_bench(cfg)
        reports.append(rep)
        print(f"{mode:10s} 64 workers: {rep.file_count:4d} files, "
              f"{rep.mean_gb_per_s:6.3f} GB/s "
              f"(stddev {rep.stddev_gb_per_s:.3f} over {len(rep.rows)} runs)")

    legacy, agg = reports
    print(f"\nfile reduction: {legacy.file_count} -> {agg.file_count} "
          f"({legacy.file_count // agg.file_count}x fewer)")

    csv_path = root / "bench.csv"
    emit_csv(reports, csv_path)
    print(f"per-run rows and aggregates written to {csv_path}")


if __name__ == "__main__":
    main()
