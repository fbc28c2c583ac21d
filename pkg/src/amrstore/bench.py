"""Desk-scale write benchmark: file-per-worker versus aggregated output.

Legacy mode has every worker write two private files, a structure file
written in many small chunks and a heavier payload file, so W workers
cost 2W files. Aggregated mode routes all workers through one database
with a chosen contributors-per-file setting. Workers are threads
released together from a barrier; a run's wall time spans the release to
the moment the output is committed, and each configuration repeats
several times for a mean and spread.
"""

from __future__ import annotations

import csv
import shutil
import statistics
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .container import DEFAULT_MAX_FILE_SIZE, DbParams, create_db
from .errors import ConfigInvalid

MODES = ("legacy", "aggregated")
MIN_PAYLOAD = 1024
_CSV_HEADER = ["mode", "n_workers", "ncf", "run", "seconds", "bytes", "gb_per_s"]

# Legacy layout: the structure file carries 1/6 of a worker's bytes in
# many small writes, the payload file the remaining 5/6 in a few.
_STRUCTURE_SHARE = 6
_STRUCTURE_CHUNKS = 64
_PAYLOAD_CHUNKS = 5


@dataclass(frozen=True)
class BenchConfig:
    mode: str
    n_workers: int
    bytes_per_worker: int
    output: Path
    ncf: int = 1
    repetitions: int = 5
    max_file_size: int = DEFAULT_MAX_FILE_SIZE
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigInvalid(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.n_workers < 1:
            raise ConfigInvalid(f"n_workers must be >= 1, got {self.n_workers}")
        if self.bytes_per_worker < MIN_PAYLOAD:
            raise ConfigInvalid(
                f"bytes_per_worker must be >= {MIN_PAYLOAD}, got {self.bytes_per_worker}"
            )
        if self.repetitions < 1:
            raise ConfigInvalid(f"repetitions must be >= 1, got {self.repetitions}")
        if self.ncf < 1:
            raise ConfigInvalid(f"ncf must be >= 1, got {self.ncf}")
        object.__setattr__(self, "output", Path(self.output))


@dataclass(frozen=True)
class BenchRow:
    mode: str
    n_workers: int
    ncf: int
    run: int
    seconds: float
    bytes: int
    gb_per_s: float


@dataclass(frozen=True)
class BenchReport:
    mode: str
    n_workers: int
    ncf: int
    rows: tuple[BenchRow, ...]
    mean_seconds: float
    stddev_seconds: float
    mean_gb_per_s: float
    stddev_gb_per_s: float
    file_count: int


def run_write_bench(cfg: BenchConfig) -> BenchReport:
    """Run one configuration; every repetition writes a fresh directory."""
    payloads = _payloads(cfg)
    total = cfg.n_workers * cfg.bytes_per_worker
    rows = []
    file_count = 0
    for rep in range(1, cfg.repetitions + 1):
        rep_dir = cfg.output / f"{cfg.mode}-rep{rep}"
        if rep_dir.exists():
            shutil.rmtree(rep_dir)
        rep_dir.mkdir(parents=True)
        if cfg.mode == "legacy":
            seconds = _run_legacy(cfg, rep_dir, payloads)
        else:
            seconds = _run_aggregated(cfg, rep_dir, payloads)
        rows.append(BenchRow(
            mode=cfg.mode, n_workers=cfg.n_workers,
            ncf=cfg.ncf if cfg.mode == "aggregated" else 0,
            run=rep, seconds=seconds, bytes=total,
            gb_per_s=total / seconds / 2**30,
        ))
        file_count = sum(1 for p in rep_dir.rglob("*") if p.is_file())
    secs = [r.seconds for r in rows]
    rates = [r.gb_per_s for r in rows]
    return BenchReport(
        mode=cfg.mode, n_workers=cfg.n_workers,
        ncf=cfg.ncf if cfg.mode == "aggregated" else 0,
        rows=tuple(rows),
        mean_seconds=statistics.fmean(secs),
        stddev_seconds=statistics.pstdev(secs),
        mean_gb_per_s=statistics.fmean(rates),
        stddev_gb_per_s=statistics.pstdev(rates),
        file_count=file_count,
    )


def _payloads(cfg: BenchConfig) -> list[bytes]:
    rng = np.random.default_rng(cfg.seed)
    return [
        rng.integers(0, 256, cfg.bytes_per_worker, dtype=np.uint8).tobytes()
        for _ in range(cfg.n_workers)
    ]


def _spawn(n_workers: int, target, finish=None) -> float:
    """Start n_workers threads on a shared barrier; returns the wall time
    from barrier release through the last join and the finish step."""
    barrier = threading.Barrier(n_workers + 1)
    failures: list[BaseException] = []

    def wrapped(w):
        try:
            barrier.wait()
            target(w)
        except BaseException as e:  # pragma: no cover - surfaced below
            failures.append(e)

    threads = [threading.Thread(target=wrapped, args=(w,)) for w in range(n_workers)]
    for t in threads:
        t.start()
    barrier.wait()
    t0 = time.perf_counter()
    for t in threads:
        t.join()
    if not failures and finish is not None:
        finish()
    elapsed = time.perf_counter() - t0
    if failures:
        raise failures[0]
    return elapsed


def _run_legacy(cfg: BenchConfig, rep_dir: Path, payloads: list[bytes]) -> float:
    structure_bytes = cfg.bytes_per_worker // _STRUCTURE_SHARE

    def worker(w: int) -> None:
        blob = payloads[w]
        with open(rep_dir / f"w{w}.amr.dat", "wb") as f:
            chunk = max(1, structure_bytes // _STRUCTURE_CHUNKS)
            for lo in range(0, structure_bytes, chunk):
                f.write(blob[lo:min(lo + chunk, structure_bytes)])
        with open(rep_dir / f"w{w}.hydro.dat", "wb") as f:
            rest = blob[structure_bytes:]
            chunk = max(1, len(rest) // _PAYLOAD_CHUNKS)
            for lo in range(0, len(rest), chunk):
                f.write(rest[lo:lo + chunk])

    return _spawn(cfg.n_workers, worker)


def _run_aggregated(cfg: BenchConfig, rep_dir: Path, payloads: list[bytes]) -> float:
    db = create_db(rep_dir, DbParams(
        kind="checkpoint", max_file_size=cfg.max_file_size, ncf=cfg.ncf,
    ))

    def worker(w: int) -> None:
        db.write_domain(0, w, payloads[w])

    try:
        return _spawn(cfg.n_workers, worker, finish=db.commit)
    finally:
        db.close()


def emit_csv(report, path) -> None:
    """Write data rows plus mean/stddev aggregate rows (flagged in `run`).

    Accepts one report or a sequence of them; a combined CSV keeps each
    configuration's aggregates next to its rows.
    """
    reports = [report] if isinstance(report, BenchReport) else list(report)
    if not reports or any(not r.rows for r in reports):
        raise ValueError("nothing to report")
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(_CSV_HEADER)
        for r in reports:
            for row in r.rows:
                w.writerow([
                    row.mode, row.n_workers, row.ncf, row.run,
                    repr(row.seconds), row.bytes, repr(row.gb_per_s),
                ])
            total = r.rows[0].bytes
            w.writerow([r.mode, r.n_workers, r.ncf, "mean",
                        repr(r.mean_seconds), total, repr(r.mean_gb_per_s)])
            w.writerow([r.mode, r.n_workers, r.ncf, "stddev",
                        repr(r.stddev_seconds), total, repr(r.stddev_gb_per_s)])
