import csv
import subprocess
import sys
from pathlib import Path

import pytest

from amrstore.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def db_bytes(path):
    """Every file of a database directory, as a sorted name -> bytes map."""
    path = Path(path)
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


def gen(tmp_path, name="g", dim=2, lmin=1, lmax=3, seed=7):
    out = tmp_path / name
    assert run("--seed", seed, "gen", "--dim", dim, "--level-min", lmin,
               "--level-max", lmax, "--shell", 0.35, 0.1, "--out", out) == 0
    return out


class TestExitCodes:
    def test_usage_error_is_2(self, capsys):
        with pytest.raises(SystemExit) as e:
            run("no-such-command")
        assert e.value.code == 2

    def test_runtime_error_is_1(self, tmp_path, capsys):
        rc = run("gen", "--dim", 2, "--level-min", 5, "--level-max", 2,
                 "--out", tmp_path / "x")
        assert rc == 1
        assert "level" in capsys.readouterr().err

    def test_missing_db_is_1(self, tmp_path, capsys):
        assert run("export", "--in", tmp_path / "absent", "--out", tmp_path / "o") == 1

    def test_success_is_0(self, tmp_path, capsys):
        assert run("gen", "--dim", 1, "--level-min", 0, "--level-max", 2,
                   "--out", tmp_path / "g") == 0


class TestGenExport:
    def test_export_five_node_tree_has_four_lines(self, tmp_path, capsys):
        out = gen(tmp_path, dim=2, lmin=1, lmax=1)
        dump = tmp_path / "dump.txt"
        assert run("export", "--in", out, "--out", dump) == 0
        lines = dump.read_text().splitlines()
        assert len(lines) == 4
        first = lines[0].split()
        # level x y z size + the five default fields
        assert len(first) == 5 + 5
        assert first[0] == "1"
        assert float(first[4]) == 0.5

    def test_export_values_parse_back(self, tmp_path, capsys):
        out = gen(tmp_path)
        dump = tmp_path / "dump.txt"
        run("export", "--in", out, "--out", dump)
        for line in dump.read_text().splitlines():
            parts = [float(tok) for tok in line.split()]
            assert len(parts) == 10
            level, x, y, z, size = parts[:5]
            assert size == 2.0 ** -level
            assert 0 < x < 1 and 0 < y < 1 and z == 0.0


class TestPipeline:
    def test_decompose_prune_assemble(self, tmp_path, capsys):
        g = gen(tmp_path, dim=2, lmin=2, lmax=4)
        d = tmp_path / "doms"
        p = tmp_path / "pruned"
        a = tmp_path / "back"
        assert run("decompose", "--in", g, "--out", d, "--domains", 4,
                   "--curve", "hilbert", "--ghosts", "coarse:2") == 0
        assert run("prune", "--in", d, "--out", p, "--csv", tmp_path / "p.csv") == 0
        assert run("assemble", "--in", p, "--out", a) == 0

        with open(tmp_path / "p.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4
        assert all(float(r["removed_fraction"]) > 0 for r in rows)

    def test_prune_on_minimal_ghosts_removes_nothing(self, tmp_path, capsys):
        g = gen(tmp_path, dim=2, lmin=2, lmax=4)
        d = tmp_path / "doms"
        run("decompose", "--in", g, "--out", d, "--domains", 4,
            "--ghosts", "minimal")
        assert run("prune", "--in", d, "--out", tmp_path / "p",
                   "--csv", tmp_path / "p.csv") == 0
        with open(tmp_path / "p.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert all(float(r["removed_fraction"]) == 0 for r in rows)

    def test_export_same_before_and_after_prune(self, tmp_path, capsys):
        g = gen(tmp_path, dim=2, lmin=2, lmax=4)
        d = tmp_path / "doms"
        p = tmp_path / "pruned"
        run("decompose", "--in", g, "--out", d, "--domains", 4,
            "--ghosts", "coarse:2")
        run("prune", "--in", d, "--out", p)
        before, after = tmp_path / "before.txt", tmp_path / "after.txt"
        assert run("export", "--in", d, "--out", before, "--domain", 2,
                   "--owned-only") == 0
        assert run("export", "--in", p, "--out", after, "--domain", 2,
                   "--owned-only") == 0
        assert before.read_text() == after.read_text()

    def test_assembled_export_matches_source(self, tmp_path, capsys):
        g = gen(tmp_path, dim=2, lmin=2, lmax=4)
        d = tmp_path / "doms"
        a = tmp_path / "back"
        run("decompose", "--in", g, "--out", d, "--domains", 3)
        run("assemble", "--in", d, "--out", a)
        e1, e2 = tmp_path / "e1.txt", tmp_path / "e2.txt"
        run("export", "--in", g, "--out", e1)
        run("export", "--in", a, "--out", e2)
        assert e1.read_text() == e2.read_text()

    def test_stats_emits_table_and_csv(self, tmp_path, capsys):
        g = gen(tmp_path, dim=2, lmin=2, lmax=4)
        d = tmp_path / "doms"
        run("decompose", "--in", g, "--out", d, "--domains", 2)
        capsys.readouterr()
        assert run("stats", "--in", d, "--csv", tmp_path / "s.csv") == 0
        text = capsys.readouterr().out
        assert "ownership ratio" in text
        with open(tmp_path / "s.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert {r["domain"] for r in rows} == {"0", "1"}


class TestCheckpointRestart:
    def test_round_trip(self, tmp_path, capsys):
        ck = tmp_path / "ck"
        assert run("--seed", 3, "checkpoint", "--out", ck, "--workers", 4,
                   "--bytes-per-worker", 2048) == 0
        assert run("restart", "--in", ck, "--out", tmp_path / "ck2") == 0
        out = capsys.readouterr().out
        assert "identical" in out

    def test_restart_missing_domain(self, tmp_path, capsys):
        ck = tmp_path / "ck"
        run("--seed", 3, "checkpoint", "--out", ck, "--workers", 3,
            "--bytes-per-worker", 2048)
        # drop the middle domain from the committed index
        idx = ck / "index.txt"
        lines = [l for l in idx.read_text().splitlines() if l.split()[1] != "1"]
        idx.write_text("\n".join(lines) + "\n")
        assert run("restart", "--in", ck, "--out", tmp_path / "ck2") == 1

    def test_tampered_checkpoint(self, tmp_path, capsys):
        ck = tmp_path / "ck"
        run("--seed", 3, "checkpoint", "--out", ck, "--workers", 2,
            "--bytes-per-worker", 2048)
        victim = next(ck.glob("g*.f*.dat"))
        raw = bytearray(victim.read_bytes())
        raw[0] ^= 0xFF
        victim.write_bytes(bytes(raw))
        assert run("restart", "--in", ck, "--out", tmp_path / "ck2") == 1


class TestDeterminism:
    def test_gen_is_bit_identical_under_seed(self, tmp_path, capsys):
        a = gen(tmp_path, "a", seed=7)
        b = gen(tmp_path, "b", seed=7)
        assert db_bytes(a) == db_bytes(b)

    def test_checkpoint_deterministic(self, tmp_path, capsys):
        for name in ("c1", "c2"):
            run("--seed", 11, "checkpoint", "--out", tmp_path / name,
                "--workers", 3, "--bytes-per-worker", 2048)
        assert db_bytes(tmp_path / "c1") == db_bytes(tmp_path / "c2")

    def test_decompose_deterministic(self, tmp_path, capsys):
        g = gen(tmp_path)
        for name in ("d1", "d2"):
            run("--seed", 5, "decompose", "--in", g, "--out", tmp_path / name,
                "--domains", 3)
        assert db_bytes(tmp_path / "d1") == db_bytes(tmp_path / "d2")


class TestDrive:
    def test_cadences(self, tmp_path, capsys):
        assert run("--seed", 2, "drive", "--dim", 2, "--level-min", 1,
                   "--level-max", 3, "--steps", 12, "--checkpoint-every", 4,
                   "--postproc-every", 3,
                   "--checkpoint-db", tmp_path / "ck",
                   "--postproc-db", tmp_path / "pp") == 0
        out = capsys.readouterr().out
        assert "3 checkpoints" in out
        assert "4 post-processing dumps" in out


class TestBenchCommand:
    def test_both_modes_csv(self, tmp_path, capsys):
        assert run("bench", "--out", tmp_path / "b", "--mode", "both",
                   "--workers", 4, "--bytes-per-worker", 2048, "--ncf", 2,
                   "--reps", 2, "--csv", tmp_path / "b.csv") == 0
        with open(tmp_path / "b.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert {r["mode"] for r in rows} == {"legacy", "aggregated"}


class TestModuleEntryPoint:
    def test_python_dash_m(self, tmp_path):
        r = subprocess.run(
            [sys.executable, "-m", "amrstore", "gen", "--dim", "1",
             "--level-min", "0", "--level-max", "2", "--shell", "0.35", "0.1",
             "--out", str(tmp_path / "g")],
            capture_output=True, text=True,
        )
        assert r.returncode == 0
        assert "gen:" in r.stdout
