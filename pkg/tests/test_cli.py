import csv
import io
import json

import numpy as np
import pytest
from click.testing import CliRunner

import bench_service
from cli import cli, cli_main
from gnn_models import load_weights
from sgt_transform import TileGeometry, load_sgt

MTX = "%%MatrixMarket matrix coordinate pattern general\n20 20 5\n1 2\n2 1\n3 3\n17 1\n20 20\n"


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def mtx(write_text):
    return write_text("g.mtx", MTX)


def rows_of(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def test_transform_writes_sgt_and_stats(runner, mtx, tmp_path):
    out = tmp_path / "g.sgt"
    result = runner.invoke(cli, ["transform", "--input", str(mtx), "--blk-h", "16", "--blk-w", "8",
                                 "--out", str(out), "--stats"])
    assert result.exit_code == 0, result.output
    stats = dict(line.split("=") for line in result.stdout.splitlines())
    assert stats["block_counter"] == "2"
    assert stats["capacity"] == "256"
    assert stats["nnz"] == "5"
    assert float(stats["density"]) == pytest.approx(5 / 256, abs=1e-6)

    t = load_sgt(out)
    assert t.geometry == TileGeometry(16, 8)
    assert t.block_counter == 2


def test_transform_symmetrize(runner, mtx):
    result = runner.invoke(cli, ["transform", "--input", str(mtx), "--symmetrize", "--stats"])
    assert "nnz=6" in result.stdout


def test_spmm_on_sgt_file_checks_oracle(runner, mtx, tmp_path):
    sgt = tmp_path / "g.sgt"
    runner.invoke(cli, ["transform", "--input", str(mtx), "--out", str(sgt)])
    result = runner.invoke(cli, ["spmm", "--graph", str(sgt), "--dim", "16", "--split", "1.0", "--check-oracle",
                                 "--repeats", "1"])
    assert result.exit_code == 0, result.output
    (row,) = rows_of(result.stdout)
    assert row["kernel"] == "spmm"
    assert row["path"] == "hybrid"
    assert float(row["max_rel_err"]) <= 1e-4


@pytest.mark.parametrize("kernel", ["sddmm", "gcn", "agnn"])
def test_kernel_commands_emit_json(runner, kernel):
    result = runner.invoke(cli, [kernel, "--graph", "random:n=48,p=0.1,seed=2", "--dim", "8", "--repeats", "1",
                                 "--emit", "json", "--check-oracle", "--threads", "2"])
    assert result.exit_code == 0, result.output
    (row,) = json.loads(result.stdout)
    assert row["kernel"] == kernel
    assert row["max_rel_err"] <= 1e-4


def test_save_output(runner, tmp_path):
    out = tmp_path / "h.npy"
    result = runner.invoke(cli, ["spmm", "--graph", "random:n=32,p=0.2", "--dim", "5", "--repeats", "1",
                                 "--save-output", str(out)])
    assert result.exit_code == 0, result.output
    assert np.load(out).shape == (32, 5)


def test_init_weights_then_gcn(runner, tmp_path):
    weights = tmp_path / "w.bin"
    result = runner.invoke(cli, ["init-weights", "--out", str(weights), "--in-dim", "8", "--out-dim", "4"])
    assert result.exit_code == 0, result.output
    assert [l.weight.shape for l in load_weights(weights)] == [(8, 16), (16, 4)]
    result = runner.invoke(cli, ["gcn", "--graph", "random:n=40,p=0.1", "--dim", "8", "--weights", str(weights),
                                 "--repeats", "1", "--check-oracle"])
    assert result.exit_code == 0, result.output


def test_bench_suite_csv(runner):
    result = runner.invoke(cli, ["bench", "--suite", "smoke", "--emit", "csv", "--repeats", "1"])
    assert result.exit_code == 0, result.output
    header = result.stdout.splitlines()[0]
    assert header == "dataset,kernel,path,median_ms,blocks,capacity,nnz,density,max_rel_err"
    rows = rows_of(result.stdout)
    assert len(rows) == 2 * 2 * 3
    assert {(r["kernel"], r["path"]) for r in rows} == {
        (k, p) for k in ("spmm", "sddmm") for p in ("tile", "scalar", "hybrid")
    }
    blockdense = [r for r in rows if r["dataset"].startswith("blockdense") and r["kernel"] == "spmm"]
    assert all(float(r["density"]) == 1.0 for r in blockdense)


def test_bench_history_and_out_file(runner, tmp_path):
    out, db = tmp_path / "r.csv", tmp_path / "runs.db"
    result = runner.invoke(cli, ["bench", "--dataset", "random:n=32,p=0.1", "--kernel", "spmm", "--repeats", "1",
                                 "--out", str(out), "--history", str(db)])
    assert result.exit_code == 0, result.output
    assert result.stdout == ""
    assert len(rows_of(out.read_text())) == 3
    assert db.exists()


def test_threads_env_fallback(runner, monkeypatch):
    monkeypatch.setenv("SGTK_THREADS", "3")
    result = runner.invoke(cli, ["spmm", "--graph", "random:n=32,p=0.1", "--repeats", "1"])
    assert result.exit_code == 0, result.output


def test_verify_command(runner):
    result = runner.invoke(cli, ["verify", "--count", "2", "--max-nodes", "64", "--threads", "2"])
    assert result.exit_code == 0, result.output
    assert "FAIL" not in result.output


def test_exit_code_success(capsys):
    assert cli_main(["spmm", "--graph", "random:n=16,p=0.2", "--repeats", "1", "--check-oracle"]) == 0
    assert "max_rel_err" in capsys.readouterr().out


def test_exit_code_usage_error(capsys):
    assert cli_main(["spmm"]) == 2
    assert "Usage" in capsys.readouterr().err


def test_exit_code_unknown_subcommand():
    assert cli_main(["nonsense"]) == 2


def test_exit_code_bad_split():
    assert cli_main(["spmm", "--graph", "random:n=16,p=0.2", "--split", "2"]) == 2


def test_exit_code_parse_error(write_text):
    bad = write_text("bad.tsv", "0 1\nzero one\n")
    assert cli_main(["transform", "--input", str(bad)]) == 2


def test_exit_code_bench_without_datasets():
    assert cli_main(["bench"]) == 2


def test_exit_code_verification_failure(monkeypatch, capsys):
    real = bench_service.max_rel_err
    monkeypatch.setattr(bench_service, "max_rel_err", lambda got, expected: real(got, expected) + 1.0)
    assert cli_main(["spmm", "--graph", "random:n=16,p=0.3", "--repeats", "1", "--check-oracle"]) == 1
    assert "verification failed" in capsys.readouterr().err


def test_help_exits_cleanly():
    assert cli_main(["--help"]) == 0


def test_transform_reports_published_block_count(runner, tmp_path):
    path = tmp_path / "citeseer.npz"
    np.savez(path, adj_indptr=np.array([0, 1, 1, 2]), adj_indices=np.array([1, 0]),
             adj_data=np.ones(2, dtype=np.float32), adj_shape=np.array([3, 3]))
    result = runner.invoke(cli, ["transform", "--input", str(path), "--symmetrize", "--stats"])
    assert result.exit_code == 0, result.output
    stats = dict(line.split("=") for line in result.stdout.splitlines())
    assert stats["block_counter"] == "1"
    assert stats["reference_blocks"] == "659"
    assert stats["reference_delta"] == "-658"


def test_no_published_count_at_other_geometry(runner, tmp_path):
    path = tmp_path / "cora.npz"
    np.savez(path, src_li=np.array([0]), dst_li=np.array([1]))
    result = runner.invoke(cli, ["transform", "--input", str(path), "--blk-w", "16", "--stats"])
    assert result.exit_code == 0, result.output
    assert "reference_blocks" not in result.stdout


def test_bench_prints_published_counts(runner, tmp_path):
    path = tmp_path / "cora.npz"
    np.savez(path, src_li=np.array([0, 1]), dst_li=np.array([1, 0]))
    result = runner.invoke(cli, ["bench", "--dataset", str(path), "--kernel", "spmm", "--repeats", "1"])
    assert result.exit_code == 0, result.output
    assert "681" in result.stderr


def test_exit_code_corrupt_npz(tmp_path):
    path = tmp_path / "g.npz"
    path.write_bytes(b"not an npz at all\n")
    assert cli_main(["transform", "--input", str(path), "--stats"]) == 2


def test_verify_threads_env_fallback(runner, monkeypatch):
    seen = {}

    def fake_verify(self, **kwargs):
        seen.update(kwargs)
        return []

    monkeypatch.setattr(bench_service.BenchService, "verify", fake_verify)
    monkeypatch.setenv("SGTK_THREADS", "3")
    result = runner.invoke(cli, ["verify", "--count", "1"])
    assert result.exit_code == 0, result.output
    assert seen["threads"] == 3
