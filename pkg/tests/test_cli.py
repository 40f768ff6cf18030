"""End-to-end runs of the installed console script."""

import hashlib
import json
import shutil
import subprocess

import numpy as np
import pytest

from bandlab import __version__

BANDLAB = shutil.which("bandlab")

pytestmark = pytest.mark.skipif(BANDLAB is None,
                                reason="console script not installed")


def run(args, cwd, expect=0):
    proc = subprocess.run([BANDLAB, *args], cwd=cwd, capture_output=True,
                          text=True, timeout=300)
    assert proc.returncode == expect, (args, proc.returncode, proc.stderr)
    return proc


def _data_rows(path):
    lines = path.read_text().splitlines()
    body = [l for l in lines if not l.startswith("#")]
    return lines, body[0].split(","), body[1:]


def test_version_flag(tmp_path):
    proc = run(["--version"], tmp_path)
    assert proc.stdout.strip() == f"bandlab {__version__}"


def test_usage_errors_exit_one(tmp_path):
    run(["frobnicate"], tmp_path, expect=1)
    run(["evolve", "--frob", "3"], tmp_path, expect=1)
    run([], tmp_path, expect=1)
    run(["verify", "bogus"], tmp_path, expect=1)


def test_validation_errors_exit_one(tmp_path):
    proc = subprocess.run(
        [BANDLAB, "evolve", "--N", "8", "--W", "16", "--t", "1"],
        cwd=tmp_path, capture_output=True, text=True)
    assert proc.returncode == 1
    assert "error: W:" in proc.stderr
    proc = subprocess.run([BANDLAB, "evolve", "--N", "32", "--W", "4",
                           "--t", "-1"], cwd=tmp_path, capture_output=True,
                          text=True)
    assert proc.returncode == 1
    assert "error: t:" in proc.stderr


def test_gen_writes_descriptor_matrix_and_manifest(tmp_path):
    run(["gen", "--N", "32", "--W", "4", "--seed", "3", "--out", "prof.json",
         "--export-matrix", "mat.txt"], tmp_path)
    descriptor = json.loads((tmp_path / "prof.json").read_text())
    assert descriptor["N"] == 32 and descriptor["W"] == 4
    assert descriptor["dist"]["kind"] == "gaussian"
    assert descriptor["seed"] == 3
    manifest = json.loads((tmp_path / "prof.manifest.json").read_text())
    assert manifest["subcommand"] == "gen"
    for name, digest in manifest["artifacts"].items():
        data = (tmp_path / name).read_bytes()
        assert hashlib.sha256(data).hexdigest() == digest
    assert set(manifest["artifacts"]) == {"prof.json", "mat.txt"}
    header, entries = (tmp_path / "mat.txt").read_text().splitlines()[:2], None
    assert header[0].startswith("#")


def test_evolve_csv_preamble_and_mass(tmp_path):
    run(["evolve", "--N", "32", "--W", "4", "--t", "1.5", "--seed", "1",
         "--out", "ev.csv"], tmp_path)
    lines, header, rows = _data_rows(tmp_path / "ev.csv")
    assert lines[0] == f"# bandlab {__version__}"
    assert "# seed=1" in lines and any(l.startswith("# config=") for l in lines)
    assert any(l.startswith("# t=1.5") for l in lines)
    assert header == ["x1", "rho"]
    assert len(rows) == 32
    xs = [int(r[0]) for r in rows]
    assert xs[0] == -16 and xs[-1] == 15
    mass = sum(float(r[1]) for r in rows)
    assert mass == pytest.approx(1.0, abs=1e-9)


def test_evolve_nonconvergence_exits_three(tmp_path):
    proc = subprocess.run([BANDLAB, "evolve", "--N", "16", "--W", "2",
                           "--t", "2000000"], cwd=tmp_path,
                          capture_output=True, text=True)
    assert proc.returncode == 3
    assert "non-convergence" in proc.stderr


def test_limit_grid_rows(tmp_path):
    run(["limit", "--T", "1", "--grid", "-4:4:0.05", "--out", "lim.csv"],
        tmp_path)
    lines, header, rows = _data_rows(tmp_path / "lim.csv")
    assert header == ["X", "L"]
    assert len(rows) == 161
    assert float(rows[0][0]) == -4.0 and float(rows[-1][0]) == 4.0
    assert all(float(r[1]) > 0 for r in rows)
    assert any(l.startswith("# T=1.0") for l in lines)


def test_limit_rejects_malformed_grid(tmp_path):
    proc = subprocess.run([BANDLAB, "limit", "--T", "1", "--grid", "4:-4:1"],
                          cwd=tmp_path, capture_output=True, text=True)
    assert proc.returncode == 1
    assert "grid" in proc.stderr


def test_diagram_checks_pass(tmp_path):
    proc = run(["diagrams", "--check", "narayana"], tmp_path)
    assert "PASS" in proc.stdout and "narayana" in proc.stdout
    proc = run(["diagrams", "--check", "skeleton", "--max-edges", "6"], tmp_path)
    assert "PASS" in proc.stdout


def test_verify_suites(tmp_path):
    proc = run(["verify", "all", "--n-max", "4", "--seeds", "1"], tmp_path)
    assert "checks passed" in proc.stdout
    assert "FAIL" not in proc.stdout
    run(["verify", "nonbacktracking", "--n-max", "4", "--seeds", "1",
         "--out", "v.json"], tmp_path)
    report = json.loads((tmp_path / "v.json").read_text())
    assert report["failed"] == 0 and report["checks"]


def test_diffusion_manifest_rerun_is_byte_identical(tmp_path):
    run(["diffusion", "--N", "64", "--W", "8", "--kappa", "0.2", "--T", "0.5",
         "--realizations", "6", "--seed", "4", "--threads", "1",
         "--out", "diff.csv"], tmp_path)
    first_csv = (tmp_path / "diff.csv").read_bytes()
    first_sum = (tmp_path / "diff.summary.json").read_bytes()
    manifest = json.loads((tmp_path / "diff.manifest.json").read_text())
    assert manifest["config"]["realizations"] == 6

    run(["diffusion", "--config", "diff.manifest.json", "--threads", "2",
         "--out", "re.csv"], tmp_path)
    assert (tmp_path / "re.csv").read_bytes() == first_csv
    assert (tmp_path / "re.summary.json").read_bytes() == first_sum

    summary = json.loads(first_sum)
    assert summary["second_moment"]["ratio"] > 0
    assert {e["name"] for e in summary["rescaled"]["weak_tests"]} == {
        "gaussian", "cosine_window", "box_indicator"}


def test_config_file_with_flag_override(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"T": 2.0, "points": 11}))
    run(["limit", "--config", "c.json", "--out", "a.csv"], tmp_path)
    manifest = json.loads((tmp_path / "a.manifest.json").read_text())
    assert manifest["config"]["T"] == 2.0
    run(["limit", "--config", "c.json", "--T", "3", "--out", "b.csv"], tmp_path)
    manifest = json.loads((tmp_path / "b.manifest.json").read_text())
    assert manifest["config"]["T"] == 3.0
    _, _, rows = _data_rows(tmp_path / "b.csv")
    assert len(rows) == 11


def test_edge_cli_report(tmp_path):
    run(["edge", "--M", "32", "--trials", "3", "--epsilon", "0.5",
         "--out", "edge.csv"], tmp_path)
    _, header, rows = _data_rows(tmp_path / "edge.csv")
    assert header == ["trial", "lambda_max"]
    assert len(rows) == 3
    report = json.loads((tmp_path / "edge.report.json").read_text())
    assert report["threshold"] == pytest.approx(2.0 + 32.0 ** (-2.0 / 3.0 + 0.5))
    assert len(report["lambda_samples"]) == 3
    assert np.isclose(sorted(float(r[1]) for r in rows),
                      sorted(report["lambda_samples"])).all()
    manifest = json.loads((tmp_path / "edge.manifest.json").read_text())
    assert set(manifest["artifacts"]) == {"edge.csv", "edge.report.json"}
