import json
import os

import pytest

from twiststats import lvalue as lv
from twiststats.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def jsonl(text):
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def test_family_lists_members(capsys):
    code, out, _ = run(capsys, "family", "--X1", "0", "--X2", "200")
    assert code == 0
    ds = [int(v) for v in out.split()]
    assert ds and all(0 < abs(d) <= 200 and d % 4 == 1 for d in ds)


def test_coefficient_file(tmp_path, capsys):
    path = tmp_path / "c.txt"
    code, _, _ = run(capsys, "coeffs", "--curve", "11a1", "--pmax", "100", "--out", str(path))
    assert code == 0 and path.stat().st_size > 0
    code, out, _ = run(capsys, "proxy", "--form", f"file:{path}", "--d", "-1019", "--x", "50")
    assert code == 0 and "P" in jsonl(out)[0]


def test_gauss_check_passes(capsys):
    code, out, _ = run(capsys, "gauss-check", "--nmax", "61", "--mmax", "5")
    assert code == 0


def test_lvalue_and_gate(capsys, monkeypatch):
    code, out, _ = run(capsys, "lvalue", "--d", "5", "--s", "0.5+1j")
    assert code == 0 and jsonl(out)[0]["fe_residual"] < 1e-8
    monkeypatch.setattr(lv, "fe_residual", lambda f, d, s: (1.0, 1.0, lv.complete_lambda(
        f, d, s), None))
    code, _, err = run(capsys, "lvalue", "--d", "5")
    assert code == 2 and "contract" in err


def test_lprime_rows(capsys):
    code, out, _ = run(capsys, "lprime", "--d-range", "-60:60")
    rows = jsonl(out)
    assert code == 0 and rows
    assert all(r["residuals"]["fd_rel"] < 1e-6 for r in rows)


def test_lprime_gate_on_failed_validation(capsys, monkeypatch):
    monkeypatch.setattr(lv, "finite_difference_derivative", lambda f, d, h=1e-4: 1e3)
    code, out, _ = run(capsys, "lprime", "--d-range", "1:30")
    assert code == 2 and "error" in jsonl(out)[0]


def test_zerosum_floor(capsys):
    code, out, _ = run(capsys, "zerosum", "--X", "3000")
    assert code == 0


def test_usage_errors_are_operational(capsys):
    assert run(capsys, "lprime")[0] == 1
    assert run(capsys, "lprime", "--d-range", "5:1")[0] == 1
    assert run(capsys, "family", "--X1", "0")[0] == 1
    assert run(capsys, "nosuchcommand")[0] == 1


def test_unknown_curve_is_operational_error(capsys):
    code, _, err = run(capsys, "lvalue", "--form", "999z9", "--d", "5")
    assert code == 1 and "error" in err


def test_bsd_default_fixture(capsys):
    code, out, _ = run(capsys, "bsd", "--d-range", "1:1")
    row = jsonl(out)[0]
    assert code == 0 and row["SR_over_sha_reg"] == pytest.approx(1.0, rel=1e-10)


def test_bsd_offline_without_cache_reports_nothing(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("TWISTSTATS_CACHE_DIR", str(tmp_path))
    code, out, _ = run(capsys, "bsd", "--remote", "https://example.invalid", "--offline",
                       "--d-range", "1:30")
    assert code == 0 and out == ""


def test_dist_proxy_pair(capsys):
    code, out, _ = run(capsys, "dist", "--kind", "proxy-pair", "--X", "5000", "--alpha", "-1,-1",
                       "--beta", "1,1")
    rep = jsonl(out)[0]
    assert code == 0 and 0 <= rep["fraction"] <= 1 and rep["constant"] == 0.75


def test_dist_rejects_mismatched_corners(capsys):
    assert run(capsys, "dist", "--kind", "theorem1", "--X", "100", "--alpha", "0",
               "--beta", "1,2")[0] == 1


def test_moments_then_report(tmp_path, capsys):
    out_dir = tmp_path / "run"
    code, out, _ = run(capsys, "moments", "--X", "10000", "--out", str(out_dir), "--per-d-csv")
    assert code == 0
    assert (out_dir / "records.jsonl").exists() and (out_dir / "config.txt").exists()
    code, text, _ = run(capsys, "report", "--out", str(out_dir), "--format", "csv")
    assert code == 0 and text.startswith("kind,config_hash,version,timestamp")
    dest = tmp_path / "r.jsonl"
    code, _, _ = run(capsys, "report", "--out", str(out_dir), "--format", "jsonl", "--dest",
                     str(dest))
    assert code == 0 and len(dest.read_text().splitlines()) == len(text.splitlines()) - 1
    assert any(name.endswith(".csv") for name in os.listdir(out_dir))


def test_version(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0 and "0.1.0" in out
