import csv
import io
import json
import subprocess
import sys

import pytest

from qconn import cli


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def write_config(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


@pytest.fixture(scope="module")
def default_check(tmp_path_factory):
    out = tmp_path_factory.mktemp("check") / "report.json"
    code = cli.main(["check", "--out", str(out)])
    return code, json.loads(out.read_text())


def test_check_default_passes(default_check):
    code, report = default_check
    assert code == 0 and report["passed"]
    assert len(report["checks"]) >= 12
    for c in report["checks"]:
        assert {"name", "measured", "threshold", "passed"} <= set(c)


def test_check_names_every_criterion(default_check):
    _, report = default_check
    assert {c["criterion"] for c in report["checks"]} >= set(range(1, 11))


def test_check_reports_literal_anti_hermiticity(default_check):
    _, report = default_check
    entry = next(c for c in report["checks"] if c["name"] == "dirac_anti_hermiticity")
    assert entry["criterion"] == 9 and not entry["gating"]
    assert entry["measured"] > entry["threshold"]


def test_check_bad_bandlimit(tmp_path, capsys):
    cfg = write_config(tmp_path, {"bandlimits": {"connection": 2}})
    code, _, err = run(["check", "--config", cfg], capsys)
    assert code == 2 and "bandlimit" in err


@pytest.mark.parametrize("data", [
    {"manifold": {"n": [4, 4, 4], "L": [1.0, 1.0]}},
    {"hbar": [0.3, 0.15, 0.075]},
    {"group": {"kind": "SO"}},
    {"unknown": 1},
    {"manifold": {"metric": {"kind": "diagonal", "values": [1.0, -1.0, 1.0]}}},
])
def test_invalid_configs(tmp_path, capsys, data):
    code, _, err = run(["converge", "--config", write_config(tmp_path, data)], capsys)
    assert code == 2 and err.startswith("config error")


def test_missing_config_file(tmp_path, capsys):
    code, _, _ = run(["check", "--config", str(tmp_path / "nope.json")], capsys)
    assert code == 2


def test_corrupted_kernel_fails(tmp_path, capsys):
    cfg = write_config(tmp_path, {"options": {"corrupt_kernel_entry": True}, "trials": 2})
    code, out, err = run(["check", "--config", cfg], capsys)
    assert code == 1
    assert "FAILED kernel_unitarity" in err
    failed = {c["name"] for c in json.loads(out)["checks"] if not c["passed"] and c["gating"]}
    assert "kernel_unitarity" in failed


def parse_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_converge_table(capsys):
    code, out, _ = run(["converge"], capsys)
    assert code == 0
    rows = parse_csv(out)
    assert list(rows[0]) == ["quantity", "hbar", "spacing", "residual", "measured_order"]
    by = {}
    for r in rows:
        by.setdefault(r["quantity"], []).append(r)
    assert set(by) == {"gluing", "gauge_compat", "symbol_continuum"}
    for r in by["gluing"][1:]:
        assert 0.8 <= float(r["measured_order"]) <= 1.2
    for r in by["symbol_continuum"][1:]:
        assert 1.7 <= float(r["measured_order"]) <= 2.3
    assert [float(r["hbar"]) for r in by["gluing"]] == [0.25, 0.125, 0.0625]


def test_converge_zero_connection_exact(tmp_path, capsys):
    cfg = write_config(tmp_path, {"amplitudes": {"connection": 0.0, "gauge": 0.0}})
    code, out, _ = run(["converge", "--config", cfg], capsys)
    assert code == 0
    for r in parse_csv(out):
        if r["quantity"] in ("gluing", "gauge_compat"):
            assert float(r["residual"]) <= 1e-11
            assert r["measured_order"] == "exact"


@pytest.mark.parametrize("hbar", [[0.25, 0.125], [0.25, 0.125, 0.03125], [0.0625, 0.125, 0.25]])
def test_converge_needs_geometric_progression(tmp_path, capsys, hbar):
    code, _, _ = run(["converge", "--config", write_config(tmp_path, {"hbar": hbar})], capsys)
    assert code == 2


def test_converge_deterministic(tmp_path, capsys):
    cfg = write_config(tmp_path, {"manifold": {"n": [4, 4, 4]}, "convergence": {"n": 64}})
    outs = []
    for i in range(2):
        p = tmp_path / f"c{i}.csv"
        assert cli.main(["converge", "--config", cfg, "--out", str(p)]) == 0
        outs.append(p.read_bytes())
    assert outs[0] == outs[1]


def test_seed_changes_output(tmp_path):
    cfg = write_config(tmp_path, {"convergence": {"n": 64}})
    outs = []
    for seed in (1, 2):
        p = tmp_path / f"s{seed}.csv"
        assert cli.main(["converge", "--config", cfg, "--seed", str(seed), "--out", str(p)]) == 0
        outs.append(p.read_text())
    assert outs[0] != outs[1]


def test_spectrum(capsys):
    code, out, _ = run(["spectrum"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert len(rep["dirac_eigenvalues"]) == 128
    assert max(abs(v[1]) for v in rep["dirac_eigenvalues"]) < 1e-10  # symmetric operator
    assert len(rep["symbol_eigenvalues"]) == 128
    sv = rep["kernel_singular_values"]
    assert sv == sorted(sv, reverse=True)


def test_kernel_io(tmp_path, capsys):
    path = tmp_path / "k.bin"
    code, out, _ = run(["kernel-io", "save", str(path)], capsys)
    assert code == 0
    saved = json.loads(out)
    code, out, _ = run(["kernel-io", "load", str(path)], capsys)
    assert code == 0
    loaded = json.loads(out)
    assert loaded["trace"] == saved["trace"] and loaded["hbar"] == 0.25
    first = path.read_bytes()
    run(["kernel-io", "save", str(path)], capsys)
    assert path.read_bytes() == first


def test_kernel_io_errors(tmp_path, capsys):
    path = tmp_path / "k.bin"
    run(["kernel-io", "save", str(path)], capsys)
    data = path.read_bytes()
    trunc = tmp_path / "t.bin"
    trunc.write_bytes(data[:-1])
    assert run(["kernel-io", "load", str(trunc)], capsys)[0] == 3
    bad = tmp_path / "b.bin"
    bad.write_bytes(b"XXXXX" + data[5:])
    assert run(["kernel-io", "load", str(bad)], capsys)[0] == 3
    assert run(["kernel-io", "load", str(tmp_path / "missing.bin")], capsys)[0] == 3
    assert run(["kernel-io", "save", str(tmp_path / "no" / "dir.bin")], capsys)[0] == 3


def test_thread_env(monkeypatch, capsys):
    monkeypatch.setenv("QCONN_THREADS", "1")
    assert run(["spectrum"], capsys)[0] == 0
    monkeypatch.setenv("QCONN_THREADS", "many")
    assert run(["spectrum"], capsys)[0] == 2


def test_console_script_entry():
    proc = subprocess.run([sys.executable, "-m", "qconn.cli", "kernel-io", "load", "/nonexistent"],
                          capture_output=True, text=True)
    assert proc.returncode == 3
