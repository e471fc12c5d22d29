import csv
import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from gpmw.cli import OUTPUT_ENV, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

TINY = """name: tiny
seed: 3
horizon: 15
repeats: 2
environment:
  type: matrix
  K: 5
  kernel: {family: se, lengthscale: 2.0}
  noise_std: 0.5
learners:
  player1: {variant: gp-mw}
  player2: {variant: uniform-random}
variants:
  gp-mw: {}
  exp3p:
    player1: {variant: exp3p}
output:
  dir: out
"""


@pytest.fixture
def tiny(tmp_path):
    p = tmp_path / "tiny.yaml"
    p.write_text(TINY)
    return p


def files(d):
    return {p.relative_to(d): p.read_bytes() for p in sorted(Path(d).rglob("*")) if p.is_file()}


def test_run_writes_logs_summary_series(tiny, tmp_path, capsys):
    out = tmp_path / "res"
    assert main(["run", "--config", str(tiny), "--out", str(out)]) == 0
    got = files(out)
    assert sum(1 for p in got if p.suffix == ".csv" and p.parts[0] == "gp-mw") == 2
    assert Path("summary.json") in got and Path("config.json") in got
    assert Path("series/exp3p__regret_player1.csv") in got
    assert "final regret/player1" in capsys.readouterr().out


def test_run_twice_byte_identical(tiny, tmp_path):
    main(["run", "--config", str(tiny), "--out", str(tmp_path / "a"), "-q"])
    main(["run", "--config", str(tiny), "--out", str(tmp_path / "b"), "-q", "--parallel", "2"])
    assert files(tmp_path / "a") == files(tmp_path / "b")


def test_seed_override_changes_logs_not_schema(tiny, tmp_path):
    main(["run", "--config", str(tiny), "--out", str(tmp_path / "a"), "-q", "--variant", "gp-mw"])
    main(["run", "--config", str(tiny), "--out", str(tmp_path / "b"), "-q", "--variant", "gp-mw", "--seed", "99"])
    a = (tmp_path / "a/gp-mw/repeat_000.csv").read_text()
    b = (tmp_path / "b/gp-mw/repeat_000.csv").read_text()
    assert a != b
    assert a.splitlines()[0] == b.splitlines()[0]
    assert len(a.splitlines()) == len(b.splitlines())
    assert json.loads((tmp_path / "b/config.json").read_text())["seed"] == 99


def test_missing_seed_is_generated_and_recorded(tmp_path, capsys):
    p = tmp_path / "noseed.yaml"
    p.write_text(TINY.replace("seed: 3\n", ""))
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o"), "--variant", "exp3p"]) == 0
    printed = capsys.readouterr().out
    assert "generated seed" in printed
    seed = json.loads((tmp_path / "o/config.json").read_text())["seed"]
    assert str(seed) in printed
    assert json.loads((tmp_path / "o/exp3p/repeat_000.json").read_text())["seed"] == seed


def test_output_env_override(tiny, tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "envout"))
    assert main(["run", "--config", str(tiny), "-q", "--variant", "exp3p"]) == 0
    assert (tmp_path / "envout/tiny/summary.json").is_file()


def test_config_output_dir_used_without_overrides(tiny, tmp_path, monkeypatch):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    monkeypatch.chdir(tmp_path)
    assert main(["run", "--config", str(tiny), "-q", "--variant", "exp3p"]) == 0
    assert (tmp_path / "out/summary.json").is_file()


def test_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "nowhere.yaml"
    assert main(["run", "--config", str(missing)]) != 0
    assert str(missing) in capsys.readouterr().err


def test_invalid_config_line_precise(tiny, capsys):
    tiny.write_text(TINY.replace("K: 5", "K: -5"))
    assert main(["validate", "--config", str(tiny)]) != 0
    assert "tiny.yaml:7: environment.K" in capsys.readouterr().err


def test_validate_matrix_prints_K_and_T(capsys):
    assert main(["validate", "--config", str(CONFIGS / "matrix_random_opponent.yaml")]) == 0
    assert "K=30 T=200" in capsys.readouterr().out


def test_validate_routing_reports_agents(capsys):
    assert main(["validate", "--config", str(CONFIGS / "routing.yaml")]) == 0
    out = capsys.readouterr().out
    assert "agents: 528" in out
    counts = out.split("per-agent route counts: ")[1].split()
    assert len(counts) == 528 and all(1 <= int(c) <= 5 for c in counts)


def test_validate_malformed_tntp_names_line(tmp_path, capsys):
    net = tmp_path / "net.tntp"
    net.write_text(
        "<NUMBER OF NODES> 2\n<NUMBER OF LINKS> 1\n<END OF METADATA>\n\n"
        "~ init term cap len fft b power speed toll type\n"
        "1 2 100 1 oops 0.15 4 0 0 1 ;\n"
    )
    trips = tmp_path / "trips.tntp"
    trips.write_text("<NUMBER OF ZONES> 2\n<TOTAL OD FLOW> 5\n<END OF METADATA>\n\nOrigin 1\n2 : 5.0;\n")
    cfg = tmp_path / "r.yaml"
    cfg.write_text(
        "name: r\nseed: 1\nhorizon: 2\nenvironment:\n  type: routing\n"
        "  network: {net: net.tntp, trips: trips.tntp}\n"
        "learners:\n  learning: {variant: hedge}\n"
    )
    assert main(["validate", "--config", str(cfg)]) != 0
    assert "net.tntp:6" in capsys.readouterr().err


def test_export_idempotent_and_empty(tiny, tmp_path, capsys):
    out = tmp_path / "res"
    main(["run", "--config", str(tiny), "--out", str(out), "-q"])
    before = files(out)
    assert main(["export", str(out)]) == 0
    assert main(["export", str(out)]) == 0
    assert files(out) == before
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["export", str(empty)]) != 0
    assert "error" in capsys.readouterr().err


def test_export_corrupt_log(tiny, tmp_path):
    out = tmp_path / "res"
    main(["run", "--config", str(tiny), "--out", str(out), "-q"])
    (out / "gp-mw/repeat_001.csv").write_text("round,agent\nx\n")
    assert main(["export", str(out)]) != 0


def test_routes_dump(tmp_path):
    assert main(["routes", "--config", str(CONFIGS / "routing.yaml"), "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "routes.csv")))
    assert len({r["agent"] for r in rows}) == 528
    assert all(float(r["ratio_to_shortest"]) <= 3.0 for r in rows)
    assert list(tmp_path.iterdir()) == [tmp_path / "routes.csv"]


def test_routes_rejects_matrix(capsys):
    assert main(["routes", "--config", str(CONFIGS / "matrix_random_opponent.yaml"), "--out", "/nonexistent/never"]) != 0
    assert not Path("/nonexistent/never").exists()


def test_fit_without_fit_sections(tiny, tmp_path, capsys):
    assert main(["fit", "--config", str(tiny), "--out", str(tmp_path / "f")]) == 0
    assert "nothing to do" in capsys.readouterr().out
    assert not (tmp_path / "f").exists()


def test_fit_writes_kernels(tiny, tmp_path):
    tiny.write_text(TINY.replace("player1: {variant: gp-mw}", "player1: {variant: gp-mw, fit: {samples: 50, candidates: {lengthscale: [1.0, 2.0]}}}"))
    assert main(["fit", "--config", str(tiny), "--out", str(tmp_path / "f")]) == 0
    fitted = json.loads((tmp_path / "f/fitted_kernels.json").read_text())
    assert fitted["gp-mw"]["0"]["lengthscale"] in (1.0, 2.0)


@pytest.mark.skipif(shutil.which("gpmw") is None, reason="console script not installed")
def test_entry_point(tiny, tmp_path):
    r = subprocess.run(["gpmw", "validate", "--config", str(tiny)], capture_output=True, text=True)
    assert r.returncode == 0 and "K=5 T=15" in r.stdout
    r = subprocess.run([sys.executable, "-m", "gpmw.cli", "run"], capture_output=True, text=True)
    assert r.returncode != 0
