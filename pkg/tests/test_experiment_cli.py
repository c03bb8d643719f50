import csv
import time
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

import leosec.experiment as exp
from leosec.channel import ArrayGeometry
from leosec.cli import main
from leosec.config import ExperimentConfig, load_config, parse_config
from leosec.driver import SolverFailure
from leosec.experiment import NoCoverageError, build_experiment_scenes, run_experiment

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
SMOKE = CONFIGS / "smoke.cfg"
DESK_FAST = """
[solver]
max_outer = 2
generations = 3
population = 8
"""


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _csv_bytes(root: Path) -> dict[str, bytes]:
    skip = {"timing.csv"}
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file() and p.name not in skip}


def test_bundled_configs_parse():
    for path in sorted(CONFIGS.glob("*.cfg")):
        load_config(path)
    assert load_config(CONFIGS / "desk.cfg").radio == ExperimentConfig().radio


def test_smoke_sweep(tmp_path):
    cfg = load_config(SMOKE)
    t0 = time.perf_counter()
    status, out = run_experiment(cfg, tmp_path / "a")
    elapsed = time.perf_counter() - t0
    assert status == 0
    assert elapsed < 60.0
    rows = _rows(out / "sweep.csv")
    assert len(rows) == 9
    assert {(r["value"], r["variant"]) for r in rows} == {
        (v, m) for v in ("30", "35", "40") for m in ("sca", "de", "fpa")}
    assert all(r["status"] == "ok" for r in rows)
    # more power never lowers the secrecy rate of the fixed array
    fpa = [float(r["secrecy_rate"]) for r in rows if r["variant"] == "fpa"]
    assert fpa == sorted(fpa)
    ET.parse(out / "sweep.svg")
    assert len(_rows(out / "timing.csv")) == 9


def test_reruns_are_byte_identical(tmp_path):
    cfg = load_config(SMOKE)
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b", threads=2)
    a, b = _csv_bytes(tmp_path / "a"), _csv_bytes(tmp_path / "b")
    assert a.keys() == b.keys() and a == b


def test_emitted_geometries_are_feasible(tmp_path):
    cfg = load_config(SMOKE)
    _, out = run_experiment(cfg, tmp_path)
    lam = cfg.radio.wavelength
    files = list(out.rglob("geometry*.csv"))
    assert len(files) == 18
    for f in files:
        xy = np.array([[float(r["x_m"]), float(r["y_m"])] for r in _rows(f)])
        g = ArrayGeometry(xy, cfg.array.side * lam, cfg.array.d_min * lam)
        assert g.box_violation() <= 1e-12
        assert g.min_spacing() >= g.d_min * (1 - 1e-9)


def test_aperture_table_matches_geometry(tmp_path):
    cfg = parse_config(DESK_FAST + "variants = sca\n")
    _, out = run_experiment(cfg, tmp_path)
    row = _rows(out / "aperture.csv")[0]
    xy = np.array([[float(r["x_lambda"]), float(r["y_lambda"])] for r in _rows(out / "cell_000" / "sca" / "geometry.csv")])
    spread = np.linalg.norm(xy - xy.mean(axis=0), axis=1).mean()
    assert float(row["spread_final_lambda"]) == pytest.approx(spread, rel=1e-9)


def test_partial_failure_continues(tmp_path, monkeypatch):
    real = exp.run_variant

    def flaky(cfg, variant, scenes=None):
        if variant == "de":
            raise SolverFailure(1, "forced")
        return real(cfg, variant, scenes)

    monkeypatch.setattr(exp, "run_variant", flaky)
    status, out = run_experiment(load_config(SMOKE), tmp_path)
    assert status == 3
    rows = _rows(out / "sweep.csv")
    assert len(rows) == 9
    assert all(r["status"].startswith("solver_failure") for r in rows if r["variant"] == "de")
    assert all(r["status"] == "ok" for r in rows if r["variant"] != "de")


def test_total_failure_status(tmp_path, monkeypatch):
    def broken(cfg, variant, scenes=None):
        raise SolverFailure(1, "forced")

    monkeypatch.setattr(exp, "run_variant", broken)
    status, _ = run_experiment(load_config(SMOKE), tmp_path)
    assert status == 2


def test_no_coverage():
    cfg = parse_config("[grid]\nmin_elevation = 89 deg\nslots = 1\n")
    with pytest.raises(NoCoverageError):
        build_experiment_scenes(cfg)


def test_cli_validate_and_errors(tmp_path, capsys):
    assert main(["validate", str(SMOKE)]) == 0
    assert "2 covered slots" in capsys.readouterr().out
    bad = tmp_path / "bad.cfg"
    bad.write_text("[radio]\nwhat = 1\n")
    assert main(["validate", str(bad)]) == 1
    assert main(["validate", str(tmp_path / "missing.cfg")]) == 1
    dark = tmp_path / "dark.cfg"
    dark.write_text("[grid]\nmin_elevation = 89 deg\nslots = 1\n")
    assert main(["run", str(dark), "--quiet", "--out", str(tmp_path / "d")]) == 1
    assert main(["sweep", str(CONFIGS / "desk.cfg"), "--quiet"]) == 1  # no [sweep] block
    assert main(["run", str(SMOKE), "--threads", "0"]) == 1


def test_cli_run_and_seed(tmp_path):
    assert main(["run", str(SMOKE), "--out", str(tmp_path / "r"), "--seed", "3", "--quiet"]) == 0
    rows = _rows(tmp_path / "r" / "sweep.csv")
    assert [r["variant"] for r in rows] == ["sca", "de", "fpa"]


def test_cli_beammap(tmp_path):
    cfg = tmp_path / "desk.cfg"
    cfg.write_text(DESK_FAST + "variants = sca, fpa\n[output]\nbeam_map_points = 11\n")
    assert main(["beammap", str(cfg), "--out", str(tmp_path / "b"), "--quiet"]) == 0
    # default picks the slot with the most eavesdroppers
    dirs = _rows(tmp_path / "b" / "directions_slot_1.csv")
    assert [d["role"] for d in dirs] == ["serving", "eavesdropper"]
    gain = _rows(tmp_path / "b" / "sca" / "beam_map_slot_1.csv")
    assert len(gain) == 11 * 11
    assert all(float(r["gain"]) >= 0 for r in gain)
    assert main(["beammap", str(cfg), "--out", str(tmp_path / "c"), "--slot", "3", "--quiet"]) == 1
