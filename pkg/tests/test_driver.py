import math

import numpy as np
import pytest

import leosec.driver as drv
from leosec.beamforming import SOLVER_FAILED, BeamformingResult, mrt_beamformer
from leosec.channel import average_secrecy_rate
from leosec.driver import (
    AoConfig,
    SolverFailure,
    complexity_estimate,
    fpa_baseline_geometry,
    run_ao,
    run_de_ao,
    run_fpa,
    run_sca_ao,
)
from leosec.position_de import DeConfig

LAM = 0.0249827


@pytest.fixture(scope="module")
def desk(desk_scenes):
    return desk_scenes, fpa_baseline_geometry(4, desk_scenes[0].wavelength)


@pytest.mark.parametrize("n,rows,cols", [(4, 2, 2), (9, 3, 3), (6, 2, 3), (16, 4, 4)])
def test_fpa_grid(n, rows, cols):
    g = fpa_baseline_geometry(n, LAM)
    xs, ys = np.unique(g.positions[:, 0].round(15)), np.unique(g.positions[:, 1].round(15))
    assert (len(ys), len(xs)) == (rows, cols)
    np.testing.assert_allclose(np.diff(xs), 0.5 * LAM)
    np.testing.assert_allclose(g.positions.mean(axis=0), [1.5 * LAM, 1.5 * LAM])
    assert g.min_spacing() >= 0.5 * LAM - 1e-15
    assert g.is_feasible()


def test_fpa_grid_rejects():
    with pytest.raises(ValueError):
        fpa_baseline_geometry(7, LAM)
    with pytest.raises(ValueError):
        fpa_baseline_geometry(0, LAM)
    with pytest.raises(ValueError):
        fpa_baseline_geometry(64, LAM)  # 8 x 8 at lambda/2 exceeds 3 lambda


def test_complexity_examples():
    kw = dict(outer=3, beam_iterations=5, position_iterations=7)
    assert complexity_estimate("sca", 1, 4, **kw) == 3 * (5 * 4 + 7 * 1 * 8)
    a = complexity_estimate("sca", 4, 4, part="total", outer=1, beam_iterations=1, position_iterations=0)
    b = complexity_estimate("sca", 8, 4, part="total", outer=1, beam_iterations=1, position_iterations=0)
    assert b == 64 * a
    de = complexity_estimate("de", 4, 8, 2, outer=10, beam_iterations=3, generations=30, population=50)
    assert de == 10 * (3 * 8 * 4 ** 6 + 30 * 50 * 8 * 2 * 4)
    assert complexity_estimate("de", 4, 8, 2, generations=30, population=50, part="position") == 30 * 50 * 8 * 2 * 4
    with pytest.raises(ValueError):
        complexity_estimate("fpa", 4, 4)
    with pytest.raises(ValueError):
        complexity_estimate("sca", 4, 4, part="beam")


def test_config_validation():
    with pytest.raises(ValueError):
        AoConfig(variant="pso")
    with pytest.raises(ValueError):
        AoConfig(max_outer=-1)
    with pytest.raises(ValueError):
        AoConfig(p_max=0.0)


def test_zero_outer_iterations(desk):
    scenes, g = desk
    res = run_sca_ao(scenes, g, AoConfig(max_outer=0))
    plan = [mrt_beamformer(sc, g, 10.0) for sc in scenes]
    assert len(res.trace) == 1
    assert res.objective == average_secrecy_rate(scenes, g, plan).average
    np.testing.assert_array_equal(res.geometry.positions, g.positions)


def test_frozen_positions_equal_fpa(desk):
    scenes, g = desk
    cfg = AoConfig(max_outer=3, seed=2)
    a = run_fpa(scenes, cfg, num_elements=4)
    b = run_ao(scenes, g, AoConfig(variant="fpa", max_outer=3, seed=2))
    assert a.objective == b.objective
    # the first beam block is shared with the movable-antenna variant
    c = run_sca_ao(scenes, g, AoConfig(max_outer=1, seed=2))
    assert c.trace[1].after_beams == a.trace[1].objective


def test_sca_ao_desk(desk):
    scenes, g = desk
    res = run_sca_ao(scenes, g, AoConfig(seed=0))
    fpa = run_fpa(scenes, AoConfig(seed=0), geometry=g)
    tr = res.objective_trace()
    assert np.all(np.diff(tr) >= -1e-6)
    assert len(tr) <= 31
    assert res.geometry.is_feasible()
    assert res.objective >= fpa.objective - 1e-4
    again = run_sca_ao(scenes, g, AoConfig(seed=0))
    assert again.objective == res.objective
    np.testing.assert_array_equal(again.geometry.positions, res.geometry.positions)


def test_de_ao_smoke(desk):
    scenes, g = desk
    cfg = AoConfig(max_outer=2, de=DeConfig(population_size=4, generations=1))
    res = run_de_ao(scenes, g, cfg)
    assert np.all(np.diff(res.objective_trace()) >= -1e-6)
    assert res.counts["de_evaluations"] == res.counts["position_blocks"] * 8
    assert res.geometry.is_feasible()


def test_worker_count_does_not_change_result(desk):
    scenes, g = desk
    a = run_sca_ao(scenes, g, AoConfig(max_outer=2, workers=1))
    b = run_sca_ao(scenes, g, AoConfig(max_outer=2, workers=3))
    assert a.objective == b.objective
    for wa, wb in zip(a.plan, b.plan):
        np.testing.assert_array_equal(wa, wb)


def test_solver_failure_names_slot(desk, monkeypatch):
    scenes, g = desk

    def broken(scene, *args, **kwargs):
        return BeamformingResult(np.eye(4), math.nan, math.nan, SOLVER_FAILED)

    monkeypatch.setattr(drv, "solve_beamforming_slot", broken)
    with pytest.raises(SolverFailure) as exc:
        run_sca_ao(scenes, g, AoConfig(max_outer=1))
    assert exc.value.slot_index == scenes[0].slot_index


def test_unreachable_cmin_is_flagged(desk):
    scenes, g = desk
    res = run_fpa(scenes, AoConfig(max_outer=1, c_min=100.0), geometry=g)
    assert res.cmin_violations == [sc.slot_index for sc in scenes]


def test_run_rejects_bad_input(desk):
    scenes, g = desk
    with pytest.raises(ValueError):
        run_ao([], g, AoConfig())
    bad = g.with_positions(np.zeros((4, 2)))
    with pytest.raises(ValueError):
        run_ao(scenes, bad, AoConfig())


def test_result_directory(tmp_path, desk):
    scenes, g = desk
    res = run_fpa(scenes, AoConfig(max_outer=1), geometry=g)
    out = res.write(tmp_path / "r", scenes)
    names = sorted(p.relative_to(out).as_posix() for p in out.rglob("*.csv"))
    assert names == sorted(["trace.csv", "geometry.csv", "report.csv"]
                           + [f"plan/slot_{sc.slot_index}.csv" for sc in scenes])
    assert (out / "trace.csv").read_text().splitlines()[0] == "iteration,objective,after_beams"
    res.write(tmp_path / "t", scenes, timing=True)
    assert (tmp_path / "t" / "trace.csv").read_text().splitlines()[0].endswith(",elapsed_s")
    report = (out / "report.csv").read_text().splitlines()
    assert report[-1].startswith("mean,")
