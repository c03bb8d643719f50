"""Experiment orchestration: scenes from a config, sweep cells, CSV and SVG output."""
from __future__ import annotations

import csv
import logging
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .channel import ArrayGeometry, beam_gain_map, fmt, write_beam_map_csv, write_geometry_csv
from .config import ConfigError, ExperimentConfig, sweep_key, sweep_values
from .constellation import ConstellationSpec, SlotScene, build_scenes, build_time_grid
from .driver import AoConfig, RunResult, SolverFailure, fpa_baseline_geometry, run_ao
from .position_de import DeConfig, repair
from .position_sca import TrustRegion

log = logging.getLogger(__name__)

OK = "ok"
NO_COVERAGE = "no_coverage"


class NoCoverageError(RuntimeError):
    """No slot of the observation window has a visible satellite."""


def constellation_spec(cfg: ExperimentConfig) -> ConstellationSpec:
    c = cfg.constellation
    return ConstellationSpec(
        num_planes=c.planes,
        sats_per_plane=c.sats_per_plane,
        altitude=c.altitude,
        inclination=c.inclination,
        earth_radius=c.earth_radius,
        gravitational_parameter=c.gravitational_parameter,
        earth_rotation_period=c.earth_rotation_period,
    )


def build_experiment_scenes(cfg: ExperimentConfig) -> list[SlotScene]:
    spec = constellation_spec(cfg)
    grid = build_time_grid(spec, cfg.grid.slots)
    scenes = build_scenes(
        spec,
        grid,
        skip_empty=cfg.grid.skip_empty,
        gs_latitude=cfg.grid.gs_latitude,
        wavelength=cfg.radio.wavelength,
        path_loss_exponent=cfg.radio.path_loss_exponent,
        reference_gain=cfg.radio.reference_gain,
        noise_power=cfg.radio.noise_power,
        min_elevation=cfg.grid.min_elevation,
        gs_longitude0=cfg.grid.gs_longitude,
        ascending_only=cfg.grid.ascending_only,
    )
    if not scenes:
        raise NoCoverageError("no slot has a visible satellite; change the station or the constellation")
    return scenes


def initial_geometry(cfg: ExperimentConfig) -> ArrayGeometry:
    lam = cfg.radio.wavelength
    side, d_min = cfg.array.side * lam, cfg.array.d_min * lam
    if cfg.array.init == "fpa":
        return fpa_baseline_geometry(cfg.array.elements, lam, side, d_min)
    rng = np.random.default_rng([cfg.solver.seed, 7])
    for _ in range(100):
        rep = repair(rng.uniform(0.0, side, 2 * cfg.array.elements), side, d_min, cfg.solver.repair_cap, rng)
        if rep.feasible:
            return ArrayGeometry(rep.positions.reshape(-1, 2), side, d_min)
    raise ValueError("could not draw a feasible random geometry")


def ao_config(cfg: ExperimentConfig, variant: str) -> AoConfig:
    s = cfg.solver
    return AoConfig(
        variant=variant,
        max_outer=s.max_outer,
        tol=s.tol,
        window=s.window,
        p_max=cfg.radio.p_max,
        c_min=cfg.radio.c_min,
        sdr_tol=s.sdr_tol,
        sdr_max_iterations=s.sdr_max_iterations,
        num_trials=s.num_trials,
        expand_at_relaxed=s.expand_at_relaxed,
        mu=s.mu,
        position_steps=s.position_steps,
        trust=TrustRegion(s.trust_initial, s.trust_min, s.trust_max),
        de=DeConfig(
            population_size=s.population,
            scale_factor=s.scale_factor,
            crossover_rate=s.crossover_rate,
            generations=s.generations,
            repair_cap=s.repair_cap,
            tie_accept=s.de_tie_accept,
            single_draw_crossover=s.single_draw_crossover,
            seed=s.seed,
        ),
        seed=s.seed,
    )


def run_variant(cfg: ExperimentConfig, variant: str,
                scenes: Sequence[SlotScene] | None = None) -> tuple[list[SlotScene], ArrayGeometry, RunResult]:
    """Run one variant; the FPA variant always starts from the half-wavelength grid."""
    scenes = build_experiment_scenes(cfg) if scenes is None else list(scenes)
    if variant == "fpa":
        lam = cfg.radio.wavelength
        init = fpa_baseline_geometry(cfg.array.elements, lam, cfg.array.side * lam, cfg.array.d_min * lam)
    else:
        init = initial_geometry(cfg)
    return scenes, init, run_ao(scenes, init, ao_config(cfg, variant))


@dataclass
class CellResult:
    index: int
    value: str
    variant: str
    objective: float
    status: str
    wall_time: float
    spread_before: float = math.nan
    spread_after: float = math.nan


def _cell_dir(out: Path, index: int, variant: str) -> Path:
    return out / f"cell_{index:03d}" / variant


def _run_cell(args) -> CellResult:
    cfg, index, label, variant, out, timing = args
    t0 = time.perf_counter()
    try:
        scenes, init, res = run_variant(cfg, variant)
        d = _cell_dir(Path(out), index, variant)
        res.write(d, scenes, timing=timing)
        lam = cfg.radio.wavelength
        write_geometry_csv(d / "geometry_initial.csv", init, lam)
        status = OK if not res.cmin_violations else "cmin_violated:" + ";".join(map(str, res.cmin_violations))
        return CellResult(index, label, variant, res.objective, status, time.perf_counter() - t0,
                          init.centroid_spread() / lam, res.geometry.centroid_spread() / lam)
    except SolverFailure as exc:
        return CellResult(index, label, variant, math.nan, f"solver_failure: {exc}", time.perf_counter() - t0)
    except NoCoverageError:
        return CellResult(index, label, variant, math.nan, NO_COVERAGE, time.perf_counter() - t0)
    except Exception as exc:  # keep the sweep going; the traceback goes to the log
        log.debug("cell %d/%s failed:\n%s", index, variant, traceback.format_exc())
        return CellResult(index, label, variant, math.nan, f"error: {type(exc).__name__}: {exc}",
                          time.perf_counter() - t0)


def _cells(cfg: ExperimentConfig):
    key = sweep_key(cfg)
    if key is None:
        return [(cfg, 0, "", v) for v in cfg.solver.variants]
    raw = [x.strip() for x in str(cfg.sweep.values).split(",") if x.strip()]
    cells = []
    for i, (label, value) in enumerate(zip(raw, sweep_values(cfg))):
        sub = cfg.with_value(key, value)
        cells.extend((sub, i, label, v) for v in cfg.solver.variants)
    return cells


def run_cells(cfg: ExperimentConfig, out: Path, threads: int = 1) -> list[CellResult]:
    timing = cfg.output.timestamps
    jobs = [(c, i, label, v, str(out), timing) for c, i, label, v in _cells(cfg)]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_run_cell, jobs))
    return [_run_cell(j) for j in jobs]


def write_sweep_csv(path: Path, parameter: str, cells: Sequence[CellResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["parameter", "value", "variant", "secrecy_rate", "status"])
        for c in cells:
            w.writerow([parameter, c.value, c.variant, "" if math.isnan(c.objective) else fmt(c.objective), c.status])


def write_timing_csv(path: Path, cells: Sequence[CellResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "variant", "wall_time_s"])
        for c in cells:
            w.writerow([c.value, c.variant, f"{c.wall_time:.3f}"])


def write_aperture_csv(path: Path, cells: Sequence[CellResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["value", "variant", "spread_initial_lambda", "spread_final_lambda"])
        for c in cells:
            w.writerow([c.value, c.variant, fmt(c.spread_before), fmt(c.spread_after)])


# ---------------------------------------------------------------------------
# SVG


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step + 1e-9) + 1)]


COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def svg_line_plot(series: dict[str, tuple[Sequence[float], Sequence[float]]], xlabel: str, ylabel: str,
                  title: str = "", timestamp: str | None = None) -> str:
    """Minimal SVG 1.1 line chart; deterministic unless ``timestamp`` is given."""
    W, H, ml, mr, mt, mb = 640, 420, 70, 120, 40, 60
    xs = [x for sx, _ in series.values() for x in sx if math.isfinite(x)]
    ys = [y for _, sy in series.values() for y in sy if math.isfinite(y)]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    pad = 0.05 * (y1 - y0 or 1.0)
    y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return ml + (x - x0) / (x1 - x0) * (W - ml - mr)

    def py(y):
        return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" '
        f'font-family="sans-serif" font-size="12">',
    ]
    if timestamp:
        out.append(f"<!-- generated {timestamp} -->")
    out.append(f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>')
    out.append(f'<rect x="{ml}" y="{mt}" width="{W - ml - mr}" height="{H - mt - mb}" fill="none" stroke="black"/>')
    for t in _ticks(x0, x1):
        if x0 <= t <= x1:
            out.append(f'<line x1="{px(t):.2f}" y1="{H - mb}" x2="{px(t):.2f}" y2="{H - mb + 5}" stroke="black"/>')
            out.append(f'<text x="{px(t):.2f}" y="{H - mb + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        if y0 <= t <= y1:
            out.append(f'<line x1="{ml - 5}" y1="{py(t):.2f}" x2="{ml}" y2="{py(t):.2f}" stroke="black"/>')
            out.append(f'<text x="{ml - 8}" y="{py(t) + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{(ml + W - mr) / 2:.1f}" y="{H - 15}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="18" y="{(mt + H - mb) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {(mt + H - mb) / 2:.1f})">{_esc(ylabel)}</text>')
    if title:
        out.append(f'<text x="{W / 2:.1f}" y="24" text-anchor="middle" font-size="14">{_esc(title)}</text>')
    for k, (name, (sx, sy)) in enumerate(series.items()):
        color = COLORS[k % len(COLORS)]
        pts = [(px(x), py(y)) for x, y in zip(sx, sy) if math.isfinite(x) and math.isfinite(y)]
        if pts:
            path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2"/>')
            out.extend(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{color}"/>' for a, b in pts)
        ly = mt + 10 + 18 * k
        out.append(f'<line x1="{W - mr + 10}" y1="{ly}" x2="{W - mr + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{W - mr + 35}" y="{ly + 4}">{_esc(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _timestamp(cfg: ExperimentConfig) -> str | None:
    return time.strftime("%Y-%m-%dT%H:%M:%S") if cfg.output.timestamps else None


def _numeric_labels(cells: Sequence[CellResult], cfg: ExperimentConfig) -> dict[str, float]:
    """x coordinates for the plot: the number as written in the config."""
    out = {}
    for c in cells:
        try:
            out[c.value] = float(c.value.split()[0])
        except (ValueError, IndexError):
            out[c.value] = float(c.index)
    return out


def write_sweep_plot(path: Path, cfg: ExperimentConfig, cells: Sequence[CellResult]) -> None:
    xs = _numeric_labels(cells, cfg)
    series = {}
    for v in cfg.solver.variants:
        row = [c for c in cells if c.variant == v]
        series[v.upper()] = ([xs[c.value] for c in row], [c.objective for c in row])
    svg = svg_line_plot(series, cfg.sweep.parameter or "", "average secrecy rate (bit/s/Hz)",
                        timestamp=_timestamp(cfg))
    path.write_text(svg)


# ---------------------------------------------------------------------------
# entry points used by the CLI


def exit_status(cells: Sequence[CellResult]) -> int:
    failed = [c for c in cells if c.status != OK and not c.status.startswith("cmin_violated")]
    if not failed:
        return 0
    if len(failed) == len(cells):
        return 2
    return 3


def run_experiment(cfg: ExperimentConfig, out: Path | str | None = None, threads: int = 1) -> tuple[int, Path]:
    """Run every (sweep value, variant) cell and write the combined tables.

    Returns ``(exit_status, output_directory)``.
    """
    out = Path(out or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    cells = run_cells(cfg, out, threads)
    if all(c.status == NO_COVERAGE for c in cells):
        raise NoCoverageError("no sweep cell has a visible satellite; change the station or the constellation")
    parameter = cfg.sweep.parameter or "none"
    write_sweep_csv(out / "sweep.csv", parameter, cells)
    write_timing_csv(out / "timing.csv", cells)
    write_aperture_csv(out / "aperture.csv", cells)
    if cfg.sweep.parameter is not None:
        write_sweep_plot(out / "sweep.svg", cfg, cells)
    for c in cells:
        log.info("%s %s: %s %s", c.value or "-", c.variant, fmt(c.objective), c.status)
    return exit_status(cells), out


def satellite_directions(scene: SlotScene) -> list[tuple[str, str, float, float]]:
    rows = [("serving", str(scene.serving), *scene.horizontal_waves[0])]
    rows += [("eavesdropper", str(s), *k) for s, k in zip(scene.eavesdroppers, scene.horizontal_waves[1:])]
    return rows


def run_beammap(cfg: ExperimentConfig, out: Path | str | None = None, slot: int | None = None) -> tuple[int, Path]:
    """Optimise every variant, then tabulate |w^H s|^2 over (kx, ky) for one slot."""
    out = Path(out or cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    scenes = build_experiment_scenes(cfg)
    pick = 0
    if slot is not None:
        idx = [s.slot_index for s in scenes]
        if slot not in idx:
            raise ConfigError(f"slot {slot} has no coverage; available: {idx}")
        pick = idx.index(slot)
    else:
        pick = int(np.argmax([s.num_eavesdroppers for s in scenes]))
    scene = scenes[pick]
    lam = cfg.radio.wavelength
    k = 2.0 * math.pi / lam
    grid = np.linspace(-k, k, cfg.output.beam_map_points)
    failed = 0
    for variant in cfg.solver.variants:
        d = out / variant
        try:
            _, init, res = run_variant(cfg, variant, scenes)
        except SolverFailure as exc:
            log.error("%s: %s", variant, exc)
            failed += 1
            continue
        res.write(d, scenes, timing=cfg.output.timestamps)
        write_geometry_csv(d / "geometry_initial.csv", init, lam)
        gain = beam_gain_map(res.geometry, res.plan[pick], grid, grid)
        write_beam_map_csv(d / f"beam_map_slot_{scene.slot_index}.csv", grid, grid, gain)
    with open(out / f"directions_slot_{scene.slot_index}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["role", "satellite", "kx", "ky"])
        for role, sat, kx, ky in satellite_directions(scene):
            w.writerow([role, sat, fmt(kx), fmt(ky)])
    status = 0 if failed == 0 else (2 if failed == len(cfg.solver.variants) else 3)
    return status, out
