"""Alternating optimisation of beamformers and antenna positions.

Three variants share one loop: ``sca`` and ``de`` alternate a beamforming
block with a position block, ``fpa`` keeps a fixed half-wavelength grid and
only runs the beamforming block.  Every block update is accept-guarded so the
average secrecy rate never decreases across outer iterations.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .beamforming import (
    CMIN_INFEASIBLE,
    SOLVER_FAILED,
    mrt_beamformer,
    randomize_rank_one,
    solve_beamforming_slot,
)
from .channel import (
    ArrayGeometry,
    SecrecyReport,
    average_secrecy_rate,
    fmt,
    secrecy_rate,
    write_geometry_csv,
)
from .constellation import SlotScene
from .position_de import DeConfig, de_optimize
from .position_sca import TrustRegion, optimize_positions_sca

log = logging.getLogger(__name__)

VARIANTS = ("sca", "de", "fpa")


class SolverFailure(RuntimeError):
    """The beamforming relaxation could not be solved for a slot."""

    def __init__(self, slot_index: int, message: str):
        super().__init__(f"slot {slot_index}: {message}")
        self.slot_index = slot_index


@dataclass(frozen=True)
class AoConfig:
    """Outer-loop and sub-solver settings.

    ``max_outer`` caps the outer iterations of either variant.  The loop
    stops once ``window`` consecutive gains fall below ``tol``.
    """

    variant: str = "sca"
    max_outer: int = 30
    tol: float = 1e-4  # bit/s/Hz
    window: int = 2
    p_max: float = 10.0  # W
    c_min: float = 0.01  # bit/s/Hz
    # beamforming block
    sdr_tol: float = 1e-6
    sdr_max_iterations: int = 30
    num_trials: int = 50
    expand_at_relaxed: bool = False
    # SCA position block
    mu: float = 0.05
    position_steps: int = 10
    trust: TrustRegion = TrustRegion()
    # DE position block
    de: DeConfig = DeConfig()
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.max_outer < 0:
            raise ValueError("max_outer must be >= 0")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.window < 1 or self.position_steps < 1:
            raise ValueError("window and position_steps must be >= 1")
        if not self.p_max > 0:
            raise ValueError("p_max must be positive")


@dataclass
class TraceRow:
    iteration: int
    objective: float
    after_beams: float
    elapsed: float


@dataclass
class RunResult:
    variant: str
    geometry: ArrayGeometry
    plan: list[np.ndarray]
    report: SecrecyReport
    trace: list[TraceRow]
    wall_time: float
    counts: dict = field(default_factory=dict)
    cmin_violations: list[int] = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.report.average

    def objective_trace(self) -> np.ndarray:
        return np.array([r.objective for r in self.trace])

    def write(self, directory, scenes: Sequence[SlotScene] | None = None, timing: bool = False) -> Path:
        """Write trace.csv, geometry.csv, plan/slot_<p>.csv and report.csv.

        Wall-clock columns are left out unless ``timing`` is set so that
        reruns produce identical files.
        """
        out = Path(directory)
        (out / "plan").mkdir(parents=True, exist_ok=True)
        with open(out / "trace.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "objective", "after_beams"] + (["elapsed_s"] if timing else []))
            for r in self.trace:
                row = [r.iteration, fmt(r.objective), fmt(r.after_beams)]
                w.writerow(row + ([fmt(r.elapsed)] if timing else []))
        lam = scenes[0].wavelength if scenes else 1.0
        write_geometry_csv(out / "geometry.csv", self.geometry, lam)
        for p, wv in enumerate(self.plan):
            slot = scenes[p].slot_index if scenes else p + 1
            with open(out / "plan" / f"slot_{slot}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["n", "re", "im"])
                for n, c in enumerate(np.asarray(wv), start=1):
                    w.writerow([n, fmt(c.real), fmt(c.imag)])
        self.report.write_csv(out / "report.csv", scenes)
        return out


def fpa_baseline_geometry(num_elements: int, wavelength: float, side: float | None = None,
                          d_min: float | None = None) -> ArrayGeometry:
    """Half-wavelength uniform planar grid centred in the square region.

    Non-square ``num_elements`` use the most balanced factorisation rows x cols.
    """
    if num_elements < 1:
        raise ValueError("num_elements must be >= 1")
    side = 3.0 * wavelength if side is None else side
    d_min = 0.5 * wavelength if d_min is None else d_min
    rows = int(math.isqrt(num_elements))
    while num_elements % rows:
        rows -= 1
    cols = num_elements // rows
    if rows == 1 and num_elements > 3:
        raise ValueError(f"{num_elements} elements have no planar factorisation")
    spacing = 0.5 * wavelength
    if (max(rows, cols) - 1) * spacing > side:
        raise ValueError("grid does not fit in the region")
    xs = side / 2 + spacing * (np.arange(cols) - (cols - 1) / 2)
    ys = side / 2 + spacing * (np.arange(rows) - (rows - 1) / 2)
    X, Y = np.meshgrid(xs, ys)
    return ArrayGeometry(np.stack([X.ravel(), Y.ravel()], axis=1), side, d_min)


def complexity_estimate(
    variant: str,
    N: int,
    P: int,
    M: int = 1,
    *,
    outer: int = 1,
    beam_iterations: int = 1,
    position_iterations: int = 1,
    generations: int = 1,
    population: int = 1,
    part: str = "total",
) -> float:
    """Leading-order operation counts of one run.

    ``part="position"`` keeps only the antenna-position term, which is where
    the two variants differ; ``"total"`` adds the shared beamforming term.
    """
    if part not in ("total", "position"):
        raise ValueError("part must be 'total' or 'position'")
    beam = beam_iterations * P * float(N) ** 6
    if variant == "sca":
        pos = position_iterations * (N + N * (N - 1) / 2) * (2.0 * N) ** 3
    elif variant == "de":
        pos = float(generations) * population * P * M * N
    else:
        raise ValueError("variant must be 'sca' or 'de'")
    return outer * (pos if part == "position" else beam + pos)


def _slot_rng(seed: int, slot: int, iteration: int) -> np.random.Generator:
    return np.random.default_rng([seed, slot, iteration])


def _beam_block(scenes, geometry, plan, expansion, config: AoConfig, iteration: int, pool):
    """Candidate beamformers per slot; each slot keeps the better of old and new."""

    def one(p):
        sc = scenes[p]
        res = solve_beamforming_slot(
            sc, geometry, config.p_max, config.c_min, config.sdr_tol,
            config.sdr_max_iterations, W0=expansion[p],
        )
        if res.status == SOLVER_FAILED:
            raise SolverFailure(sc.slot_index, "relaxed beamforming problem could not be solved")
        rec = randomize_rank_one(
            res.W, config.p_max, sc, geometry, config.num_trials,
            _slot_rng(config.seed, sc.slot_index, iteration), config.c_min,
        )
        return res, rec

    results = list(pool.map(one, range(len(scenes)))) if pool else [one(p) for p in range(len(scenes))]
    new_plan, new_exp = list(plan), list(expansion)
    flagged = []
    for p, (res, rec) in enumerate(results):
        old = secrecy_rate(scenes[p], geometry, plan[p])
        if (rec.rates.secrecy, rec.rates.margin) >= (old.secrecy, old.margin):
            new_plan[p] = rec.w
            new_exp[p] = res.W if config.expand_at_relaxed else np.outer(rec.w, rec.w.conj())
        if res.status == CMIN_INFEASIBLE:
            flagged.append(scenes[p].slot_index)
    return new_plan, new_exp, flagged


def run_ao(scenes: Sequence[SlotScene], init_geometry: ArrayGeometry, config: AoConfig) -> RunResult:
    """Alternating optimisation for the configured variant."""
    if not scenes:
        raise ValueError("no slots to optimise")
    if not init_geometry.is_feasible():
        raise ValueError("initial geometry violates the region or spacing constraints")
    t0 = time.perf_counter()
    geometry = init_geometry
    plan = [mrt_beamformer(sc, geometry, config.p_max) for sc in scenes]
    expansion = [np.outer(w, w.conj()) for w in plan]
    current = average_secrecy_rate(scenes, geometry, plan).average
    trace = [TraceRow(0, current, current, 0.0)]
    counts = {"beam_blocks": 0, "position_blocks": 0, "position_accepted": 0, "de_evaluations": 0}
    flagged: list[int] = []
    small = 0
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for r in range(1, config.max_outer + 1):
            plan, expansion, flagged = _beam_block(scenes, geometry, plan, expansion, config, r, pool)
            counts["beam_blocks"] += 1
            after_beams = average_secrecy_rate(scenes, geometry, plan).average
            if config.variant == "sca":
                state, _ = optimize_positions_sca(
                    scenes, geometry, plan, config.mu, config.c_min,
                    max_steps=config.position_steps, tol=min(config.tol, 1e-6), trust=config.trust,
                )
                cand = state.geometry
            elif config.variant == "de":
                res = de_optimize(scenes, plan, config.de, geometry, config.c_min, stream=(config.seed, r))
                counts["de_evaluations"] += res.evaluations
                cand = res.geometry
            else:
                cand = geometry
            value = after_beams
            if config.variant != "fpa":
                counts["position_blocks"] += 1
                cand_value = average_secrecy_rate(scenes, cand, plan).average
                if cand.is_feasible() and cand_value >= after_beams:
                    geometry, value = cand, cand_value
                    counts["position_accepted"] += 1
            gain = value - current
            current = value
            trace.append(TraceRow(r, current, after_beams, time.perf_counter() - t0))
            log.info("%s outer %d: %.6f bit/s/Hz", config.variant, r, current)
            small = small + 1 if gain < config.tol else 0
            if small >= config.window:
                break
    finally:
        if pool:
            pool.shutdown()
    report = average_secrecy_rate(scenes, geometry, plan)
    return RunResult(config.variant, geometry, plan, report, trace,
                     time.perf_counter() - t0, counts, flagged)


def _with_variant(config: AoConfig, variant: str) -> AoConfig:
    return replace(config, variant=variant)


def run_sca_ao(scenes, init_geometry, config: AoConfig) -> RunResult:
    return run_ao(scenes, init_geometry, _with_variant(config, "sca"))


def run_de_ao(scenes, init_geometry, config: AoConfig) -> RunResult:
    return run_ao(scenes, init_geometry, _with_variant(config, "de"))


def run_fpa(scenes, config: AoConfig, num_elements: int | None = None,
            geometry: ArrayGeometry | None = None) -> RunResult:
    """Beamforming only, on the fixed grid (or on ``geometry`` if given)."""
    if geometry is None:
        if num_elements is None:
            raise ValueError("give num_elements or a geometry")
        geometry = fpa_baseline_geometry(num_elements, scenes[0].wavelength)
    return run_ao(scenes, geometry, _with_variant(config, "fpa"))
