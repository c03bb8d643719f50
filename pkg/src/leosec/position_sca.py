"""Antenna-position update by successive linear programming.

The eavesdropper max is smoothed with a log-sum-exp, the smoothed average
secrecy rate is linearized at the current positions, and a trust-region LP
picks the step.  Steps are kept only when the exact (clamped) average secrecy
rate does not drop.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .channel import ArrayGeometry, _as_covariance, average_secrecy_rate, fmt, steering_matrix
from .constellation import SlotScene

log = logging.getLogger(__name__)

LN2 = math.log(2.0)
SLACK_PENALTY = 1e3


@dataclass(frozen=True)
class SmoothingConfig:
    mu: float = 0.05  # bit/s/Hz

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")


@dataclass(frozen=True)
class TrustRegion:
    """Radii in wavelengths."""

    initial: float = 0.25
    minimum: float = 1e-4
    maximum: float = 1.0
    shrink: float = 0.5
    grow: float = 1.5
    max_shrinks: int = 5

    def __post_init__(self):
        if not 0 < self.minimum <= self.initial <= self.maximum:
            raise ValueError("trust radii must satisfy 0 < minimum <= initial <= maximum")


@dataclass(frozen=True)
class ScaState:
    geometry: ArrayGeometry
    trust_radius: float  # m
    iteration: int = 0
    objective: float = math.nan


@dataclass(frozen=True)
class ScaStep:
    state: ScaState
    accepted: bool
    step_norm: float  # m, infinity norm
    slack: float
    violation: float  # worst linearized-secrecy shortfall at the accepted point
    stalled: bool = False


def smoothed_eaves_rate(rates, mu: float) -> float:
    """mu * ln(sum exp(rate / mu)); ``-inf`` when there is no eavesdropper."""
    r = np.asarray(rates, dtype=float)
    if r.size == 0:
        return -math.inf
    top = float(r.max())
    return top + mu * math.log(float(np.exp((r - top) / mu).sum()))


def softmax_weights(rates, mu: float) -> np.ndarray:
    r = np.asarray(rates, dtype=float)
    e = np.exp((r - r.max()) / mu)
    return e / e.sum()


def _slot_terms(scene: SlotScene, positions: np.ndarray, W: np.ndarray, mu: float):
    """Smoothed slot secrecy value and its gradient (N, 2) in bit/s/Hz per metre."""
    S = steering_matrix(scene, positions)  # (L, N)
    WS = S @ W.T  # rows are W s_l
    u = np.real(np.einsum("ln,ln->l", S.conj(), WS))
    a = scene.gain_to_noise
    rates = np.log2(1.0 + a * np.maximum(u, 0.0))
    # du_l/dc_n = 2 Im(s_ln^* (W s_l)_n) k_l
    im = 2.0 * np.imag(S.conj() * WS)  # (L, N)
    k = scene.horizontal_waves  # (L, 2)
    coef = a / (LN2 * (1.0 + a * u))
    dA = (coef * im.T).T[:, :, None] * k[:, None, :]  # (L, N, 2)
    if scene.num_eavesdroppers == 0:
        return float(rates[0]), dA[0], rates
    wts = softmax_weights(rates[1:], mu)
    value = float(rates[0]) - smoothed_eaves_rate(rates[1:], mu)
    grad = dA[0] - np.tensordot(wts, dA[1:], axes=1)
    return value, grad, rates


def smoothed_objective(scenes: Sequence[SlotScene], geometry, plan, mu: float) -> float:
    """Average over slots of legitimate rate minus smoothed eavesdropper rate."""
    pos = _positions(geometry)
    return float(np.mean([_slot_terms(sc, pos, _as_covariance(w), mu)[0] for sc, w in zip(scenes, plan)]))


def position_gradient(scenes: Sequence[SlotScene], geometry, plan, mu: float) -> np.ndarray:
    """Gradient of ``smoothed_objective`` as a flat 2N vector (x1, y1, x2, ...)."""
    pos = _positions(geometry)
    if len(scenes) != len(plan):
        raise ValueError(f"{len(scenes)} scenes but {len(plan)} beamformers")
    total = np.zeros_like(pos)
    for sc, w in zip(scenes, plan):
        W = _as_covariance(w)
        if W.shape != (pos.shape[0], pos.shape[0]):
            raise ValueError("beamformer dimension does not match the array")
        total += _slot_terms(sc, pos, W, mu)[1]
    return (total / len(scenes)).ravel()


def _positions(geometry) -> np.ndarray:
    if isinstance(geometry, ArrayGeometry):
        return geometry.positions
    return np.asarray(geometry, dtype=float).reshape(-1, 2)


@dataclass(frozen=True)
class AffineConstraints:
    """Rows ``coef @ c + offset >= bound`` in flat 2N position coordinates (metres)."""

    coef: np.ndarray
    offset: np.ndarray
    bound: float | np.ndarray

    def evaluate(self, c_flat: np.ndarray) -> np.ndarray:
        return self.coef @ np.asarray(c_flat, dtype=float) + self.offset

    def slack(self, c_flat: np.ndarray) -> np.ndarray:
        return self.evaluate(c_flat) - self.bound


def linearize_secrecy_constraint(
    scenes: Sequence[SlotScene], state: ScaState | ArrayGeometry, plan, mu: float, c_min: float
) -> AffineConstraints:
    """Per-slot tangent of the smoothed secrecy value, to be kept >= ``c_min``."""
    geometry = state.geometry if isinstance(state, ScaState) else state
    c0 = geometry.flat
    rows, offs = [], []
    for sc, w in zip(scenes, plan):
        val, grad, _ = _slot_terms(sc, geometry.positions, _as_covariance(w), mu)
        g = grad.ravel()
        rows.append(g)
        offs.append(val - g @ c0)
    return AffineConstraints(np.array(rows).reshape(len(rows), c0.size), np.array(offs), c_min)


def linearize_spacing(state: ScaState | ArrayGeometry) -> AffineConstraints:
    """One row per pair n < m: unit(c_n0 - c_m0) . (c_n - c_m) >= d_min."""
    geometry = state.geometry if isinstance(state, ScaState) else state
    pos = geometry.positions
    n = pos.shape[0]
    rows = []
    for i in range(n):
        for j in range(i + 1, n):
            d = pos[i] - pos[j]
            dist = float(np.linalg.norm(d))
            if dist < 1e-12:
                raise ValueError(f"elements {i + 1} and {j + 1} coincide; spacing cannot be linearized")
            r = np.zeros(2 * n)
            r[2 * i:2 * i + 2] = d / dist
            r[2 * j:2 * j + 2] = -d / dist
            rows.append(r)
    coef = np.array(rows).reshape(len(rows), 2 * n)
    return AffineConstraints(coef, np.zeros(len(rows)), geometry.d_min)


def _solve_lp(grad, sec: AffineConstraints, spc: AffineConstraints, c0, side, radius, scale):
    """Step in wavelength units; returns (delta_m, slack) or None if the LP fails."""
    n2 = c0.size
    cost = np.concatenate([-grad * scale, [SLACK_PENALTY]])
    A_rows, b = [], []
    # sec: coef@(c0 + d) + off + slack >= c_min
    A_rows.append(np.hstack([-sec.coef * scale, -np.ones((sec.coef.shape[0], 1))]))
    b.append(sec.evaluate(c0) - sec.bound)
    if spc.coef.shape[0]:
        A_rows.append(np.hstack([-spc.coef, np.zeros((spc.coef.shape[0], 1))]))
        b.append((spc.evaluate(c0) - spc.bound) / scale)
    A = np.vstack(A_rows)
    rhs = np.concatenate(b)
    lo = np.maximum(-radius, -c0) / scale
    hi = np.minimum(radius, side - c0) / scale
    bounds = list(zip(lo, hi)) + [(0.0, None)]
    res = linprog(cost, A_ub=A, b_ub=rhs, bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        log.debug("position LP failed: %s", res.message)
        return None
    return res.x[:n2] * scale, float(res.x[n2])


def sca_position_step(
    scenes: Sequence[SlotScene],
    state: ScaState,
    plan,
    mu: float,
    c_min: float,
    trust: TrustRegion = TrustRegion(),
) -> ScaStep:
    """One trust-region step; the returned state is always feasible."""
    geometry = state.geometry
    lam = scenes[0].wavelength
    current = state.objective
    if math.isnan(current):
        current = average_secrecy_rate(scenes, geometry, plan).average
        state = replace(state, objective=current)
    grad = position_gradient(scenes, geometry, plan, mu)
    sec = linearize_secrecy_constraint(scenes, geometry, plan, mu, c_min)
    spc = linearize_spacing(geometry)
    c0 = geometry.flat
    shortfall = float(max(0.0, -(sec.slack(c0)).min()))
    if np.abs(grad).max() * lam < 1e-14 and shortfall == 0.0:
        return ScaStep(replace(state, iteration=state.iteration + 1), False, 0.0, 0.0, 0.0)
    radius = state.trust_radius
    for _ in range(trust.max_shrinks + 1):
        sol = _solve_lp(grad, sec, spc, c0, geometry.side, radius, lam)
        if sol is None:
            return ScaStep(replace(state, iteration=state.iteration + 1), False, 0.0, 0.0, shortfall, stalled=True)
        delta, slack = sol
        cand = geometry.with_positions(np.clip(c0 + delta, 0.0, geometry.side))
        if cand.is_feasible():
            value = average_secrecy_rate(scenes, cand, plan).average
            if value >= current:
                new_radius = min(radius * trust.grow, trust.maximum * lam)
                new_state = ScaState(cand, new_radius, state.iteration + 1, value)
                viol = float(max(0.0, -(sec.slack(cand.flat)).min()))
                return ScaStep(new_state, True, float(np.abs(delta).max()), slack, viol)
        radius *= trust.shrink
        if radius < trust.minimum * lam:
            break
    radius = max(radius, trust.minimum * lam)
    return ScaStep(ScaState(geometry, radius, state.iteration + 1, current), False, 0.0, 0.0, shortfall)


@dataclass
class ScaTrace:
    rows: list[tuple] = field(default_factory=list)

    def record(self, step: ScaStep) -> None:
        st = step.state
        self.rows.append((st.iteration, st.objective, st.trust_radius, step.step_norm, step.violation))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "objective", "trust_radius_m", "step_norm_m", "max_violation"])
            for it, obj, rad, norm, viol in self.rows:
                w.writerow([it, fmt(obj), fmt(rad), fmt(norm), fmt(viol)])


def optimize_positions_sca(
    scenes: Sequence[SlotScene],
    geometry: ArrayGeometry,
    plan,
    mu: float = 0.05,
    c_min: float = 0.0,
    max_steps: int = 20,
    tol: float = 1e-6,
    trust: TrustRegion = TrustRegion(),
    initial_radius: float | None = None,
) -> tuple[ScaState, ScaTrace]:
    """Repeat ``sca_position_step`` until the gain per step falls below ``tol``
    twice in a row, the trust region collapses, or ``max_steps`` is reached.
    """
    lam = scenes[0].wavelength
    radius = trust.initial * lam if initial_radius is None else initial_radius
    obj = average_secrecy_rate(scenes, geometry, plan).average
    state = ScaState(geometry, radius, 0, obj)
    trace = ScaTrace()
    trace.rows.append((0, obj, radius, 0.0, 0.0))
    quiet = 0
    for _ in range(max_steps):
        prev = state.objective
        step = sca_position_step(scenes, state, plan, mu, c_min, trust)
        state = step.state
        trace.record(step)
        if step.stalled:
            break
        quiet = quiet + 1 if state.objective - prev < tol else 0
        if quiet >= 2 or state.trust_radius <= trust.minimum * lam * (1 + 1e-12):
            break
    return state, trace
