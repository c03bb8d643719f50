"""Per-slot transmit beamforming: relaxed SDP with a linearized eavesdropper
bound, then rank-one recovery by eigen-decomposition and Gaussian
randomization.

The relaxation works with the power-normalised covariance ``W / P_max`` and
channel matrices scaled by ``P_max * rho / sigma^2`` so that all SDP data are
O(1)..O(1e3) regardless of the physical link budget.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ArrayGeometry, SlotRates, fmt, secrecy_rate, steering_matrix
from .constellation import SlotScene
from .sdp import LN2, LinearConstraint, RateConstraint, SdpProblem, psd_project, solve_sdp

OPTIMAL = "optimal"
CMIN_INFEASIBLE = "cmin_infeasible"
SOLVER_FAILED = "solver_failed"

RANK_ONE_RATIO = 1e-6
CMIN_TOL = 1e-6  # bit/s/Hz


@dataclass(frozen=True)
class AffineBound:
    """``constant + Re Tr(gradient @ W)``."""

    constant: float
    gradient: np.ndarray

    def __call__(self, W: np.ndarray) -> float:
        return self.constant + float(np.real(np.trace(self.gradient @ W)))


def eaves_rate(W: np.ndarray, S: np.ndarray, noise_power: float) -> float:
    """log2(1 + Tr(S W) / sigma^2)."""
    return math.log2(1.0 + max(float(np.real(np.trace(S @ W))), 0.0) / noise_power)


def eaves_rate_upper_bound(W0: np.ndarray, S: np.ndarray, noise_power: float) -> AffineBound:
    """Tangent of the concave eavesdropper rate at ``W0``; an upper bound everywhere.

    The returned bound evaluated at ``W`` is
    ``f(W0) + Tr(S (W - W0)) / (ln2 (sigma^2 + Tr(S W0)))``.
    """
    S = np.asarray(S, dtype=complex)
    base = float(np.real(np.trace(S @ W0)))
    denom = LN2 * (noise_power + base)
    grad = S / denom
    const = math.log2(1.0 + base / noise_power) - base / denom
    return AffineBound(const, grad)


@dataclass
class SdrIterate:
    """One inner iterate.  ``tau`` and ``r_eaves`` are evaluated exactly on ``W``;
    ``surrogate_tau`` is the value reported by the linearized SDP.
    """

    iteration: int
    W: np.ndarray  # physical covariance
    tau: float
    r_eaves: float
    surrogate_tau: float
    residual: float


@dataclass
class BeamformingResult:
    """Relaxed per-slot solution.

    ``tau`` is the unclamped secrecy value of the relaxed ``W`` in bit/s/Hz; it
    upper-bounds what any full-power rank-one beamformer achieves when the
    relaxation is solved to optimality.
    """

    W: np.ndarray
    tau: float
    r_eaves: float
    status: str
    trace: list[SdrIterate] = field(default_factory=list)

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "tau", "surrogate_tau", "residual"])
            for it in self.trace:
                w.writerow([it.iteration, fmt(it.tau), fmt(it.surrogate_tau), fmt(it.residual)])


def mrt_beamformer(scene: SlotScene, geometry: ArrayGeometry, p_max: float) -> np.ndarray:
    """Full-power beam steered at the serving satellite (gain ``|w^H s|^2 = P N``)."""
    s = steering_matrix(scene, geometry.positions)[0]
    return math.sqrt(p_max / s.size) * s


def _link_matrices(scene: SlotScene, geometry: ArrayGeometry, p_max: float) -> np.ndarray:
    """(1 + M, N, N) normalised channel matrices ``P rho / sigma^2 s s^H``."""
    S = steering_matrix(scene, geometry.positions)
    scale = p_max * scene.gain_to_noise
    return scale[:, None, None] * np.einsum("ln,lm->lnm", S, S.conj())


def _norm_rate(A: np.ndarray, W: np.ndarray) -> float:
    return math.log2(1.0 + max(float(np.real(np.trace(A @ W))), 0.0))


def _exact(A: np.ndarray, W: np.ndarray) -> tuple[float, float]:
    """(legitimate minus strongest eavesdropper rate, strongest eavesdropper rate)."""
    r = max(_norm_rate(Am, W) for Am in A[1:])
    return _norm_rate(A[0], W) - r, r


def _residual(W: np.ndarray, r_exact: float, r_surrogate: float) -> float:
    """Violation of the exact eavesdropper constraint and the unit trace budget."""
    return max(0.0, r_exact - r_surrogate, float(np.real(np.trace(W))) - 1.0)


def _relaxed_step(A: np.ndarray, W0: np.ndarray) -> tuple[np.ndarray, float, float, str]:
    """One surrogate SDP in normalised units, linearized at ``W0``."""
    n = A.shape[1]
    ineq = [LinearConstraint(1.0, np.eye(n), None)]
    worst = -math.inf
    W_start = 0.5 * np.eye(n) / n
    for Am in A[1:]:
        # noise power is 1 after normalisation
        bound = eaves_rate_upper_bound(W0, Am, 1.0)
        ineq.append(LinearConstraint(-bound.constant, bound.gradient, np.array([0.0, -1.0])))
        worst = max(worst, bound(W_start))
    r0 = worst + 1.0
    tau0 = _norm_rate(A[0], W_start) - r0 - 1.0
    pb = SdpProblem(
        dim=n,
        num_free=2,
        c=np.array([1.0, 0.0]),
        inequalities=ineq,
        rates=[RateConstraint(A[0], np.array([1.0, 1.0]), 0.0)],
    )
    sol = solve_sdp(pb, tol_gap=1e-9, start=(W_start, np.array([tau0, r0])))
    return sol.W, float(sol.x[0]), float(sol.x[1]), sol.status


def solve_beamforming_slot(
    scene: SlotScene,
    geometry: ArrayGeometry,
    p_max: float,
    c_min: float = 0.0,
    sca_tol: float = 1e-6,
    max_iterations: int = 30,
    W0: np.ndarray | None = None,
) -> BeamformingResult:
    """Relaxed beamforming for one slot with successive re-linearization.

    ``W0`` is the physical expansion point (defaults to the MRT covariance).
    ``tau >= c_min`` is checked after the solve rather than imposed, so an
    unattainable ``c_min`` shows up as ``status == "cmin_infeasible"``.
    """
    if p_max <= 0:
        raise ValueError("p_max must be positive")
    A = _link_matrices(scene, geometry, p_max)
    if scene.num_eavesdroppers == 0:
        w = mrt_beamformer(scene, geometry, p_max)
        W = np.outer(w, w.conj())
        tau = _norm_rate(A[0], W / p_max)
        it = SdrIterate(0, W, tau, 0.0, tau, 0.0)
        status = OPTIMAL if tau >= c_min - CMIN_TOL else CMIN_INFEASIBLE
        return BeamformingResult(W, tau, 0.0, status, [it])

    if W0 is None:
        w = mrt_beamformer(scene, geometry, p_max)
        W0 = np.outer(w, w.conj())
    Wn = psd_project(0.5 * (W0 + W0.conj().T)) / p_max
    tau0, r0 = _exact(A, Wn)
    best = SdrIterate(0, Wn, tau0, r0, tau0, _residual(Wn, r0, r0))
    trace = [best]
    status = OPTIMAL
    extra_round = False
    for k in range(1, max_iterations + 1):
        W_new, tau_s, r_s, st = _relaxed_step(A, best.W)
        if st != "optimal":
            if len(trace) == 1:
                status = SOLVER_FAILED
            break
        tau, r = _exact(A, W_new)
        it = SdrIterate(k, W_new, tau, r, tau_s, _residual(W_new, r, r_s))
        trace.append(it)
        gain = tau - best.tau
        if tau >= best.tau:
            best = it
        if it.residual > 1e-6 and not extra_round:
            extra_round = True
            continue
        if abs(gain) < sca_tol:
            break
    W = psd_project(best.W) * p_max
    for it in trace:
        it.W = it.W * p_max
    if status == OPTIMAL and best.tau < c_min - CMIN_TOL:
        status = CMIN_INFEASIBLE
    return BeamformingResult(W, best.tau, best.r_eaves, status, trace)


@dataclass(frozen=True)
class RankOneResult:
    w: np.ndarray
    rates: SlotRates
    meets_cmin: bool
    trials: int


def _selection_key(rates: SlotRates, c_min: float) -> tuple:
    return (rates.secrecy >= c_min, rates.secrecy, rates.margin)


def randomize_rank_one(
    W: np.ndarray,
    p_max: float,
    scene: SlotScene,
    geometry: ArrayGeometry,
    num_trials: int = 50,
    rng: np.random.Generator | None = None,
    c_min: float = 0.0,
) -> RankOneResult:
    """Recover a full-power beamformer from a relaxed covariance.

    Numerically rank-one input returns the scaled principal eigenvector.
    Otherwise ``num_trials`` Gaussian draws shaped by ``U Sigma^(1/2)`` are
    scored on the true slot secrecy rate, with the principal eigenvector as
    one extra candidate.  Candidates meeting ``c_min`` are preferred; ties are
    broken on the unclamped rate margin.
    """
    lam, U = np.linalg.eigh(psd_project(W))
    lam = np.clip(lam, 0.0, None)
    if not lam[-1] > 0:
        raise ValueError("relaxed covariance is zero")
    principal = math.sqrt(p_max) * U[:, -1]
    if lam.size == 1 or lam[-2] / lam[-1] < RANK_ONE_RATIO:
        rates = secrecy_rate(scene, geometry, principal)
        return RankOneResult(principal, rates, rates.secrecy >= c_min, 0)
    if rng is None:
        rng = np.random.default_rng()
    n = lam.size
    R = (rng.standard_normal((n, num_trials)) + 1j * rng.standard_normal((n, num_trials))) / math.sqrt(2.0)
    cand = (U * np.sqrt(lam)) @ R
    cand = math.sqrt(p_max) * cand / np.linalg.norm(cand, axis=0)
    best_w = principal
    best_rates = secrecy_rate(scene, geometry, principal)
    best_key = _selection_key(best_rates, c_min)
    for j in range(num_trials):
        rates = secrecy_rate(scene, geometry, cand[:, j])
        key = _selection_key(rates, c_min)
        if key > best_key:
            best_w, best_rates, best_key = cand[:, j], rates, key
    return RankOneResult(best_w, best_rates, bool(best_key[0]), num_trials)
