import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from leosec.sdp import (
    INFEASIBLE,
    OPTIMAL,
    LinearConstraint,
    RateConstraint,
    SdpProblem,
    dump_problem,
    load_problem,
    psd_project,
    smat,
    solve_sdp,
    svec,
)

seeds = st.integers(0, 2**32 - 1)


def _herm(rng, n):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (G + G.conj().T)


def _rank_one(rng, n, scale):
    s = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    return scale * np.outer(s, s.conj())


def _unit_trace(n):
    return LinearConstraint(1.0, np.eye(n), None)


@given(seeds, st.integers(1, 5))
def test_svec_is_isometry(seed, n):
    rng = np.random.default_rng(seed)
    A, B = _herm(rng, n), _herm(rng, n)
    assert svec(A) @ svec(B) == pytest.approx(np.real(np.trace(A @ B)), abs=1e-10)
    np.testing.assert_allclose(smat(svec(A), n), A, atol=1e-14)


def test_psd_project_examples():
    np.testing.assert_allclose(psd_project(np.diag([1.0, -1.0])), np.diag([1.0, 0.0]))
    P = np.array([[2.0, 1j], [-1j, 2.0]])
    np.testing.assert_allclose(psd_project(P), P)
    with pytest.raises(ValueError):
        psd_project(np.array([[0.0, 1.0], [0.0, 0.0]]))


@given(seeds, st.integers(1, 6))
def test_psd_project_idempotent_and_nearest(seed, n):
    rng = np.random.default_rng(seed)
    M = _herm(rng, n)
    P = psd_project(M)
    assert np.linalg.eigvalsh(P).min() >= -1e-12
    np.testing.assert_allclose(psd_project(P), P, atol=1e-12)
    # any PSD matrix is no closer than the projection
    Q = psd_project(_herm(rng, n))
    assert np.linalg.norm(M - P) <= np.linalg.norm(M - Q) + 1e-12


@given(seeds, st.integers(1, 5))
@settings(max_examples=25)
def test_max_trace_objective_is_top_eigenvalue(seed, n):
    rng = np.random.default_rng(seed)
    C = _herm(rng, n)
    sol = solve_sdp(SdpProblem(dim=n, C=C, equalities=[_unit_trace(n)]))
    assert sol.status == OPTIMAL
    assert sol.objective == pytest.approx(np.linalg.eigvalsh(C).max(), abs=1e-5)
    assert sol.objective <= sol.dual_bound + 1e-6
    assert abs(np.trace(sol.W).real - 1.0) <= 1e-7


def test_scalar_power_allocation():
    a, p = 7.0, 3.0
    pb = SdpProblem(
        dim=1, num_free=1, c=np.array([1.0]),
        inequalities=[LinearConstraint(p, np.eye(1), None)],
        rates=[RateConstraint(np.array([[a]]), np.array([1.0]), 0.0)],
    )
    sol = solve_sdp(pb)
    assert sol.status == OPTIMAL
    best = math.log2(1 + a * p)
    assert sol.W[0, 0].real == pytest.approx(p, rel=1e-5)
    # gap stop is relative: tol_gap * max(1, |objective|)
    assert sol.objective <= best + 1e-12 <= sol.dual_bound + 1e-9
    assert sol.dual_bound - sol.objective <= 1e-6 * max(1.0, abs(best))


def test_infeasible_detected():
    pb = SdpProblem(dim=2, C=np.eye(2), inequalities=[
        LinearConstraint(1.0, np.eye(2), None),
        LinearConstraint(-2.0, -np.eye(2), None),
    ])
    assert solve_sdp(pb).status == INFEASIBLE


def _secrecy_problem(rng, n, m):
    """max tau : log2(1 + Tr(A0 W)) >= tau + r, Tr(Am W) <= r, Tr W <= 1."""
    A = [_rank_one(rng, n, rng.uniform(5, 50)) for _ in range(m + 1)]
    ineq = [LinearConstraint(1.0, np.eye(n), None)]
    ineq += [LinearConstraint(0.0, Am, np.array([0.0, -1.0])) for Am in A[1:]]
    return A, SdpProblem(dim=n, num_free=2, c=np.array([1.0, 0.0]), inequalities=ineq,
                         rates=[RateConstraint(A[0], np.array([1.0, 1.0]), 0.0)])


@pytest.mark.parametrize("seed", range(6))
def test_matches_cvxpy(seed):
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(seed)
    n, m = 2 + seed % 3, 1 + seed % 2
    A, pb = _secrecy_problem(rng, n, m)
    sol = solve_sdp(pb)
    assert sol.status == OPTIMAL

    W = cp.Variable((n, n), hermitian=True)
    tau, r = cp.Variable(), cp.Variable()
    cons = [W >> 0, cp.real(cp.trace(W)) <= 1,
            cp.log(1 + cp.real(cp.trace(A[0] @ W))) / math.log(2) >= tau + r]
    cons += [cp.real(cp.trace(Am @ W)) <= r for Am in A[1:]]
    ref = cp.Problem(cp.Maximize(tau), cons)
    ref.solve(solver="CLARABEL")
    if ref.status != "optimal":
        ref.solve(solver="SCS", eps=1e-9)
    assert ref.status == "optimal"
    assert sol.objective - 1e-6 <= ref.value <= sol.dual_bound + 1e-6
    # constraints hold at the returned point
    assert np.linalg.eigvalsh(sol.W).min() >= -1e-8
    assert np.trace(sol.W).real <= 1 + 1e-7
    for Am in A[1:]:
        assert np.trace(Am @ sol.W).real <= sol.x[1] + 1e-6


@given(seeds, st.integers(1, 3), st.integers(1, 3))
@settings(max_examples=15)
def test_relaxation_dominates_rank_one(seed, n, m):
    rng = np.random.default_rng(seed)
    A, pb = _secrecy_problem(rng, n, m)
    sol = solve_sdp(pb)
    assert sol.status == OPTIMAL
    assert sol.objective <= sol.dual_bound + 1e-6
    for _ in range(200):
        w = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        w /= np.linalg.norm(w)
        W = np.outer(w, w.conj())
        r = max(np.trace(Am @ W).real for Am in A[1:])
        tau = math.log2(1 + np.trace(A[0] @ W).real) - r
        assert tau <= sol.objective + 1e-6


def test_explicit_feasible_start_is_used():
    rng = np.random.default_rng(3)
    _, pb = _secrecy_problem(rng, 2, 1)
    cold = solve_sdp(pb)
    warm = solve_sdp(pb, start=(0.5 * np.eye(2) / 2, np.array([-100.0, 100.0])))
    assert warm.objective == pytest.approx(cold.objective, abs=1e-6)


def test_rejects_non_hermitian_data():
    with pytest.raises(ValueError):
        SdpProblem(dim=2, C=np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        SdpProblem(dim=2, C=np.eye(3))


def test_dump_load_roundtrip(tmp_path):
    rng = np.random.default_rng(11)
    _, pb = _secrecy_problem(rng, 3, 2)
    pb.equalities.append(LinearConstraint(0.5, _herm(rng, 3), np.array([1.0, 2.0])))
    path = tmp_path / "p.txt"
    dump_problem(pb, path)
    back = load_problem(path)
    assert back.dim == 3 and back.num_free == 2
    np.testing.assert_array_equal(back.c, pb.c)
    assert len(back.inequalities) == len(pb.inequalities)
    for a, b in zip(back.inequalities + back.equalities, pb.inequalities + pb.equalities):
        assert a.rhs == b.rhs
        np.testing.assert_array_equal(a.W_coef, b.W_coef)
    np.testing.assert_array_equal(back.rates[0].A, pb.rates[0].A)
    assert solve_sdp(back).objective == solve_sdp(pb).objective


def test_load_rejects_other_formats(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("something else\n")
    with pytest.raises(ValueError):
        load_problem(path)
