"""Small dense complex SDP solver with log-rate constraints.

Problem class (all matrices N x N Hermitian, ``x`` a vector of free scalars)::

    maximize    Tr(C W) + c^T x
    subject to  Tr(G_i W) + h_i^T x <= d_i
                Tr(E_j W) + f_j^T x  = e_j
                log2(1 + Tr(A_k W)) >= l_k^T x + l0_k      (A_k PSD)
                W >= 0

This covers the per-slot beamforming relaxation (the legitimate-rate
constraint is a concave ``log2`` lower bound) as well as plain linear SDPs.

The solver is a primal log-barrier path-following method with
infeasible-start Newton steps for the equalities and a phase-I problem when
no strictly feasible start is available.  Hermitian matrices are handled in
an orthonormal real basis (``svec``), so the Newton system has N^2 + q
unknowns; this is intended for N up to a few tens.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

LN2 = math.log(2.0)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"
UNBOUNDED = "unbounded"


# ---------------------------------------------------------------------------
# Hermitian <-> real vector


@lru_cache(maxsize=None)
def _triu(n: int):
    return np.triu_indices(n, 1)


def svec(H: np.ndarray) -> np.ndarray:
    """Real coordinates of Hermitian ``H`` (leading axes are batched).

    The map is an isometry: ``svec(A) @ svec(B) == Re Tr(A B)``.
    """
    H = np.asarray(H)
    n = H.shape[-1]
    iu, ju = _triu(n)
    up = H[..., iu, ju]
    d = np.real(np.diagonal(H, axis1=-2, axis2=-1))
    r2 = math.sqrt(2.0)
    return np.concatenate([d, r2 * np.real(up), r2 * np.imag(up)], axis=-1)


def smat(v: np.ndarray, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    iu, ju = _triu(n)
    m = iu.size
    H = np.zeros((n, n), dtype=complex)
    H[np.arange(n), np.arange(n)] = v[:n]
    up = (v[n:n + m] + 1j * v[n + m:n + 2 * m]) / math.sqrt(2.0)
    H[iu, ju] = up
    H[ju, iu] = up.conj()
    return H


@lru_cache(maxsize=None)
def _basis(n: int) -> np.ndarray:
    """Orthonormal Hermitian basis matching ``svec`` ordering, shape (n^2, n, n)."""
    eye = np.eye(n * n)
    b = np.stack([smat(eye[k], n) for k in range(n * n)])
    b.setflags(write=False)
    return b


def psd_project(M: np.ndarray) -> np.ndarray:
    """Nearest PSD matrix in Frobenius norm (eigenvalue clipping)."""
    M = np.asarray(M, dtype=complex)
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if np.abs(M - M.conj().T).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("psd_project expects a Hermitian matrix")
    H = 0.5 * (M + M.conj().T)
    lam, U = np.linalg.eigh(H)
    if lam.min() >= 0:
        return H
    return (U * np.clip(lam, 0.0, None)) @ U.conj().T


# ---------------------------------------------------------------------------
# problem description


@dataclass
class LinearConstraint:
    """``Tr(W_coef W) + x_coef^T x  (<= or ==)  rhs``."""

    rhs: float
    W_coef: np.ndarray | None = None
    x_coef: np.ndarray | None = None


@dataclass
class RateConstraint:
    """``log2(1 + Tr(A W)) >= x_coef^T x + offset``."""

    A: np.ndarray
    x_coef: np.ndarray | None = None
    offset: float = 0.0


@dataclass
class SdpProblem:
    dim: int
    num_free: int = 0
    C: np.ndarray | None = None
    c: np.ndarray | None = None
    inequalities: list[LinearConstraint] = field(default_factory=list)
    equalities: list[LinearConstraint] = field(default_factory=list)
    rates: list[RateConstraint] = field(default_factory=list)

    def __post_init__(self):
        mats = [self.C] + [k.W_coef for k in self.inequalities + self.equalities] + [r.A for r in self.rates]
        for M in mats:
            if M is None:
                continue
            M = np.asarray(M)
            if M.shape != (self.dim, self.dim):
                raise ValueError(f"matrix of shape {M.shape}, expected {(self.dim, self.dim)}")
            if np.abs(M - M.conj().T).max(initial=0.0) > 1e-10 * max(1.0, np.abs(M).max(initial=0.0)):
                raise ValueError("constraint matrices must be Hermitian")

    def objective(self, W: np.ndarray, x: np.ndarray | None = None) -> float:
        val = 0.0
        if self.C is not None:
            val += float(np.real(np.trace(np.asarray(self.C) @ W)))
        if self.c is not None and self.num_free:
            val += float(np.asarray(self.c) @ x)
        return val


@dataclass
class SdpSolution:
    W: np.ndarray
    x: np.ndarray
    objective: float
    dual_bound: float
    status: str
    residuals: dict
    iterations: int = 0

    @property
    def gap(self) -> float:
        return self.dual_bound - self.objective


# ---------------------------------------------------------------------------
# compiled form over z = (svec(W), x)


@dataclass
class _Compiled:
    n: int  # matrix dimension
    nz: int
    obj: np.ndarray  # maximise obj @ z
    G: np.ndarray
    d: np.ndarray
    E: np.ndarray
    e: np.ndarray
    Ar: np.ndarray  # rate argument 1 + Ar z
    Lr: np.ndarray  # rate rhs Lr z + l0
    l0: np.ndarray

    @property
    def degree(self) -> int:
        return self.n + self.G.shape[0] + self.Ar.shape[0]


def _row(n, q, W_coef, x_coef):
    r = np.zeros(n * n + q)
    if W_coef is not None:
        r[: n * n] = svec(np.asarray(W_coef))
    if x_coef is not None and q:
        r[n * n:] = np.asarray(x_coef, dtype=float)
    return r


def _compile(pb: SdpProblem) -> _Compiled:
    n, q = pb.dim, pb.num_free
    nz = n * n + q

    def stack(rows):
        return np.array(rows).reshape(len(rows), nz)

    obj = _row(n, q, pb.C, pb.c)
    G = stack([_row(n, q, k.W_coef, k.x_coef) for k in pb.inequalities])
    d = np.array([k.rhs for k in pb.inequalities], dtype=float)
    E = stack([_row(n, q, k.W_coef, k.x_coef) for k in pb.equalities])
    e = np.array([k.rhs for k in pb.equalities], dtype=float)
    Ar = stack([_row(n, q, r.A, None) for r in pb.rates])
    Lr = stack([_row(n, q, None, r.x_coef) for r in pb.rates])
    l0 = np.array([r.offset for r in pb.rates], dtype=float)
    return _Compiled(n, nz, obj, G, d, E, e, Ar, Lr, l0)


def _phase1(cp: _Compiled, z0: np.ndarray, s0: float, bound: float) -> _Compiled:
    """Append a shift ``s``: W = W' - s I, every inequality relaxed by ``s``.

    The free scalars and Tr(W') are boxed within ``bound`` of the start so the
    barrier stays bounded below when ``x`` has recession directions.
    """
    n = cp.n
    nn = n * n
    shift = np.zeros(cp.nz)
    shift[:nn] = svec(np.eye(n))

    def extend(M, extra):
        col = -(M @ shift)
        if extra is not None:
            col = col + extra
        return np.hstack([M, col[:, None]])

    q = cp.nz - nn
    box = np.zeros((2 * q + 1, cp.nz + 1))
    rhs = np.zeros(2 * q + 1)
    for i in range(q):
        box[2 * i, nn + i] = 1.0
        rhs[2 * i] = z0[nn + i] + bound
        box[2 * i + 1, nn + i] = -1.0
        rhs[2 * i + 1] = -(z0[nn + i] - bound)
    box[-1, :nn] = svec(np.eye(n))
    rhs[-1] = float(np.trace(smat(z0[:nn], n)).real) + n * s0 + bound

    obj = np.zeros(cp.nz + 1)
    obj[-1] = -1.0
    return _Compiled(
        n=n,
        nz=cp.nz + 1,
        obj=obj,
        G=np.vstack([extend(cp.G, -np.ones(cp.G.shape[0])), box]),
        d=np.concatenate([cp.d, rhs]),
        E=extend(cp.E, None),
        e=cp.e,
        Ar=extend(cp.Ar, None),
        Lr=extend(cp.Lr, -np.ones(cp.Lr.shape[0])),
        l0=cp.l0,
    )


class _Barrier:
    def __init__(self, cp: _Compiled):
        self.cp = cp
        self.nn = cp.n * cp.n
        self.basis = _basis(cp.n)

    def in_domain(self, z) -> bool:
        cp = self.cp
        try:
            np.linalg.cholesky(smat(z[: self.nn], cp.n))
        except np.linalg.LinAlgError:
            return False
        if cp.G.shape[0] and np.any(cp.d - cp.G @ z <= 0):
            return False
        if cp.Ar.shape[0]:
            arg = 1.0 + cp.Ar @ z
            if np.any(arg <= 0):
                return False
            if np.any(np.log2(arg) - cp.Lr @ z - cp.l0 <= 0):
                return False
        return True

    def value(self, z) -> float:
        cp = self.cp
        L = np.linalg.cholesky(smat(z[: self.nn], cp.n))
        val = -2.0 * float(np.sum(np.log(np.real(np.diag(L)))))
        if cp.G.shape[0]:
            val -= float(np.sum(np.log(cp.d - cp.G @ z)))
        if cp.Ar.shape[0]:
            phi = np.log2(1.0 + cp.Ar @ z) - cp.Lr @ z - cp.l0
            val -= float(np.sum(np.log(phi)))
        return val

    def derivatives(self, z):
        cp = self.cp
        nn = self.nn
        g = np.zeros(cp.nz)
        H = np.zeros((cp.nz, cp.nz))
        W = smat(z[:nn], cp.n)
        V = np.linalg.inv(W)
        V = 0.5 * (V + V.conj().T)
        g[:nn] = -svec(V)
        H[:nn, :nn] = svec(V @ self.basis @ V)
        if cp.G.shape[0]:
            r = 1.0 / (cp.d - cp.G @ z)
            g += cp.G.T @ r
            H += (cp.G * r[:, None] ** 2).T @ cp.G
        if cp.Ar.shape[0]:
            arg = 1.0 + cp.Ar @ z
            phi = np.log2(arg) - cp.Lr @ z - cp.l0
            dphi = cp.Ar / (LN2 * arg)[:, None] - cp.Lr
            g -= dphi.T @ (1.0 / phi)
            H += (dphi / phi[:, None]).T @ (dphi / phi[:, None])
            H += (cp.Ar * (1.0 / (LN2 * arg**2 * phi))[:, None]).T @ cp.Ar
        return g, H


def _kkt_solve(H, grad, E, resid):
    n = H.shape[0]
    p = E.shape[0]
    if p == 0:
        try:
            L = np.linalg.cholesky(H)
            y = np.linalg.solve(L, -grad)
            return np.linalg.solve(L.T, y), np.zeros(0)
        except np.linalg.LinAlgError:
            pass
    K = np.zeros((n + p, n + p))
    K[:n, :n] = H
    K[:n, n:] = E.T
    K[n:, :n] = E
    rhs = np.concatenate([-grad, -resid])
    try:
        sol = np.linalg.solve(K, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
    return sol[:n], sol[n:]


def _barrier_path(
    cp: _Compiled,
    z: np.ndarray,
    tol_gap: float,
    tol_feas: float,
    max_iter: int,
    stop=None,
):
    """Path-following on ``max obj@z`` from a point strictly inside every
    inequality.  Returns ``(z, status, t, iterations, decrement)``.
    """
    bar = _Barrier(cp)
    t = 1.0
    mu = 10.0
    it = 0
    nu = np.zeros(cp.E.shape[0])
    decrement = math.inf
    alpha, beta = 0.01, 0.5
    e_scale = max(1.0, float(np.abs(cp.e).max(initial=0.0)))
    while True:
        for _ in range(100):
            if it >= max_iter:
                return z, MAX_ITER, t, it, decrement
            it += 1
            g, H = bar.derivatives(z)
            grad = -t * cp.obj + g
            resid = cp.E @ z - cp.e
            dz, nu_new = _kkt_solve(H, grad, cp.E, resid)
            eq_ok = resid.size == 0 or np.abs(resid).max() <= tol_feas * e_scale
            decrement = float(max(dz @ H @ dz, 0.0))
            if eq_ok and decrement <= 1e-9:
                break
            s = 1.0
            while not bar.in_domain(z + s * dz):
                s *= beta
                if s < 1e-14:
                    break
            if eq_ok and decrement > 0.0625:
                # damped phase; near the centre the full step is taken because
                # Armijo comparisons drown in round-off once t is large
                f0 = -t * cp.obj @ z + bar.value(z)
                slope = grad @ dz
                while s > 1e-14:
                    zn = z + s * dz
                    if -t * cp.obj @ zn + bar.value(zn) <= f0 + alpha * s * slope:
                        break
                    s *= beta
            elif not eq_ok:
                dnu = nu_new - nu
                r0 = np.linalg.norm(np.concatenate([grad + cp.E.T @ nu, resid]))
                while s > 1e-14:
                    zn = z + s * dz
                    gn, _ = bar.derivatives(zn)
                    rn = np.linalg.norm(
                        np.concatenate([-t * cp.obj + gn + cp.E.T @ (nu + s * dnu), cp.E @ zn - cp.e])
                    )
                    if rn <= (1.0 - alpha * s) * r0:
                        break
                    s *= beta
                nu = nu + s * dnu
            if s <= 1e-14:
                break
            z = z + s * dz
            if stop is not None and stop(z):
                return z, OPTIMAL, t, it, decrement
            if abs(cp.obj @ z) > 1e12:
                return z, UNBOUNDED, t, it, decrement
        if cp.degree / t < tol_gap * max(1.0, abs(float(cp.obj @ z))):
            return z, OPTIMAL, t, it, decrement
        t *= mu


def _strict_margin(cp: _Compiled, z: np.ndarray) -> float:
    """Smallest slack across all inequality-type constraints (PSD via lambda_min)."""
    n = cp.n
    m = float(np.linalg.eigvalsh(smat(z[: n * n], n)).min())
    if cp.G.shape[0]:
        m = min(m, float((cp.d - cp.G @ z).min()))
    if cp.Ar.shape[0]:
        arg = 1.0 + cp.Ar @ z
        if np.any(arg <= 0):
            return -math.inf
        m = min(m, float((np.log2(arg) - cp.Lr @ z - cp.l0).min()))
    return m


def solve_sdp(
    problem: SdpProblem,
    tol_feas: float = 1e-7,
    tol_gap: float = 1e-6,
    max_iter: int = 600,
    start: tuple[np.ndarray, np.ndarray] | None = None,
) -> SdpSolution:
    """Maximise ``problem``; ``start`` is an optional strictly feasible (W, x)."""
    cp = _compile(problem)
    n, q = problem.dim, problem.num_free
    nn = n * n
    if start is None:
        W0, x0 = np.eye(n) / n, np.zeros(q)
    else:
        W0, x0 = start
    z = np.concatenate([svec(np.asarray(W0)), np.asarray(x0, dtype=float).reshape(q)])
    it_total = 0
    eq_ok = cp.E.shape[0] == 0 or np.abs(cp.E @ z - cp.e).max() <= tol_feas
    if not (eq_ok and _strict_margin(cp, z) > 0):
        # phase I: W' = W + s I with s above every violation
        if np.linalg.eigvalsh(smat(z[:nn], n)).min() <= 0:
            z[:nn] = svec(np.eye(n) / n)
        viol = [-float(np.linalg.eigvalsh(smat(z[:nn], n)).min())]
        if cp.G.shape[0]:
            viol.append(float((cp.G @ z - cp.d).max()))
        if cp.Ar.shape[0]:
            arg = 1.0 + cp.Ar @ z
            if np.any(arg <= 0):
                raise ValueError("rate argument must be positive at the start point")
            viol.append(float((cp.Lr @ z + cp.l0 - np.log2(arg)).max()))
        s0 = max(viol) + 1.0
        bound = 1e4 * max(1.0, float(np.abs(z).max()), s0)
        p1 = _phase1(cp, z, s0, bound)
        zp = np.concatenate([z, [s0]])
        zp[:nn] += s0 * svec(np.eye(n))

        def found(zz):
            if zz[-1] >= -1e-9:
                return False
            return p1.E.shape[0] == 0 or np.abs(p1.E @ zz - p1.e).max() <= tol_feas

        zp, st, t1, it1, _ = _barrier_path(p1, zp, tol_gap, tol_feas, max_iter, stop=found)
        it_total += it1
        s_final = zp[-1]
        if not found(zp):
            W = psd_project(smat(zp[:nn] - s_final * svec(np.eye(n)), n))
            return SdpSolution(
                W=W, x=zp[nn:-1], objective=math.nan, dual_bound=math.nan,
                status=INFEASIBLE if st == OPTIMAL else st,
                residuals={"phase1_shift": float(s_final), "phase1_bound": float(s_final - p1.degree / t1)},
                iterations=it_total,
            )
        z = zp[:-1].copy()
        z[:nn] -= s_final * svec(np.eye(n))
    z, status, t, it, dec = _barrier_path(cp, z, tol_gap, tol_feas, max_iter - it_total)
    it_total += it
    W = smat(z[:nn], n)
    x = z[nn:]
    obj = float(cp.obj @ z)
    gap = cp.degree / t
    primal = 0.0
    if cp.E.shape[0]:
        primal = max(primal, float(np.abs(cp.E @ z - cp.e).max()))
    if cp.G.shape[0]:
        primal = max(primal, float((cp.G @ z - cp.d).max(initial=-math.inf)), 0.0)
    W = psd_project(0.5 * (W + W.conj().T))
    return SdpSolution(
        W=W, x=x.copy(), objective=obj, dual_bound=obj + gap, status=status,
        residuals={"primal": primal, "dual": float(math.sqrt(max(dec, 0.0))), "gap": gap},
        iterations=it_total,
    )


# ---------------------------------------------------------------------------
# plain-text dump (for cross-checking against external solvers)
#
#   leosec-sdp 1
#   dim <N>
#   free <q>
#   objective            | ineq <rhs> | eq <rhs> | rate <offset>
#   x <q numbers>        (optional)
#   W                    (optional, followed by N rows of N "re,im" tokens)
#   end


def _write_block(fh, header, W, x, n):
    fh.write(header + "\n")
    if x is not None and len(x):
        fh.write("x " + " ".join(repr(float(v)) for v in x) + "\n")
    if W is not None:
        fh.write("W\n")
        for row in np.asarray(W, dtype=complex):
            fh.write(" ".join(f"{float(v.real)!r},{float(v.imag)!r}" for v in row) + "\n")
    fh.write("end\n")


def dump_problem(problem: SdpProblem, path) -> None:
    n = problem.dim
    with open(path, "w") as fh:
        fh.write(f"leosec-sdp 1\ndim {n}\nfree {problem.num_free}\n")
        _write_block(fh, "objective", problem.C, problem.c, n)
        for k in problem.inequalities:
            _write_block(fh, f"ineq {float(k.rhs)!r}", k.W_coef, k.x_coef, n)
        for k in problem.equalities:
            _write_block(fh, f"eq {float(k.rhs)!r}", k.W_coef, k.x_coef, n)
        for r in problem.rates:
            _write_block(fh, f"rate {float(r.offset)!r}", r.A, r.x_coef, n)


def load_problem(path) -> SdpProblem:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != "leosec-sdp 1":
        raise ValueError("not a leosec-sdp v1 file")
    n = int(lines[1].split()[1])
    q = int(lines[2].split()[1])
    pb = SdpProblem(dim=n, num_free=q)
    i = 3
    while i < len(lines):
        head = lines[i].split()
        i += 1
        W = x = None
        while lines[i] != "end":
            if lines[i].startswith("x "):
                x = np.array([float(v) for v in lines[i].split()[1:]])
                i += 1
            elif lines[i] == "W":
                rows = lines[i + 1: i + 1 + n]
                W = np.array([[complex(*map(float, tok.split(","))) for tok in r.split()] for r in rows])
                i += 1 + n
            else:
                raise ValueError(f"unexpected line {lines[i]!r}")
        i += 1
        kind = head[0]
        if kind == "objective":
            pb.C, pb.c = W, x
        elif kind == "ineq":
            pb.inequalities.append(LinearConstraint(float(head[1]), W, x))
        elif kind == "eq":
            pb.equalities.append(LinearConstraint(float(head[1]), W, x))
        elif kind == "rate":
            pb.rates.append(RateConstraint(W, x, float(head[1])))
        else:
            raise ValueError(f"unknown block {kind!r}")
    pb.__post_init__()
    return pb
