"""Small sequential-quadratic-programming solver for the trajectory planners.

Problems are smooth NLPs

    min f(x)   s.t.  g(x) = 0,  h(x) <= 0,  lb <= x <= ub

with caller-supplied gradient and constraint Jacobians. The Lagrangian
Hessian is optional; without it a damped BFGS approximation is used. Each
iteration solves a convex QP subproblem (cvxopt, interior point, tight
tolerances), then takes a backtracking Armijo step on an L1 exact-penalty
merit function. Coordinates with lb == ub are pinned and handled as equality
rows of the subproblem.

Infeasible subproblems fall back to an elastic reformulation with penalized
slacks on the general constraints; runs whose constraint violation stagnates
above tolerance in elastic mode report ``NlpStatus.INFEASIBLE``.

Everything is deterministic: same problem, start, and options give the same
iterate history bit for bit.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from cvxopt import matrix as cvx_dense
from cvxopt import solvers as cvx_solvers
from cvxopt import spmatrix as cvx_sparse

_QP_OPTIONS = {
    "show_progress": False,
    "abstol": 1e-10,
    "reltol": 1e-10,
    "feastol": 1e-10,
    "maxiters": 200,
    "refinement": 2,
}


class NlpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    MAX_ITER = "MaxIter"
    INFEASIBLE = "Infeasible"


class NlpEvaluationError(RuntimeError):
    """A problem callback returned a non-finite value where one is required."""


@dataclass
class NlpProblem:
    """Callbacks defining one NLP. Jacobians are dense arrays or scipy sparse.

    hessian(x, lam_eq, lam_ineq) must return the Lagrangian Hessian for the
    sign convention L = f + lam_eq @ g + lam_ineq @ h.
    """

    n: int
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    eq_con: Optional[Callable[[np.ndarray], np.ndarray]] = None
    eq_jac: Optional[Callable[[np.ndarray], object]] = None
    ineq_con: Optional[Callable[[np.ndarray], np.ndarray]] = None
    ineq_jac: Optional[Callable[[np.ndarray], object]] = None
    hessian: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], object]] = None
    lb: Optional[np.ndarray] = None
    ub: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("n must be positive")
        if (self.eq_con is None) != (self.eq_jac is None):
            raise ValueError("eq_con and eq_jac must be given together")
        if (self.ineq_con is None) != (self.ineq_jac is None):
            raise ValueError("ineq_con and ineq_jac must be given together")


@dataclass
class SqpOptions:
    max_iter: int = 100
    tol_stationarity: float = 1e-8
    tol_feasibility: float = 1e-8
    tol_complementarity: float = 1e-8
    armijo: float = 1e-4
    line_search_max: int = 40
    penalty_init: float = 10.0
    elastic_weight: float = 1e5
    hessian_reg: float = 1e-9
    qp_options: dict = field(default_factory=lambda: dict(_QP_OPTIONS))


@dataclass
class NlpSolution:
    x: np.ndarray
    objective: float
    status: NlpStatus
    iterations: int
    lam_eq: np.ndarray
    lam_ineq: np.ndarray
    lam_lb: np.ndarray
    lam_ub: np.ndarray
    kkt: dict
    history: np.ndarray
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status is NlpStatus.OPTIMAL


# ---------------------------------------------------------------------------
# evaluation helpers

def _values(problem: NlpProblem, x: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    f = float(problem.objective(x))
    g = np.atleast_1d(np.asarray(problem.eq_con(x), dtype=float)) if problem.eq_con else np.zeros(0)
    h = np.atleast_1d(np.asarray(problem.ineq_con(x), dtype=float)) if problem.ineq_con else np.zeros(0)
    return f, g, h

def _finite(*parts) -> bool:
    return all(np.all(np.isfinite(p)) for p in parts)


def _jacobians(problem: NlpProblem, x: np.ndarray):
    grad = np.asarray(problem.gradient(x), dtype=float)
    jg = problem.eq_jac(x) if problem.eq_jac else None
    jh = problem.ineq_jac(x) if problem.ineq_jac else None
    if not np.all(np.isfinite(grad)):
        raise NlpEvaluationError(f"{problem.name or 'nlp'}: non-finite gradient")
    for j, what in ((jg, "equality Jacobian"), (jh, "inequality Jacobian")):
        if j is not None:
            data = j.data if sp.issparse(j) else np.asarray(j)
            if not np.all(np.isfinite(data)):
                raise NlpEvaluationError(f"{problem.name or 'nlp'}: non-finite {what}")
    return grad, jg, jh


def _violation_l1(g: np.ndarray, h: np.ndarray) -> float:
    return float(np.abs(g).sum() + np.maximum(h, 0.0).sum())


def _jt_vec(jac, lam: np.ndarray, n: int) -> np.ndarray:
    if lam.size == 0 or jac is None:
        return np.zeros(n)
    if sp.issparse(jac):
        return np.asarray(jac.T @ lam).ravel()
    return np.asarray(jac).T @ lam


# ---------------------------------------------------------------------------
# KKT residuals

def kkt_residuals(
    problem: NlpProblem,
    x: np.ndarray,
    lam_eq: np.ndarray,
    lam_ineq: np.ndarray,
    lam_lb: np.ndarray,
    lam_ub: np.ndarray,
) -> dict:
    """Residual magnitudes of the first-order conditions at (x, multipliers)."""
    _, g, h = _values(problem, x)
    grad, jg, jh = _jacobians(problem, x)
    lb = problem.lb if problem.lb is not None else np.full(problem.n, -np.inf)
    ub = problem.ub if problem.ub is not None else np.full(problem.n, np.inf)

    r = grad + _jt_vec(jg, lam_eq, problem.n) + _jt_vec(jh, lam_ineq, problem.n) - lam_lb + lam_ub
    feas = 0.0
    if g.size:
        feas = max(feas, float(np.abs(g).max()))
    if h.size:
        feas = max(feas, float(np.maximum(h, 0.0).max()))
    feas = max(feas, float(np.maximum(lb - x, 0.0).max(initial=0.0)))
    feas = max(feas, float(np.maximum(x - ub, 0.0).max(initial=0.0)))

    comp = 0.0
    if h.size:
        comp = float(np.abs(lam_ineq * h).max())
    gap_lb = np.where(np.isfinite(lb), x - lb, 0.0)
    gap_ub = np.where(np.isfinite(ub), ub - x, 0.0)
    pinned = np.isfinite(lb) & np.isfinite(ub) & (ub - lb <= 1e-12)
    if problem.n:
        comp = max(comp, float(np.abs(np.where(pinned, 0.0, lam_lb * gap_lb)).max()))
        comp = max(comp, float(np.abs(np.where(pinned, 0.0, lam_ub * gap_ub)).max()))
    dual = 0.0
    for lam in (lam_ineq, lam_lb, lam_ub):
        if lam.size:
            dual = max(dual, float(np.maximum(-lam, 0.0).max()))

    return {
        "stationarity": float(np.abs(r).max(initial=0.0)),
        "feasibility": feas,
        "complementarity": comp,
        "dual_feasibility": dual,
    }


def verify_kkt_fd(problem: NlpProblem, solution: NlpSolution, step: float = 1e-6) -> dict:
    """Check stationarity with finite differences, independent of callbacks'
    own gradients. Returns absolute and relative Lagrangian-gradient residuals.
    """
    x = solution.x
    le, li = solution.lam_eq, solution.lam_ineq

    def lagrangian(z: np.ndarray) -> float:
        f, g, h = _values(problem, z)
        return f + float(le @ g) + float(li @ h)

    r = np.zeros(problem.n)
    for i in range(problem.n):
        e = np.zeros(problem.n)
        e[i] = step
        r[i] = (lagrangian(x + e) - lagrangian(x - e)) / (2.0 * step)
    r += -solution.lam_lb + solution.lam_ub
    grad = np.asarray(problem.gradient(x), dtype=float)
    absolute = float(np.abs(r).max(initial=0.0))
    return {"residual": absolute, "relative": absolute / (1.0 + float(np.abs(grad).max(initial=0.0)))}


# ---------------------------------------------------------------------------
# QP subproblem

def _to_cvx(m, want_sparse: bool):
    if sp.issparse(m):
        coo = m.tocoo()
        return cvx_sparse(
            coo.data.tolist(), coo.row.tolist(), coo.col.tolist(), size=coo.shape
        )
    arr = np.atleast_2d(np.asarray(m, dtype=float))
    if want_sparse:
        coo = sp.coo_matrix(arr)
        return cvx_sparse(coo.data.tolist(), coo.row.tolist(), coo.col.tolist(), size=coo.shape)
    return cvx_dense(arr)


def _vstack(blocks, sparse_mode: bool):
    blocks = [b for b in blocks if b is not None and b.shape[0] > 0]
    if not blocks:
        return None
    if sparse_mode:
        return sp.vstack([sp.csr_matrix(b) for b in blocks], format="csr")
    return np.vstack([np.asarray(b.todense()) if sp.issparse(b) else np.asarray(b) for b in blocks])


class _QpFailure(Exception):
    pass


def _solve_qp(pmat, q, gmat, hvec, amat, bvec, sparse_mode: bool, qp_options: dict):
    n = q.size
    args = {
        "P": _to_cvx(pmat, sparse_mode),
        "q": cvx_dense(q.reshape(-1, 1)),
    }
    if gmat is not None:
        args["G"] = _to_cvx(gmat, sparse_mode)
        args["h"] = cvx_dense(hvec.reshape(-1, 1))
    if amat is not None:
        args["A"] = _to_cvx(amat, sparse_mode)
        args["b"] = cvx_dense(bvec.reshape(-1, 1))
    try:
        sol = cvx_solvers.qp(options=qp_options, **args)
    except (ValueError, ZeroDivisionError, ArithmeticError) as exc:
        raise _QpFailure(str(exc)) from exc
    if sol["status"] != "optimal":
        raise _QpFailure(sol["status"])
    d = np.asarray(sol["x"]).ravel()
    z = np.asarray(sol["z"]).ravel() if gmat is not None else np.zeros(0)
    y = np.asarray(sol["y"]).ravel() if amat is not None else np.zeros(0)
    if not _finite(d, z, y):
        raise _QpFailure("non-finite QP solution")
    # a rank-deficient equality block can slip through cvxopt's factorization
    # and come back as a "solution" with astronomical multipliers
    if max(float(np.abs(a).max(initial=0.0)) for a in (d, z, y)) > 1e12:
        raise _QpFailure("ill-conditioned QP solution")
    return d, z, y


# ---------------------------------------------------------------------------
# damped BFGS fallback

def _bfgs_update(b: np.ndarray, s: np.ndarray, y: np.ndarray) -> np.ndarray:
    bs = b @ s
    sbs = float(s @ bs)
    sy = float(s @ y)
    if sbs <= 1e-16:
        return b
    if sy < 0.2 * sbs:
        theta = 0.8 * sbs / (sbs - sy)
        y = theta * y + (1.0 - theta) * bs
        sy = float(s @ y)
    if sy <= 1e-16:
        return b
    return b - np.outer(bs, bs) / sbs + np.outer(y, y) / sy


# ---------------------------------------------------------------------------
# main solver

def solve(problem: NlpProblem, x0: np.ndarray, options: Optional[SqpOptions] = None) -> NlpSolution:
    """Run SQP from x0. See the module docstring for the algorithm outline."""
    opts = options or SqpOptions()
    n = problem.n
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (n,):
        raise ValueError(f"x0 must have shape ({n},)")

    lb = np.asarray(problem.lb, dtype=float) if problem.lb is not None else np.full(n, -np.inf)
    ub = np.asarray(problem.ub, dtype=float) if problem.ub is not None else np.full(n, np.inf)
    if np.any(lb > ub + 1e-12):
        empty = np.zeros(0)
        return NlpSolution(
            x=x0.copy(), objective=np.nan, status=NlpStatus.INFEASIBLE, iterations=0,
            lam_eq=empty, lam_ineq=empty, lam_lb=np.zeros(n), lam_ub=np.zeros(n),
            kkt={}, history=x0.copy()[None, :], message="inconsistent variable bounds",
        )
    pinned = np.isfinite(lb) & np.isfinite(ub) & (ub - lb <= 1e-12)
    free_lb = np.isfinite(lb) & ~pinned
    free_ub = np.isfinite(ub) & ~pinned
    idx_lb = np.flatnonzero(free_lb)
    idx_ub = np.flatnonzero(free_ub)
    idx_pin = np.flatnonzero(pinned)

    x = np.clip(x0, lb, ub)
    f, g, h = _values(problem, x)
    if not _finite([f], g, h):
        raise NlpEvaluationError(f"{problem.name or 'nlp'}: non-finite evaluation at the start point")
    grad, jg, jh = _jacobians(problem, x)
    m_eq, m_in = g.size, h.size

    sparse_mode = sp.issparse(jg) or sp.issparse(jh)
    use_bfgs = problem.hessian is None
    bmat = np.eye(n) if use_bfgs else None

    lam_eq = np.zeros(m_eq)
    lam_in = np.zeros(m_in)
    lam_lb = np.zeros(n)
    lam_ub = np.zeros(n)
    mu = opts.penalty_init
    elastic = False
    stall = 0
    best_viol = _violation_l1(g, h)
    history = [x.copy()]
    status = NlpStatus.MAX_ITER
    message = ""
    kkt: dict = {}
    iteration = 0

    def assemble_hessian() -> object:
        if use_bfgs:
            return bmat
        hess = problem.hessian(x, lam_eq, lam_in)
        data = hess.data if sp.issparse(hess) else np.asarray(hess)
        if not np.all(np.isfinite(data)):
            raise NlpEvaluationError(f"{problem.name or 'nlp'}: non-finite Hessian")
        return hess

    def bound_rows():
        """Inequality rows for the finite, non-pinned bounds, as +-identity."""
        if sparse_mode:
            up = sp.csr_matrix((np.ones(idx_ub.size), (np.arange(idx_ub.size), idx_ub)), shape=(idx_ub.size, n))
            lo = sp.csr_matrix((-np.ones(idx_lb.size), (np.arange(idx_lb.size), idx_lb)), shape=(idx_lb.size, n))
        else:
            up = np.zeros((idx_ub.size, n))
            up[np.arange(idx_ub.size), idx_ub] = 1.0
            lo = np.zeros((idx_lb.size, n))
            lo[np.arange(idx_lb.size), idx_lb] = -1.0
        return up, lo

    def pin_rows():
        if idx_pin.size == 0:
            return None
        if sparse_mode:
            return sp.csr_matrix((np.ones(idx_pin.size), (np.arange(idx_pin.size), idx_pin)), shape=(idx_pin.size, n))
        rows = np.zeros((idx_pin.size, n))
        rows[np.arange(idx_pin.size), idx_pin] = 1.0
        return rows

    up_rows, lo_rows = bound_rows()
    pinned_rows = pin_rows()

    for iteration in range(1, opts.max_iter + 1):
        hess = assemble_hessian()

        # QP data shared by the plain and elastic subproblems
        gmat = _vstack([jh, up_rows, lo_rows], sparse_mode)
        hvec_parts = []
        if m_in:
            hvec_parts.append(-h)
        hvec_parts.append(ub[idx_ub] - x[idx_ub])
        hvec_parts.append(x[idx_lb] - lb[idx_lb])
        hvec = np.concatenate(hvec_parts) if hvec_parts else np.zeros(0)
        amat = _vstack([jg, pinned_rows], sparse_mode)
        bvec = np.concatenate([-g if m_eq else np.zeros(0), lb[idx_pin] - x[idx_pin]])

        d = None
        z = y = None
        elastic_step = False
        reg = 0.0
        ident = sp.identity(n, format="csr") if sparse_mode else np.eye(n)
        base_tol = float(opts.qp_options.get("abstol", 1e-10))
        for attempt in range(6):
            pmat = hess + reg * ident if reg else hess
            qp_opts = opts.qp_options
            if attempt:
                # a stalled interior point ("unknown") usually just cannot
                # certify the base tolerance; retry looser, floored at 1e-8
                tol = min(1e-8, base_tol * 10.0 ** attempt)
                qp_opts = dict(opts.qp_options, abstol=tol, reltol=tol, feastol=tol)
            try:
                d, z, y = _solve_qp(pmat, grad, gmat, hvec, amat, bvec, sparse_mode, qp_opts)
                break
            except _QpFailure as exc:
                message = f"QP failure: {exc}"
                if "infeasible" in str(exc):
                    break  # regularizing the Hessian cannot fix an infeasible QP
                reg = opts.hessian_reg * 10.0 ** (2 * attempt) * (1.0 + abs(f))
        if d is None:
            # elastic subproblem: slacks on the general constraints only
            elastic_step = True
            elastic = True
            rho = opts.elastic_weight * (1.0 + float(np.abs(grad).max(initial=0.0)))
            n_s = 2 * m_eq + m_in
            if n_s == 0:
                status = NlpStatus.INFEASIBLE
                message = "QP subproblem failed with no relaxable constraints"
                break
            hess_r = hess + max(reg, opts.hessian_reg) * ident
            if sparse_mode:
                pmat = sp.bmat(
                    [[sp.csr_matrix(hess_r), None], [None, 1e-8 * sp.identity(n_s)]], format="csr"
                )
            else:
                pmat = np.block(
                    [[np.asarray(hess_r), np.zeros((n, n_s))], [np.zeros((n_s, n)), 1e-8 * np.eye(n_s)]]
                )
            q_ext = np.concatenate([grad, rho * np.ones(n_s)])

            # equality rows become [Jg  I  -I  0][d;s+;s-;t] = -g; pins keep zero slack
            def ext(mat, slack_block):
                if sparse_mode:
                    return sp.hstack([sp.csr_matrix(mat), sp.csr_matrix(slack_block)], format="csr")
                dense = np.asarray(mat.todense()) if sp.issparse(mat) else np.asarray(mat)
                return np.hstack([dense, slack_block])

            a_blocks, b_blocks = [], []
            if m_eq:
                s_block = np.zeros((m_eq, n_s))
                s_block[:, :m_eq] = np.eye(m_eq)
                s_block[:, m_eq : 2 * m_eq] = -np.eye(m_eq)
                a_blocks.append(ext(jg, s_block))
                b_blocks.append(-g)
            if idx_pin.size:
                a_blocks.append(ext(pinned_rows, np.zeros((idx_pin.size, n_s))))
                b_blocks.append(lb[idx_pin] - x[idx_pin])
            amat_e = _vstack(a_blocks, sparse_mode) if a_blocks else None
            bvec_e = np.concatenate(b_blocks) if b_blocks else np.zeros(0)

            g_blocks, h_blocks = [], []
            if m_in:
                s_block = np.zeros((m_in, n_s))
                s_block[:, 2 * m_eq :] = -np.eye(m_in)
                g_blocks.append(ext(jh, s_block))
                h_blocks.append(-h)
            for rows, rhs in ((up_rows, ub[idx_ub] - x[idx_ub]), (lo_rows, x[idx_lb] - lb[idx_lb])):
                if rows.shape[0]:
                    g_blocks.append(ext(rows, np.zeros((rows.shape[0], n_s))))
                    h_blocks.append(rhs)
            # slack nonnegativity
            s_eye = np.hstack([np.zeros((n_s, n)), -np.eye(n_s)])
            g_blocks.append(sp.csr_matrix(s_eye) if sparse_mode else s_eye)
            h_blocks.append(np.zeros(n_s))
            gmat_e = _vstack(g_blocks, sparse_mode)
            hvec_e = np.concatenate(h_blocks)
            # the large slack weight makes tight interior-point tolerances unreachable
            loose = dict(opts.qp_options, abstol=1e-8, reltol=1e-8, feastol=1e-8)
            try:
                d_ext, z, y = _solve_qp(pmat, q_ext, gmat_e, hvec_e, amat_e, bvec_e, sparse_mode, loose)
            except _QpFailure as exc:
                status = NlpStatus.INFEASIBLE
                message = f"elastic QP failed: {exc}"
                break
            d = d_ext[:n]

        # multipliers out of the QP
        y = y if y is not None else np.zeros(0)
        z = z if z is not None else np.zeros(0)
        lam_eq = y[:m_eq].copy() if m_eq else np.zeros(0)
        lam_pin = y[m_eq:] if y.size > m_eq else np.zeros(idx_pin.size)
        ofs = 0
        lam_in = z[ofs : ofs + m_in].copy() if m_in else np.zeros(0)
        ofs += m_in
        lam_ub = np.zeros(n)
        lam_ub[idx_ub] = z[ofs : ofs + idx_ub.size]
        ofs += idx_ub.size
        lam_lb = np.zeros(n)
        lam_lb[idx_lb] = z[ofs : ofs + idx_lb.size]
        # a pinned coordinate's equality multiplier acts through its bounds
        pos = np.maximum(lam_pin, 0.0)
        lam_ub[idx_pin] = pos
        lam_lb[idx_pin] = pos - lam_pin

        lam_max = max(
            (float(np.abs(a).max()) for a in (lam_eq, lam_in, lam_lb, lam_ub) if a.size),
            default=0.0,
        )
        mu = max(mu, 2.0 * lam_max + 1.0)

        viol = _violation_l1(g, h)
        step_norm = float(np.abs(d).max(initial=0.0))
        if step_norm <= 1e-13 * (1.0 + float(np.abs(x).max())):
            kkt = kkt_residuals(problem, x, lam_eq, lam_in, lam_lb, lam_ub)
            if (
                kkt["feasibility"] <= opts.tol_feasibility
                and kkt["stationarity"] <= opts.tol_stationarity * (1.0 + float(np.abs(grad).max()))
            ):
                status = NlpStatus.OPTIMAL
                break
            if elastic and viol > 10.0 * opts.tol_feasibility:
                status = NlpStatus.INFEASIBLE
                message = "no step reduces the constraint violation"
                break

        # Armijo backtracking on the exact-penalty merit
        merit0 = f + mu * viol
        deriv = float(grad @ d) - mu * viol
        alpha = 1.0
        accepted = False
        f_new = g_new = h_new = None
        for _ in range(opts.line_search_max):
            trial = x + alpha * d
            trial[idx_pin] = lb[idx_pin]
            f_t, g_t, h_t = _values(problem, trial)
            if _finite([f_t], g_t, h_t):
                merit_t = f_t + mu * _violation_l1(g_t, h_t)
                if merit_t <= merit0 + opts.armijo * alpha * min(deriv, 0.0) + 1e-14 * abs(merit0):
                    accepted = True
                    x_new, f_new, g_new, h_new = trial, f_t, g_t, h_t
                    break
            alpha *= 0.5
        if not accepted:
            # fall back to the full step if it at least evaluates
            trial = x + d
            trial[idx_pin] = lb[idx_pin]
            f_t, g_t, h_t = _values(problem, trial)
            if not _finite([f_t], g_t, h_t):
                raise NlpEvaluationError(
                    f"{problem.name or 'nlp'}: non-finite evaluation along the search direction"
                )
            x_new, f_new, g_new, h_new = trial, f_t, g_t, h_t

        grad_new, jg_new, jh_new = _jacobians(problem, x_new)
        if use_bfgs:
            s_step = x_new - x
            grad_l_new = grad_new + _jt_vec(jg_new, lam_eq, n) + _jt_vec(jh_new, lam_in, n)
            grad_l_old = grad + _jt_vec(jg, lam_eq, n) + _jt_vec(jh, lam_in, n)
            if float(np.abs(s_step).max(initial=0.0)) > 0.0:
                bmat = _bfgs_update(bmat, s_step, grad_l_new - grad_l_old)

        x, f, g, h = x_new, f_new, g_new, h_new
        grad, jg, jh = grad_new, jg_new, jh_new
        history.append(x.copy())

        viol_new = _violation_l1(g, h)
        if elastic_step:
            if viol_new > 0.9 * best_viol:
                stall += 1
            else:
                stall = 0
            if stall >= 5 and viol_new > 10.0 * opts.tol_feasibility:
                status = NlpStatus.INFEASIBLE
                message = "constraint violation stagnated in elastic mode"
                break
        else:
            stall = 0
        best_viol = min(best_viol, viol_new)

        kkt = kkt_residuals(problem, x, lam_eq, lam_in, lam_lb, lam_ub)
        scale = 1.0 + float(np.abs(grad).max(initial=0.0))
        if (
            kkt["stationarity"] <= opts.tol_stationarity * scale
            and kkt["feasibility"] <= opts.tol_feasibility
            and kkt["complementarity"] <= opts.tol_complementarity * scale
        ):
            status = NlpStatus.OPTIMAL
            break

    if not kkt:
        kkt = kkt_residuals(problem, x, lam_eq, lam_in, lam_lb, lam_ub)
    return NlpSolution(
        x=x,
        objective=f,
        status=status,
        iterations=iteration,
        lam_eq=lam_eq,
        lam_ineq=lam_in,
        lam_lb=lam_lb,
        lam_ub=lam_ub,
        kkt=kkt,
        history=np.asarray(history),
        message=message,
    )
