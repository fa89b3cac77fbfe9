"""Dense convex quadratic programming.

Solves ``minimize 0.5 x'Px + q'x  subject to  Gx <= h`` with P symmetric
positive semidefinite, using an over-relaxed operator-splitting (ADMM) scheme
with penalty adaptation and an active-set polishing step. Optimality is
certified by explicit KKT residuals; primal infeasibility is detected through
a Farkas certificate built from the dual update direction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np
import scipy.linalg as sla

__all__ = ["QpProblem", "QpSettings", "QpSolution", "solve_qp", "dump_problem", "load_problem"]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITERATIONS = "max_iterations"


@dataclass(frozen=True)
class QpProblem:
    """``minimize 0.5 x'Px + q'x  s.t.  Gx <= h`` with symmetric PSD ``P``."""

    P: np.ndarray
    q: np.ndarray
    G: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=float))
        q = np.asarray(self.q, dtype=float).reshape(-1)
        G = np.asarray(self.G, dtype=float)
        h = np.asarray(self.h, dtype=float).reshape(-1)
        if G.size == 0:
            G = G.reshape(0, P.shape[0])
        if G.ndim != 2:
            raise ValueError("G must be a 2-D matrix")
        n = P.shape[0]
        if P.shape != (n, n):
            raise ValueError("P must be square")
        if q.shape != (n,):
            raise ValueError(f"q has length {q.shape[0]}, expected {n}")
        if G.shape[1] != n:
            raise ValueError(f"G has {G.shape[1]} columns, expected {n}")
        if h.shape != (G.shape[0],):
            raise ValueError(f"h has length {h.shape[0]}, expected {G.shape[0]}")
        asym = np.max(np.abs(P - P.T)) if P.size else 0.0
        if asym > 1e-12 * max(1.0, float(np.max(np.abs(P))) if P.size else 1.0):
            raise ValueError("P is not symmetric (relative asymmetry above 1e-12)")
        P = 0.5 * (P + P.T)
        for arr in (P, q, G, h):
            arr.flags.writeable = False
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def m(self) -> int:
        return self.G.shape[0]

    def objective(self, x: np.ndarray) -> float:
        return float(0.5 * x @ self.P @ x + self.q @ x)


@dataclass(frozen=True)
class QpSettings:
    feas_tol: float = 1e-8
    opt_tol: float = 1e-8
    max_iterations: int = 50_000
    warm_start: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.feas_tol <= 0 or self.opt_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class QpSolution:
    x: np.ndarray
    status: str
    iterations: int
    primal_residual: float
    dual_residual: float
    objective: float
    dual: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "iterations": self.iterations,
            "residuals": {"primal": self.primal_residual, "dual": self.dual_residual},
        }


# internal solver constants
_SIGMA = 1e-6          # proximal term on x
_ALPHA = 1.6           # over-relaxation
_POLISH_REG = 1e-10    # diagonal regularization of the polish KKT system
_CHECK_EVERY = 25
_RHO_MIN, _RHO_MAX = 1e-6, 1e6


class _Certificates:
    """KKT residuals of a candidate primal/dual pair, in original units."""

    def __init__(self, problem: QpProblem, x: np.ndarray, y: np.ndarray):
        viol = problem.G @ x - problem.h if problem.m else np.zeros(0)
        self.x = x
        self.y = y
        self.primal = float(np.max(viol, initial=0.0))
        stat = problem.P @ x + problem.q
        if problem.m:
            stat = stat + problem.G.T @ y
        self.stationarity = float(np.max(np.abs(stat), initial=0.0))
        self.comp_slack = float(np.max(np.abs(y * viol), initial=0.0)) if problem.m else 0.0
        self.dual_sign = float(np.max(-y, initial=0.0)) if problem.m else 0.0

    def dual_residual(self) -> float:
        return max(self.stationarity, self.comp_slack)

    def score(self) -> float:
        return max(self.primal, self.stationarity, self.comp_slack, self.dual_sign)

    def passes(self, settings: QpSettings) -> bool:
        return (
            self.primal <= settings.feas_tol
            and self.stationarity <= settings.opt_tol
            and self.comp_slack <= settings.opt_tol
            and self.dual_sign <= settings.opt_tol
        )


def _solution_from(problem: QpProblem, cert: _Certificates, status: str, iterations: int) -> QpSolution:
    return QpSolution(
        x=cert.x.copy(),
        status=status,
        iterations=iterations,
        primal_residual=cert.primal,
        dual_residual=cert.dual_residual(),
        objective=problem.objective(cert.x),
        dual=cert.y.copy(),
    )


def _polish(problem: QpProblem, Ps, qs, Gs, hs, x, ys, cost_scale, row_scale,
            slack_tol: float = 1e-7) -> Optional[_Certificates]:
    """Active-set refinement: solve the KKT equalities on the guessed active set.

    Returns certificates of the refined pair, or None when the guess produced
    nothing usable (singular system, wildly negative multipliers).
    """
    n = problem.n
    m = problem.m
    slack = hs - Gs @ x if m else np.zeros(0)
    y_floor = 1e-9 * max(1.0, float(np.max(ys, initial=0.0)))
    active = np.flatnonzero((ys > y_floor) | (slack < slack_tol)) if m else np.zeros(0, dtype=int)
    cap = max(4 * n, 512)
    if active.size > cap:
        order = np.argsort(-(ys[active] + np.maximum(0.0, slack_tol - slack[active])))
        active = np.sort(active[order[:cap]])
    k = active.size
    GA = Gs[active]
    K = np.zeros((n + k, n + k))
    K[:n, :n] = Ps + _POLISH_REG * np.eye(n)
    if k:
        K[:n, n:] = GA.T
        K[n:, :n] = GA
        K[n:, n:] = -_POLISH_REG * np.eye(k)
    rhs = np.concatenate([-qs, hs[active]])
    try:
        lu = sla.lu_factor(K)
        sol = sla.lu_solve(lu, rhs)
        # a couple of refinement rounds against the unregularized system
        for _ in range(3):
            resid = rhs.copy()
            resid[:n] -= Ps @ sol[:n]
            if k:
                resid[:n] -= GA.T @ sol[n:]
                resid[n:] -= GA @ sol[:n]
            sol += sla.lu_solve(lu, resid)
    except (sla.LinAlgError, ValueError):
        return None
    xp = sol[:n]
    lam = np.maximum(sol[n:], 0.0)
    ys_full = np.zeros(m)
    ys_full[active] = lam
    y_orig = cost_scale * (row_scale * ys_full) if m else np.zeros(0)
    if not np.all(np.isfinite(xp)) or not np.all(np.isfinite(y_orig)):
        return None
    return _Certificates(problem, xp, y_orig)


def _primal_infeasibility_certificate(problem: QpProblem, v: np.ndarray, tol: float = 1e-10) -> bool:
    """Farkas check: ``v >= 0``, ``G'v = 0``, ``h'v < 0`` witnesses infeasibility."""
    v = np.maximum(v, 0.0)
    nv = float(np.max(v, initial=0.0))
    if nv <= 0.0:
        return False
    v = v / nv
    gtv = float(np.max(np.abs(problem.G.T @ v), initial=0.0))
    col_scale = max(1.0, float(np.max(np.abs(problem.G), initial=1.0)))
    return gtv <= tol * col_scale and problem.h @ v <= -tol * max(1.0, float(np.max(np.abs(problem.h), initial=1.0)))


def solve_qp(problem: QpProblem, settings: Optional[QpSettings] = None) -> QpSolution:
    """Solve a dense convex QP and certify the result.

    ``status="optimal"`` guarantees constraint satisfaction within
    ``feas_tol`` and KKT stationarity / complementary slackness within
    ``opt_tol`` for the returned primal/dual pair. Primal infeasibility is
    reported via a Farkas certificate; hitting the iteration cap returns the
    best iterate found with ``status="max_iterations"``.
    """
    if settings is None:
        settings = QpSettings()
    n, m = problem.n, problem.m
    P, q, G, h = problem.P, problem.q, problem.G, problem.h

    # unconstrained case: minimum-norm stationary point
    if m == 0:
        x = np.linalg.lstsq(P + _POLISH_REG * np.eye(n), -q, rcond=None)[0]
        cert = _Certificates(problem, x, np.zeros(0))
        status = OPTIMAL if cert.passes(settings) else MAX_ITERATIONS
        return _solution_from(problem, cert, status, 0)

    # objective scaling (argmin-invariant) and constraint row equilibration
    cost_scale = max(float(np.max(np.abs(P), initial=0.0)), float(np.max(np.abs(q), initial=0.0)))
    if cost_scale <= 0.0 or not np.isfinite(cost_scale):
        cost_scale = 1.0
    Ps = P / cost_scale
    qs = q / cost_scale
    row_norms = np.linalg.norm(G, axis=1)
    row_scale = 1.0 / np.maximum(row_norms, 1e-12)
    row_scale[row_norms == 0.0] = 1.0
    Gs = G * row_scale[:, None]
    hs = h * row_scale

    # fast path: a zero constraint row with negative bound is its own Farkas certificate
    zero_rows = np.flatnonzero(row_norms == 0.0)
    for i in zero_rows:
        if h[i] < 0.0:
            cert = _Certificates(problem, np.zeros(n), np.zeros(m))
            return _solution_from(problem, cert, INFEASIBLE, 0)

    rho = 1.0
    GtG = Gs.T @ Gs

    def factorize(rho_val):
        return sla.cho_factor(Ps + _SIGMA * np.eye(n) + rho_val * GtG, lower=True)

    chol = factorize(rho)

    if settings.warm_start is not None:
        x = np.asarray(settings.warm_start, dtype=float).reshape(-1)
        if x.shape != (n,):
            raise ValueError(f"warm_start has length {x.shape[0]}, expected {n}")
        x = x.copy()
    else:
        x = np.zeros(n)
    z = np.minimum(Gs @ x, hs)
    ys = np.zeros(m)

    best: Optional[_Certificates] = None
    it = 0
    ys_at_last_check = ys.copy()

    def consider(cert: Optional[_Certificates]) -> Optional[_Certificates]:
        nonlocal best
        if cert is not None and (best is None or cert.score() < best.score()):
            best = cert
        return cert

    # warm-started re-solves should terminate via an immediate polish
    if settings.warm_start is not None:
        cert = consider(_polish(problem, Ps, qs, Gs, hs, x, ys, cost_scale, row_scale))
        if cert is not None and cert.passes(settings):
            return _solution_from(problem, cert, OPTIMAL, 0)

    while it < settings.max_iterations:
        it += 1
        rhs = _SIGMA * x - qs + Gs.T @ (rho * z - ys)
        xt = sla.cho_solve(chol, rhs)
        zt = Gs @ xt
        x = _ALPHA * xt + (1.0 - _ALPHA) * x
        v = _ALPHA * zt + (1.0 - _ALPHA) * z + ys / rho
        z_new = np.minimum(v, hs)
        ys = rho * (v - z_new)
        z = z_new

        if it % _CHECK_EVERY != 0 and it != settings.max_iterations:
            continue

        y = cost_scale * (row_scale * ys)
        cert = consider(_Certificates(problem, x, y))
        if cert.passes(settings):
            return _solution_from(problem, cert, OPTIMAL, it)

        # Farkas certificate from the dual update direction
        dys = ys - ys_at_last_check
        if _primal_infeasibility_certificate(problem, row_scale * dys):
            return _solution_from(problem, cert, INFEASIBLE, it)
        ys_at_last_check = ys.copy()

        # polish attempt once the iterates are roughly converged, and periodically
        gx = Gs @ x
        r_prim = float(np.max(np.abs(gx - z), initial=0.0))
        r_dual = float(np.max(np.abs(Ps @ x + qs + Gs.T @ ys), initial=0.0))
        prim_ref = max(float(np.max(np.abs(gx), initial=0.0)), float(np.max(np.abs(z), initial=0.0)), 1.0)
        dual_ref = max(float(np.max(np.abs(Ps @ x), initial=0.0)), float(np.max(np.abs(qs), initial=0.0)),
                       float(np.max(np.abs(Gs.T @ ys), initial=0.0)), 1.0)
        near = max(r_prim / prim_ref, r_dual / dual_ref) < 1e-6
        if near or it % (10 * _CHECK_EVERY) == 0:
            pcert = consider(_polish(problem, Ps, qs, Gs, hs, x, ys, cost_scale, row_scale))
            if pcert is not None and pcert.passes(settings):
                return _solution_from(problem, pcert, OPTIMAL, it)

        # factor-10 residual balancing for the penalty parameter
        if it % (4 * _CHECK_EVERY) == 0:
            rp = r_prim / prim_ref
            rd = r_dual / dual_ref
            new_rho = rho
            if rp > 10.0 * rd:
                new_rho = min(rho * 2.0, _RHO_MAX)
            elif rd > 10.0 * rp:
                new_rho = max(rho / 2.0, _RHO_MIN)
            if new_rho != rho:
                rho = new_rho
                chol = factorize(rho)

    # one last polish before giving up
    consider(_polish(problem, Ps, qs, Gs, hs, x, ys, cost_scale, row_scale))
    assert best is not None
    status = OPTIMAL if best.passes(settings) else MAX_ITERATIONS
    return _solution_from(problem, best, status, it)


# --- debug dump -------------------------------------------------------------
#
# Plain-text block format for cross-checking against external solvers:
# each block starts with "<name> <rows> <cols>" followed by that many rows
# of whitespace-separated decimal values.

def dump_problem(problem: QpProblem, fh: TextIO) -> None:
    """Write (P, q, G, h) blocks in the plain-text matrix format."""

    def block(name: str, arr: np.ndarray):
        mat = np.atleast_2d(arr.reshape(len(arr), -1) if arr.ndim == 1 else arr)
        fh.write(f"{name} {mat.shape[0]} {mat.shape[1]}\n")
        for row in mat:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")

    block("P", problem.P)
    block("q", problem.q)
    block("G", problem.G)
    block("h", problem.h)


def load_problem(fh: TextIO) -> QpProblem:
    """Read a problem written by :func:`dump_problem`."""
    blocks: dict[str, np.ndarray] = {}
    line = fh.readline()
    while line:
        name, rows, cols = line.split()
        rows, cols = int(rows), int(cols)
        data = [[float(v) for v in fh.readline().split()] for _ in range(rows)]
        blocks[name] = np.asarray(data, dtype=float).reshape(rows, cols)
        line = fh.readline()
    return QpProblem(
        P=blocks["P"],
        q=blocks["q"].reshape(-1),
        G=blocks["G"],
        h=blocks["h"].reshape(-1),
    )
