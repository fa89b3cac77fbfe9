"""The MINLIP estimator for monotone Wiener systems.

Builds ordering constraints from output-sorted regressor data (plain
consecutive pairs, or level-bridging pairs when outputs are tied), solves the
Lipschitz-minimizing quadratic program, and reconstructs the implied monotone
nonlinearity as a piecewise-linear interpolant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .qp import QpProblem, QpSettings, QpSolution, solve_qp, INFEASIBLE, OPTIMAL
from .signals import RegressorDataset, SortedDataset, sort_by_output

__all__ = [
    "ConstraintSystem",
    "WienerEstimate",
    "InfeasibleDataError",
    "TieStructureError",
    "build_consecutive_constraints",
    "build_tie_constraints",
    "minlip_identify",
    "minlip_identify_noisy",
    "reconstruct_f",
    "estimate_to_json",
    "estimate_from_json",
]

CONSECUTIVE = "consecutive"
TIE_BRIDGE = "tie_bridge"


class InfeasibleDataError(RuntimeError):
    """The ordering constraints admit no tap vector (for example duplicated
    regressor rows with distinct outputs); the noise-tolerant variant
    ``minlip_identify_noisy`` always remains solvable."""


class TieStructureError(ValueError):
    """Raised when the tie structure of the outputs prevents the requested
    constraint construction."""


@dataclass(frozen=True)
class ConstraintSystem:
    """Sorted-index pairs (i, j), each encoding ``y_(j) - y_(i) <= a'(u_(j) - u_(i))``."""

    pairs: np.ndarray      # shape (k, 2), sorted positions with y_(j) > y_(i)
    provenance: str        # CONSECUTIVE or TIE_BRIDGE

    def __post_init__(self):
        pairs = np.asarray(self.pairs, dtype=int).reshape(-1, 2)
        pairs.flags.writeable = False
        object.__setattr__(self, "pairs", pairs)

    def __len__(self) -> int:
        return self.pairs.shape[0]

    def matrices(self, sd: SortedDataset) -> tuple[np.ndarray, np.ndarray]:
        """Inequality matrices ``(G, h)`` with ``G a <= h`` encoding the rows."""
        ys = sd.y_sorted
        us = sd.rows_sorted
        if len(self) == 0:
            return np.zeros((0, sd.base.d)), np.zeros(0)
        i = self.pairs[:, 0]
        j = self.pairs[:, 1]
        G = -(us[j] - us[i])
        h = -(ys[j] - ys[i])
        return G, h


def build_consecutive_constraints(sd: SortedDataset) -> ConstraintSystem:
    """One constraint per neighboring pair of the ascending-sorted outputs.

    Requires all outputs distinct; equivalent to the bidiagonal difference
    matrix acting on the sorted data.
    """
    if not sd.all_singletons():
        raise TieStructureError(
            "outputs contain ties; use build_tie_constraints for tied data"
        )
    n = sd.n
    if n <= 1:
        return ConstraintSystem(np.zeros((0, 2), dtype=int), CONSECUTIVE)
    idx = np.arange(n - 1)
    pairs = np.column_stack([idx, idx + 1])
    return ConstraintSystem(pairs, CONSECUTIVE)


def build_tie_constraints(sd: SortedDataset) -> ConstraintSystem:
    """Level-bridging constraints that remain valid under tied outputs.

    Every member of a tie group is compared with every member of the nearest
    strictly-lower and nearest strictly-higher group only; transitivity of the
    ordering makes farther levels redundant. With all-singleton groups this
    reduces exactly to the consecutive construction.
    """
    groups = sd.tie_groups
    if len(groups) < 2:
        raise TieStructureError("output carries no ordering information (single tie group)")
    if sd.all_singletons():
        return ConstraintSystem(build_consecutive_constraints(sd).pairs, TIE_BRIDGE)
    pairs = []
    for (lo_start, lo_stop), (hi_start, hi_stop) in zip(groups[:-1], groups[1:]):
        lo = np.arange(lo_start, lo_stop)
        hi = np.arange(hi_start, hi_stop)
        ii, jj = np.meshgrid(lo, hi, indexing="ij")
        pairs.append(np.column_stack([ii.ravel(), jj.ravel()]))
    return ConstraintSystem(np.vstack(pairs), TIE_BRIDGE)


@dataclass(frozen=True)
class WienerEstimate:
    """MINLIP output: tap vector, its Lipschitz certificate, and the implied nonlinearity.

    ``f_hat`` holds the interpolation samples ``(direction'u_t [+ e_t / L], y_t)``
    sorted by abscissa; projecting on the unit direction makes the interpolant's
    maximal slope equal the certified Lipschitz constant ``lipschitz_L``.
    """

    a: np.ndarray
    lipschitz_L: float
    direction: np.ndarray
    f_hat: np.ndarray                        # shape (k, 2), columns (abscissa, ordinate)
    solver: QpSolution
    residuals_e: Optional[np.ndarray] = None  # noisy variant only, per original row
    gamma: Optional[float] = None

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        direction = np.asarray(self.direction, dtype=float)
        f_hat = np.asarray(self.f_hat, dtype=float).reshape(-1, 2)
        for arr in (a, direction, f_hat):
            arr.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "direction", direction)
        object.__setattr__(self, "f_hat", f_hat)


def _assemble_f_hat(projections: np.ndarray, outputs: np.ndarray) -> np.ndarray:
    order = np.lexsort((outputs, projections))
    xs = projections[order]
    ys = outputs[order]
    # collapse exact duplicate abscissae, keeping the largest ordinate
    keep = np.ones(len(xs), dtype=bool)
    keep[:-1] = xs[1:] != xs[:-1]
    return np.column_stack([xs[keep], ys[keep]])


def _finish_estimate(ds: RegressorDataset, a: np.ndarray, sol: QpSolution,
                     e: Optional[np.ndarray] = None, gamma: Optional[float] = None) -> WienerEstimate:
    L = float(np.linalg.norm(a))
    direction = a / L if L > 0 else np.zeros_like(a)
    proj = ds.rows @ direction
    if e is not None and L > 0:
        proj = proj + e / L
    f_hat = _assemble_f_hat(proj, ds.outputs)
    return WienerEstimate(
        a=a,
        lipschitz_L=L,
        direction=direction,
        f_hat=f_hat,
        solver=sol,
        residuals_e=None if e is None else e.copy(),
        gamma=gamma,
    )


def minlip_identify(ds: RegressorDataset, settings: Optional[QpSettings] = None) -> WienerEstimate:
    """Minimum-norm tap vector consistent with the output ordering.

    Solves ``min a'a`` subject to ``y_(i) - y_(j) <= a'(u_(i) - u_(j))`` over
    the tie-aware constraint pairs. The constraint system is infeasible
    exactly when no monotone model with finite Lipschitz constant can
    reproduce the ordering; that raises :class:`InfeasibleDataError`.
    """
    sd = sort_by_output(ds)
    cs = build_tie_constraints(sd)
    G, h = cs.matrices(sd)
    d = ds.d
    problem = QpProblem(P=np.eye(d), q=np.zeros(d), G=G, h=h)
    sol = solve_qp(problem, settings)
    if sol.status == INFEASIBLE:
        raise InfeasibleDataError(
            "ordering constraints are infeasible (e.g. identical regressor rows "
            "with different outputs); use minlip_identify_noisy with gamma > 0"
        )
    return _finish_estimate(ds, sol.x, sol)


def minlip_identify_noisy(ds: RegressorDataset, gamma: float,
                          settings: Optional[QpSettings] = None) -> WienerEstimate:
    """Noise-tolerant variant trading tap-vector norm against ordering residuals.

    Solves ``min 0.5 a'a + (gamma/2) sum_i |e_i|`` subject to
    ``y_(i) - y_(j) <= (a'u_(i) + e_(i)) - (a'u_(j) + e_(j))`` for the
    tie-aware pairs, with one residual per dataset row applied through the
    sort permutation. The absolute values are encoded with nonnegative slack
    pairs ``e = e+ - e-``, so the program is always feasible.
    """
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    sd = sort_by_output(ds)
    cs = build_tie_constraints(sd)
    d, n = ds.d, ds.n
    k = len(cs)
    nvar = d + 2 * n

    P = np.zeros((nvar, nvar))
    P[:d, :d] = np.eye(d)
    q = np.zeros(nvar)
    q[d:] = gamma / 2.0

    G = np.zeros((k + 2 * n, nvar))
    h = np.zeros(k + 2 * n)
    if k:
        Gc, hc = cs.matrices(sd)
        G[:k, :d] = Gc
        h[:k] = hc
        orig_i = sd.perm[cs.pairs[:, 0]]
        orig_j = sd.perm[cs.pairs[:, 1]]
        rows = np.arange(k)
        # e_(j) - e_(i) with e = e+ - e-, moved to the <= left-hand side
        G[rows, d + orig_j] -= 1.0
        G[rows, d + orig_i] += 1.0
        G[rows, d + n + orig_j] += 1.0
        G[rows, d + n + orig_i] -= 1.0
    G[k:, d:] = -np.eye(2 * n)

    problem = QpProblem(P=P, q=q, G=G, h=h)
    sol = solve_qp(problem, settings)
    a = sol.x[:d]
    e = sol.x[d:d + n] - sol.x[d + n:]
    return _finish_estimate(ds, a, sol, e=e, gamma=float(gamma))


def reconstruct_f(est: WienerEstimate, query):
    """Evaluate the implied monotone nonlinearity at ``query``.

    Piecewise-linear interpolation through the estimate's samples, constant
    outside their range. Monotone non-decreasing, with interior slope bounded
    by the certified Lipschitz constant.
    """
    if est.f_hat.shape[0] == 0:
        raise ValueError("estimate has no interpolation samples")
    out = np.interp(query, est.f_hat[:, 0], est.f_hat[:, 1])
    if np.ndim(query) == 0:
        return float(out)
    return out


def estimate_to_json(est: WienerEstimate) -> str:
    """Serialize an estimate to the JSON document exchanged by the CLI."""
    doc = {
        "a": [float(v) for v in est.a],
        "L": est.lipschitz_L,
        "gamma": est.gamma,
        "f_hat": [[float(x), float(y)] for x, y in est.f_hat],
        "solver": est.solver.to_dict(),
    }
    if est.residuals_e is not None:
        doc["residuals_e"] = [float(v) for v in est.residuals_e]
    return json.dumps(doc, indent=2)


def estimate_from_json(text: str) -> WienerEstimate:
    doc = json.loads(text)
    a = np.asarray(doc["a"], dtype=float)
    L = float(doc["L"])
    direction = a / L if L > 0 else np.zeros_like(a)
    solver = QpSolution(
        x=a.copy(),
        status=doc["solver"]["status"],
        iterations=int(doc["solver"]["iterations"]),
        primal_residual=float(doc["solver"]["residuals"]["primal"]),
        dual_residual=float(doc["solver"]["residuals"]["dual"]),
        objective=float(a @ a) / 2.0,
        dual=np.zeros(0),
    )
    e = doc.get("residuals_e")
    return WienerEstimate(
        a=a,
        lipschitz_L=L,
        direction=direction,
        f_hat=np.asarray(doc["f_hat"], dtype=float).reshape(-1, 2),
        solver=solver,
        residuals_e=None if e is None else np.asarray(e, dtype=float),
        gamma=None if doc.get("gamma") is None else float(doc["gamma"]),
    )
