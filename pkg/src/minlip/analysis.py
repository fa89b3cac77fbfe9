"""Metrics and empirical theory checks.

Impulse-response norms and correlation, local persistency-of-excitation
verification, empirical Lipschitz profiling of a scalar map, and the
direction-recovery gap between an estimate and the truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .signals import FirSystem, RegressorDataset

__all__ = [
    "PeReport",
    "LipschitzProfile",
    "system_l2_norm",
    "system_correlation",
    "local_pe_check",
    "empirical_lipschitz",
    "consistency_gap",
]

RANK_TOL = 1e-8  # smallest retained singular value relative to the largest


def system_l2_norm(h: FirSystem) -> float:
    """Energy norm of the impulse response (finite truncation)."""
    return float(np.linalg.norm(h.taps))


def system_correlation(h0: FirSystem, h: FirSystem, max_shift: int = 1) -> tuple[float, int]:
    """Cosine of the angle between two impulse responses, scanned over lags.

    The shorter vector is zero-padded; integer alignments in
    ``[-max_shift, max_shift]`` are scanned and the shift maximizing the
    absolute correlation is reported (ties keep the smallest shift). The
    default one-sample scan absorbs differing lag-origin conventions.
    """
    if max_shift < 0:
        raise ValueError("max_shift must be >= 0")
    n0 = system_l2_norm(h0)
    n1 = system_l2_norm(h)
    if n0 == 0.0 or n1 == 0.0:
        raise ValueError("correlation of a zero-norm system is undefined")
    L = max(h0.order, h.order)
    a = np.zeros(L + 2 * max_shift)
    a[max_shift:max_shift + h0.order] = h0.taps
    # scan by increasing |shift| so ties resolve to the smallest alignment
    shifts = sorted(range(-max_shift, max_shift + 1), key=lambda s: (abs(s), s))
    best_corr = None
    best_shift = 0
    for s in shifts:
        b = np.zeros(L + 2 * max_shift)
        b[max_shift + s:max_shift + s + h.order] = h.taps
        corr = float(a @ b) / (n0 * n1)
        if best_corr is None or abs(corr) > abs(best_corr):
            best_corr, best_shift = corr, s
    return min(1.0, max(-1.0, best_corr)), best_shift


@dataclass(frozen=True)
class PeReport:
    """Outcome of the local persistency-of-excitation check."""

    epsilon: float
    order: int
    satisfied: bool
    witness_failures: tuple
    min_singular_values: tuple

    def to_json(self) -> str:
        return json.dumps({
            "epsilon": self.epsilon,
            "order": self.order,
            "satisfied": self.satisfied,
            "witness_failures": list(self.witness_failures),
            "min_singular_values": list(self.min_singular_values),
        }, indent=2)


def local_pe_check(ds: RegressorDataset, epsilon: float) -> PeReport:
    """Check that every regressor row has ``d`` independent neighbors within ``epsilon``.

    For each row, the difference vectors to all other rows inside the
    epsilon-ball are stacked and their numerical rank is tested against the
    regressor order (smallest retained singular value above ``RANK_TOL``
    times the largest).
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    U = ds.rows
    n, d = U.shape
    sq = np.sum(U * U, axis=1)
    failures = []
    min_svs = []
    for i in range(n):
        dist2 = sq + sq[i] - 2.0 * (U @ U[i])
        neigh = np.flatnonzero(dist2 <= epsilon * epsilon + 1e-30)
        neigh = neigh[neigh != i]
        ok = False
        min_sv = 0.0
        if neigh.size >= d:
            diff = U[neigh] - U[i]
            s = np.linalg.svd(diff, compute_uv=False)
            if s.size >= d and s[0] > 0:
                min_sv = float(s[d - 1])
                ok = min_sv > RANK_TOL * float(s[0])
        min_svs.append(min_sv)
        if not ok:
            failures.append(i)
    return PeReport(
        epsilon=float(epsilon),
        order=d,
        satisfied=not failures,
        witness_failures=tuple(failures),
        min_singular_values=tuple(min_svs),
    )


@dataclass(frozen=True)
class LipschitzProfile:
    """Largest pairwise difference quotient of a sampled scalar map.

    ``g_samples`` holds ``(distance, ratio)`` pairs measured against the
    sample where the constant is attained; for data consistent with a
    monotone function every ratio is at most 1.
    """

    L0: float
    argmax_pair: tuple
    g_samples: tuple

    def to_json(self) -> str:
        return json.dumps({
            "L0": self.L0,
            "argmax_pair": list(self.argmax_pair),
            "g_samples": [[dz, r] for dz, r in self.g_samples],
        }, indent=2)


def empirical_lipschitz(z, y) -> LipschitzProfile:
    """Measure the attained Lipschitz constant of samples ``y_i = f(z_i)``.

    ``L0`` is the maximum positive difference quotient over all pairs with
    distinct abscissae; the pair attaining it anchors the decay profile
    ``ratio = |f(z*) - f(z'')| / (L0 |z* - z''|)`` recorded for every other
    sample.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if z.shape != y.shape or z.size < 2:
        raise ValueError("need two aligned samples at least")
    if np.all(z == z[0]):
        raise ValueError("all abscissae are equal; no slope is defined")

    n = z.size
    block = max(1, min(n, int(4e6) // max(n, 1)))
    best = -np.inf
    best_pair = (0, 1)
    for lo in range(0, n, block):
        hi = min(lo + block, n)
        dz = z[np.newaxis, lo:hi] - z[:, np.newaxis]       # (n, hi-lo)
        dy = y[np.newaxis, lo:hi] - y[:, np.newaxis]
        with np.errstate(divide="ignore", invalid="ignore"):
            quot = np.where(dz != 0.0, dy / dz, -np.inf)
        flat = int(np.argmax(quot))
        val = float(quot.ravel()[flat])
        if val > best:
            best = val
            i, j = np.unravel_index(flat, quot.shape)
            best_pair = (int(i), int(lo + j))
    L0 = max(best, 0.0)

    anchor = best_pair[0]
    g_samples = []
    if L0 > 0:
        zs = z[anchor]
        yv = y[anchor]
        for k in range(n):
            if k == anchor or z[k] == zs:
                continue
            dist = abs(z[k] - zs)
            g_samples.append((float(dist), float(abs(y[k] - yv) / (L0 * dist))))
    return LipschitzProfile(L0=float(L0), argmax_pair=best_pair, g_samples=tuple(g_samples))


def consistency_gap(est_direction: np.ndarray, a0: np.ndarray) -> float:
    """Signed inner product of two unit vectors; 1 means exact direction recovery."""
    est = np.asarray(est_direction, dtype=float).reshape(-1)
    a0 = np.asarray(a0, dtype=float).reshape(-1)
    if est.shape != a0.shape:
        raise ValueError("vectors must have equal length")
    for name, v in (("est_direction", est), ("a0", a0)):
        if abs(np.linalg.norm(v) - 1.0) > 1e-8:
            raise ValueError(f"{name} must have unit 2-norm")
    return float(est @ a0)
