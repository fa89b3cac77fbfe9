"""Signal generation, filtering, and dataset assembly for Wiener identification.

Provides random stable pole-zero systems, FIR truncation, the built-in static
nonlinearities, Wiener-system simulation with optional intermediate noise, and
the lagged-regressor / output-sorting machinery every estimator consumes.
All randomness is driven by explicit seeds; everything is pure and immutable
after construction.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter

__all__ = [
    "TimeSeries",
    "PoleZeroSystem",
    "FirSystem",
    "LinearSystem",
    "Nonlinearity",
    "RegressorDataset",
    "SortedDataset",
    "SimulationRecord",
    "random_pole_zero",
    "impulse_response",
    "filter_signal",
    "normalize_gain",
    "eval_nonlinearity",
    "simulate_wiener",
    "simulate_wiener_record",
    "gaussian_input",
    "build_regressors",
    "sort_by_output",
    "read_signal_csv",
    "write_signal_csv",
]


def _as_finite_array(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain finite values only")
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """A real-valued sampled signal with an integer time origin."""

    values: np.ndarray
    start_index: int = 0

    def __post_init__(self):
        arr = _as_finite_array(self.values, "values")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "start_index", int(self.start_index))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def times(self) -> np.ndarray:
        return self.start_index + np.arange(len(self.values))


@dataclass(frozen=True)
class PoleZeroSystem:
    """Rational filter given by conjugate pole/zero pairs and a gain.

    Each entry of ``pole_pairs`` / ``zero_pairs`` is stored once; an entry
    with nonzero imaginary part implies its complex conjugate as well, while
    a purely real entry contributes a single real root (degenerate pair).
    """

    pole_pairs: tuple
    zero_pairs: tuple = ()
    gain: float = 1.0

    def __post_init__(self):
        poles = tuple(complex(p) for p in self.pole_pairs)
        zeros = tuple(complex(z) for z in self.zero_pairs)
        if any(abs(p) >= 1.0 for p in poles):
            raise ValueError("unstable system: every pole modulus must be < 1")
        if not self.gain > 0:
            raise ValueError("gain must be positive")
        object.__setattr__(self, "pole_pairs", poles)
        object.__setattr__(self, "zero_pairs", zeros)
        object.__setattr__(self, "gain", float(self.gain))

    def polynomials(self) -> tuple[np.ndarray, np.ndarray]:
        """Expand the root pairs into (numerator, denominator) coefficients.

        Returns monic-in-lag-0 polynomials ``b`` and ``a`` such that the filter
        obeys ``a[0] z_t = sum_k b[k] u_{t-k} - sum_{k>=1} a[k] z_{t-k}``.
        """
        b = self.gain * _poly_from_pairs(self.zero_pairs)
        a = _poly_from_pairs(self.pole_pairs)
        return b, a


def _expand_pairs(pairs: Iterable[complex]) -> list[complex]:
    roots: list[complex] = []
    for r in pairs:
        r = complex(r)
        roots.append(r)
        if r.imag != 0.0:
            roots.append(r.conjugate())
    return roots


def _poly_from_pairs(pairs: Iterable[complex]) -> np.ndarray:
    # prod_k (1 - r_k q^-1), expanded by convolution; real by conjugate closure
    coeffs = np.array([1.0 + 0.0j])
    for r in _expand_pairs(pairs):
        coeffs = np.convolve(coeffs, np.array([1.0, -r]))
    if np.max(np.abs(coeffs.imag)) > 1e-9 * max(1.0, np.max(np.abs(coeffs.real))):
        raise ValueError("root set is not closed under conjugation")
    return coeffs.real.copy()


@dataclass(frozen=True)
class FirSystem:
    """Finite impulse response: ``z_t = sum_k taps[k] u_{t-k}``."""

    taps: np.ndarray

    def __post_init__(self):
        arr = _as_finite_array(self.taps, "taps")
        if arr.size < 1:
            raise ValueError("FIR system needs at least one tap")
        arr.flags.writeable = False
        object.__setattr__(self, "taps", arr)

    @property
    def order(self) -> int:
        return len(self.taps)


LinearSystem = Union[FirSystem, PoleZeroSystem]

NONLINEARITY_KINDS = ("smooth_tanh", "step_quantizer", "identity", "piecewise_linear")


@dataclass(frozen=True)
class Nonlinearity:
    """A monotone non-decreasing static map applied to the linear output.

    Kinds:
      * ``smooth_tanh``      -- ``2 + tanh(5x + 2) + 0.5 tanh(5x - 3)``
      * ``step_quantizer``   -- ``1{x > -0.5} + 1{x > 2}``, values in {0, 1, 2}
      * ``identity``
      * ``piecewise_linear`` -- linear interpolation through monotone knots,
        clamped outside their range; ``parameters`` holds (x, y) knot pairs.
    """

    kind: str
    parameters: tuple = ()

    def __post_init__(self):
        if self.kind not in NONLINEARITY_KINDS:
            raise ValueError(
                f"unknown nonlinearity {self.kind!r}; expected one of {NONLINEARITY_KINDS}"
            )
        if self.kind == "piecewise_linear":
            knots = tuple((float(x), float(y)) for x, y in self.parameters)
            if len(knots) < 2:
                raise ValueError("piecewise_linear needs at least two knots")
            xs = np.array([k[0] for k in knots])
            ys = np.array([k[1] for k in knots])
            if np.any(np.diff(xs) <= 0):
                raise ValueError("piecewise_linear knot abscissae must be strictly increasing")
            if np.any(np.diff(ys) < 0):
                raise ValueError("piecewise_linear knot ordinates must be non-decreasing")
            object.__setattr__(self, "parameters", knots)
        else:
            object.__setattr__(self, "parameters", tuple(self.parameters))

    def __call__(self, x):
        return eval_nonlinearity(self, x)


def eval_nonlinearity(f: Nonlinearity, x):
    """Evaluate a nonlinearity at a scalar or array argument."""
    arr = np.asarray(x, dtype=float)
    if f.kind == "smooth_tanh":
        out = 2.0 + np.tanh(5.0 * arr + 2.0) + 0.5 * np.tanh(5.0 * arr - 3.0)
    elif f.kind == "step_quantizer":
        out = (arr > -0.5).astype(float) + (arr > 2.0).astype(float)
    elif f.kind == "identity":
        out = arr.astype(float)
    else:
        xs = np.array([k[0] for k in f.parameters])
        ys = np.array([k[1] for k in f.parameters])
        out = np.interp(arr, xs, ys)
    if np.ndim(x) == 0:
        return float(out)
    return out


def random_pole_zero(m_p: int, m_z: int, rng_seed: int) -> PoleZeroSystem:
    """Draw a stable system with ``m_p`` conjugate pole pairs and ``m_z`` zero pairs.

    Pairs are sampled uniformly over the open unit disk by area (radius
    ``sqrt(U1)``, angle ``pi * U2`` for the upper-half representative); the
    implied conjugates make all polynomial coefficients real. Gain is 1.
    """
    if m_p < 1:
        raise ValueError("m_p must be >= 1")
    if m_z < 0:
        raise ValueError("m_z must be >= 0")
    rng = np.random.default_rng(rng_seed)

    def draw(count: int) -> tuple:
        radii = np.sqrt(rng.uniform(0.0, 1.0, size=count))
        angles = np.pi * rng.uniform(0.0, 1.0, size=count)
        return tuple(r * complex(math.cos(t), math.sin(t)) for r, t in zip(radii, angles))

    poles = draw(m_p)
    zeros = draw(m_z)
    return PoleZeroSystem(pole_pairs=poles, zero_pairs=zeros, gain=1.0)


def impulse_response(sys: LinearSystem, d: int) -> FirSystem:
    """Truncate a linear system to its first ``d`` impulse-response taps.

    ``taps[k]`` is the response at lag ``k`` (k = 0..d-1) to a unit impulse,
    obtained by running the recursive difference equation; an FIR input is
    zero-padded or truncated to length ``d``.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if isinstance(sys, FirSystem):
        taps = np.zeros(d)
        m = min(d, sys.order)
        taps[:m] = sys.taps[:m]
        return FirSystem(taps)
    b, a = sys.polynomials()
    delta = np.zeros(d)
    delta[0] = 1.0
    taps = lfilter(b, a, delta)
    return FirSystem(taps)


def filter_signal(sys: LinearSystem, u: TimeSeries) -> TimeSeries:
    """Run ``u`` through a linear system with zero initial conditions.

    The output is aligned so that ``z_t`` depends on inputs up to time ``t``
    and has the same length and time origin as ``u``.
    """
    if isinstance(sys, FirSystem):
        z = lfilter(sys.taps, [1.0], u.values)
    else:
        b, a = sys.polynomials()
        z = lfilter(b, a, u.values)
    return TimeSeries(z, start_index=u.start_index)


def normalize_gain(z: TimeSeries) -> float:
    """Gain ``g`` such that ``g * z`` has unit (population) standard deviation."""
    if len(z) < 2:
        raise ValueError("need at least 2 samples to estimate a standard deviation")
    sd = float(np.std(z.values))
    if sd == 0.0:
        raise ValueError("zero variance: constant signal cannot be gain-normalized")
    return 1.0 / sd


@dataclass(frozen=True)
class SimulationRecord:
    """Full trace of one Wiener simulation, including the noise realization."""

    u: TimeSeries
    z: TimeSeries
    y: TimeSeries
    e: TimeSeries
    gain: float
    sigma_e: float
    rng_seed: int


def simulate_wiener_record(
    sys: LinearSystem,
    f: Nonlinearity,
    u: TimeSeries,
    sigma_e: float,
    rng_seed: int,
) -> SimulationRecord:
    """Simulate ``y_t = f(g * (H u)_t + e_t)`` and keep every intermediate signal.

    The linear output is rescaled to unit standard deviation before the
    nonlinearity; ``e`` is i.i.d. zero-mean Gaussian with std ``sigma_e``
    (identically zero when ``sigma_e == 0``).
    """
    if sigma_e < 0:
        raise ValueError("sigma_e must be >= 0")
    z_raw = filter_signal(sys, u)
    g = normalize_gain(z_raw)
    z = TimeSeries(g * z_raw.values, start_index=u.start_index)
    if sigma_e > 0:
        rng = np.random.default_rng(rng_seed)
        e_vals = sigma_e * rng.standard_normal(len(u))
    else:
        e_vals = np.zeros(len(u))
    e = TimeSeries(e_vals, start_index=u.start_index)
    y = TimeSeries(eval_nonlinearity(f, z.values + e.values), start_index=u.start_index)
    return SimulationRecord(u=u, z=z, y=y, e=e, gain=g, sigma_e=float(sigma_e), rng_seed=int(rng_seed))


def simulate_wiener(
    sys: LinearSystem,
    f: Nonlinearity,
    u: TimeSeries,
    sigma_e: float,
    rng_seed: int,
) -> tuple[TimeSeries, TimeSeries]:
    """Simulate a monotone Wiener system; returns the normalized intermediate ``z`` and output ``y``."""
    rec = simulate_wiener_record(sys, f, u, sigma_e, rng_seed)
    return rec.z, rec.y


def gaussian_input(length: int, rng_seed: int, start_index: int = 0) -> TimeSeries:
    """I.i.d. standard Gaussian excitation, the default input for experiments."""
    rng = np.random.default_rng(rng_seed)
    return TimeSeries(rng.standard_normal(length), start_index=start_index)


@dataclass(frozen=True)
class RegressorDataset:
    """Lagged-input rows paired with outputs.

    ``rows[i] = (u_{t}, u_{t-1}, ..., u_{t-d+1})`` for ``t = time_index[i]``,
    matching a Toeplitz assembly of the input with the newest sample first.
    """

    rows: np.ndarray
    outputs: np.ndarray
    time_index: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        outputs = _as_finite_array(self.outputs, "outputs")
        times = np.asarray(self.time_index, dtype=int)
        if rows.ndim != 2:
            raise ValueError("rows must be a 2-D matrix")
        if rows.shape[0] != outputs.size or rows.shape[0] != times.size:
            raise ValueError("rows, outputs and time_index must agree in length")
        if rows.size and not np.all(np.isfinite(rows)):
            raise ValueError("rows must contain finite values only")
        for arr in (rows, outputs, times):
            arr.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "time_index", times)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]


def build_regressors(u: TimeSeries, y: TimeSeries, d: int, burn_in: int = 0) -> RegressorDataset:
    """Assemble the ``(T - d + 1) x d`` lag matrix of ``u`` paired with ``y``.

    Row ``i`` holds ``(u[i+d-1], ..., u[i])`` (0-based positions) and is
    paired with ``y[i+d-1]``; the leading transient rows are kept unless
    ``burn_in`` discards that many initial rows.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    T = len(u)
    if len(y) != T:
        raise ValueError("u and y must have equal length")
    if u.start_index != y.start_index:
        raise ValueError("u and y must share the same time origin")
    if T < d:
        raise ValueError(f"insufficient samples: need T >= d, got T={T}, d={d}")
    if burn_in < 0:
        raise ValueError("burn_in must be >= 0")
    windows = sliding_window_view(u.values, d)          # windows[i] = (u[i], ..., u[i+d-1])
    rows = windows[:, ::-1]                             # newest sample first
    outputs = y.values[d - 1:]
    times = u.start_index + np.arange(d - 1, T)
    if burn_in:
        if burn_in >= rows.shape[0]:
            raise ValueError("burn_in discards every row")
        rows, outputs, times = rows[burn_in:], outputs[burn_in:], times[burn_in:]
    return RegressorDataset(rows=np.ascontiguousarray(rows), outputs=outputs.copy(), time_index=times)


@dataclass(frozen=True)
class SortedDataset:
    """A regressor dataset viewed in ascending-output order.

    ``perm`` maps sorted position -> original row; ``tie_groups`` partitions
    the sorted positions into maximal runs of exactly equal outputs.
    """

    base: RegressorDataset
    perm: np.ndarray
    tie_groups: tuple = field(default=())

    @property
    def y_sorted(self) -> np.ndarray:
        return self.base.outputs[self.perm]

    @property
    def rows_sorted(self) -> np.ndarray:
        return self.base.rows[self.perm]

    @property
    def n(self) -> int:
        return self.base.n

    def all_singletons(self) -> bool:
        return all(stop - start == 1 for start, stop in self.tie_groups)


def sort_by_output(ds: RegressorDataset) -> SortedDataset:
    """Stable ascending sort on the outputs; ties keep original time order.

    Tie groups are maximal runs of exactly equal output values (bitwise float
    equality; quantizer levels are exact, and no epsilon is applied so smooth
    data cannot produce spurious groups).
    """
    perm = np.argsort(ds.outputs, kind="stable")
    ys = ds.outputs[perm]
    groups: list[tuple[int, int]] = []
    start = 0
    for i in range(1, len(ys) + 1):
        if i == len(ys) or ys[i] != ys[start]:
            groups.append((start, i))
            start = i
    perm = perm.copy()
    perm.flags.writeable = False
    return SortedDataset(base=ds, perm=perm, tie_groups=tuple(groups))


# --- signal CSV interface -------------------------------------------------
#
# Header `t,u,y[,z,e]`, one row per time step, decimal ASCII, LF endings.
# Columns are matched by name, so writers may order them differently.

def write_signal_csv(path, u: TimeSeries, y: TimeSeries, z: TimeSeries | None = None,
                     e: TimeSeries | None = None) -> None:
    """Write aligned signals to CSV with columns ``t,u[,z],y[,e]``."""
    T = len(u)
    for name, s in (("y", y), ("z", z), ("e", e)):
        if s is not None and (len(s) != T or s.start_index != u.start_index):
            raise ValueError(f"signal {name!r} is not aligned with u")
    header = ["t", "u"] + (["z"] if z is not None else []) + ["y"] + (["e"] if e is not None else [])
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for i in range(T):
            row = [str(u.start_index + i), repr(float(u.values[i]))]
            if z is not None:
                row.append(repr(float(z.values[i])))
            row.append(repr(float(y.values[i])))
            if e is not None:
                row.append(repr(float(e.values[i])))
            writer.writerow(row)


def read_signal_csv(path) -> dict[str, TimeSeries]:
    """Read a signal CSV; returns the named series keyed by column.

    Requires columns ``t``, ``u`` and ``y``; ``z`` and ``e`` are optional.
    The time column must be strictly increasing consecutive integers.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty signal file") from None
        names = [h.strip() for h in header]
        for required in ("t", "u", "y"):
            if required not in names:
                raise ValueError(f"signal CSV is missing required column {required!r}")
        columns: dict[str, list[float]] = {name: [] for name in names}
        for row in reader:
            if not row:
                continue
            if len(row) != len(names):
                raise ValueError("signal CSV row width does not match header")
            for name, cell in zip(names, row):
                columns[name].append(float(cell))
    t = np.asarray(columns["t"])
    if t.size == 0:
        raise ValueError("signal CSV has no data rows")
    if np.any(t != np.round(t)):
        raise ValueError("time column must hold integers")
    t = t.astype(int)
    if t.size > 1 and not np.all(np.diff(t) == 1):
        raise ValueError("time column must be consecutive increasing integers")
    start = int(t[0])
    out: dict[str, TimeSeries] = {}
    for name in names:
        if name == "t":
            continue
        out[name] = TimeSeries(np.asarray(columns[name]), start_index=start)
    return out
