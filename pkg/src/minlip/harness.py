"""Benchmark harness: Monte-Carlo sweeps over random systems and seeds.

Each repetition draws a random pole-zero system, truncates it to an FIR
truth, excites it with white Gaussian input, simulates the monotone Wiener
output for the experiment's nonlinearity and noise level, runs the requested
estimators, and scores them by impulse-response correlation. Child seeds are
a pure function of (master_seed, repetition, T, sigma_e), so any row can be
reproduced in isolation and the emitted CSV is deterministic.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .analysis import system_correlation
from .baselines import bai2006, ls_fir, ls_oracle
from .estimator import InfeasibleDataError, minlip_identify, minlip_identify_noisy
from .signals import (
    FirSystem,
    Nonlinearity,
    build_regressors,
    gaussian_input,
    impulse_response,
    random_pole_zero,
    simulate_wiener_record,
)

__all__ = [
    "EXPERIMENTS",
    "METHODS",
    "ExperimentConfig",
    "ConfigError",
    "ResultRow",
    "child_seed",
    "run_cell",
    "run_experiment",
    "aggregate",
    "results_csv_lines",
    "summary_csv_lines",
    "RESULTS_HEADER",
    "SUMMARY_HEADER",
]

log = logging.getLogger("minlip.harness")

EXPERIMENTS = ("noiseless", "quantized", "noise_sweep", "length_sweep")
METHODS = ("minlip", "minlip_noisy", "ls_xy", "ls_xz", "bai2006")

RESULTS_HEADER = "experiment,method,T,sigma_e,repetition,seed,corr,abs_corr,shift,wall_time_ms,solver_status"
SUMMARY_HEADER = (
    "experiment,method,T,sigma_e,count,failures,"
    "corr_median,corr_q25,corr_q75,corr_mean,"
    "abs_corr_median,abs_corr_q25,abs_corr_q75,abs_corr_mean"
)


class ConfigError(ValueError):
    """Invalid experiment configuration; ``fields`` names the offenders."""

    def __init__(self, problems: dict[str, str]):
        self.fields = sorted(problems)
        detail = "; ".join(f"{k}: {problems[k]}" for k in self.fields)
        super().__init__(f"invalid experiment config ({detail})")


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    T_values: tuple
    d: int
    m_p: int
    m_z: int
    sigma_e_values: tuple
    gamma: float
    repetitions: int
    methods: tuple
    master_seed: int

    def __post_init__(self):
        problems: dict[str, str] = {}
        if self.experiment not in EXPERIMENTS:
            problems["experiment"] = f"must be one of {EXPERIMENTS}"
        t_values = tuple(int(t) for t in self.T_values) if _intlike_seq(self.T_values) else None
        if t_values is None or not t_values:
            problems["T_values"] = "must be a non-empty list of integers"
        if not isinstance(self.d, int) or self.d < 1:
            problems["d"] = "must be an integer >= 1"
        elif t_values and any(t <= self.d for t in t_values):
            problems["T_values"] = "every T must exceed d"
        if not isinstance(self.m_p, int) or self.m_p < 1:
            problems["m_p"] = "must be an integer >= 1"
        if not isinstance(self.m_z, int) or self.m_z < 0:
            problems["m_z"] = "must be an integer >= 0"
        try:
            sig = tuple(float(s) for s in self.sigma_e_values)
            if not sig or any(s < 0 for s in sig):
                raise ValueError
        except (TypeError, ValueError):
            problems["sigma_e_values"] = "must be a non-empty list of reals >= 0"
            sig = ()
        try:
            gamma = float(self.gamma)
            if not gamma > 0:
                raise ValueError
        except (TypeError, ValueError):
            problems["gamma"] = "must be a real > 0"
            gamma = 1.0
        if not isinstance(self.repetitions, int) or self.repetitions < 1:
            problems["repetitions"] = "must be an integer >= 1"
        methods = tuple(self.methods)
        if not methods or any(m not in METHODS for m in methods):
            problems["methods"] = f"must be a non-empty subset of {METHODS}"
        if not isinstance(self.master_seed, int):
            problems["master_seed"] = "must be an integer"
        if problems:
            raise ConfigError(problems)
        object.__setattr__(self, "T_values", t_values)
        object.__setattr__(self, "sigma_e_values", sig)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "methods", methods)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        expected = {f for f in cls.__dataclass_fields__}
        problems = {}
        for missing in sorted(expected - set(doc)):
            problems[missing] = "missing"
        for unknown in sorted(set(doc) - expected):
            problems[unknown] = "unknown field"
        if problems:
            raise ConfigError(problems)
        return cls(**doc)

    def nonlinearity(self) -> Nonlinearity:
        if self.experiment == "quantized":
            return Nonlinearity("step_quantizer")
        return Nonlinearity("smooth_tanh")


def _intlike_seq(values) -> bool:
    try:
        return all(float(v) == int(v) for v in values)
    except (TypeError, ValueError):
        return False


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    method: str
    T: int
    sigma_e: float
    repetition: int
    seed: int
    corr: float            # nan when the method failed on this cell
    abs_corr: float
    shift: int
    wall_time_ms: float
    solver_status: str

    def sort_key(self):
        return (self.experiment, self.method, self.T, self.sigma_e, self.repetition)


def child_seed(master_seed: int, repetition: int, T: int, sigma_e: float) -> int:
    """Derive the per-cell seed; pure in its arguments, no global state."""
    sigma_bits = int(np.float64(sigma_e).view(np.uint64))
    ss = np.random.SeedSequence([int(master_seed), int(repetition), int(T), sigma_bits])
    return int(ss.generate_state(1, np.uint64)[0])


def run_cell(cfg: ExperimentConfig, T: int, sigma_e: float, repetition: int,
             timing: bool = True) -> list[ResultRow]:
    """Run every configured method on one (T, sigma_e, repetition) cell."""
    seed = child_seed(cfg.master_seed, repetition, T, sigma_e)
    root = np.random.SeedSequence(seed)
    s_sys, s_input, s_noise, s_bai = (int(c.generate_state(1, np.uint64)[0]) for c in root.spawn(4))

    system = random_pole_zero(cfg.m_p, cfg.m_z, s_sys)
    h_true = impulse_response(system, cfg.d)
    u = gaussian_input(T, s_input)
    rec = simulate_wiener_record(h_true, cfg.nonlinearity(), u, sigma_e, s_noise)
    ds = build_regressors(u, rec.y, cfg.d)

    rows = []
    for method in cfg.methods:
        t0 = time.perf_counter()
        status = "ok"
        a = None
        try:
            if method == "minlip":
                est = minlip_identify(ds)
                a, status = est.a, est.solver.status
            elif method == "minlip_noisy":
                est = minlip_identify_noisy(ds, cfg.gamma)
                a, status = est.a, est.solver.status
            elif method == "ls_xy":
                a = ls_fir(ds).a
            elif method == "ls_xz":
                a = ls_oracle(u, rec.z, cfg.d).a
            elif method == "bai2006":
                a = bai2006(ds, rng_seed=s_bai).a
        except InfeasibleDataError:
            status = "infeasible"
        except Exception as exc:  # a failing method must not abort the sweep
            status = f"error:{type(exc).__name__}"
            log.info("method %s failed on cell (T=%s, sigma=%s, rep=%s): %s",
                     method, T, sigma_e, repetition, exc)
        elapsed_ms = (time.perf_counter() - t0) * 1000.0 if timing else 0.0

        corr, shift = (float("nan"), 0)
        if a is not None and np.linalg.norm(a) > 0:
            corr, shift = system_correlation(h_true, FirSystem(a), max_shift=1)
        elif a is not None:
            status = "degenerate" if status == "ok" else status
        rows.append(ResultRow(
            experiment=cfg.experiment,
            method=method,
            T=int(T),
            sigma_e=float(sigma_e),
            repetition=int(repetition),
            seed=seed,
            corr=corr,
            abs_corr=abs(corr),
            shift=int(shift),
            wall_time_ms=elapsed_ms,
            solver_status=status,
        ))
    return rows


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, timing: bool = True) -> list[ResultRow]:
    """Run the full sweep; output order is canonical regardless of scheduling."""
    cells = [(T, sigma, rep)
             for T in cfg.T_values
             for sigma in cfg.sigma_e_values
             for rep in range(cfg.repetitions)]
    log.info("running %s: %d cells x %d methods", cfg.experiment, len(cells), len(cfg.methods))
    if jobs is None or jobs < 1:
        jobs = 1
    if jobs == 1 or len(cells) <= 1:
        chunks = [run_cell(cfg, T, s, r, timing=timing) for T, s, r in cells]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(lambda c: run_cell(cfg, *c, timing=timing), cells))
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=ResultRow.sort_key)
    return rows


def aggregate(rows: list[ResultRow]) -> list[dict]:
    """Per-(experiment, method, T, sigma_e) robust summary of the correlations."""
    if not rows:
        raise ValueError("no rows to aggregate")
    cells: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        cells.setdefault((row.experiment, row.method, row.T, row.sigma_e), []).append(row)

    def stats(values: np.ndarray) -> dict:
        if values.size == 0:
            return {"median": float("nan"), "q25": float("nan"),
                    "q75": float("nan"), "mean": float("nan")}
        return {
            "median": float(np.median(values)),
            "q25": float(np.percentile(values, 25)),
            "q75": float(np.percentile(values, 75)),
            "mean": float(np.mean(values)),
        }

    out = []
    for key in sorted(cells):
        group = cells[key]
        corr = np.array([r.corr for r in group])
        ok = np.isfinite(corr)
        entry = {
            "experiment": key[0],
            "method": key[1],
            "T": key[2],
            "sigma_e": key[3],
            "count": len(group),
            "failures": int(np.sum(~ok)),
            "corr": stats(corr[ok]),
            "abs_corr": stats(np.abs(corr[ok])),
        }
        out.append(entry)
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def results_csv_lines(rows: list[ResultRow]) -> list[str]:
    lines = [RESULTS_HEADER]
    for r in rows:
        d = asdict(r)
        lines.append(",".join(_fmt(d[k]) for k in RESULTS_HEADER.split(",")))
    return lines


def summary_csv_lines(summary: list[dict]) -> list[str]:
    lines = [SUMMARY_HEADER]
    for cell in summary:
        vals = [cell["experiment"], cell["method"], cell["T"], cell["sigma_e"],
                cell["count"], cell["failures"],
                cell["corr"]["median"], cell["corr"]["q25"], cell["corr"]["q75"], cell["corr"]["mean"],
                cell["abs_corr"]["median"], cell["abs_corr"]["q25"], cell["abs_corr"]["q75"],
                cell["abs_corr"]["mean"]]
        lines.append(",".join(_fmt(v) for v in vals))
    return lines
