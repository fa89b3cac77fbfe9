"""Command-line interface: simulate data, identify from files, run benchmarks.

Exit codes: 0 success, 1 domain error, 2 usage or config error, 3 the
noiseless estimator reported infeasible data (retry with ``--gamma``).
Set ``MINLIP_LOG`` to ``error``, ``info`` or ``debug`` to control diagnostics
on standard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import analysis, baselines, harness, signals
from .estimator import (
    InfeasibleDataError,
    estimate_to_json,
    minlip_identify,
    minlip_identify_noisy,
)
from .signals import FirSystem, Nonlinearity, TimeSeries

log = logging.getLogger("minlip")

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3

_NONLINEARITY_NAMES = {
    "tanh": "smooth_tanh",
    "smooth_tanh": "smooth_tanh",
    "quantizer": "step_quantizer",
    "step_quantizer": "step_quantizer",
    "identity": "identity",
}


class DomainError(RuntimeError):
    pass


def _configure_logging():
    level_name = os.environ.get("MINLIP_LOG", "error").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    if level_name not in levels:
        level_name = "error"
    logging.basicConfig(stream=sys.stderr, level=levels[level_name],
                        format="minlip: %(levelname)s: %(message)s")


def _truth_sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(".truth.json")


def cmd_simulate(args) -> int:
    kind = _NONLINEARITY_NAMES.get(args.nonlinearity)
    if kind is None:
        raise DomainError(
            f"unknown nonlinearity {args.nonlinearity!r}; choose from "
            f"{sorted(set(_NONLINEARITY_NAMES))}"
        )
    if args.T <= args.d:
        raise DomainError(f"need T > d, got T={args.T}, d={args.d}")
    if args.sigma_e < 0:
        raise DomainError("--sigma-e must be >= 0")
    root = np.random.SeedSequence(args.seed)
    s_sys, s_input, s_noise = (int(c.generate_state(1, np.uint64)[0]) for c in root.spawn(3))
    system = signals.random_pole_zero(args.np, args.nz, s_sys)
    h_true = signals.impulse_response(system, args.d)
    u = signals.gaussian_input(args.T, s_input)
    rec = signals.simulate_wiener_record(h_true, Nonlinearity(kind), u, args.sigma_e, s_noise)

    out = Path(args.out)
    signals.write_signal_csv(out, u=rec.u, y=rec.y, z=rec.z, e=rec.e)
    sidecar = {
        "taps": [float(v) for v in h_true.taps],
        "d": args.d,
        "m_p": args.np,
        "m_z": args.nz,
        "gain": rec.gain,
        "sigma_e": args.sigma_e,
        "nonlinearity": kind,
        "seed": args.seed,
        "input": "gaussian_white",
    }
    _truth_sidecar_path(out).write_text(json.dumps(sidecar, indent=2) + "\n")
    print(f"wrote {out} ({args.T} samples) and {_truth_sidecar_path(out)}")
    return EXIT_OK


def cmd_identify(args) -> int:
    path = Path(args.infile)
    if not path.exists():
        raise DomainError(f"input file {path} does not exist")
    series = signals.read_signal_csv(path)
    u, y = series["u"], series["y"]
    if args.d >= len(u):
        raise DomainError(f"--d must be smaller than the series length {len(u)}")

    if args.method == "minlip":
        ds = signals.build_regressors(u, y, args.d)
        if args.gamma is not None:
            if args.gamma <= 0:
                raise DomainError("--gamma must be > 0")
            est = minlip_identify_noisy(ds, args.gamma)
        else:
            est = minlip_identify(ds)
        doc = json.loads(estimate_to_json(est))
        a = est.a
    elif args.method == "ls-xy":
        ds = signals.build_regressors(u, y, args.d)
        b = baselines.ls_fir(ds)
        doc = _baseline_doc(b)
        a = b.a
    elif args.method == "ls-xz":
        if "z" not in series:
            raise DomainError("method ls-xz needs a z column in the input CSV")
        b = baselines.ls_oracle(u, series["z"], args.d)
        doc = _baseline_doc(b)
        a = b.a
    elif args.method == "bai2006":
        ds = signals.build_regressors(u, y, args.d)
        b = baselines.bai2006(ds, rng_seed=args.seed)
        doc = _baseline_doc(b)
        a = b.a
    else:  # pragma: no cover - argparse choices guard this
        raise DomainError(f"unknown method {args.method!r}")

    sidecar = _truth_sidecar_path(path)
    if sidecar.exists():
        truth = json.loads(sidecar.read_text())
        h0 = FirSystem(np.asarray(truth["taps"], dtype=float))
        if np.linalg.norm(a) > 0:
            corr, shift = analysis.system_correlation(h0, FirSystem(a), max_shift=1)
            doc["truth_corr"] = corr
            doc["truth_shift"] = shift
        else:
            doc["truth_corr"] = None
            doc["truth_shift"] = None

    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def _baseline_doc(b: baselines.BaselineEstimate) -> dict:
    L = float(np.linalg.norm(b.a))
    return {
        "a": [float(v) for v in b.a],
        "L": L,
        "gamma": None,
        "f_hat": [],
        "method": b.method,
        "diagnostics": b.diagnostics,
        "solver": {"status": "ok", "iterations": int(b.diagnostics.get("iterations", 0)),
                   "residuals": {"primal": 0.0, "dual": 0.0}},
    }


def _load_config(spec: str) -> harness.ExperimentConfig:
    path = Path(spec)
    if path.exists():
        text = path.read_text()
    else:
        name = spec if spec.endswith(".json") else spec + ".json"
        bundle = resources.files("minlip").joinpath("configs", name)
        if not bundle.is_file():
            raise harness.ConfigError({"config": f"no such file or bundled config: {spec}"})
        text = bundle.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise harness.ConfigError({"config": f"not valid JSON: {exc}"}) from None
    if not isinstance(doc, dict):
        raise harness.ConfigError({"config": "top level must be a JSON object"})
    return harness.ExperimentConfig.from_dict(doc)


def cmd_benchmark(args) -> int:
    cfg = _load_config(args.config)
    jobs = args.jobs if args.jobs else (os.cpu_count() or 1)
    rows = harness.run_experiment(cfg, jobs=jobs, timing=not args.no_timing)
    summary = harness.aggregate(rows)

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results_path = out_dir / "results.csv"
    summary_path = out_dir / "summary.csv"
    results_path.write_text("\n".join(harness.results_csv_lines(rows)) + "\n")
    summary_path.write_text("\n".join(harness.summary_csv_lines(summary)) + "\n")

    print(f"wrote {results_path} ({len(rows)} rows) and {summary_path}")
    print(f"{'method':<14}{'T':>6}{'sigma_e':>9}{'n':>5}{'fail':>6}{'corr_med':>10}{'abs_med':>9}")
    for cell in summary:
        print(f"{cell['method']:<14}{cell['T']:>6}{cell['sigma_e']:>9g}{cell['count']:>5}"
              f"{cell['failures']:>6}{cell['corr']['median']:>10.4f}{cell['abs_corr']['median']:>9.4f}")
    return EXIT_OK


def cmd_check_pe(args) -> int:
    if args.epsilon <= 0:
        raise DomainError("--epsilon must be > 0")
    path = Path(args.infile)
    if not path.exists():
        raise DomainError(f"input file {path} does not exist")
    series = signals.read_signal_csv(path)
    u, y = series["u"], series["y"]
    if args.d >= len(u):
        raise DomainError(f"--d must be smaller than the series length {len(u)}")
    ds = signals.build_regressors(u, y, args.d)
    report = analysis.local_pe_check(ds, args.epsilon)
    print(report.to_json())
    if report.satisfied:
        print(f"satisfied: every row has {args.d} independent neighbors within {args.epsilon}",
              file=sys.stderr)
    else:
        print(f"not satisfied: {len(report.witness_failures)} of {ds.n} rows lack "
              f"{args.d} independent neighbors within {args.epsilon}", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="minlip",
        description="Identify monotone Wiener systems by Lipschitz-constant minimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a monotone Wiener system to CSV")
    sim.add_argument("--np", type=int, default=20, help="conjugate pole pairs (default 20)")
    sim.add_argument("--nz", type=int, default=2, help="conjugate zero pairs (default 2)")
    sim.add_argument("--d", type=int, default=50, help="FIR truncation order (default 50)")
    sim.add_argument("--T", type=int, default=500, help="number of samples (default 500)")
    sim.add_argument("--sigma-e", type=float, default=0.0, help="intermediate noise std (default 0)")
    sim.add_argument("--nonlinearity", default="tanh",
                     help="tanh | quantizer | identity (default tanh)")
    sim.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    sim.add_argument("--out", required=True, help="output CSV path")
    sim.set_defaults(func=cmd_simulate)

    ident = sub.add_parser("identify", help="estimate the linear subsystem from a signal CSV")
    ident.add_argument("--in", dest="infile", required=True, help="input signal CSV")
    ident.add_argument("--d", type=int, required=True, help="FIR model order")
    ident.add_argument("--method", default="minlip",
                       choices=["minlip", "ls-xy", "ls-xz", "bai2006"])
    ident.add_argument("--gamma", type=float, default=None,
                       help="residual penalty; selects the noise-tolerant variant")
    ident.add_argument("--seed", type=int, default=0, help="seed for multi-start methods")
    ident.add_argument("--out", default=None, help="output JSON path (default: stdout)")
    ident.set_defaults(func=cmd_identify)

    bench = sub.add_parser("benchmark", help="run a Monte-Carlo benchmark sweep")
    bench.add_argument("--config", required=True,
                       help="config JSON path or bundled name (noiseless, quantized, "
                            "noise_sweep, length_sweep)")
    bench.add_argument("--out-dir", required=True, help="directory for results/summary CSV")
    bench.add_argument("--jobs", type=int, default=0,
                       help="concurrent repetitions (default: available parallelism)")
    bench.add_argument("--no-timing", action="store_true",
                       help="write wall_time_ms as 0 for byte-reproducible output")
    bench.set_defaults(func=cmd_benchmark)

    pe = sub.add_parser("check-pe", help="check local persistency of excitation")
    pe.add_argument("--in", dest="infile", required=True, help="input signal CSV")
    pe.add_argument("--d", type=int, required=True, help="regressor order")
    pe.add_argument("--epsilon", type=float, required=True, help="neighborhood radius")
    pe.set_defaults(func=cmd_check_pe)

    return parser


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InfeasibleDataError as exc:
        log.error("%s", exc)
        print(f"minlip: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except harness.ConfigError as exc:
        print(f"minlip: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainError, ValueError, OSError) as exc:
        log.debug("domain error", exc_info=True)
        print(f"minlip: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


def entrypoint():  # console-script shim
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
