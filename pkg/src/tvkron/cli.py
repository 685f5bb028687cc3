"""Command line interface.

    python -m tvkron simulate     --n 20 --m 200 --seed 1 --out X.csv
    python -m tvkron estimate-b   --data X.csv --t0 0.5 --lambda 0.3 --trace-a 200
    python -m tvkron estimate-a   --data X.csv --trace-a auto --lambda-n 0.3
    python -m tvkron experiment   --config configs/smoke.yaml
    python -m tvkron metrics      --estimate est.json --truth X.truth.json

Exit codes: 0 success, 1 hard error, 2 configuration or usage error.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from .graphgen import PrecisionGraph
from .harness import (METRICS, ConfigError, ExperimentConfig, Scenario, emit_plot_data, ingest_csv,
                      run_experiment)
from .kernelsmooth import KERNELS, Kernel, bandwidth_rule
from .metrics import confusion, edge_support, mcc, rel_frobenius, rel_spectral
from .sampler import InnovationLaw
from .spatial import estimate_b
from .temporal import estimate_a, tune_trace_a


class UsageError(Exception):
    pass


def _write_json(obj, out) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _bandwidth(value: str, m: int) -> float:
    return bandwidth_rule(m) if value == "rule" else float(value)


def cmd_simulate(args) -> int:
    sc = Scenario(n=args.n, topology_a=args.topology_a, a_rho=args.a_rho,
                  a_block_size=args.a_block_size, a_bandwidth=args.a_bandwidth,
                  topology_b=args.topology_b, b_edges=args.edges, b_churn=args.churn,
                  b_change_points=args.change_points, balance_b=not args.no_balance)
    try:
        InnovationLaw(args.law)
        real = sc.build(args.m, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = real.sample(args.law)
    out = Path(args.out)
    data.save(out)
    sidecar = {
        "scenario": sc.__dict__ | {"m": args.m},
        "seed": args.seed,
        "law": args.law,
        "trace_a": real.model.a.trace,
        "b_scale": real.b_scale,
        "change_points": list(real.generated.schedule.change_points),
    }
    _write_json(sidecar, out.with_suffix(".json"))
    if args.truth_t0:
        graphs = [PrecisionGraph(real.theta_true(t), float(t)).to_dict() for t in args.truth_t0]
        _write_json({"graphs": graphs}, out.with_suffix(".truth.json"))
    return 0


def _trace_arg(value: str, data) -> float:
    if value == "auto":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return tune_trace_a(data)
    try:
        return float(value)
    except ValueError:
        raise UsageError(f"--trace-a must be a number or 'auto', got {value!r}") from None


def cmd_estimate_b(args) -> int:
    data = ingest_csv(args.data, args.transpose)
    trace_a = _trace_arg(args.trace_a, data)
    kernel = Kernel(args.kernel, _bandwidth(args.h, data.m))
    results = []
    for t0 in args.t0:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            est = estimate_b(data, t0, kernel, trace_a, args.lam)
        results.append({
            "t0": t0,
            "lambda": args.lam,
            "h": kernel.h,
            "trace_a": trace_a,
            "graph": PrecisionGraph(est.theta_hat, t0).to_dict(),
            "metrics": {
                "edges": len(edge_support(est.theta_hat)),
                "kkt_residual": est.solver.kkt_residual,
                "iterations": est.solver.iterations,
                "converged": est.solver.converged,
                "warnings": [str(w.message) for w in caught],
            },
        })
    _write_json(results[0] if len(results) == 1 else results, args.out)
    return 0


def cmd_estimate_a(args) -> int:
    data = ingest_csv(args.data, args.transpose)
    trace_a = _trace_arg(args.trace_a, data)
    kernel = Kernel(args.kernel, _bandwidth(args.h, data.m))
    est = estimate_a(data, trace_a, kernel, args.lambda_n)
    _write_json({
        "trace_a": trace_a,
        "trace_a_mode": "auto" if args.trace_a == "auto" else "fixed",
        "lambda_n": args.lambda_n,
        "a_hat": est.a_hat.tolist(),
        "precision": PrecisionGraph(est.precision).to_dict(),
        "projection_gap": est.projection_gap,
        "diag_spread": est.diag_spread,
        "glasso": {"kkt_residual": est.solver.kkt_residual, "iterations": est.solver.iterations,
                   "converged": est.solver.converged},
    }, args.out)
    return 0


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.output_dir:
        cfg = ExperimentConfig(**{**cfg.__dict__, "output_dir": args.output_dir})
    table = run_experiment(cfg)
    plot_dir = Path(cfg.output_dir) / "plot_data"
    files = []
    if table.rows:
        for target in sorted({r.target for r in table.rows}):
            rows = [r for r in table.rows if r.target == target]
            for metric in METRICS:
                files += emit_plot_data(rows, ("target", "m"), metric, plot_dir)
    print(f"{len(table.rows)} rows, {len(table.errors)} failed cells -> {cfg.output_dir}")
    print(f"{len(files)} plot-data files in {plot_dir}")
    return 0


def _load_graph(path, t=None) -> PrecisionGraph:
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if "graphs" in d:
        pool = d["graphs"]
        if t is not None:
            pool = [g for g in pool if g.get("t") is not None and abs(g["t"] - t) < 1e-12]
        if len(pool) != 1:
            raise UsageError(f"{path}: cannot pick a unique truth graph for t={t}")
        d = pool[0]
    elif "graph" in d:
        d = d["graph"]
    return PrecisionGraph.from_dict(d, diag=1.0)


def cmd_metrics(args) -> int:
    out = {}
    if args.estimate or args.truth:
        if not (args.estimate and args.truth):
            raise UsageError("--estimate and --truth go together")
        est = _load_graph(args.estimate)
        tru = _load_graph(args.truth, est.t)
        if est.n != tru.n:
            raise UsageError(f"graph sizes differ: {est.n} vs {tru.n}")
        c = confusion(est.support, tru.support, est.n)
        out.update({"tp": c.tp, "tn": c.tn, "fp": c.fp, "fn": c.fn, "mcc": mcc(c)})
    if args.estimate_matrix or args.truth_matrix:
        if not (args.estimate_matrix and args.truth_matrix):
            raise UsageError("--estimate-matrix and --truth-matrix go together")
        e = ingest_csv(args.estimate_matrix).values
        t = ingest_csv(args.truth_matrix).values
        out.update({"rel_fro": rel_frobenius(e, t), "rel_l2": rel_spectral(e, t)})
    if not out:
        raise UsageError("nothing to score: give --estimate/--truth and/or matrix files")
    _write_json(out, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tvkron", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw a data matrix from a synthetic model")
    s.add_argument("--n", type=int, default=50)
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--topology-a", choices=("ar1", "star_block", "ma"), default="ar1")
    s.add_argument("--a-rho", type=float, default=0.5)
    s.add_argument("--a-block-size", type=int, default=10)
    s.add_argument("--a-bandwidth", type=int, default=15)
    s.add_argument("--topology-b", choices=("er", "grid"), default="er")
    s.add_argument("--edges", type=int, default=100)
    s.add_argument("--churn", type=int, default=5)
    s.add_argument("--change-points", type=int, default=5)
    s.add_argument("--no-balance", action="store_true", help="keep B at its generated scale")
    s.add_argument("--law", default="gaussian")
    s.add_argument("--truth-t0", type=float, nargs="*", default=[],
                   help="also write the true precision graphs at these times")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    def data_args(q):
        q.add_argument("--data", required=True)
        q.add_argument("--transpose", action="store_true", help="CSV rows are time points")
        q.add_argument("--trace-a", required=True, help="number or 'auto'")
        q.add_argument("--kernel", choices=sorted(KERNELS), default="epanechnikov")
        q.add_argument("--h", default="rule", help="bandwidth in (0, 1] or 'rule'")
        q.add_argument("--out", default=None)

    b = sub.add_parser("estimate-b", help="estimate the spatial precision graph at t0")
    data_args(b)
    b.add_argument("--t0", type=float, nargs="+", required=True)
    b.add_argument("--lambda", dest="lam", type=float, required=True)
    b.set_defaults(func=cmd_estimate_b)

    a = sub.add_parser("estimate-a", help="estimate the temporal covariance and its graph")
    data_args(a)
    a.add_argument("--lambda-n", type=float, required=True)
    a.set_defaults(func=cmd_estimate_a)

    e = sub.add_parser("experiment", help="run a simulation grid from a YAML config")
    e.add_argument("--config", required=True)
    e.add_argument("--output-dir", default=None)
    e.set_defaults(func=cmd_experiment)

    mt = sub.add_parser("metrics", help="score an estimate against the truth")
    mt.add_argument("--estimate")
    mt.add_argument("--truth")
    mt.add_argument("--estimate-matrix")
    mt.add_argument("--truth-matrix")
    mt.add_argument("--out", default=None)
    mt.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any other failure is a hard error
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
