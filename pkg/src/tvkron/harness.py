"""Config-driven simulation grid, CSV ingestion and plot-data emission.

A run walks every ``(seed, m)`` unit: build the model, draw one data matrix,
then estimate ``B(t0)`` for each ``(lambda, t0)`` (and ``A`` for each
``lambda_a`` when enabled), scoring each estimate against the truth.
Failures are isolated per cell and written to ``errors.csv``.
"""
from __future__ import annotations

import csv
import io
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import lru_cache
from pathlib import Path

import numpy as np
import yaml

from .covmodel import DataMatrix, KroneckerSumModel, TemporalCovariance
from .glasso import lambda_rule_a, lambda_rule_b
from .graphgen import (GeneratedTrajectory, TrajectorySpec, gen_ar1, gen_ma, gen_star_block,
                       gen_trajectory)
from .kernelsmooth import KERNELS, Kernel, bandwidth_rule
from .metrics import rel_frobenius, rel_spectral, support_mcc
from .sampler import InnovationLaw, sample_data, sqrt_psd
from .spatial import estimate_b
from .temporal import estimate_a, project_a, tune_trace_a


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


TOPOLOGIES_A = ("ar1", "star_block", "ma")
TOPOLOGIES_B = ("er", "grid")
PRECISION_ZERO_RTOL = 1e-8


@dataclass(frozen=True)
class Scenario:
    """Parameters of the generating model, independent of ``m`` and the seed."""

    n: int = 50
    topology_a: str = "ar1"
    a_rho: float = 0.5
    a_block_size: int = 10
    a_bandwidth: int = 15
    topology_b: str = "er"
    b_edges: int = 100
    b_churn: int = 5
    b_change_points: int = 5
    b_weight_lo: float = 0.1
    b_weight_hi: float = 0.3
    balance_b: bool = True

    def temporal(self, m: int, seed: int) -> TemporalCovariance:
        if self.topology_a == "ar1":
            return gen_ar1(m, self.a_rho)
        if self.topology_a == "ma":
            return gen_ma(m, self.a_bandwidth)
        return gen_star_block(m, self.a_block_size, (self.b_weight_lo, self.b_weight_hi), seed)

    def trajectory(self, m: int, seed: int) -> GeneratedTrajectory:
        spec = TrajectorySpec(self.n, m, self.b_edges, self.b_churn, self.b_change_points,
                              (self.b_weight_lo, self.b_weight_hi), self.topology_b, seed)
        return gen_trajectory(spec)

    def build(self, m: int, seed: int, base_seed: int = 0) -> "Realization":
        graph_seed, a_seed, data_seed = unit_seeds(seed, m, base_seed)
        a = self.temporal(m, a_seed)
        gen = self.trajectory(m, graph_seed)
        scale = 1.0
        if self.balance_b:
            # "the magnitudes of the two factors are balanced": mean tr(B)/n = tr(A)/m
            tau_b = float(np.mean(np.trace(gen.trajectory.matrices, axis1=1, axis2=2))) / self.n
            scale = (a.trace / m) / tau_b
        traj = gen.trajectory.scaled(scale) if scale != 1.0 else gen.trajectory
        return Realization(self, KroneckerSumModel(a, traj), gen, scale, data_seed)


@dataclass(frozen=True)
class Realization:
    scenario: Scenario
    model: KroneckerSumModel
    generated: GeneratedTrajectory
    b_scale: float
    data_seed: int

    def b_true(self, t0: float) -> np.ndarray:
        theta = self.generated.schedule.theta_at(t0)
        return self.b_scale * np.linalg.inv(theta)

    def theta_true(self, t0: float) -> np.ndarray:
        return self.generated.schedule.theta_at(t0) / self.b_scale

    def sample(self, law: str = "gaussian") -> DataMatrix:
        a_sqrt = None
        if self.scenario.topology_a != "star_block":
            a_sqrt = _cached_sqrt(self.scenario.topology_a, self.model.m,
                                  self.scenario.a_rho, self.scenario.a_bandwidth)
        return sample_data(self.model, law, self.data_seed, a_sqrt=a_sqrt)


@lru_cache(maxsize=8)
def _cached_sqrt(topology: str, m: int, rho: float, bandwidth: int) -> np.ndarray:
    a = gen_ar1(m, rho) if topology == "ar1" else gen_ma(m, bandwidth)
    root = sqrt_psd(a.matrix)
    root.setflags(write=False)
    return root


def unit_seeds(seed: int, m: int, base_seed: int = 0) -> tuple[int, int, int]:
    """Independent 64-bit seeds (graph, A, data) for one ``(seed, m)`` unit."""
    state = np.random.SeedSequence([base_seed, seed, m]).generate_state(3, np.uint64)
    return tuple(int(s) for s in state)


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    m_grid: tuple[int, ...]
    lambda_grid: tuple[float, ...]
    num_seeds: int
    output_dir: str = "results"
    topology_a: str = "ar1"
    a_rho: float = 0.5
    a_block_size: int = 10
    a_bandwidth: int = 15
    topology_b: str = "er"
    b_edges: int = 100
    b_churn: int = 5
    b_change_points: int = 5
    b_weight_lo: float = 0.1
    b_weight_hi: float = 0.3
    balance_b: bool = True
    h: float | str = "rule"
    kernel: str = "epanechnikov"
    t0_grid: tuple[float, ...] | str = (0.1, 0.3, 0.5, 0.7, 0.9)
    trace_a_mode: float | str = "exact"
    # lambda_grid entries are multipliers on the default rate when true
    lambda_relative: bool = False
    estimate_a: bool = False
    lambda_a_grid: tuple[float, ...] = ()
    law: str = "gaussian"
    workers: int = 1
    base_seed: int = 0

    def __post_init__(self):
        for name in ("m_grid", "lambda_grid", "lambda_a_grid"):
            val = getattr(self, name)
            if not isinstance(val, (list, tuple)):
                raise ConfigError(f"{name} must be a list")
            object.__setattr__(self, name, tuple(val))
        if isinstance(self.t0_grid, (list, tuple)):
            object.__setattr__(self, "t0_grid", tuple(float(t) for t in self.t0_grid))
        self.validate()

    def validate(self) -> None:
        if not self.m_grid or not self.lambda_grid:
            raise ConfigError("m_grid and lambda_grid must be non-empty")
        if self.num_seeds < 1:
            raise ConfigError("num_seeds must be >= 1")
        if self.n < 2 or any(m < 2 for m in self.m_grid):
            raise ConfigError("need n >= 2 and every m >= 2")
        if any(lam < 0 for lam in self.lambda_grid + self.lambda_a_grid):
            raise ConfigError("lambda values must be >= 0")
        if self.topology_a not in TOPOLOGIES_A:
            raise ConfigError(f"topology_a must be one of {TOPOLOGIES_A}")
        if self.topology_b not in TOPOLOGIES_B:
            raise ConfigError(f"topology_b must be one of {TOPOLOGIES_B}")
        if self.kernel not in KERNELS:
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if isinstance(self.h, str):
            if self.h != "rule":
                raise ConfigError("h must be a number in (0, 1] or 'rule'")
        elif not 0 < self.h <= 1:
            raise ConfigError("h must lie in (0, 1]")
        if isinstance(self.t0_grid, str):
            if self.t0_grid != "all":
                raise ConfigError("t0_grid must be a list or 'all'")
        elif not self.t0_grid or any(not 0 <= t <= 1 for t in self.t0_grid):
            raise ConfigError("t0_grid must be non-empty with entries in [0, 1]")
        if isinstance(self.trace_a_mode, str):
            if self.trace_a_mode not in ("exact", "auto"):
                raise ConfigError("trace_a_mode must be 'exact', 'auto' or a positive number")
        elif not self.trace_a_mode > 0:
            raise ConfigError("a fixed trace_a_mode must be positive")
        if self.estimate_a and not self.lambda_a_grid:
            raise ConfigError("estimate_a needs a non-empty lambda_a_grid")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        try:
            InnovationLaw(self.law)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        try:
            for m in self.m_grid:
                TrajectorySpec(self.n, m, self.b_edges, self.b_churn, self.b_change_points,
                               (self.b_weight_lo, self.b_weight_hi), self.topology_b)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def scenario(self) -> Scenario:
        names = {f.name for f in fields(Scenario)}
        return Scenario(**{k: v for k, v in asdict(self).items() if k in names})

    def bandwidth(self, m: int) -> float:
        return bandwidth_rule(m) if self.h == "rule" else float(self.h)

    def t0_values(self, m: int) -> tuple[float, ...]:
        if self.t0_grid == "all":
            return tuple(np.arange(1, m + 1) / m)
        return self.t0_grid

    def lambdas_b(self, m: int) -> list[float]:
        if self.lambda_relative:
            return [lambda_rule_b(m, c) for c in self.lambda_grid]
        return [float(v) for v in self.lambda_grid]

    def lambdas_a(self, m: int) -> list[float]:
        if self.lambda_relative:
            return [lambda_rule_a(m, self.n, c) for c in self.lambda_a_grid]
        return [float(v) for v in self.lambda_a_grid]

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping of key: value pairs")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        missing = sorted(k for k in ("n", "m_grid", "lambda_grid", "num_seeds") if k not in raw)
        if missing:
            raise ConfigError(f"missing config keys: {', '.join(missing)}")
        try:
            return cls(**raw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(raw)


@dataclass(frozen=True)
class ResultRow:
    seed: int
    m: int
    n: int
    lam: float
    h: float
    t0: float
    mcc: float
    rel_fro: float
    rel_l2: float
    wall_time_ms: float = field(default=0.0, compare=False)
    target: str = "b"

    def key(self):
        t0 = -1.0 if math.isnan(self.t0) else self.t0
        return (self.target, self.m, self.seed, self.lam, t0)


@dataclass(frozen=True)
class CellError:
    seed: int
    m: int
    lam: float
    t0: float
    target: str
    error: str


RESULT_COLUMNS = ("target", "seed", "m", "n", "lambda", "h", "t0", "mcc", "rel_fro", "rel_l2")


@dataclass
class ResultTable:
    rows: list[ResultRow]
    errors: list[CellError] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def select(self, **eq) -> list[ResultRow]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in eq.items())]


def _precision_support(a: np.ndarray) -> np.ndarray:
    prec = np.linalg.inv(a)
    prec[np.abs(prec) <= PRECISION_ZERO_RTOL * np.max(np.abs(prec))] = 0.0
    return prec


def run_unit(cfg: ExperimentConfig, seed: int, m: int) -> tuple[list[ResultRow], list[CellError]]:
    """All cells of one ``(seed, m)`` unit."""
    rows, errors = [], []
    lams = cfg.lambdas_b(m)
    t0s = cfg.t0_values(m)
    h = cfg.bandwidth(m)
    try:
        real = cfg.scenario.build(m, seed, cfg.base_seed)
        data = real.sample(cfg.law)
        trace_a = _trace_a(cfg, real, data)
        kernel = Kernel(cfg.kernel, h)
    except Exception as exc:  # noqa: BLE001 - the whole unit fails together
        msg = _describe(exc)
        errors += [CellError(seed, m, lam, t0, "b", msg) for lam in lams for t0 in t0s]
        return rows, errors

    truth = {t0: (real.b_true(t0), real.theta_true(t0)) for t0 in t0s}
    for lam in lams:
        for t0 in t0s:
            start = time.perf_counter()
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    est = estimate_b(data, t0, kernel, trace_a, lam)
                b_true, theta_true = truth[t0]
                row = ResultRow(seed, m, cfg.n, lam, h, float(t0),
                                support_mcc(est.theta_hat, theta_true),
                                rel_frobenius(est.b_hat, b_true), rel_spectral(est.b_hat, b_true),
                                1e3 * (time.perf_counter() - start), "b")
                _check_finite(row)
                rows.append(row)
            except Exception as exc:  # noqa: BLE001 - isolated per cell
                errors.append(CellError(seed, m, lam, float(t0), "b", _describe(exc)))

    if cfg.estimate_a:
        a_true = real.model.a.matrix
        prec_true = _precision_support(a_true)
        lams_a = cfg.lambdas_a(m)
        start = time.perf_counter()
        try:
            projection = project_a(data, trace_a, kernel)
        except Exception as exc:  # noqa: BLE001
            errors += [CellError(seed, m, lam, math.nan, "a", _describe(exc)) for lam in lams_a]
            return rows, errors
        shared_ms = 1e3 * (time.perf_counter() - start)
        for lam in lams_a:
            start = time.perf_counter()
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    est = estimate_a(data, trace_a, kernel, lam, projection=projection)
                row = ResultRow(seed, m, cfg.n, lam, h, math.nan,
                                support_mcc(est.precision, prec_true),
                                rel_frobenius(est.a_hat, a_true), rel_spectral(est.a_hat, a_true),
                                shared_ms + 1e3 * (time.perf_counter() - start), "a")
                _check_finite(row)
                rows.append(row)
            except Exception as exc:  # noqa: BLE001
                errors.append(CellError(seed, m, lam, math.nan, "a", _describe(exc)))
    return rows, errors


def _trace_a(cfg: ExperimentConfig, real: Realization, data: DataMatrix) -> float:
    if cfg.trace_a_mode == "exact":
        return real.model.a.trace
    if cfg.trace_a_mode == "auto":
        return tune_trace_a(data, warn=False)
    return float(cfg.trace_a_mode)


def _check_finite(row: ResultRow) -> None:
    if not all(math.isfinite(v) for v in (row.mcc, row.rel_fro, row.rel_l2)):
        raise FloatingPointError("non-finite metric")


def _describe(exc: Exception) -> str:
    return f"{type(exc).__name__}: {exc}".replace("\n", " ")


def _unit_job(args):
    cfg, seed, m = args
    return run_unit(cfg, seed, m)


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ResultTable:
    """Run the full grid.  Row order is sorted by key, so output does not
    depend on worker scheduling."""
    jobs = [(cfg, seed, m) for m in cfg.m_grid for seed in range(cfg.num_seeds)]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            outs = list(pool.map(_unit_job, jobs))
    else:
        outs = [_unit_job(j) for j in jobs]
    rows = sorted((r for rs, _ in outs for r in rs), key=ResultRow.key)
    errors = sorted((e for _, es in outs for e in es),
                    key=lambda e: (e.target, e.m, e.seed, e.lam, -1.0 if math.isnan(e.t0) else e.t0))
    table = ResultTable(rows, errors)
    if write:
        write_outputs(table, cfg.output_dir)
    return table


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def results_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_COLUMNS)
    for r in rows:
        w.writerow([r.target, r.seed, r.m, r.n, _fmt(r.lam), _fmt(r.h), _fmt(r.t0),
                    _fmt(r.mcc), _fmt(r.rel_fro), _fmt(r.rel_l2)])
    return buf.getvalue()


def write_outputs(table: ResultTable, output_dir) -> dict[str, Path]:
    """``results.csv`` (deterministic), ``errors.csv`` and ``timings.csv`` (wall clock)."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"results": out / "results.csv", "errors": out / "errors.csv", "timings": out / "timings.csv"}
    paths["results"].write_text(results_csv(table.rows), encoding="utf-8")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("target", "seed", "m", "lambda", "t0", "error"))
    for e in table.errors:
        w.writerow([e.target, e.seed, e.m, _fmt(e.lam), _fmt(e.t0), e.error])
    paths["errors"].write_text(buf.getvalue(), encoding="utf-8")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("target", "seed", "m", "lambda", "t0", "wall_time_ms"))
    for r in table.rows:
        w.writerow([r.target, r.seed, r.m, _fmt(r.lam), _fmt(r.t0), f"{r.wall_time_ms:.3f}"])
    paths["timings"].write_text(buf.getvalue(), encoding="utf-8")
    return paths


def read_results(path) -> ResultTable:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            rows.append(ResultRow(int(rec["seed"]), int(rec["m"]), int(rec["n"]), float(rec["lambda"]),
                                  float(rec["h"]), float(rec["t0"]), float(rec["mcc"]),
                                  float(rec["rel_fro"]), float(rec["rel_l2"]), 0.0, rec["target"]))
    return ResultTable(rows)


def ingest_csv(path, transpose: bool = False) -> DataMatrix:
    """Read a numeric CSV (rows = variables); ``transpose`` flips the orientation."""
    data = DataMatrix.from_csv(Path(path).read_text(encoding="utf-8"))
    return DataMatrix(data.values.T) if transpose else data


GROUP_FIELDS = ("m", "n", "h", "seed", "target")
METRICS = ("mcc", "rel_fro", "rel_l2")


@dataclass(frozen=True)
class PlotPoint:
    lam: float
    mean: float
    stderr: float
    count: int


def plot_points(rows, metric: str) -> list[PlotPoint]:
    """Per-lambda mean and standard error over seeds, after averaging each seed over ``t0``."""
    per_seed: dict[float, dict[int, list[float]]] = {}
    for r in rows:
        per_seed.setdefault(r.lam, {}).setdefault(r.seed, []).append(getattr(r, metric))
    out = []
    for lam in sorted(per_seed):
        vals = np.array([np.mean(v) for _, v in sorted(per_seed[lam].items())])
        se = float(np.std(vals, ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
        out.append(PlotPoint(lam, float(vals.mean()), se, int(vals.size)))
    return out


def _group_name(fields_, key) -> str:
    return "_".join(f"{f}{_fmt(v)}" for f, v in zip(fields_, key))


def group_rows(rows, group_by) -> dict[tuple, list[ResultRow]]:
    group_by = (group_by,) if isinstance(group_by, str) else tuple(group_by)
    bad = [g for g in group_by if g not in GROUP_FIELDS]
    if bad:
        raise ValueError(f"unknown group field(s) {bad}; choose from {GROUP_FIELDS}")
    groups: dict[tuple, list[ResultRow]] = {}
    for r in rows:
        groups.setdefault(tuple(getattr(r, g) for g in group_by), []).append(r)
    return dict(sorted(groups.items()))


def emit_plot_data(table, group_by, metric: str, output_dir) -> list[Path]:
    """One ``<metric>_<group>.csv`` per group, rows sorted by lambda."""
    rows = table.rows if isinstance(table, ResultTable) else list(table)
    if not rows:
        raise ValueError("empty result table")
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    group_by = (group_by,) if isinstance(group_by, str) else tuple(group_by)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for key, grp in group_rows(rows, group_by).items():
        path = out / f"{metric}_{_group_name(group_by, key)}.csv"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("lambda", "mean", "stderr", "count"))
        for p in plot_points(grp, metric):
            w.writerow([_fmt(p.lam), _fmt(p.mean), _fmt(p.stderr), p.count])
        path.write_text(buf.getvalue(), encoding="utf-8")
        paths.append(path)
    return paths


def best_lambda(rows, metric: str, minimize: bool) -> PlotPoint:
    """Best plot point among lambdas that every seed completed."""
    pts = plot_points(rows, metric)
    full = max(p.count for p in pts)
    pts = [p for p in pts if p.count == full]
    return min(pts, key=lambda p: p.mean) if minimize else max(pts, key=lambda p: p.mean)

