"""Synthetic precision-graph trajectories and temporal covariances.

Spatial trajectories follow the edge-churn recipe: start from
``Theta(0) = 0.25 I``, insert ``k`` weighted edges, and at every change point
fade ``churn`` edges out while fading ``churn`` new edges in, with edge weights
interpolated linearly between change points.  Inserting an edge ``(i, j)`` with
weight ``a`` subtracts ``a`` from ``Theta_ij, Theta_ji`` and adds ``a`` to
``Theta_ii, Theta_jj``, so ``Theta(t) - 0.25 I`` is always a weighted graph
Laplacian and stays positive semidefinite.

All randomness comes from a Philox (counter-based) generator seeded with the
spec's 64-bit seed, drawn in a fixed order, so output is bit-reproducible.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .covmodel import SpatialTrajectory, TemporalCovariance

BASE_DIAG = 0.25
MAX_RETRIES = 100
RAMP_SNAP = 1e-12


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class PrecisionGraph:
    theta: np.ndarray
    t: float | None = None

    @property
    def n(self) -> int:
        return self.theta.shape[0]

    @property
    def support(self) -> set[tuple[int, int]]:
        iu, ju = np.nonzero(np.triu(self.theta, 1))
        return set(zip(iu.tolist(), ju.tolist()))

    def to_dict(self) -> dict:
        iu, ju = np.nonzero(np.triu(self.theta, 1))
        edges = [
            {"i": int(i) + 1, "j": int(j) + 1, "w": float(self.theta[i, j])}
            for i, j in zip(iu, ju)
        ]
        return {"n": self.n, "t": self.t, "edges": edges}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict, diag: float = 0.0) -> "PrecisionGraph":
        """Rebuild from an edge list; the diagonal is not serialized, so it is set to ``diag``."""
        n = int(d["n"])
        theta = np.eye(n) * diag
        for e in d["edges"]:
            i, j = int(e["i"]) - 1, int(e["j"]) - 1
            theta[i, j] = theta[j, i] = float(e["w"])
        return cls(theta, d.get("t"))


@dataclass(frozen=True)
class TrajectorySpec:
    n: int
    m: int
    initial_edges: int
    churn: int = 0
    num_change_points: int = 1
    weight_range: tuple[float, float] = (0.1, 0.3)
    topology: str = "er"
    seed: int = 0

    def __post_init__(self):
        lo, hi = self.weight_range
        if self.n < 2 or self.m < 1:
            raise ValueError("need n >= 2 and m >= 1")
        if self.initial_edges < 1 or self.churn < 0 or self.num_change_points < 1:
            raise ValueError("need initial_edges >= 1, churn >= 0, num_change_points >= 1")
        if not 0 < lo <= hi:
            raise ValueError(f"weight_range must satisfy 0 < lo <= hi, got {self.weight_range}")
        if self.topology not in ("er", "grid"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class EdgeTrack:
    """One edge's weight path: ramps up over ``[rise, rise + d]``, down over ``[fall, fall + d]``.

    ``rise = None`` means present from the start; ``fall = None`` means never deleted.
    """

    i: int
    j: int
    weight: float
    rise: float | None = None
    fall: float | None = None

    def weight_at(self, t: np.ndarray, d: float) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        w = np.full(t.shape, self.weight)
        if self.rise is not None:
            w = w * _ramp((t - self.rise) / d)
        if self.fall is not None:
            w = w * _ramp((self.fall + d - t) / d)
        return w


def _ramp(u):
    # snap roundoff so ramps hit exact zero/full weight at change points (0.4 + 0.2 != 0.6)
    u = np.clip(u, 0.0, 1.0)
    return np.where(u < RAMP_SNAP, 0.0, np.where(u > 1.0 - RAMP_SNAP, 1.0, u))


@dataclass(frozen=True)
class EdgeSchedule:
    n: int
    tracks: tuple[EdgeTrack, ...]
    interval: float
    change_points: tuple[float, ...]
    base_diag: float = BASE_DIAG

    def theta_batch(self, times) -> np.ndarray:
        times = np.atleast_1d(np.asarray(times, dtype=float))
        theta = np.zeros((times.size, self.n, self.n))
        theta[:, np.arange(self.n), np.arange(self.n)] = self.base_diag
        for tr in self.tracks:
            w = tr.weight_at(times, self.interval)
            theta[:, tr.i, tr.j] -= w
            theta[:, tr.j, tr.i] -= w
            theta[:, tr.i, tr.i] += w
            theta[:, tr.j, tr.j] += w
        return theta

    def theta_at(self, t: float) -> np.ndarray:
        return self.theta_batch([t])[0]

    def graph_at(self, t: float) -> PrecisionGraph:
        return PrecisionGraph(self.theta_at(t), float(t))

    def support_at(self, t: float) -> set[tuple[int, int]]:
        out = set()
        for tr in self.tracks:
            if tr.weight_at(t, self.interval) > 0:
                out.add((tr.i, tr.j))
        return out


@dataclass(frozen=True)
class GeneratedTrajectory:
    spec: TrajectorySpec
    schedule: EdgeSchedule
    trajectory: SpatialTrajectory = field(repr=False)

    @cached_property
    def thetas(self) -> np.ndarray:
        return self.schedule.theta_batch(self.trajectory.times)

    @property
    def graphs(self) -> list[PrecisionGraph]:
        return [PrecisionGraph(th, float(t)) for th, t in zip(self.thetas, self.trajectory.times)]


def grid_edges(n: int) -> list[tuple[int, int]]:
    side = int(round(np.sqrt(n)))
    if side * side != n:
        raise ValueError(f"grid topology needs a perfect-square n, got {n}")
    edges = []
    for r in range(side):
        for c in range(side):
            v = r * side + c
            if c + 1 < side:
                edges.append((v, v + 1))
            if r + 1 < side:
                edges.append((v, v + side))
    return sorted(edges)


def _is_pd(mat: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        return False
    return True


def _add_edge(theta: np.ndarray, i: int, j: int, a: float) -> None:
    theta[i, j] -= a
    theta[j, i] -= a
    theta[i, i] += a
    theta[j, j] += a


def _draw_weight(rng, theta, i, j, lo, hi) -> float:
    """Draw a weight for edge (i, j) such that Theta stays PD; mutates theta."""
    for _ in range(MAX_RETRIES):
        a = float(rng.uniform(lo, hi))
        trial = theta.copy()
        _add_edge(trial, i, j, a)
        if _is_pd(trial):
            theta[:] = trial
            return a
    raise RuntimeError(f"could not insert edge ({i}, {j}) keeping Theta positive definite")


def _build_schedule(spec: TrajectorySpec, candidates: list[tuple[int, int]]) -> EdgeSchedule:
    k, churn, K = spec.initial_edges, spec.churn, spec.num_change_points
    lo, hi = spec.weight_range
    if k > len(candidates):
        raise ValueError(f"requested {k} edges but only {len(candidates)} candidate edges exist")
    if churn > 0:
        if len(candidates) - k < 2 * churn:
            raise ValueError(f"not enough free candidate edges to add {churn} per change point")
        if K > 1 and k < 2 * churn:
            raise ValueError("need initial_edges >= 2 * churn so deletions avoid fresh edges")

    rng = make_rng(spec.seed)
    d = 1.0 / K
    theta = BASE_DIAG * np.eye(spec.n)

    picks = rng.choice(len(candidates), size=k, replace=False)
    current: dict[tuple[int, int], EdgeTrack] = {}
    for p in picks:
        i, j = candidates[p]
        a = _draw_weight(rng, theta, i, j, lo, hi)
        current[(i, j)] = EdgeTrack(i, j, a)

    finished: list[EdgeTrack] = []
    fresh: set[tuple[int, int]] = set()
    if churn > 0:
        for q in range(K):
            start = q / K
            eligible = sorted(e for e in current if e not in fresh)
            dels = rng.choice(len(eligible), size=churn, replace=False)
            dropped = set()
            for p in sorted(dels):
                e = eligible[p]
                tr = current.pop(e)
                dropped.add(e)
                finished.append(EdgeTrack(tr.i, tr.j, tr.weight, tr.rise, start))
                _add_edge(theta, tr.i, tr.j, -tr.weight)
            # a pair fading out cannot also fade back in over the same interval
            free = [e for e in candidates if e not in current and e not in dropped]
            adds = rng.choice(len(free), size=churn, replace=False)
            fresh = set()
            for p in adds:
                i, j = free[p]
                a = _draw_weight(rng, theta, i, j, lo, hi)
                current[(i, j)] = EdgeTrack(i, j, a, rise=start)
                fresh.add((i, j))

    tracks = tuple(finished) + tuple(current.values())
    cps = tuple(q / K for q in range(K + 1)) if churn > 0 else ()
    return EdgeSchedule(spec.n, tracks, d, cps)


def _generate(spec: TrajectorySpec, candidates) -> GeneratedTrajectory:
    sched = _build_schedule(spec, candidates)
    times = np.arange(1, spec.m + 1) / spec.m
    thetas = sched.theta_batch(times)
    for idx, th in enumerate(thetas):
        if not _is_pd(th):
            raise RuntimeError(f"Theta({idx + 1}/m) is not positive definite")
    b = np.linalg.inv(thetas)
    b = 0.5 * (b + np.swapaxes(b, 1, 2))
    traj = SpatialTrajectory(b, sched.change_points)
    return GeneratedTrajectory(spec, sched, traj)


def gen_er_trajectory(spec: TrajectorySpec) -> GeneratedTrajectory:
    """Erdos-Renyi style trajectory: any pair ``i < j`` may carry an edge."""
    if spec.topology != "er":
        raise ValueError("gen_er_trajectory needs topology='er'")
    return _generate(spec, list(itertools.combinations(range(spec.n), 2)))


def gen_grid_trajectory(spec: TrajectorySpec) -> GeneratedTrajectory:
    """Same recipe with edges restricted to 4-neighbour adjacency on a square grid."""
    if spec.topology != "grid":
        raise ValueError("gen_grid_trajectory needs topology='grid'")
    return _generate(spec, grid_edges(spec.n))


def gen_trajectory(spec: TrajectorySpec) -> GeneratedTrajectory:
    if spec.topology == "grid":
        return gen_grid_trajectory(spec)
    return gen_er_trajectory(spec)


def gen_ar1(m: int, rho: float) -> TemporalCovariance:
    """AR(1) covariance ``A_ij = rho^|i-j|``."""
    if not abs(rho) < 1:
        raise ValueError(f"AR(1) needs |rho| < 1, got {rho}")
    lag = np.abs(np.subtract.outer(np.arange(m), np.arange(m)))
    return TemporalCovariance(rho ** lag.astype(float), label="ar1")


def gen_ma(m: int, bandwidth: int) -> TemporalCovariance:
    """Banded Toeplitz covariance with the triangular (Bartlett) profile."""
    if bandwidth < 0 or bandwidth >= m:
        raise ValueError(f"MA bandwidth must satisfy 0 <= bandwidth < m, got {bandwidth}")
    lag = np.abs(np.subtract.outer(np.arange(m), np.arange(m)))
    return TemporalCovariance(np.maximum(0.0, 1.0 - lag / (bandwidth + 1)), label="ma")


def gen_star_block(m: int, block_size: int, weight_range=(0.1, 0.3), seed: int = 0) -> TemporalCovariance:
    """Covariance whose inverse is block diagonal with one star graph per block.

    The hub is the first index of each block; spoke weights use the same
    PD-preserving update as the spatial generator.
    """
    if block_size < 1 or m % block_size:
        raise ValueError(f"block_size {block_size} must divide m = {m}")
    lo, hi = weight_range
    rng = make_rng(seed)
    theta = BASE_DIAG * np.eye(m)
    for start in range(0, m, block_size):
        for leaf in range(start + 1, start + block_size):
            _draw_weight(rng, theta, start, leaf, lo, hi)
    a = np.linalg.inv(theta)
    return TemporalCovariance(0.5 * (a + a.T), label="star_block")
