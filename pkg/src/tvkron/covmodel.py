"""Core types for the additive (Kronecker-sum) spatiotemporal covariance model.

The covariance of ``vec(X)`` for an ``n x m`` data matrix ``X`` is

    Sigma = A (x) I_n + sum_i (e_i e_i^T) (x) B(i/m)

where ``A`` is the ``m x m`` temporal covariance and ``B(t)`` the smoothly
varying ``n x n`` spatial covariance, stored on the grid ``t = i/m``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SYMMETRY_TOL = 1e-12
TRACE_RTOL = 1e-10
MAX_ASSEMBLE_SIZE = 4096

TEMPORAL_LABELS = ("ar1", "star_block", "ma", "custom")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TemporalCovariance:
    """The ``m x m`` temporal covariance ``A``."""

    matrix: np.ndarray
    label: str = "custom"
    cond_bound: float | None = None

    def __post_init__(self):
        a = _frozen(self.matrix)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"A must be square, got shape {a.shape}")
        if self.label not in TEMPORAL_LABELS:
            raise ValueError(f"unknown temporal label {self.label!r}")
        object.__setattr__(self, "matrix", a)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix))

    def precision(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)


@dataclass(frozen=True)
class SpatialTrajectory:
    """Spatial covariances ``B(i/m)`` for ``i = 1..m``.

    ``matrices`` has shape ``(m, n, n)``; row ``i - 1`` holds ``B(i/m)``.
    """

    matrices: np.ndarray
    change_points: tuple[float, ...] = ()
    cond_bound: float | None = None
    smoothness: float | None = None

    def __post_init__(self):
        b = _frozen(self.matrices)
        if b.ndim != 3 or b.shape[1] != b.shape[2]:
            raise ValueError(f"B trajectory must have shape (m, n, n), got {b.shape}")
        object.__setattr__(self, "matrices", b)
        object.__setattr__(self, "change_points", tuple(float(c) for c in self.change_points))

    @property
    def m(self) -> int:
        return self.matrices.shape[0]

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(1, self.m + 1) / self.m

    def at(self, t: float) -> np.ndarray:
        """Linear interpolation of ``B`` between grid points; clamped outside ``[1/m, 1]``."""
        pos = t * self.m - 1.0
        if pos <= 0:
            return self.matrices[0].copy()
        if pos >= self.m - 1:
            return self.matrices[-1].copy()
        lo = int(np.floor(pos))
        frac = pos - lo
        if frac == 0.0:
            return self.matrices[lo].copy()
        return (1.0 - frac) * self.matrices[lo] + frac * self.matrices[lo + 1]

    def scaled(self, alpha: float) -> "SpatialTrajectory":
        return SpatialTrajectory(alpha * self.matrices, self.change_points)

    @classmethod
    def constant(cls, b: np.ndarray, m: int) -> "SpatialTrajectory":
        b = np.asarray(b, dtype=float)
        return cls(np.broadcast_to(b, (m,) + b.shape))


@dataclass(frozen=True)
class KroneckerSumModel:
    a: TemporalCovariance
    b: SpatialTrajectory
    trace_a: float | None = None

    def __post_init__(self):
        if self.a.m != self.b.m:
            raise ValueError(f"A has m={self.a.m} but B trajectory has m={self.b.m}")
        if self.trace_a is None:
            object.__setattr__(self, "trace_a", self.a.trace)

    @property
    def m(self) -> int:
        return self.a.m

    @property
    def n(self) -> int:
        return self.b.n


@dataclass(frozen=True)
class DataMatrix:
    """Observation ``X`` with rows = spatial variables and columns = time points."""

    values: np.ndarray

    def __post_init__(self):
        x = _frozen(self.values)
        if x.ndim != 2:
            raise ValueError(f"data must be 2-D, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            bad = np.argwhere(~np.isfinite(x))[0]
            raise ValueError(f"non-finite entry at row {bad[0] + 1}, column {bad[1] + 1}")
        object.__setattr__(self, "values", x)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def to_csv(self) -> str:
        buf = io.StringIO()
        for row in self.values:
            buf.write(",".join(format(v, ".17g") for v in row))
            buf.write("\n")
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")

    @classmethod
    def from_csv(cls, text: str) -> "DataMatrix":
        rows = []
        width = None
        for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ValueError(f"line {lineno}: expected {width} fields, got {len(row)}")
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"line {lineno}, column {col}: non-numeric cell {cell!r}"
                    ) from None
            rows.append(vals)
        if not rows:
            raise ValueError("empty data file")
        return cls(np.array(rows))


def assemble_sigma(model: KroneckerSumModel, max_size: int = MAX_ASSEMBLE_SIZE) -> np.ndarray:
    """Materialize the full ``mn x mn`` covariance of ``vec(X)``.

    Column-major ``vec``: index ``(i - 1) * n + k`` is variable ``k`` at time ``i``.
    Only meant for small problems (tests, oracles).
    """
    m, n = model.m, model.n
    if m * n > max_size:
        raise ValueError(f"m*n = {m * n} exceeds size guard {max_size}")
    sigma = np.kron(model.a.matrix, np.eye(n))
    for i in range(m):
        sl = slice(i * n, (i + 1) * n)
        sigma[sl, sl] += model.b.matrices[i]
    return sigma


@dataclass
class ValidationReport:
    problems: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def __iter__(self):
        return iter(self.problems)

    def __len__(self) -> int:
        return len(self.problems)


def _eig_bounds(mat: np.ndarray) -> tuple[float, float]:
    w = np.linalg.eigvalsh(mat)
    return float(w[0]), float(w[-1])


def validate_model(model: KroneckerSumModel) -> ValidationReport:
    """Check the model invariants; returns a report listing each violation."""
    rep = ValidationReport()
    a = model.a.matrix
    asym = np.max(np.abs(a - a.T))
    if asym > SYMMETRY_TOL:
        rep.problems.append(f"A not symmetric: max asymmetry {asym:.3e}")
    lo, hi = _eig_bounds((a + a.T) / 2)
    c_a = model.a.cond_bound
    if lo <= 0:
        rep.problems.append(f"A not positive definite: min eigenvalue {lo:.6g}")
    elif c_a is not None and (lo < 1 / c_a or hi > c_a):
        rep.problems.append(f"A eigenvalues [{lo:.6g}, {hi:.6g}] outside [1/{c_a}, {c_a}]")

    tr = float(np.trace(a))
    if abs(model.trace_a - tr) > TRACE_RTOL * max(abs(tr), 1e-300):
        rep.problems.append(f"trace_a {model.trace_a!r} does not match tr(A) = {tr!r}")

    c_b = model.b.cond_bound
    for i, b in enumerate(model.b.matrices, start=1):
        asym = np.max(np.abs(b - b.T))
        if asym > SYMMETRY_TOL:
            rep.problems.append(f"B({i}/m) not symmetric: max asymmetry {asym:.3e}")
        lo, hi = _eig_bounds((b + b.T) / 2)
        if lo <= 0:
            rep.problems.append(f"B({i}/m) not positive definite: min eigenvalue {lo:.6g}")
        elif c_b is not None and (lo < 1 / c_b or hi > c_b):
            rep.problems.append(f"B({i}/m) eigenvalues [{lo:.6g}, {hi:.6g}] outside [1/{c_b}, {c_b}]")

    if model.b.smoothness is not None and model.m >= 3:
        d2 = np.abs(np.diff(model.b.matrices, n=2, axis=0))
        worst = d2.reshape(d2.shape[0], -1).max(axis=1)
        idx = int(np.argmax(worst))
        if worst[idx] > model.b.smoothness:
            rep.problems.append(
                f"B second difference {worst[idx]:.3e} at index {idx + 2} "
                f"exceeds smoothness bound {model.b.smoothness}"
            )
    return rep

