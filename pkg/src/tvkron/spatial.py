"""Estimation of the spatial covariance ``B(t0)``: kernel smoothing followed by the glasso."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .covmodel import DataMatrix
from .glasso import GlassoProblem, GlassoSolution, glasso_solve
from .kernelsmooth import Kernel, SmoothedCovariance, smoothed_covariance


class TraceMisspecificationWarning(UserWarning):
    """The trace correction drove a diagonal entry of the smoothed covariance negative."""


@dataclass(frozen=True)
class BEstimate:
    t0: float
    b_hat: np.ndarray
    theta_hat: np.ndarray
    lam: float
    h: float
    solver: GlassoSolution
    smoothed: SmoothedCovariance = field(repr=False)
    diagnostics: tuple[str, ...] = ()


class PathError(RuntimeError):
    def __init__(self, failures: list[tuple[int, float, Exception]]):
        lines = [f"t0[{i}]={t0:g}: {exc}" for i, t0, exc in failures]
        super().__init__("estimation failed at " + "; ".join(lines))
        self.failures = failures


def estimate_b(data: DataMatrix, t0: float, kernel: Kernel, trace_a: float, lam: float,
               tol: float = 1e-6, max_iter: int = 500) -> BEstimate:
    sm = smoothed_covariance(data, t0, kernel, trace_a)
    diag = np.diag(sm.matrix)
    notes = []
    if np.any(diag < 0):
        i = int(np.argmin(diag))
        msg = (f"smoothed covariance at t0={t0:g} has negative diagonal entry {i} "
               f"({diag[i]:.4g}); trace_a={trace_a:g} is probably too large")
        notes.append(msg)
        warnings.warn(msg, TraceMisspecificationWarning, stacklevel=2)
    sol = glasso_solve(GlassoProblem(sm.matrix, lam, penalize_diagonal=True, tol=tol, max_iter=max_iter))
    b_hat = 0.5 * (sol.w + sol.w.T)
    return BEstimate(float(t0), b_hat, sol.theta, float(lam), kernel.h, sol, sm, tuple(notes))


def estimate_b_path(data: DataMatrix, t0_grid, kernel: Kernel, trace_a: float, lam: float,
                    **kw) -> list[BEstimate]:
    """``estimate_b`` at each grid point, in order; failures are collected and raised together."""
    out, failures = [], []
    for idx, t0 in enumerate(t0_grid):
        if not 0.0 <= t0 <= 1.0:
            failures.append((idx, t0, ValueError("t0 outside [0, 1]")))
            continue
        try:
            out.append(estimate_b(data, t0, kernel, trace_a, lam, **kw))
        except Exception as exc:  # noqa: BLE001 - reported with its index
            failures.append((idx, t0, exc))
    if failures:
        raise PathError(failures)
    return out
