"""Kernel weights and the kernel-smoothed spatial covariance."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import erf

from .covmodel import DataMatrix

_TRUNC_GAUSS_MASS = erf(1.0 / np.sqrt(2.0))


def _epanechnikov(u):
    return 0.75 * (1.0 - u * u)


def _triweight(u):
    return (35.0 / 32.0) * (1.0 - u * u) ** 3


def _truncated_gaussian(u):
    return np.exp(-0.5 * u * u) / (np.sqrt(2.0 * np.pi) * _TRUNC_GAUSS_MASS)


def _boxcar(u):
    return np.full_like(u, 0.5)


# Profiles on [-1, 1]; each integrates to one there.  ``boxcar`` is not twice
# differentiable at the edges and is kept only as a flat reference kernel.
KERNELS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "epanechnikov": _epanechnikov,
    "triweight": _triweight,
    "truncated_gaussian": _truncated_gaussian,
    "boxcar": _boxcar,
}


@dataclass(frozen=True)
class Kernel:
    kind: str = "epanechnikov"
    h: float = 0.1

    def __post_init__(self):
        if self.kind not in KERNELS:
            raise ValueError(f"unknown kernel {self.kind!r}; choose from {sorted(KERNELS)}")
        if not 0 < self.h <= 1:
            raise ValueError(f"bandwidth must lie in (0, 1], got {self.h}")

    def __call__(self, u):
        return kernel_eval(self, u)


def kernel_eval(kernel: Kernel, u):
    """``K(u)``, zero outside ``[-1, 1]``; accepts scalars or arrays."""
    u_arr = np.asarray(u, dtype=float)
    out = np.where(np.abs(u_arr) <= 1.0, KERNELS[kernel.kind](np.clip(u_arr, -1.0, 1.0)), 0.0)
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WeightVector:
    t0: float
    m: int
    h: float
    weights: np.ndarray


def make_weights(kernel: Kernel, t0: float, m: int) -> WeightVector:
    """Normalized weights ``w_i(t0) ~ K((i/m - t0)/h) / (m h)`` on ``i = 1..m``.

    The raw weights sum to roughly one only away from the boundary, so they
    are renormalized to sum to one exactly (this is also the boundary fix).
    """
    if not 0.0 <= t0 <= 1.0:
        raise ValueError(f"t0 must lie in [0, 1], got {t0}")
    times = np.arange(1, m + 1) / m
    raw = kernel_eval(kernel, (times - t0) / kernel.h) / (m * kernel.h)
    total = raw.sum()
    if total <= 0:
        raise ValueError(f"all kernel weights vanish at t0={t0}: bandwidth {kernel.h} too small for m={m}")
    w = raw / total
    w.setflags(write=False)
    return WeightVector(float(t0), m, kernel.h, w)


@dataclass(frozen=True)
class SmoothedCovariance:
    t0: float
    matrix: np.ndarray
    weights: WeightVector
    trace_a_used: float


def smoothed_covariance(data: DataMatrix, t0: float, kernel: Kernel, trace_a: float) -> SmoothedCovariance:
    """``S(t0) = sum_i w_i(t0) x_i x_i^T - (tr(A)/m) I``."""
    if trace_a < 0:
        raise ValueError(f"trace_a must be non-negative, got {trace_a}")
    x = data.values
    n, m = x.shape
    wv = make_weights(kernel, t0, m)
    nz = np.nonzero(wv.weights)[0]
    xs = x[:, nz]
    s = (xs * wv.weights[nz]) @ xs.T
    s = 0.5 * (s + s.T)
    s[np.diag_indices(n)] -= trace_a / m
    return SmoothedCovariance(float(t0), s, wv, float(trace_a))


def bandwidth_rule(m: int, c: float = 1.0) -> float:
    """``h = c (log m / m)^{1/3}`` clamped to ``[1/m, 1]``."""
    if m < 2:
        raise ValueError("bandwidth rule needs m >= 2")
    h = c * (np.log(m) / m) ** (1.0 / 3.0)
    return float(min(max(h, 1.0 / m), 1.0))
