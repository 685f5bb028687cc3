"""Estimation of the temporal covariance ``A``.

Pipeline: trace-corrected Gram matrix ``A_tilde`` -> nearest PSD matrix in
max-norm (ADMM) -> correlation scaling -> graphical lasso with an
off-diagonal penalty -> rescale by ``tr(A)/m``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .covmodel import DataMatrix
from .glasso import GlassoProblem, GlassoSolution, glasso_solve
from .kernelsmooth import Kernel, make_weights


class ProjectionError(RuntimeError):
    pass


class StageError(RuntimeError):
    """Failure inside one stage of :func:`estimate_a`; ``stage`` names it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage


def estimate_trace_b(data: DataMatrix, trace_a: float) -> float:
    """``(1/m) sum_i ||x_i||^2 - (n/m) tr(A)`` (constant-trace estimator)."""
    x = data.values
    n, m = x.shape
    return float(np.sum(x * x) / m - n / m * trace_a)


def estimate_trace_b_t(data: DataMatrix, t0: float, kernel: Kernel, trace_a: float) -> float:
    """Kernel-weighted version of :func:`estimate_trace_b` around ``t0``."""
    x = data.values
    n, m = x.shape
    w = make_weights(kernel, t0, m).weights
    return float(np.dot(w, np.sum(x * x, axis=0)) - n / m * trace_a)


def form_a_tilde(data: DataMatrix, trace_a: float, kernel: Kernel | None = None,
                 time_varying: bool = True) -> np.ndarray:
    """``(1/n) X^T X - (1/n) diag(trB_hat(1/m), ..., trB_hat(1))``.

    With ``time_varying=False`` (or no kernel) the constant trace estimate is
    used for every column.
    """
    x = data.values
    n, m = x.shape
    gram = x.T @ x / n
    gram = 0.5 * (gram + gram.T)
    if time_varying and kernel is not None:
        sq = np.sum(x * x, axis=0)
        times = np.arange(1, m + 1) / m
        tr_b = np.array([np.dot(make_weights(kernel, t, m).weights, sq) for t in times])
        tr_b -= n / m * trace_a
    else:
        tr_b = np.full(m, estimate_trace_b(data, trace_a))
    gram[np.diag_indices(m)] -= tr_b / n
    return gram


def _prox_maxnorm_shift(v: np.ndarray, radius: float) -> np.ndarray:
    """``prox`` of ``radius * ||.||_max`` at ``v``: clip entries at a level set by an l1 projection."""
    a = np.abs(v).ravel()
    if a.sum() <= radius:
        return np.zeros_like(v)
    # threshold tau with sum(max(|v| - tau, 0)) = radius (Duchi et al. l1-ball projection)
    srt = np.sort(a)[::-1]
    css = np.cumsum(srt)
    ks = np.arange(1, a.size + 1)
    cond = srt - (css - radius) / ks > 0
    k = ks[cond][-1]
    tau = (css[k - 1] - radius) / k
    return np.clip(v, -tau, tau)


def _psd_part(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    out = (v * np.clip(w, 0.0, None)) @ v.T
    return 0.5 * (out + out.T)


def _psd_parts(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Positive and negative parts ``(P, N)``, both PSD, with ``mat = P - N``."""
    w, v = np.linalg.eigh(mat)
    pos = (v * np.clip(w, 0.0, None)) @ v.T
    neg = (v * np.clip(-w, 0.0, None)) @ v.T
    return 0.5 * (pos + pos.T), 0.5 * (neg + neg.T)


def maxnorm_lower_bound(a_tilde: np.ndarray, g: np.ndarray) -> float:
    """Lower bound on ``min_{A >= 0} ||a_tilde - A||_max`` from any PSD ``g``.

    For ``A >= 0``, ``<g, A> >= 0`` so ``||a_tilde - A||_max * ||g||_1 >= <g, A - a_tilde>
    >= -<g, a_tilde>``.
    """
    total = np.abs(g).sum()
    if total == 0:
        return 0.0
    return float(-np.sum(g * a_tilde) / total)


def psd_project_maxnorm(a_tilde: np.ndarray, tol: float | None = None, max_iter: int = 100_000,
                        rho: float = 1.0, adapt: bool = True, check_every: int = 10,
                        gap_tol: float | None = None) -> tuple[np.ndarray, float]:
    """``argmin_{A >= 0} ||a_tilde - A||_max`` by ADMM.

    Splitting ``A = Z`` with ``A`` in the PSD cone (eigenvalue clipping) and
    ``Z`` carrying the max-norm term (elementwise clipping).  Stops once primal
    and dual residuals drop below ``tol`` (default ``1e-7 * ||a_tilde||_max``),
    or once the PSD iterate is certified to be within ``gap_tol`` (default
    ``tol``) of the optimum:
    the PSD part of the scaled dual variable gives a lower bound through
    :func:`maxnorm_lower_bound`.  On rank-deficient inputs the optimum is not
    unique and the residuals have a long tail, so the certificate usually
    fires first.
    The penalty starts at ``rho`` and, with ``adapt``, is doubled or halved
    whenever the relative primal residual ``||A - Z||_F / max(||A||_F, ||Z||_F)``
    and the relative dual residual ``||Z - Z_prev||_F / ||U||_F`` differ
    tenfold (residual balancing on the scaled dual ``U``).
    The tail can be long (tens of thousands of iterations on strongly
    rank-deficient inputs), hence the large default ``max_iter``.
    Returns the PSD iterate and its max-norm distance to ``a_tilde``.
    """
    at = np.asarray(a_tilde, dtype=float)
    if np.max(np.abs(at - at.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(at))):
        raise ValueError("a_tilde must be symmetric")
    at = 0.5 * (at + at.T)
    scale = np.max(np.abs(at))
    if tol is None:
        tol = 1e-7 * scale
    if gap_tol is None:
        gap_tol = tol
    if scale == 0 or np.linalg.eigvalsh(at)[0] >= 0:
        return at.copy(), 0.0

    z = at.copy()
    u = np.zeros_like(at)  # scaled dual variable
    lower, upper, best = -np.inf, np.inf, None
    for it in range(1, max_iter + 1):
        a = _psd_part(z - u)
        v = a + u
        z_old = z
        # Z = a_tilde - D with D = prox_{||.||_max / rho}(a_tilde - V)
        z = at - _prox_maxnorm_shift(at - v, 1.0 / rho)
        u = u + a - z
        r_pri = np.max(np.abs(a - z))
        r_dual = rho * np.max(np.abs(z - z_old))
        if r_pri < tol and r_dual < tol:
            dist = float(np.max(np.abs(a - at)))
            return (a, dist) if dist <= upper else (best, upper)
        if it % check_every == 0:
            # the max-norm error of the PSD iterate oscillates in the tail; keep the best one
            dist = float(np.max(np.abs(a - at)))
            if dist < upper:
                upper, best = dist, a
            pos, neg = _psd_parts(u)
            lower = max(lower, maxnorm_lower_bound(at, pos), maxnorm_lower_bound(at, neg))
            if upper - lower <= gap_tol:
                return best, upper
            if adapt:
                rel_pri = np.linalg.norm(a - z) / max(np.linalg.norm(a), np.linalg.norm(z), 1e-300)
                rel_dual = np.linalg.norm(z - z_old) / max(np.linalg.norm(u), 1e-300)
                if rel_pri > 10 * rel_dual:
                    rho *= 2.0
                    u /= 2.0
                elif rel_dual > 10 * rel_pri:
                    rho /= 2.0
                    u *= 2.0
    raise ProjectionError(f"ADMM did not converge in {max_iter} iterations "
                          f"(primal {r_pri:.3e}, dual {r_dual:.3e}, certified gap "
                          f"{upper - lower:.3e}, tol {tol:.3e}, gap_tol {gap_tol:.3e})")


def correlation_scale(matrix: np.ndarray) -> np.ndarray:
    """``diag(M)^{-1/2} M diag(M)^{-1/2}``, with an exact unit diagonal."""
    mat = np.asarray(matrix, dtype=float)
    d = np.diag(mat)
    bad = np.nonzero(d <= 0)[0]
    if bad.size:
        raise ValueError(f"diagonal entry {bad[0]} is {d[bad[0]]:.6g}; need strictly positive diagonal")
    s = 1.0 / np.sqrt(d)
    out = mat * np.outer(s, s)
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 1.0)
    return out


def project_a(data: DataMatrix, trace_a: float, kernel: Kernel | None, time_varying: bool = True,
              admm_tol: float | None = None, admm_max_iter: int = 100_000,
              admm_gap_tol: float | None = None) -> tuple[np.ndarray, np.ndarray, float]:
    """First two pipeline stages: ``(a_tilde, a_plus, gap)``."""
    try:
        a_tilde = form_a_tilde(data, trace_a, kernel, time_varying)
    except Exception as exc:
        raise StageError("form_a_tilde", exc) from exc
    try:
        a_plus, gap = psd_project_maxnorm(a_tilde, admm_tol, admm_max_iter, gap_tol=admm_gap_tol)
    except Exception as exc:
        raise StageError("psd_project_maxnorm", exc) from exc
    return a_tilde, a_plus, gap


@dataclass(frozen=True)
class AEstimate:
    a_tilde: np.ndarray
    a_plus: np.ndarray
    rho_hat: np.ndarray
    a_hat: np.ndarray
    lambda_n: float
    projection_gap: float
    solver: GlassoSolution
    trace_a: float
    diag_spread: float

    @property
    def precision(self) -> np.ndarray:
        """Sparse precision of ``a_hat`` (same support as the glasso solution)."""
        return self.solver.theta * (self.a_tilde.shape[0] / self.trace_a)


def estimate_a(data: DataMatrix, trace_a: float, kernel: Kernel | None, lambda_n: float,
               time_varying: bool = True, glasso_tol: float = 1e-6, glasso_max_iter: int = 500,
               admm_tol: float | None = None, admm_max_iter: int = 100_000,
               admm_gap_tol: float | None = None,
               projection: tuple[np.ndarray, np.ndarray, float] | None = None) -> AEstimate:
    """Full ``A`` pipeline.  ``a_hat = (tr(A)/m) * rho_hat`` where ``rho_hat`` is the
    covariance returned by the glasso on the correlation-scaled projection.

    ``admm_gap_tol`` loosens the projection's optimality certificate (default:
    same as ``admm_tol``).  ``projection`` takes a ``(a_tilde, a_plus, gap)`` triple from
    :func:`project_a` so a lambda sweep projects only once.
    """
    if trace_a <= 0:
        raise ValueError(f"trace_a must be positive, got {trace_a}")
    m = data.m
    if projection is None:
        projection = project_a(data, trace_a, kernel, time_varying, admm_tol, admm_max_iter,
                               admm_gap_tol)
    a_tilde, a_plus, gap = projection
    try:
        corr = correlation_scale(a_plus)
    except Exception as exc:
        raise StageError("correlation_scale", exc) from exc
    try:
        sol = glasso_solve(GlassoProblem(corr, lambda_n, penalize_diagonal=False,
                                         tol=glasso_tol, max_iter=glasso_max_iter))
    except Exception as exc:
        raise StageError("glasso", exc) from exc
    rho_cov = 0.5 * (sol.w + sol.w.T)
    a_hat = trace_a / m * rho_cov
    d = np.diag(a_tilde)
    spread = float((d.max() - d.min()) / max(abs(d.mean()), 1e-300))
    return AEstimate(a_tilde, a_plus, sol.theta, a_hat, float(lambda_n), gap, sol,
                     float(trace_a), spread)


def tune_trace_a(data: DataMatrix, warn: bool = True) -> float:
    """Eigenvalue-floor heuristic for ``tr(A)``.

    ``(1/n) X^T X ~ A + tau_B I`` with ``tau_B = tr(B)/n``; its smallest
    eigenvalue is taken as ``tau_B`` and ``mean(diag) - floor`` as
    ``tr(A)/m``.  The result is clamped at zero.

    With ``m > n`` the matrix has rank ``n`` and the floor is zero, so the
    estimate is ``tr(A) + m tau_B`` in expectation: the heuristic only
    separates the two traces when the spectrum has a visible floor.
    """
    x = data.values
    n, m = x.shape
    gram = x.T @ x / n
    floor = max(0.0, float(np.linalg.eigvalsh(0.5 * (gram + gram.T))[0]))
    tau_a = float(np.mean(np.diag(gram)) - floor)
    if warn:
        warnings.warn("tr(A) from the eigenvalue-floor heuristic; edge recovery for complex "
                      "temporal topologies is sensitive to this choice", stacklevel=2)
    return m * max(0.0, tau_a)
