"""l1-penalized inverse covariance estimation (graphical lasso).

Solves

    min_{Theta > 0}  tr(Theta S) - log det Theta + lam * ||Theta||_1

where the penalty either covers every entry (``penalize_diagonal=True``) or
only the off-diagonal ones.  The full-penalty problem on ``S`` is the
off-diagonal problem on ``S + lam I`` (``tr(lam I Theta) = lam sum |Theta_ii|``
for PD ``Theta``), so a single block coordinate descent handles both.

The solver works on the covariance side: it sweeps over columns of
``W = Theta^{-1}``, solving a lasso for each column by cyclic coordinate
descent (the usual glasso scheme), and checks convergence with the KKT
residual of the recovered ``Theta``.  Zeros produced by soft-thresholding are
exact zeros in ``Theta``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class GlassoProblem:
    s: np.ndarray
    lam: float
    penalize_diagonal: bool = True
    tol: float = 1e-6
    max_iter: int = 500

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError(f"s must be square, got shape {s.shape}")
        if np.max(np.abs(s - s.T), initial=0.0) > 1e-8 * max(1.0, np.max(np.abs(s))):
            raise ValueError("s must be symmetric")
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        object.__setattr__(self, "s", 0.5 * (s + s.T))

    @property
    def p(self) -> int:
        return self.s.shape[0]

    def shifted(self) -> np.ndarray:
        """Target of the equivalent off-diagonal-penalty problem."""
        if self.penalize_diagonal:
            return self.s + self.lam * np.eye(self.p)
        return self.s


@dataclass(frozen=True)
class GlassoSolution:
    theta: np.ndarray
    w: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool


def _logdet_pd(mat: np.ndarray) -> float:
    """``log det`` of a PD matrix, ``nan`` otherwise (slogdet's sign misses pairs of negative eigenvalues)."""
    try:
        chol = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        return np.nan
    return float(2.0 * np.sum(np.log(np.diag(chol))))


def objective(theta: np.ndarray, problem: GlassoProblem) -> float:
    logdet = _logdet_pd(theta)
    if np.isnan(logdet):
        return np.inf
    pen = np.abs(theta).sum()
    if not problem.penalize_diagonal:
        pen -= np.abs(np.diag(theta)).sum()
    return float(np.sum(theta * problem.s) - logdet + problem.lam * pen)


def kkt_residual(theta: np.ndarray, problem: GlassoProblem, w: np.ndarray | None = None) -> float:
    """Largest violation of ``S - W + lam * G = 0`` with ``G`` a subgradient of the penalty.

    For ``Theta_ij != 0`` the subgradient is ``sign(Theta_ij)``; for zero
    entries it is chosen in ``[-1, 1]`` to minimize the residual.  Unpenalized
    diagonal entries must satisfy ``S_ii = W_ii``.
    """
    if w is None:
        w = np.linalg.inv(theta)
    lam = problem.lam
    r = problem.s - w
    res = np.where(theta != 0, np.abs(r + lam * np.sign(theta)), np.maximum(np.abs(r) - lam, 0.0))
    if not problem.penalize_diagonal:
        np.fill_diagonal(res, np.abs(np.diag(r)))
    return float(res.max())


def kkt_check(solution: GlassoSolution, problem: GlassoProblem) -> float:
    return kkt_residual(solution.theta, problem)


def dual_bound(w: np.ndarray, problem: GlassoProblem) -> float:
    """Lower bound ``p + log det W`` on the optimum, after clipping ``W`` into the dual box.

    Returns ``-inf`` if the clipped matrix is not positive definite.
    """
    s, lam = problem.s, problem.lam
    wc = np.clip(w, s - lam, s + lam)
    if not problem.penalize_diagonal:
        np.fill_diagonal(wc, np.diag(s))
    wc = 0.5 * (wc + wc.T)
    logdet = _logdet_pd(wc)
    if np.isnan(logdet):
        return -np.inf
    return float(problem.p + logdet)


@njit(cache=True)
def _lasso_cd(w11, s12, beta, lam, tol, max_sweeps):
    p = s12.shape[0]
    wb = w11 @ beta
    for _ in range(max_sweeps):
        biggest = 0.0
        for k in range(p):
            old = beta[k]
            rk = s12[k] - wb[k] + w11[k, k] * old
            if rk > lam:
                new = (rk - lam) / w11[k, k]
            elif rk < -lam:
                new = (rk + lam) / w11[k, k]
            else:
                new = 0.0
            if new != old:
                delta = new - old
                for q in range(p):
                    wb[q] += delta * w11[q, k]
                beta[k] = new
                change = abs(delta) * w11[k, k]
                if change > biggest:
                    biggest = change
        if biggest < tol:
            break
    return wb


@njit(cache=True)
def _sweep(s, w, b, lam, inner_tol, inner_max):
    p = s.shape[0]
    idx = np.empty(p - 1, dtype=np.int64)
    w11 = np.empty((p - 1, p - 1))
    s12 = np.empty(p - 1)
    beta = np.empty(p - 1)
    for j in range(p):
        c = 0
        for q in range(p):
            if q != j:
                idx[c] = q
                c += 1
        for a in range(p - 1):
            s12[a] = s[idx[a], j]
            beta[a] = b[idx[a], j]
            for bb in range(p - 1):
                w11[a, bb] = w[idx[a], idx[bb]]
        w12 = _lasso_cd(w11, s12, beta, lam, inner_tol, inner_max)
        for a in range(p - 1):
            b[idx[a], j] = beta[a]
            w[idx[a], j] = w12[a]
            w[j, idx[a]] = w12[a]


@njit(cache=True)
def _theta_from(w, b):
    p = w.shape[0]
    theta = np.zeros((p, p))
    for j in range(p):
        acc = 0.0
        for q in range(p):
            if q != j:
                acc += w[q, j] * b[q, j]
        tjj = 1.0 / (w[j, j] - acc)
        theta[j, j] = tjj
        for q in range(p):
            if q != j:
                theta[q, j] = -b[q, j] * tjj
    return theta


def _symmetrize(theta: np.ndarray) -> np.ndarray:
    return 0.5 * (theta + theta.T)


def _is_pd(mat: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        return False
    return True


def _initial_w(target: np.ndarray, lam: float, init: str) -> np.ndarray:
    diag = np.diag(target)
    if np.any(diag <= 0):
        i = int(np.argmin(diag))
        raise ValueError(
            f"diagonal entry {i} of the (shifted) input is {diag[i]:.6g} <= 0; "
            "increase lambda or check the trace correction"
        )
    if init == "sample" and _is_pd(target):
        return target.copy()
    off = target - np.diag(diag)
    biggest = np.max(np.abs(off), initial=0.0)
    alpha = 1.0 if biggest == 0 else min(1.0, lam / biggest)
    # two corners of the dual box: uniform shrinkage and soft thresholding
    for cand in (np.diag(diag) + (1.0 - alpha) * off,
                 np.diag(diag) + np.sign(off) * np.maximum(np.abs(off) - lam, 0.0)):
        if _is_pd(cand):
            return cand
    raise ValueError("no positive definite starting point in the dual box; increase lambda")


def glasso_solve(problem: GlassoProblem, init: str = "sample") -> GlassoSolution:
    """Solve the penalized likelihood problem.

    ``init="sample"`` starts from the (shifted) input when it is PD;
    ``init="diagonal"`` starts from its diagonal, shrunk toward the input's
    off-diagonal entries only as far as the dual box allows.  Both reach the
    same optimum; the choice only affects the path.
    """
    if init not in ("sample", "diagonal"):
        raise ValueError(f"unknown init {init!r}")
    p, lam = problem.p, problem.lam

    if lam == 0:
        if not _is_pd(problem.s):
            raise ValueError("lambda = 0 needs a positive definite input")
        theta = _symmetrize(np.linalg.inv(problem.s))
        w = problem.s.copy()
        return GlassoSolution(theta, w, objective(theta, problem), kkt_residual(theta, problem), 0, True)

    target = problem.shifted()
    w = _initial_w(target, lam, init)
    if p == 1:
        theta = np.array([[1.0 / target[0, 0]]])
        return GlassoSolution(theta, target.copy(), objective(theta, problem),
                              kkt_residual(theta, problem), 0, True)

    b = np.zeros((p, p))
    inner_tol = min(1e-10, 1e-4 * problem.tol)
    best = None
    for it in range(1, problem.max_iter + 1):
        _sweep(target, w, b, lam, inner_tol, 10_000)
        theta = _symmetrize(_theta_from(w, b))
        if not _is_pd(theta):
            continue
        w_theta = np.linalg.inv(theta)
        res = kkt_residual(theta, problem, w_theta)
        if best is None or res < best[1]:
            best = (theta, res, w_theta)
        if res <= problem.tol:
            return GlassoSolution(theta, w_theta, objective(theta, problem), res, it, True)
    if best is None:
        raise RuntimeError("glasso produced no positive definite iterate")
    theta, res, w_theta = best
    return GlassoSolution(theta, w_theta, objective(theta, problem), res, problem.max_iter, False)


def lambda_rule_b(m: int, c: float = 1.0) -> float:
    """``c * sqrt(log m / m^{2/3})``."""
    if m < 2:
        raise ValueError("need m >= 2")
    return float(c * np.sqrt(np.log(m) / m ** (2.0 / 3.0)))


def lambda_rule_a(m: int, n: int, c: float = 1.0) -> float:
    """``c * sqrt(log m / n)``."""
    if m < 2 or n < 1:
        raise ValueError("need m >= 2 and n >= 1")
    return float(c * np.sqrt(np.log(m) / n))
