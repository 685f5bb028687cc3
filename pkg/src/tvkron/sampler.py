"""Draw data from the additive generative model ``X = Z1 A^{1/2} + Z_B``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .covmodel import DataMatrix, KroneckerSumModel

PSD_EIG_RTOL = 1e-10

_SQRT3 = np.sqrt(3.0)


@dataclass(frozen=True)
class InnovationLaw:
    """Zero-mean, unit-variance i.i.d. innovations.

    ``gaussian`` is standard normal, ``rademacher`` is +-1 with equal
    probability (subgaussian norm bound 1), ``uniform_scaled`` is uniform on
    ``[-sqrt(3), sqrt(3)]``.
    """

    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind not in ("gaussian", "rademacher", "uniform_scaled"):
            raise ValueError(f"unknown innovation law {self.kind!r}")

    def draw(self, rng: np.random.Generator, shape) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(shape)
        if self.kind == "rademacher":
            return 2.0 * rng.integers(0, 2, size=shape).astype(float) - 1.0
        return rng.uniform(-_SQRT3, _SQRT3, size=shape)


def sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via an eigendecomposition.

    Eigenvalues in ``[-1e-10 * max_eig, 0)`` are treated as roundoff and
    clipped to zero; anything more negative raises ``ValueError``.
    """
    mat = np.asarray(matrix, dtype=float)
    w, v = np.linalg.eigh(0.5 * (mat + mat.T))
    scale = max(abs(w[-1]), 0.0)
    if w[0] < -PSD_EIG_RTOL * scale:
        raise ValueError(f"matrix is not PSD: min eigenvalue {w[0]:.6g}")
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T
    return 0.5 * (root + root.T)


def sqrt_psd_batch(mats: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (mats + np.swapaxes(mats, 1, 2)))
    scale = np.abs(w[:, -1])
    bad = np.nonzero(w[:, 0] < -PSD_EIG_RTOL * scale)[0]
    if bad.size:
        raise ValueError(f"matrix {bad[0]} is not PSD: min eigenvalue {w[bad[0], 0]:.6g}")
    root = (v * np.sqrt(np.clip(w, 0.0, None))[:, None, :]) @ np.swapaxes(v, 1, 2)
    return 0.5 * (root + np.swapaxes(root, 1, 2))


def sample_data(
    model: KroneckerSumModel,
    law: InnovationLaw | str = "gaussian",
    seed: int = 0,
    *,
    a_sqrt: np.ndarray | None = None,
    b_sqrt: np.ndarray | None = None,
) -> DataMatrix:
    """One draw of ``X``.

    ``a_sqrt`` / ``b_sqrt`` may be passed to reuse precomputed square roots
    (the AR(1) root at ``m = 2400`` is worth caching across seeds).
    """
    if isinstance(law, str):
        law = InnovationLaw(law)
    rng = np.random.Generator(np.random.Philox(int(seed)))
    n, m = model.n, model.m
    z1 = law.draw(rng, (n, m))
    z2 = law.draw(rng, (n, m))
    if a_sqrt is None:
        a_sqrt = sqrt_psd(model.a.matrix)
    if b_sqrt is None:
        b_sqrt = sqrt_psd_batch(model.b.matrices)
    # column i of Z_B is B(i/m)^{1/2} Z2 e_i
    zb = np.einsum("ijk,ki->ji", b_sqrt, z2)
    return DataMatrix(z1 @ a_sqrt + zb)
