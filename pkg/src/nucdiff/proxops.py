"""Proximal operators and matrix penalties.

Shared by the RPCA baseline and the diffusion sampler: elementwise
soft-thresholding (prox of the l1 norm), singular value thresholding
(prox of the nuclear norm), and the nuclear norm with a subgradient.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD M = U diag(S) V^T with S non-increasing."""
    U: np.ndarray
    S: np.ndarray
    V: np.ndarray


def svd_factors(m):
    try:
        U, S, Vt = np.linalg.svd(np.asarray(m, dtype=float),
                                 full_matrices=False)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"SVD failed: {e}") from e
    return SvdFactors(U=U, S=S, V=Vt.T)


def soft_threshold(m, t):
    """Elementwise sign(x) * max(|x| - t, 0)."""
    if t < 0:
        raise ValueError(f"threshold must be non-negative, got {t}")
    m = np.asarray(m, dtype=float)
    return np.sign(m) * np.maximum(np.abs(m) - t, 0.0)


def nuclear_norm(m):
    """Sum of singular values."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("nuclear_norm of a non-finite matrix")
    return float(np.linalg.svd(m, compute_uv=False).sum())


def svt(m, t):
    """Singular value thresholding: U max(S - t, 0) V^T."""
    if t < 0:
        raise ValueError(f"threshold must be non-negative, got {t}")
    f = svd_factors(m)
    s = np.maximum(f.S - t, 0.0)
    return (f.U * s) @ f.V.T


def nuclear_subgradient(m, rank_tol=1e-10):
    """U_r V_r^T over singular triplets with s_i > rank_tol * s_1.

    The zero matrix maps to the zero matrix (a valid subgradient there),
    so the first background update from L = 0 is well defined.
    """
    if rank_tol <= 0:
        raise ValueError("rank_tol must be positive")
    f = svd_factors(m)
    if f.S.size == 0 or f.S[0] == 0.0:
        return np.zeros_like(np.asarray(m, dtype=float))
    keep = f.S > rank_tol * f.S[0]
    return f.U[:, keep] @ f.V[:, keep].T
