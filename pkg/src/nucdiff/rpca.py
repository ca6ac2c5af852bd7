"""Classical RPCA baseline.

Solves the Lagrangian decomposition

    min_{L,X}  ||L||_* + lam ||X||_1 + (mu/2) ||Y - L - X||_F^2

by alternating exact block minimization: the X step is a soft-threshold
of the residual, the L step a singular value threshold. Each step
minimizes its block exactly, so the objective is monotone.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ShapeError
from .proxops import nuclear_norm, soft_threshold, svt
from .tensors import CasoratiMatrix


@dataclass
class RpcaConfig:
    # lam = None means 1/sqrt(max(n, p)), resolved against the input
    lam: float | None = None
    mu: float = 2.0
    max_iters: int = 500
    rel_tol: float = 1e-6

    def __post_init__(self):
        if self.lam is not None and self.lam <= 0:
            raise ValueError("lam must be positive")
        if self.mu <= 0:
            raise ValueError("mu must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")

    def resolve_lam(self, n, p):
        return self.lam if self.lam is not None else 1.0 / np.sqrt(max(n, p))


@dataclass
class Decomposition:
    L: CasoratiMatrix
    X: CasoratiMatrix
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _values(m):
    return m.values if isinstance(m, CasoratiMatrix) else np.asarray(m, float)


def _check_same_shape(*mats):
    shapes = {tuple(_values(m).shape) for m in mats}
    if len(shapes) != 1:
        raise ShapeError(f"mismatched shapes {sorted(shapes)}")


def rpca_objective(y, l, x, cfg):
    """||L||_* + lam ||X||_1 + (mu/2) ||Y - L - X||_F^2."""
    _check_same_shape(y, l, x)
    yv, lv, xv = _values(y), _values(l), _values(x)
    n, p = yv.shape
    lam = cfg.resolve_lam(n, p)
    resid = yv - lv - xv
    return (nuclear_norm(lv) + lam * np.abs(xv).sum()
            + 0.5 * cfg.mu * float((resid * resid).sum()))


def rpca_log_posterior(y, l, x, cfg, gamma):
    """Joint log density of (Y, L, X) up to an additive constant (taken 0).

    Gaussian likelihood with precision mu, nuclear-norm prior weighted by
    gamma on L, Laplace prior weighted by lam on X.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    _check_same_shape(y, l, x)
    yv, lv, xv = _values(y), _values(l), _values(x)
    n, p = yv.shape
    lam = cfg.resolve_lam(n, p)
    resid = yv - lv - xv
    return -(gamma * nuclear_norm(lv) + lam * np.abs(xv).sum()
             + 0.5 * cfg.mu * float((resid * resid).sum()))


def rpca_solve(y, cfg=None):
    """Alternating proximal minimization from L = X = 0.

    Converged means the relative iterate change
    ||(L,X)_{k+1} - (L,X)_k||_F / max(1, ||(L,X)_k||_F) fell below
    cfg.rel_tol before max_iters.
    """
    if cfg is None:
        cfg = RpcaConfig()
    if isinstance(y, CasoratiMatrix):
        yv, h, w = y.values, y.frame_height, y.frame_width
    else:
        yv = np.asarray(y, dtype=float)
        h, w = yv.shape[0], 1
    if not np.all(np.isfinite(yv)):
        raise ValueError("observation contains non-finite entries")
    n, p = yv.shape
    if p == 1:
        warnings.warn("rpca_solve on a single frame: the low-rank prior "
                      "degenerates, results are likely uninformative")
    lam = cfg.resolve_lam(n, p)

    L = np.zeros_like(yv)
    X = np.zeros_like(yv)
    trace = [rpca_objective(yv, L, X, cfg)]
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        X_new = soft_threshold(yv - L, lam / cfg.mu)
        L_new = svt(yv - X_new, 1.0 / cfg.mu)
        if not (np.all(np.isfinite(X_new)) and np.all(np.isfinite(L_new))):
            raise NumericalError(f"non-finite iterate at iteration {it}",
                                 step=it)
        trace.append(rpca_objective(yv, L_new, X_new, cfg))
        num = np.sqrt(np.linalg.norm(L_new - L) ** 2
                      + np.linalg.norm(X_new - X) ** 2)
        den = max(1.0, np.sqrt(np.linalg.norm(L) ** 2
                               + np.linalg.norm(X) ** 2))
        L, X = L_new, X_new
        if num / den < cfg.rel_tol:
            converged = True
            break
    return Decomposition(L=CasoratiMatrix(L, h, w),
                         X=CasoratiMatrix(X, h, w),
                         objective_trace=trace,
                         iterations=it,
                         converged=converged)
