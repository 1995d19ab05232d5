"""Isotropic 3-D total variation and its proximal operator (Chambolle's projection)."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .dirfilter import _backward_diff, _backward_diff_adjoint
from .volume import to_grid

__all__ = ["TvConfig", "TvResult", "tv_seminorm", "tv_prox", "tv_prox_objective"]

log = logging.getLogger(__name__)

_AXES = (-1, -2, -3)


@dataclass(frozen=True)
class TvConfig:
    weight: float = 0.02
    max_iters: int = 50
    step: float = 0.125
    tol: float = 1e-5

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError(f"TV weight must be non-negative, got {self.weight}")
        if not 0 < self.step <= 0.25:
            raise ValueError(f"TV step must lie in (0, 0.25], got {self.step}")
        if not self.tol > 0:
            raise ValueError("TV tolerance must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")


@dataclass
class TvResult:
    image: np.ndarray
    iterations: int
    converged: bool
    objective: float


def _grad(g):
    return np.stack([_backward_diff(g, a) for a in _AXES])


def _grad_adjoint(p):
    return sum(_backward_diff_adjoint(p[n], a) for n, a in enumerate(_AXES))


def tv_seminorm(image, dims) -> float:
    """Sum over voxels of the Euclidean norm of the backward-difference gradient."""
    g = _grad(to_grid(np.asarray(image, dtype=float), dims))
    return float(np.sum(np.sqrt(np.sum(g * g, axis=0))))


def tv_prox_objective(x, q, weight, dims) -> float:
    x = np.asarray(x, dtype=float)
    return float(0.5 * np.sum((x - q) ** 2) + weight * tv_seminorm(x, dims))


def tv_prox(q, cfg: TvConfig, dims, full_output: bool = False):
    """Approximate ``argmin_x 1/2 ||x - q||^2 + weight * TV(x)``.

    Chambolle's semi-implicit dual iteration
    ``p <- (p + step * grad(div p - q / w)) / (1 + step * |grad(div p - q / w)|)``
    with ``x = q - w * div p`` and ``div`` the negative adjoint of the gradient. The
    returned iterate is the best primal point seen, starting from ``x = q``,
    so the objective never increases.
    """
    q = np.asarray(q, dtype=float)
    w = cfg.weight
    if w == 0:
        res = TvResult(q.copy(), 0, True, 0.0)
        return res if full_output else res.image
    g = to_grid(q, dims)
    p = np.zeros((3,) + g.shape)
    best = g.copy()
    best_obj = w * tv_seminorm(q, dims)
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        d = _grad(-_grad_adjoint(p) - g / w)
        norm = np.sqrt(np.sum(d * d, axis=0))
        p_new = (p + cfg.step * d) / (1.0 + cfg.step * norm)
        inc = float(np.max(np.abs(p_new - p)))
        p = p_new
        x = g + w * _grad_adjoint(p)
        obj = 0.5 * float(np.sum((x - g) ** 2)) + w * float(np.sum(np.sqrt(np.sum(_grad(x) ** 2, axis=0))))
        if obj < best_obj:
            best, best_obj = x, obj
        if inc < cfg.tol:
            converged = True
            break
    if not converged and cfg.max_iters > 0:
        log.debug("tv_prox stopped at max_iters=%d without reaching tol", cfg.max_iters)
    out = best.reshape(q.shape)
    res = TvResult(out, it, converged, best_obj)
    return res if full_output else out
