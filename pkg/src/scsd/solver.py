"""ADMM solver for spatially constrained sparse spherical deconvolution.

The cost

    1/2 ||Phi f - s||^2 + lam ||f||_1 + mu sum_j ||v_j^T D f_j||^2
        + nu TV(f_iso) + indicator(f >= 0)

is split with ``f = u`` (sparsity and positivity) and ``f = v`` (spatial
priors). Each iteration takes one Gauss-Seidel pass: a closed-form
least-squares update of ``f``, rectified soft thresholding for ``u``, a
row-separable spatial update for ``v`` (fibre-continuity filters on fODF
rows, TV denoising on the isotropic row) and scaled dual ascent.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.linalg

from .dirfilter import FilterBank
from .model import Dictionary
from .tv import TvConfig, tv_prox, tv_seminorm
from .volume import CoefficientVolume, SignalVolume, to_grid

__all__ = [
    "SolverConfig",
    "SolverState",
    "PrecomputedLs",
    "ConvergenceReport",
    "objective",
    "objective_terms",
    "step_ls",
    "step_shrink",
    "step_spatial",
    "admm_solve",
]

log = logging.getLogger(__name__)

NEGATIVE_TOL = 1e-12
DIVERGENCE_WINDOW = 20


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.03
    mu: float = 0.4
    nu: float = 0.01
    delta_u: float = 0.5
    delta_v: float = 0.5
    include_iso_column: bool = True
    max_iters: int = 200
    primal_tol: float = 1e-4
    tv_cfg: TvConfig = field(default_factory=TvConfig)
    fc_tol: float = 1e-4
    fc_fir_only: bool = False

    def __post_init__(self):
        for name in ("lam", "mu", "nu"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not (self.delta_u > 0 and self.delta_v > 0):
            raise ValueError("ADMM penalties delta_u and delta_v must be positive")
        if self.nu > 0 and not self.include_iso_column:
            raise ValueError("nu > 0 needs the isotropic column (include_iso_column=True)")
        if self.max_iters < 0 or not self.primal_tol > 0:
            raise ValueError("max_iters must be >= 0 and primal_tol > 0")

    @property
    def tau(self) -> float:
        return self.mu / self.delta_v

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["tv_cfg"] = dataclasses.asdict(self.tv_cfg)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SolverConfig":
        d = dict(d)
        if isinstance(d.get("tv_cfg"), dict):
            d["tv_cfg"] = TvConfig(**d["tv_cfg"])
        return cls(**d)


@dataclass
class SolverState:
    f: np.ndarray
    u: np.ndarray
    v: np.ndarray
    p_u: np.ndarray
    p_v: np.ndarray
    iter: int = 0
    primal_res_u: float = np.inf
    primal_res_v: float = np.inf

    @classmethod
    def zeros(cls, rows: int, voxels: int) -> "SolverState":
        z = lambda: np.zeros((rows, voxels))  # noqa: E731
        return cls(z(), z(), z(), z(), z())


class PrecomputedLs:
    """Cholesky factor and inverse of ``M^T M + (delta_u + delta_v) I``, plus ``M^T s``."""

    def __init__(self, M: np.ndarray, s: np.ndarray, delta_u: float, delta_v: float):
        self.M = np.asarray(M, dtype=float)
        self.shift = delta_u + delta_v
        self.gram = self.M.T @ self.M + self.shift * np.eye(self.M.shape[1])
        self.factor = scipy.linalg.cho_factor(self.gram, lower=True)
        self.R = scipy.linalg.cho_solve(self.factor, np.eye(self.M.shape[1]))
        self.R = 0.5 * (self.R + self.R.T)
        self.Mts = self.M.T @ np.asarray(s, dtype=float)

    def rhs(self, state: SolverState, delta_u: float, delta_v: float) -> np.ndarray:
        return self.Mts + delta_u * (state.u - state.p_u) + delta_v * (state.v - state.p_v)


@dataclass
class ConvergenceReport:
    iterations: int = 0
    converged: bool = False
    diverged: bool = False
    objective: list = field(default_factory=list)
    primal_res_u: list = field(default_factory=list)
    primal_res_v: list = field(default_factory=list)
    relative_residual: list = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@numba.njit(cache=True)
def _fc_energy(w, V):
    # sum_r ||T_{v_r} w_r||^2 on (R, nz, ny, nx) grids
    R, nz, ny, nx = w.shape
    total = 0.0
    for r in range(R):
        vx, vy, vz = V[r, 0], V[r, 1], V[r, 2]
        for k in range(nz):
            for j in range(ny):
                for i in range(nx):
                    c = w[r, k, j, i]
                    acc = 0.0
                    if i > 0:
                        acc += vx * (c - w[r, k, j, i - 1])
                    if j > 0:
                        acc += vy * (c - w[r, k, j - 1, i])
                    if k > 0:
                        acc += vz * (c - w[r, k - 1, j, i])
                    total += acc * acc
    return total


def _matrix(dictionary: Dictionary, cfg: SolverConfig) -> np.ndarray:
    return dictionary.matrix(cfg.include_iso_column)


def objective_terms(f, dictionary: Dictionary, s, cfg: SolverConfig, dims) -> dict:
    """Individual terms of the SCSD cost at ``f`` (finite parts only)."""
    M = _matrix(dictionary, cfg)
    f = np.asarray(f, dtype=float)
    s = np.asarray(s, dtype=float)
    if f.shape != (M.shape[1], s.shape[1]):
        raise ValueError(f"coefficient shape {f.shape} incompatible with {M.shape} and {s.shape}")
    J = dictionary.J
    resid = M @ f - s
    terms = {
        "data": 0.5 * float(np.sum(resid * resid)),
        "l1": cfg.lam * float(np.sum(np.abs(f))),
        "fc": 0.0,
        "tv": 0.0,
    }
    if cfg.mu > 0:
        g = np.ascontiguousarray(to_grid(f[:J], dims))
        terms["fc"] = cfg.mu * float(_fc_energy(g, np.ascontiguousarray(dictionary.recon_dirs.vectors)))
    if cfg.nu > 0 and cfg.include_iso_column:
        terms["tv"] = cfg.nu * tv_seminorm(f[J], dims)
    return terms


def objective(f, dictionary: Dictionary, s, cfg: SolverConfig, dims) -> float:
    """SCSD cost at ``f``; ``inf`` when any entry is below ``-1e-12``."""
    terms = objective_terms(f, dictionary, s, cfg, dims)
    if np.min(f) < -NEGATIVE_TOL:
        return float("inf")
    return float(sum(terms.values()))


def step_ls(state: SolverState, precomp: PrecomputedLs, cfg: SolverConfig) -> np.ndarray:
    return precomp.R @ precomp.rhs(state, cfg.delta_u, cfg.delta_v)


def step_shrink(state: SolverState, cfg: SolverConfig) -> np.ndarray:
    return np.maximum(state.f + state.p_u - cfg.lam / cfg.delta_u, 0.0)


def step_spatial(state: SolverState, cfg: SolverConfig, bank: FilterBank | None, dims,
                 warm_start: bool = False) -> np.ndarray:
    """Row-separable update of ``v`` from ``q = f + p_v``.

    fODF rows: fibre-continuity LS solve (pass-through when ``mu = 0``).
    Isotropic row: TV denoising with weight ``nu / delta_v`` (pass-through
    when ``nu = 0``). ``warm_start`` seeds the LS iteration with the current
    ``v`` instead of the FIR estimate.
    """
    q = state.f + state.p_v
    out = q.copy()
    n_fodf = q.shape[0] - int(cfg.include_iso_column)
    if cfg.mu > 0:
        if bank is None:
            raise ValueError("fibre-continuity update needs a FilterBank")
        x0 = state.v[:n_fodf] if warm_start else None
        out[:n_fodf] = bank.solve(q[:n_fodf], x0=x0, tol=cfg.fc_tol, fir_only=cfg.fc_fir_only)
    if cfg.include_iso_column and cfg.nu > 0:
        tv_cfg = dataclasses.replace(cfg.tv_cfg, weight=cfg.nu / cfg.delta_v)
        out[n_fodf] = tv_prox(q[n_fodf], tv_cfg, dims)
    return out


def make_filter_bank(dictionary: Dictionary, cfg: SolverConfig, dims) -> FilterBank | None:
    if cfg.mu == 0:
        return None
    return FilterBank(dictionary.recon_dirs.vectors, cfg.tau, dims)


def admm_solve(s: SignalVolume, dictionary: Dictionary, cfg: SolverConfig,
               bank: FilterBank | None = None, track_objective: bool = True,
               state: SolverState | None = None) -> tuple[CoefficientVolume, ConvergenceReport]:
    """Run ADMM from zero initial iterates and return the non-negative iterate ``u``."""
    if s.K != dictionary.K:
        raise ValueError(f"signal has {s.K} directions, dictionary has {dictionary.K}")
    if not np.allclose(s.acquisition.vectors, dictionary.acquisition.vectors, atol=1e-9):
        raise ValueError("signal acquisition scheme differs from the dictionary's")
    dims = s.dims
    M = _matrix(dictionary, cfg)
    precomp = PrecomputedLs(M, s.data, cfg.delta_u, cfg.delta_v)
    if bank is None:
        bank = make_filter_bank(dictionary, cfg, dims)
    if state is None:
        state = SolverState.zeros(M.shape[1], s.num_voxels)
    report = ConvergenceReport()
    rising = 0
    prev = np.inf
    last_finite_u = state.u
    for t in range(cfg.max_iters):
        state.f = step_ls(state, precomp, cfg)
        state.u = step_shrink(state, cfg)
        state.v = step_spatial(state, cfg, bank, dims, warm_start=t > 0)
        du = state.f - state.u
        dv = state.f - state.v
        state.p_u += du
        state.p_v += dv
        state.iter = t + 1
        state.primal_res_u = float(np.linalg.norm(du))
        state.primal_res_v = float(np.linalg.norm(dv))
        worst = max(state.primal_res_u, state.primal_res_v)
        rel = worst / max(1.0, float(np.linalg.norm(state.f)))
        report.primal_res_u.append(state.primal_res_u)
        report.primal_res_v.append(state.primal_res_v)
        report.relative_residual.append(rel)
        if track_objective:
            report.objective.append(objective(state.u, dictionary, s.data, cfg, dims))
        report.iterations = state.iter
        if rel < cfg.primal_tol:
            report.converged = True
            report.message = f"converged in {state.iter} iterations"
            break
        if not np.isfinite(worst):
            report.diverged = True
            report.message = f"non-finite iterate at iteration {state.iter}; returning the last finite u"
            log.warning("ADMM failure: %s", report.message)
            state.u = last_finite_u
            break
        last_finite_u = state.u
        rising = rising + 1 if worst > prev else 0
        prev = worst
        if rising == DIVERGENCE_WINDOW:
            # flagged, not fatal: ADMM residuals can rise transiently before settling
            report.diverged = True
            log.warning("ADMM primal residual grew for %d consecutive iterations (iteration %d)",
                        DIVERGENCE_WINDOW, state.iter)
    else:
        report.message = f"stopped at max_iters={cfg.max_iters}"
        if report.diverged:
            report.message += f"; residual grew for {DIVERGENCE_WINDOW} consecutive iterations"
    coeffs = CoefficientVolume(dims, state.u.copy(), dictionary.recon_dirs, cfg.include_iso_column)
    return coeffs, report
