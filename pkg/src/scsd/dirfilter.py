"""Directional differencing and the fibre-continuity least-squares solve.

The sub-problem ``min_w 1/2 ||w - q||^2 + tau ||T_v w||^2`` has normal
equations ``(I + 2 tau T_v^T T_v) w = q``. In the frequency domain its
solution is the low-pass filter ``(1 + 2 tau |H_v(w)|^2)^-1``; a 7x7x7
truncation of that impulse response gives a cheap approximate inverse
that can be applied with any boundary rule. On finite grids the filter
is used as the starting point of conjugate-gradient sweeps on the exact
(replicate-boundary) normal equations.

All images live on ``(..., nz, ny, nx)`` grids (see :func:`scsd.volume.to_grid`);
direction component x acts on the last axis.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np
import scipy.fft

from .volume import from_grid, to_grid

__all__ = [
    "DirectionalFilter",
    "FilterBank",
    "directional_diff",
    "directional_diff_adjoint",
    "fc_operator",
    "freq_response",
    "build_filter",
    "apply_filter",
    "solve_fc_ls",
    "fc_objective",
]

FILTER_SIZE = 7
DFT_GRID = 64
TRUNCATION_LIMIT = 0.01

# (vector component, grid axis) pairs; x is the fastest-varying axis
_AXES = ((0, -1), (1, -2), (2, -3))


def _backward_diff(g, axis):
    out = np.zeros_like(g)
    n = g.shape[axis]
    if n > 1:
        hi = [slice(None)] * g.ndim
        lo = [slice(None)] * g.ndim
        hi[axis] = slice(1, None)
        lo[axis] = slice(None, -1)
        out[tuple(hi)] = g[tuple(hi)] - g[tuple(lo)]
    return out


def _backward_diff_adjoint(g, axis):
    # adjoint of w -> (0, w1 - w0, w2 - w1, ...)
    out = np.zeros_like(g)
    n = g.shape[axis]
    if n > 1:
        hi = [slice(None)] * g.ndim
        lo = [slice(None)] * g.ndim
        hi[axis] = slice(1, None)
        lo[axis] = slice(None, -1)
        out[tuple(hi)] += g[tuple(hi)]
        out[tuple(lo)] -= g[tuple(hi)]
    return out


def _direction_weights(v, ndim):
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        return [float(c) for c in v]
    # one direction per leading row: broadcast over the three grid axes
    return [v[:, d].reshape((-1,) + (1,) * (ndim - 1)) for d in range(3)]


def directional_grid_diff(g, v):
    """``sum_d v_d * nabla_d g`` on grids shaped ``(..., nz, ny, nx)``.

    ``v`` is a single 3-vector or an ``(R, 3)`` array matching a leading axis of length R.
    """
    w = _direction_weights(v, g.ndim)
    out = np.zeros_like(g, dtype=float)
    for d, axis in _AXES:
        if np.any(w[d] != 0):
            out += w[d] * _backward_diff(g, axis)
    return out


def directional_grid_diff_adjoint(g, v):
    w = _direction_weights(v, g.ndim)
    out = np.zeros_like(g, dtype=float)
    for d, axis in _AXES:
        if np.any(w[d] != 0):
            out += _backward_diff_adjoint(w[d] * g, axis)
    return out


def directional_diff(image, v, dims) -> np.ndarray:
    """Backward-difference derivative of voxel rows along ``v``.

    The first sample along every axis has a zero difference (replicate
    boundary). ``image`` is ``(I,)`` or ``(R, I)``; with ``R`` rows ``v`` may
    be ``(R, 3)``.
    """
    return from_grid(directional_grid_diff(to_grid(np.asarray(image, dtype=float), dims), v))


def directional_diff_adjoint(image, v, dims) -> np.ndarray:
    return from_grid(directional_grid_diff_adjoint(to_grid(np.asarray(image, dtype=float), dims), v))


def fc_operator(image, v, tau, dims) -> np.ndarray:
    """Apply ``I + 2 tau T_v^T T_v`` to voxel rows."""
    g = to_grid(np.asarray(image, dtype=float), dims)
    return from_grid(g + 2.0 * tau * directional_grid_diff_adjoint(directional_grid_diff(g, v), v))


def fc_objective(w, q, v, tau, dims) -> float:
    """``1/2 ||w - q||^2 + tau ||T_v w||^2``."""
    w = np.asarray(w, dtype=float)
    d = directional_diff(w, v, dims)
    return float(0.5 * np.sum((w - q) ** 2) + tau * np.sum(d * d))


def freq_response(v, omega) -> complex:
    """Frequency response of backward directional differencing along ``v``.

    ``H_v(w) = 2 sum_d v_d sin(w_d / 2) exp(-i (w_d - pi) / 2)``; ``omega``
    may carry extra trailing axes for vectorised evaluation.
    """
    v = np.asarray(v, dtype=float)
    omega = np.asarray(omega, dtype=float)
    terms = [2.0 * v[d] * np.sin(omega[d] / 2.0) * np.exp(-1j * (omega[d] - np.pi) / 2.0)
             for d in range(3)]
    out = terms[0] + terms[1] + terms[2]
    return complex(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class DirectionalFilter:
    """Truncated impulse response of ``(1 + 2 tau |H_v|^2)^-1``.

    ``kernel`` is indexed ``[z, y, x]`` with the origin at the centre tap and
    is rescaled to unit DC gain. ``truncation_error`` is the fraction of the
    untruncated response's tap energy (sum of squares) lying outside the
    kept window; ``truncation_norm_ratio`` is its square root.
    """

    direction: np.ndarray
    tau: float
    kernel: np.ndarray
    truncation_error: float

    @property
    def truncation_norm_ratio(self) -> float:
        return float(np.sqrt(self.truncation_error))


@lru_cache(maxsize=4)
def _half_lattice(grid: int):
    # rfft half-lattice, ordered (x, y, z) to match the direction components
    w = 2.0 * np.pi * np.fft.fftfreq(grid)
    wr = 2.0 * np.pi * np.fft.rfftfreq(grid)
    wz, wy, wx = np.meshgrid(w, w, wr, indexing="ij")
    return np.stack([wx, wy, wz])


@lru_cache(maxsize=4096)
def _kernel_cached(v: tuple, tau: float, grid: int, size: int):
    if tau == 0:
        k = np.zeros((size,) * 3)
        k[(size // 2,) * 3] = 1.0
        return k, 0.0
    H = freq_response(v, _half_lattice(grid))
    resp = 1.0 / (1.0 + 2.0 * tau * np.abs(H) ** 2)
    # the response is real and even, so the impulse response is real
    h = np.fft.fftshift(scipy.fft.irfftn(resp, s=(grid,) * 3))
    c, r = grid // 2, size // 2
    kept = h[c - r:c + r + 1, c - r:c + r + 1, c - r:c + r + 1]
    err = 1.0 - float(np.sum(kept ** 2) / np.sum(h ** 2))
    k = kept / kept.sum()
    k.setflags(write=False)
    return k, max(err, 0.0)


def build_filter(v, tau: float, dims=None, grid: int = DFT_GRID,
                 size: int = FILTER_SIZE) -> DirectionalFilter:
    """Sample the LS filter response on a ``grid**3`` DFT lattice and truncate it.

    ``dims`` is accepted for interface symmetry; the kernel does not depend
    on the volume size.
    """
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    if size % 2 != 1 or size > grid:
        raise ValueError("filter size must be odd and no larger than the DFT grid")
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    kernel, err = _kernel_cached(tuple(float(c) for c in v), float(tau), int(grid), int(size))
    if err >= TRUNCATION_LIMIT:
        warnings.warn(f"FIR truncation error {err:.3%} for v={v.round(4)}, tau={tau}",
                      RuntimeWarning, stacklevel=2)
    return DirectionalFilter(v, float(tau), kernel, err)


class FilterBank:
    """Batched fibre-continuity solver for one filter per row.

    Filters are applied as finite impulse responses on a half-sample
    symmetric extension of the volume; the linear convolution is evaluated
    with FFTs over the padded block, which is exactly equivalent to direct
    tap-by-tap application.
    """

    def __init__(self, directions, tau: float, dims, grid: int = DFT_GRID,
                 size: int = FILTER_SIZE):
        self.directions = np.atleast_2d(np.asarray(directions, dtype=float))
        self.tau = float(tau)
        self.dims = tuple(int(d) for d in dims)
        self.size = size
        self.filters = [build_filter(v, tau, dims, grid, size) for v in self.directions]
        nx, ny, nz = self.dims
        r = size // 2
        self._pad = r
        self._shape = (nz + 2 * r, ny + 2 * r, nx + 2 * r)
        kernels = np.stack([f.kernel for f in self.filters])
        self._kernel_hat = scipy.fft.rfftn(kernels, s=self._shape, axes=(1, 2, 3))

    @property
    def truncation_errors(self) -> np.ndarray:
        return np.array([f.truncation_error for f in self.filters])

    def apply(self, rows, index=None) -> np.ndarray:
        """FIR-filter voxel rows ``(R, I)``; row ``r`` uses filter ``index[r]``."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        khat = self._kernel_hat if index is None else self._kernel_hat[index]
        g = to_grid(rows, self.dims)
        r = self._pad
        padded = np.pad(g, ((0, 0), (r, r), (r, r), (r, r)), mode="symmetric")
        spec = scipy.fft.rfftn(padded, axes=(1, 2, 3)) * khat
        full = scipy.fft.irfftn(spec, s=self._shape, axes=(1, 2, 3))
        # circular wrap only touches the first 2r samples of each axis
        return from_grid(full[:, 2 * r:, 2 * r:, 2 * r:])

    def operator(self, rows, index=None) -> np.ndarray:
        dirs = self.directions if index is None else self.directions[index]
        return _fc_operator_fast(rows, dirs, self.tau, self.dims)

    def solve(self, q, x0=None, index=None, tol: float = 1e-10, max_iter: int = 200,
              fir_only: bool = False) -> np.ndarray:
        """Minimise ``1/2 ||w - q||^2 + tau ||T_v w||^2`` row by row.

        Starts from ``x0`` when given, otherwise from the FIR estimate, then
        runs conjugate gradients on the exact normal equations until every
        row's residual is below ``tol * ||q_row||``. ``fir_only`` returns the
        FIR estimate untouched.
        """
        q = np.atleast_2d(np.asarray(q, dtype=float))
        if self.tau == 0:
            return q.copy()
        x = self.apply(q, index) if x0 is None else np.array(x0, dtype=float, copy=True)
        if fir_only:
            return x
        dirs = self.directions if index is None else self.directions[index]
        x, iters = _cg_solve(q, x, dirs, self.tau, self.dims, tol, max_iter)
        self.last_iterations = iters
        return x


@numba.njit(cache=True)
def _fc_apply_one(w, vx, vy, vz, s, t, out):
    # out = w + s T_v^T T_v w on one (nz, ny, nx) image; t is scratch
    nz, ny, nx = w.shape
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                c = w[k, j, i]
                acc = 0.0
                if i > 0:
                    acc += vx * (c - w[k, j, i - 1])
                if j > 0:
                    acc += vy * (c - w[k, j - 1, i])
                if k > 0:
                    acc += vz * (c - w[k - 1, j, i])
                t[k, j, i] = acc
    for k in range(nz):
        for j in range(ny):
            for i in range(nx):
                tc = t[k, j, i]
                acc = 0.0
                if i > 0:
                    acc += vx * tc
                if i < nx - 1:
                    acc -= vx * t[k, j, i + 1]
                if j > 0:
                    acc += vy * tc
                if j < ny - 1:
                    acc -= vy * t[k, j + 1, i]
                if k > 0:
                    acc += vz * tc
                if k < nz - 1:
                    acc -= vz * t[k + 1, j, i]
                out[k, j, i] = w[k, j, i] + s * acc


@numba.njit(cache=True)
def _fc_apply(w, V, tau, out):
    # fused w + 2 tau T_v^T T_v w, one direction per row
    t = np.empty(w.shape[1:])
    for r in range(w.shape[0]):
        _fc_apply_one(w[r], V[r, 0], V[r, 1], V[r, 2], 2.0 * tau, t, out[r])
    return out


@numba.njit(cache=True)
def _cg_fc(q, x, V, tau, tol, max_iter, iters):
    # conjugate gradients on (I + 2 tau T^T T) x = q, independently per row
    R, nz, ny, nx = q.shape
    n = nz * ny * nx
    t = np.empty((nz, ny, nx))
    ap = np.empty(n)
    res = np.empty(n)
    p = np.empty(n)
    ap3 = ap.reshape((nz, ny, nx))
    p3 = p.reshape((nz, ny, nx))
    s = 2.0 * tau
    for row in range(R):
        vx, vy, vz = V[row, 0], V[row, 1], V[row, 2]
        qr = q[row].reshape(n)
        xr = x[row].reshape(n)
        _fc_apply_one(x[row], vx, vy, vz, s, t, ap3)
        rs = 0.0
        qq = 0.0
        for i in range(n):
            d = qr[i] - ap[i]
            res[i] = d
            p[i] = d
            rs += d * d
            qq += qr[i] * qr[i]
        target = tol * tol * max(qq, 1e-300)
        it = 0
        while it < max_iter and rs > target:
            _fc_apply_one(p3, vx, vy, vz, s, t, ap3)
            pap = 0.0
            for i in range(n):
                pap += p[i] * ap[i]
            if pap <= 0.0:
                break
            alpha = rs / pap
            rs_new = 0.0
            for i in range(n):
                xr[i] += alpha * p[i]
                res[i] -= alpha * ap[i]
                rs_new += res[i] * res[i]
            beta = rs_new / rs
            for i in range(n):
                p[i] = res[i] + beta * p[i]
            rs = rs_new
            it += 1
        iters[row] = it
    return x


def _fc_operator_fast(rows, dirs, tau, dims):
    rows = np.ascontiguousarray(rows, dtype=float)
    g = to_grid(rows, dims)
    out = np.empty_like(g)
    _fc_apply(g, np.ascontiguousarray(np.atleast_2d(dirs), dtype=float), float(tau), out)
    return from_grid(out)


def _cg_solve(q, x, dirs, tau, dims, tol, max_iter):
    """Batched per-row CG; returns the solution rows and the iteration counts."""
    qg = np.ascontiguousarray(to_grid(np.asarray(q, dtype=float), dims))
    xg = np.ascontiguousarray(to_grid(np.asarray(x, dtype=float), dims)).copy()
    iters = np.zeros(qg.shape[0], dtype=np.int64)
    _cg_fc(qg, xg, np.ascontiguousarray(np.atleast_2d(dirs), dtype=float), float(tau),
           float(tol), int(max_iter), iters)
    return from_grid(xg), iters


def apply_filter(image, filt: DirectionalFilter, dims) -> np.ndarray:
    """FIR application of a single filter with half-sample symmetric boundaries."""
    bank = FilterBank([filt.direction], filt.tau, dims, size=filt.kernel.shape[0])
    out = bank.apply(np.asarray(image, dtype=float).reshape(1, -1))
    return out.reshape(np.shape(image))


def solve_fc_ls(q, v, tau: float, dims, tol: float = 1e-10, fir_only: bool = False) -> np.ndarray:
    """Fibre-continuity LS solve for one image row ``q`` of length ``I``."""
    if tau < 0:
        raise ValueError(f"tau must be non-negative, got {tau}")
    q = np.asarray(q, dtype=float)
    if tau == 0:
        return q.copy()
    bank = FilterBank([v], tau, dims)
    return bank.solve(q.reshape(1, -1), tol=tol, fir_only=fir_only).reshape(q.shape)
