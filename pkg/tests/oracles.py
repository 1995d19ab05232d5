"""Independent reference solvers used by the test-suite.

Everything here is written against explicit (dense or sparse) matrices
built from first principles, sharing no code with the package's solvers.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def backward_diff_1d(n: int) -> sp.csr_matrix:
    """Backward difference with the first sample's difference set to zero."""
    if n == 1:
        return sp.csr_matrix((1, 1))
    main = np.ones(n)
    main[0] = 0.0
    lower = -np.ones(n - 1)
    return sp.diags([main, lower], [0, -1], format="csr")


def axis_diffs(dims):
    """Sparse backward-difference matrices along x, y, z for x-fastest voxel order."""
    nx, ny, nz = dims
    Ix, Iy, Iz = sp.identity(nx), sp.identity(ny), sp.identity(nz)
    dx = sp.kron(Iz, sp.kron(Iy, backward_diff_1d(nx)))
    dy = sp.kron(Iz, sp.kron(backward_diff_1d(ny), Ix))
    dz = sp.kron(backward_diff_1d(nz), sp.kron(Iy, Ix))
    return [sp.csr_matrix(d) for d in (dx, dy, dz)]


def directional_matrix(dims, v) -> sp.csr_matrix:
    dx, dy, dz = axis_diffs(dims)
    return sp.csr_matrix(v[0] * dx + v[1] * dy + v[2] * dz)


def dense_fc_solve(q, v, tau, dims):
    """Direct solve of ``(I + 2 tau T^T T) w = q``."""
    T = directional_matrix(dims, v)
    A = sp.identity(T.shape[0]) + 2.0 * tau * (T.T @ T)
    return sp.linalg.spsolve(sp.csc_matrix(A), np.asarray(q, dtype=float))


def tv_value(x, dims) -> float:
    g = np.stack([d @ x for d in axis_diffs(dims)])
    return float(np.sum(np.sqrt(np.sum(g * g, axis=0))))


class DenseTvProx:
    """Prox of ``shift * 1^T x + w * TV(x)`` subject to ``x >= 0``.

    Projected gradient on the dual field (the constrained TV scheme of
    Beck and Teboulle), with a persistent warm start between calls.
    """

    def __init__(self, dims):
        self.G = sp.vstack(axis_diffs(dims)).tocsr()
        self.GT = self.G.T.tocsr()
        self.n = int(np.prod(dims))
        self.L = max(float(sp.linalg.norm(self.G, 1) * sp.linalg.norm(self.G, np.inf)), 1e-12)
        self.p = np.zeros(3 * self.n)

    def __call__(self, z, w, shift=0.0, iters=10):
        if w == 0:
            return np.maximum(z - shift, 0.0)
        p = self.p
        t = 1.0 / (w * w * self.L)
        for _ in range(iters):
            x = np.maximum(z - shift - w * (self.GT @ p), 0.0)
            p = p + t * w * (self.G @ x)
            mag = np.sqrt(np.sum(p.reshape(3, self.n) ** 2, axis=0))
            p = (p.reshape(3, self.n) / np.maximum(mag, 1.0)).ravel()
        self.p = p
        return np.maximum(z - shift - w * (self.GT @ p), 0.0)


def scsd_cost(f, M, s, lam, mu, nu, dirs, dims, iso=True):
    J = len(dirs)
    r = M @ f - s
    val = 0.5 * np.sum(r * r) + lam * np.sum(np.abs(f))
    if mu:
        for j in range(J):
            t = directional_matrix(dims, dirs[j]) @ f[j]
            val += mu * float(t @ t)
    if nu and iso:
        val += nu * tv_value(f[J], dims)
    return float(val)


def fista_scsd(M, s, lam, mu, nu, dirs, dims, iso=True, iters=100_000, inner=10):
    """Accelerated proximal gradient on the full cost.

    Smooth part: data fit plus the fibre-continuity quadratic. Prox part:
    the l1 term with non-negativity on every row plus, for the isotropic
    row, ``nu * TV``.
    """
    M = np.asarray(M, dtype=float)
    n_rows, n_vox = M.shape[1], s.shape[1]
    J = len(dirs)
    Q = [None] * J
    fc_norm = 0.0
    if mu:
        for j in range(J):
            T = directional_matrix(dims, dirs[j])
            Q[j] = (T.T @ T).toarray()
            fc_norm = max(fc_norm, np.linalg.eigvalsh(Q[j])[-1])
    Qs = np.stack(Q) if mu else None
    L = np.linalg.eigvalsh(M.T @ M)[-1] + 2.0 * mu * fc_norm
    step = 1.0 / L
    MtM, Mts = M.T @ M, M.T @ s
    tv = DenseTvProx(dims)
    f = np.zeros((n_rows, n_vox))
    y = f.copy()
    t = 1.0
    for _ in range(int(iters)):
        grad = MtM @ y - Mts
        if mu:
            grad[:J] += 2.0 * mu * np.einsum("jab,jb->ja", Qs, y[:J])
        z = y - step * grad
        f_new = np.maximum(z - step * lam, 0.0)
        if iso and nu:
            f_new[J] = tv(z[J], step * nu, shift=step * lam, iters=inner)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = f_new + ((t - 1.0) / t_new) * (f_new - f)
        f, t = f_new, t_new
    return f


def nnls_projected_gradient(M, s, iters=20_000):
    """Plain projected gradient for ``min 1/2 ||M f - s||^2, f >= 0``, column by column."""
    M = np.asarray(M, dtype=float)
    L = np.linalg.eigvalsh(M.T @ M)[-1]
    f = np.zeros((M.shape[1], s.shape[1]))
    y, t = f.copy(), 1.0
    for _ in range(iters):
        f_new = np.maximum(y - (M.T @ (M @ y - s)) / L, 0.0)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = f_new + ((t - 1.0) / t_new) * (f_new - f)
        f, t = f_new, t_new
    return f


def two_level_tv_oracle(q, weight, n_grid=4001):
    """Best piecewise-constant two-level solution for a 1-D step signal.

    For ``q`` equal to ``a`` on the first ``m`` samples and ``b`` on the
    rest, the TV-prox solution keeps that shape. The cost over candidate
    levels ``(x1, x2)`` is minimised by golden-section search over the jump
    ``d = x2 - x1`` with the mean fixed.
    """
    q = np.asarray(q, dtype=float)
    jump = np.flatnonzero(np.diff(q))
    assert len(jump) == 1
    m = jump[0] + 1
    n = len(q)
    mean = q.mean()

    def cost(d):
        x1 = mean - d * (n - m) / n
        x2 = x1 + d
        x = np.r_[np.full(m, x1), np.full(n - m, x2)]
        return 0.5 * np.sum((x - q) ** 2) + weight * abs(d)

    lo, hi = -abs(q[-1] - q[0]) - 1.0, abs(q[-1] - q[0]) + 1.0
    g = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    for _ in range(200):
        if cost(c) < cost(d):
            b = d
        else:
            a = c
        c, d = b - g * (b - a), a + g * (b - a)
    return cost(0.5 * (a + b))
