"""Peak extraction and reconstruction-quality metrics against phantom ground truth."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .phantom import GroundTruth
from .presets import residual_idm
from .sphere import MeshAdjacency, angular_separation
from .volume import CoefficientVolume

__all__ = [
    "PeakSet",
    "MetricsReport",
    "grid_peaks",
    "extract_peaks",
    "fit_lobes",
    "aae",
    "tp_fp",
    "contrast",
    "peak_counts",
    "evaluate",
]

log = logging.getLogger(__name__)

PEAK_THRESHOLD = 0.2
GN_MAX_ITERS = 50
GN_STEP_TOL = 1e-8
GN_DAMPING = 1e-3
_INIT_CONCENTRATION = 20.0


@dataclass
class PeakSet:
    """Per-voxel peaks as ``(directions (M, 3), magnitudes (M,))`` sorted by magnitude."""

    voxels: np.ndarray
    directions: list
    magnitudes: list
    refined: np.ndarray = None
    diagnostics: list = field(default_factory=list)

    def counts(self) -> np.ndarray:
        return np.array([len(m) for m in self.magnitudes], dtype=int)

    def __len__(self):
        return len(self.voxels)


@dataclass
class MetricsReport:
    aae_deg: float
    tp_rate: float
    fp_rate: float
    contrast: float
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _neighbour_table(adjacency: MeshAdjacency) -> np.ndarray:
    n = len(adjacency)
    width = max(len(nb) for nb in adjacency.neighbours)
    table = np.empty((n, width), dtype=int)
    for i, nb in enumerate(adjacency.neighbours):
        row = list(nb) + [i] * (width - len(nb))
        table[i] = row
    return table


def _candidates(X: np.ndarray, table: np.ndarray, threshold: float) -> np.ndarray:
    """Boolean ``(J, N)`` mask of thresholded positive local maxima."""
    top = X.max(axis=0)
    nb_max = X[table].max(axis=1)
    return (X > 0) & (X >= nb_max) & (X >= threshold * top[None, :])


def _select(values: np.ndarray, cand: np.ndarray, adjacency: MeshAdjacency) -> np.ndarray:
    # strongest first; a maximum adjacent to an accepted one is a plateau duplicate
    cand = cand[np.argsort(-values[cand], kind="stable")]
    kept = []
    for c in cand:
        if not any(c in adjacency[k] for k in kept):
            kept.append(c)
    return np.array(kept, dtype=int)


def grid_peaks(values: np.ndarray, vectors: np.ndarray, adjacency: MeshAdjacency,
               threshold: float = PEAK_THRESHOLD, table: np.ndarray | None = None):
    """Local maxima of one fODF on the mesh, thresholded relative to its maximum.

    A vertex is a local maximum when it is positive and not below any mesh
    neighbour. Maxima below ``threshold * max`` are dropped, and a maximum
    adjacent to a stronger accepted one (a plateau) is not counted twice.
    Returns ``(directions, magnitudes, vertex_indices)``.
    """
    x = np.asarray(values, dtype=float)
    if table is None:
        table = _neighbour_table(adjacency)
    kept = _select(x, np.flatnonzero(_candidates(x[:, None], table, threshold)[:, 0]), adjacency)
    return vectors[kept], x[kept], kept


def _grid_peak_indices(fodf, voxels, adjacency, threshold):
    table = _neighbour_table(adjacency)
    X = fodf[:, voxels]
    mask = _candidates(X, table, threshold)
    n_cand = mask.sum(axis=0)
    out = []
    for col in range(X.shape[1]):
        cand = np.flatnonzero(mask[:, col])
        out.append(cand if n_cand[col] <= 1 else _select(X[:, col], cand, adjacency))
    return out


def peak_counts(fodf: np.ndarray, adjacency: MeshAdjacency, voxels=None,
                threshold: float = PEAK_THRESHOLD) -> np.ndarray:
    """Thresholded local-maximum count per voxel column of ``fodf`` (J x I)."""
    fodf = np.asarray(fodf, dtype=float)
    voxels = np.arange(fodf.shape[1]) if voxels is None else np.asarray(voxels)
    return np.array([len(k) for k in _grid_peak_indices(fodf, voxels, adjacency, threshold)], dtype=int)


def _sym_from_params(p):
    # p[..., 6] -> symmetric (..., 3, 3)
    a = np.empty(p.shape[:-1] + (3, 3))
    a[..., 0, 0], a[..., 1, 1], a[..., 2, 2] = p[..., 0], p[..., 1], p[..., 2]
    a[..., 0, 1] = a[..., 1, 0] = p[..., 3]
    a[..., 0, 2] = a[..., 2, 0] = p[..., 4]
    a[..., 1, 2] = a[..., 2, 1] = p[..., 5]
    return a


def fit_lobes(values: np.ndarray, vectors: np.ndarray, seeds: np.ndarray,
              seed_heights: np.ndarray, max_iters: int = GN_MAX_ITERS,
              step_tol: float = GN_STEP_TOL, damping: float = GN_DAMPING):
    """Levenberg-damped Gauss-Newton fit of ``sum_l exp(u^T A_l u)`` for a batch of voxels.

    ``values`` is ``(N, J)``, ``seeds`` ``(N, M, 3)`` and ``seed_heights``
    ``(N, M)``. Returns the principal eigenvectors ``(N, M, 3)`` and a
    boolean ``ok`` flag per voxel (False when the fit degenerated).
    """
    # rejected trial steps may overflow; they are discarded by the cost test
    with np.errstate(over="ignore", invalid="ignore"):
        return _fit_lobes(values, vectors, seeds, seed_heights, max_iters, step_tol, damping)


def _fit_lobes(values, vectors, seeds, seed_heights, max_iters, step_tol, damping):
    values = np.asarray(values, dtype=float)
    N, J = values.shape
    M = seeds.shape[1]
    u = np.asarray(vectors, dtype=float)
    # design of u^T A u in the 6 symmetric parameters
    basis = np.column_stack([u[:, 0] ** 2, u[:, 1] ** 2, u[:, 2] ** 2,
                             2 * u[:, 0] * u[:, 1], 2 * u[:, 0] * u[:, 2], 2 * u[:, 1] * u[:, 2]])
    eye = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    s = seeds
    outer = np.stack([s[..., 0] ** 2, s[..., 1] ** 2, s[..., 2] ** 2,
                      s[..., 0] * s[..., 1], s[..., 0] * s[..., 2], s[..., 1] * s[..., 2]], axis=-1)
    h = np.log(np.maximum(seed_heights, 1e-12))
    params = _INIT_CONCENTRATION * outer + (h - _INIT_CONCENTRATION)[..., None] * eye
    params = params.reshape(N, M * 6)

    def model(p):
        e = np.exp(np.clip(p.reshape(N, M, 6) @ basis.T, -700, 700))
        return e, e.sum(axis=1)

    e, m = model(params)
    cost = np.sum((m - values) ** 2, axis=1)
    lam = np.full(N, damping)
    active = np.ones(N, dtype=bool)
    for _ in range(max_iters):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        r = m[idx] - values[idx]
        jac = (e[idx][..., None] * basis[None, None]).transpose(0, 2, 1, 3).reshape(len(idx), J, M * 6)
        jac_t = jac.transpose(0, 2, 1)
        jtj = jac_t @ jac
        jtr = (jac_t @ r[..., None])[..., 0]
        diag = np.einsum("npp->np", jtj)
        A = jtj + (lam[idx, None] * (diag + 1e-12))[..., None] * np.eye(M * 6)
        try:
            step = -np.linalg.solve(A, jtr[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = -np.stack([np.linalg.lstsq(a, b, rcond=None)[0] for a, b in zip(A, jtr)])
        trial = params[idx] + step
        e_t = np.exp(np.clip(trial.reshape(len(idx), M, 6) @ basis.T, -700, 700))
        m_t = e_t.sum(axis=1)
        cost_t = np.sum((m_t - values[idx]) ** 2, axis=1)
        better = np.isfinite(cost_t) & (cost_t < cost[idx])
        acc = idx[better]
        params[acc] = trial[better]
        e[acc], m[acc], cost[acc] = e_t[better], m_t[better], cost_t[better]
        lam[acc] = np.maximum(lam[acc] / 10.0, 1e-12)
        rej = idx[~better]
        lam[rej] = lam[rej] * 10.0
        small = np.max(np.abs(step), axis=1) < step_tol
        active[idx[small]] = False
        active[rej[lam[rej] > 1e12]] = False

    A = _sym_from_params(params.reshape(N, M, 6))
    w, vec = np.linalg.eigh(A)
    principal = vec[..., :, -1]
    gap = w[..., -1] - w[..., -2]
    ok = np.all(np.isfinite(params), axis=1) & np.all(gap > 1e-6, axis=1)
    return principal, ok


def extract_peaks(coeffs: CoefficientVolume | np.ndarray, adjacency: MeshAdjacency,
                  known_count=None, vectors: np.ndarray | None = None, voxels=None,
                  threshold: float = PEAK_THRESHOLD) -> PeakSet:
    """Thresholded grid maxima per voxel, optionally refined by a lobe fit.

    With ``known_count`` (an int or one value per selected voxel) the
    strongest ``M`` grid maxima seed a fit of ``sum_l exp(u^T A_l u)`` and the
    reported directions become the principal axes of the ``A_l``. Voxels
    whose fit degenerates keep their grid maxima and are listed in
    ``diagnostics``.
    """
    if isinstance(coeffs, CoefficientVolume):
        fodf = coeffs.fodf
        vectors = coeffs.recon_dirs.vectors
    else:
        fodf = np.asarray(coeffs, dtype=float)
        if vectors is None:
            raise ValueError("vectors are required with a raw coefficient array")
    voxels = np.arange(fodf.shape[1]) if voxels is None else np.asarray(voxels, dtype=int)
    dirs, mags = [], []
    for vox, kept in zip(voxels, _grid_peak_indices(fodf, voxels, adjacency, threshold)):
        dirs.append(vectors[kept])
        mags.append(fodf[kept, vox])
    peaks = PeakSet(voxels, dirs, mags, refined=np.zeros(len(voxels), dtype=bool))
    if known_count is None:
        return peaks

    wanted = np.broadcast_to(np.asarray(known_count, dtype=int), (len(voxels),))
    for M in np.unique(wanted):
        if M < 1:
            continue
        sel = [n for n in np.flatnonzero(wanted == M) if len(mags[n]) >= M]
        short = [n for n in np.flatnonzero(wanted == M) if len(mags[n]) < M]
        for n in short:
            peaks.diagnostics.append((int(voxels[n]), f"only {len(mags[n])} grid maxima for {M} lobes"))
        if not sel:
            continue
        seeds = np.stack([dirs[n][:M] for n in sel])
        heights = np.stack([mags[n][:M] for n in sel])
        vals = fodf[:, voxels[sel]].T
        principal, ok = fit_lobes(vals, vectors, seeds, heights)
        for row, n in enumerate(sel):
            if ok[row]:
                dirs[n] = principal[row] * np.sign(np.sum(principal[row] * seeds[row], axis=1))[:, None]
                mags[n] = mags[n][:M]
                peaks.refined[n] = True
            else:
                peaks.diagnostics.append((int(voxels[n]), "lobe fit degenerated; grid maxima kept"))
    return peaks


def _match(est: np.ndarray, true: np.ndarray) -> list:
    """Greedy minimal-angle pairing of estimated and true axes; returns angles (rad)."""
    if len(est) == 0 or len(true) == 0:
        return []
    ang = angular_separation(est[:, None, :], true[None, :, :])
    out = []
    ang = ang.copy()
    for _ in range(min(len(est), len(true))):
        a, b = np.unravel_index(np.argmin(ang), ang.shape)
        out.append(float(ang[a, b]))
        ang[a, :] = np.inf
        ang[:, b] = np.inf
    return out


def aae(peaks: PeakSet, truth: GroundTruth) -> float:
    """Average angular error in degrees over voxels whose peak count is correct.

    Returns NaN when no voxel qualifies.
    """
    angles = []
    for n, vox in enumerate(peaks.voxels):
        m0 = truth.fibre_count[vox]
        if m0 < 1 or len(peaks.magnitudes[n]) != m0:
            continue
        angles += _match(np.asarray(peaks.directions[n]), truth.directions_at(vox))
    if not angles:
        return float("nan")
    return float(np.degrees(np.mean(angles)))


def tp_fp(peaks: PeakSet | np.ndarray, truth: GroundTruth, voxels=None) -> tuple[float, float]:
    """Fraction of fibre voxels with the right peak count, and mean overcount."""
    if isinstance(peaks, PeakSet):
        counts, voxels = peaks.counts(), peaks.voxels
    else:
        counts = np.asarray(peaks, dtype=int)
        voxels = np.arange(len(counts)) if voxels is None else np.asarray(voxels)
    m0 = truth.fibre_count[voxels]
    sel = m0 >= 1
    if not sel.any():
        return float("nan"), float("nan")
    c, m = counts[sel], m0[sel]
    return float(np.mean(c == m)), float(np.mean(np.maximum(c - m, 0)))


def contrast(idm, truth: GroundTruth) -> float:
    """``2 |mu_in - mu_out| / (sigma_in + sigma_out)`` between fibre and background regions."""
    idm = np.asarray(idm, dtype=float)
    inside = np.asarray(truth.inside, dtype=bool)
    if idm.shape != inside.shape:
        raise ValueError(f"IDM has {idm.shape} entries, ground truth {inside.shape}")
    a, b = idm[inside], idm[~inside]
    if len(a) == 0 or len(b) == 0:
        raise ValueError("contrast needs both inside and outside voxels")
    dmu = abs(float(a.mean()) - float(b.mean()))
    sig = float(a.std()) + float(b.std())
    if sig == 0.0:
        return math.inf if dmu > 0 else 0.0
    return 2.0 * dmu / sig


def evaluate(coeffs: CoefficientVolume, truth: GroundTruth, adjacency: MeshAdjacency,
             signal=None, H: np.ndarray | None = None, refine: bool = True) -> MetricsReport:
    """All four quality measures of one reconstruction.

    Peaks are counted on fibre voxels. Voxels with the right count have their
    directions refined by the lobe fit (when ``refine``) before the angular
    error is taken. Without an isotropic row the IDM is estimated from the
    residual of ``signal`` against ``H``.
    """
    inside = np.flatnonzero(truth.fibre_count >= 1)
    peaks = extract_peaks(coeffs, adjacency, voxels=inside)
    counts = peaks.counts()
    tp, fp = tp_fp(counts, truth, voxels=inside)
    matched = counts == truth.fibre_count[inside]
    diagnostics = []
    if refine and matched.any():
        fitted = extract_peaks(coeffs, adjacency, known_count=truth.fibre_count[inside][matched],
                               voxels=inside[matched])
        diagnostics = fitted.diagnostics
        err = aae(fitted, truth)
    else:
        err = aae(peaks, truth)
    if coeffs.has_iso:
        idm = coeffs.idm
    else:
        if signal is None or H is None:
            raise ValueError("signal and H are needed to estimate the IDM of a method without isotropic row")
        idm = residual_idm(signal, H, coeffs.fodf)
    meta = {
        "matched_voxels": int(matched.sum()),
        "fibre_voxels": int(len(inside)),
        "fit_fallbacks": len(diagnostics),
    }
    if 0 < len(inside) < len(truth.fibre_count):
        c = contrast(idm, truth)
    else:
        c = float("nan")
        meta["contrast"] = "undefined: volume has no background or no fibre voxels"
    return MetricsReport(err, tp, fp, c, meta)
