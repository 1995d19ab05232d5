"""Quasi-uniform direction sets on the unit sphere.

Two generators are provided: geodesic tessellations of the icosahedron
(used both for acquisition schemes and reconstruction grids) and the
generalized spiral of Saff and Kuijlaars.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "DirectionSet",
    "MeshAdjacency",
    "icosa_tessellate",
    "saff_spiral",
    "read_gradient_table",
    "write_gradient_table",
    "angular_separation",
]

MAX_ORDER = 5
_ANTIPODAL_TOL = 1e-9
_SIGN_TOL = 1e-12


@dataclass(frozen=True)
class DirectionSet:
    """An ordered set of unit vectors with an optional diffusion weighting.

    ``b_value`` is ``None`` for pure reconstruction grids, which carry no
    diffusion weighting of their own.
    """

    vectors: np.ndarray
    b_value: float | None = None
    hemisphere: bool = False

    def __post_init__(self):
        vecs = np.array(self.vectors, dtype=float)
        if vecs.ndim != 2 or vecs.shape[1] != 3:
            raise ValueError(f"expected an (n, 3) array, got shape {vecs.shape}")
        norms = np.linalg.norm(vecs, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError("direction vectors must have unit length")
        # renormalise so the 1e-12 norm invariant holds after text round-trips
        vecs = vecs / norms[:, None]
        if self.b_value is not None and not self.b_value > 0:
            raise ValueError(f"b_value must be positive, got {self.b_value}")
        if len(vecs) > 1:
            # chord length equals the angle to first order and keeps full
            # precision at 1e-9, unlike a cosine test
            tree = cKDTree(vecs)
            if tree.query_pairs(_ANTIPODAL_TOL):
                raise ValueError("direction set contains duplicate directions")
            if self.hemisphere and any(tree.query_ball_point(-vecs, _ANTIPODAL_TOL)):
                raise ValueError("hemisphere direction set contains antipodal pairs")
        vecs.setflags(write=False)
        object.__setattr__(self, "vectors", vecs)

    def __len__(self):
        return len(self.vectors)

    def with_b_value(self, b_value: float) -> "DirectionSet":
        return DirectionSet(self.vectors, b_value, self.hemisphere)


@dataclass(frozen=True)
class MeshAdjacency:
    """Neighbour lists of a spherical tessellation, one tuple per vertex."""

    neighbours: tuple[tuple[int, ...], ...] = field(default_factory=tuple)

    def __len__(self):
        return len(self.neighbours)

    def __getitem__(self, i):
        return self.neighbours[i]

    def is_symmetric(self) -> bool:
        return all(i in self.neighbours[j] for i, nb in enumerate(self.neighbours) for j in nb)


def _icosahedron():
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    return verts / np.linalg.norm(verts, axis=1)[:, None], faces


def _subdivide(verts, faces):
    verts = list(verts)
    cache = {}

    def midpoint(a, b):
        key = (a, b) if a < b else (b, a)
        if key not in cache:
            m = verts[a] + verts[b]
            verts.append(m / np.linalg.norm(m))
            cache[key] = len(verts) - 1
        return cache[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
        new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
    return np.array(verts), new_faces


def _is_upper(p):
    """Sign rule choosing one representative of an antipodal pair."""
    x, y, z = p
    if abs(z) > _SIGN_TOL:
        return z > 0
    if abs(y) > _SIGN_TOL:
        return y > 0
    return x > 0


def icosa_tessellate(order: int, hemisphere: bool = True,
                     b_value: float | None = None) -> tuple[DirectionSet, MeshAdjacency]:
    """Vertices of the ``order``-times subdivided icosahedron.

    Each subdivision splits every triangle at its edge midpoints, which are
    pushed back onto the sphere, giving ``10 * 4**order + 2`` vertices. With
    ``hemisphere=True`` one vertex of each antipodal pair is kept (upper
    half-space, ties on the equator broken on y then x) and the mesh
    adjacency is folded through the antipodal identification.
    """
    if not isinstance(order, (int, np.integer)) or not 0 <= order <= MAX_ORDER:
        raise ValueError(f"tessellation order must be an integer in [0, {MAX_ORDER}], got {order!r}")
    verts, faces = _icosahedron()
    for _ in range(order):
        verts, faces = _subdivide(verts, faces)

    n = len(verts)
    nbrs = [set() for _ in range(n)]
    for a, b, c in faces:
        for p, q in ((a, b), (b, c), (c, a)):
            nbrs[p].add(q)
            nbrs[q].add(p)

    if not hemisphere:
        adj = MeshAdjacency(tuple(tuple(sorted(s)) for s in nbrs))
        return DirectionSet(verts, b_value, hemisphere=False), adj

    # the tessellation is centrally symmetric, so every vertex has an exact antipode
    antipode = np.argmax(-(verts @ verts.T), axis=1)
    keep = np.array([_is_upper(p) for p in verts])
    new_index = -np.ones(n, dtype=int)
    new_index[keep] = np.arange(keep.sum())
    rep = np.where(keep, new_index, new_index[antipode])

    folded = [set() for _ in range(int(keep.sum()))]
    for i in range(n):
        for j in nbrs[i]:
            a, b = rep[i], rep[j]
            if a != b:
                folded[a].add(b)
                folded[b].add(a)
    adj = MeshAdjacency(tuple(tuple(sorted(s)) for s in folded))
    return DirectionSet(verts[keep], b_value, hemisphere=True), adj


def saff_spiral(count: int, b_value: float | None = None) -> DirectionSet:
    """Generalized spiral points of Saff and Kuijlaars on the full sphere.

    Heights are equispaced in ``[-1, 1]``; the azimuth advances by
    ``3.6 / sqrt(count * (1 - h**2))``. The first and last points are the
    south and north poles.
    """
    if not isinstance(count, (int, np.integer)) or count < 2:
        raise ValueError(f"spiral needs at least 2 points, got {count!r}")
    h = -1.0 + 2.0 * np.arange(count) / (count - 1)
    theta = np.arccos(np.clip(h, -1.0, 1.0))
    phi = np.zeros(count)
    for k in range(1, count - 1):
        phi[k] = (phi[k - 1] + 3.6 / np.sqrt(count * (1.0 - h[k] ** 2))) % (2.0 * np.pi)
    pts = np.column_stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), h])
    pts[0] = (0.0, 0.0, -1.0)
    pts[-1] = (0.0, 0.0, 1.0)
    return DirectionSet(pts, b_value, hemisphere=False)


def angular_separation(a, b) -> np.ndarray:
    """Axial angle in radians between unit vectors (sign of either is ignored)."""
    cos = np.abs(np.sum(np.asarray(a) * np.asarray(b), axis=-1))
    return np.arccos(np.clip(cos, 0.0, 1.0))


def read_gradient_table(path, b_value: float, hemisphere: bool = False) -> DirectionSet:
    """Load a whitespace-separated ``x y z`` table; ``#`` starts a comment line."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 components, got {len(parts)}")
        rows.append([float(p) for p in parts])
    if not rows:
        raise ValueError(f"{path}: gradient table is empty")
    return DirectionSet(np.array(rows), b_value, hemisphere)


def write_gradient_table(dirs: DirectionSet, path) -> None:
    lines = [f"# {len(dirs)} directions, b = {dirs.b_value} s/mm^2"]
    lines += [" ".join(f"{c:.17g}" for c in v) for v in dirs.vectors]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
