"""Two-bundle crossing phantom with an isotropic background."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .model import SfrParams, TensorCompartment, add_rician_noise, synth_signal
from .sphere import DirectionSet, icosa_tessellate
from .volume import SignalVolume

__all__ = [
    "PhantomSpec",
    "GroundTruth",
    "generate_phantom",
    "bundle_directions",
    "DEFAULT_SFR",
    "DEFAULT_ISO_DIFFUSIVITY",
]

DEFAULT_ISO_DIFFUSIVITY = 8e-4
LAMBDA_PAR = 17e-4
LAMBDA_PERP = 3e-4
DEFAULT_SFR = SfrParams(LAMBDA_PAR, LAMBDA_PERP, 3000.0)


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int] = (16, 16, 12)
    crossing_angle: float = 60.0
    fibre_radius_vox: float = 4.0
    p_iso_inside: float = 0.25
    iso_diffusivity: float = DEFAULT_ISO_DIFFUSIVITY
    sfr: SfrParams = field(default_factory=lambda: DEFAULT_SFR)
    snr: float = float("inf")
    seed: int = 0
    acq_order: int = 2

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise ValueError(f"dims must be three positive integers, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        if not 0.0 <= self.crossing_angle <= 90.0:
            raise ValueError(f"crossing angle must lie in [0, 90] degrees, got {self.crossing_angle}")
        if not 0.0 <= self.p_iso_inside <= 1.0:
            raise ValueError(f"p_iso_inside must lie in [0, 1], got {self.p_iso_inside}")
        if not self.fibre_radius_vox > 0:
            raise ValueError("fibre radius must be positive")
        if not self.snr > 0:
            raise ValueError(f"snr must be positive (or inf), got {self.snr}")
        if not self.iso_diffusivity > 0:
            raise ValueError("isotropic diffusivity must be positive")

    @property
    def b_value(self) -> float:
        return self.sfr.b_value

    def acquisition(self) -> DirectionSet:
        dirs, _ = icosa_tessellate(self.acq_order, hemisphere=True, b_value=self.b_value)
        return dirs

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["snr"] = "inf" if np.isinf(self.snr) else self.snr
        return d


@dataclass
class GroundTruth:
    """Per-voxel fibre counts, directions (NaN padded to 2), IDM and region labels."""

    dims: tuple[int, int, int]
    fibre_count: np.ndarray
    directions: np.ndarray
    idm: np.ndarray
    inside: np.ndarray

    def directions_at(self, i: int) -> np.ndarray:
        return self.directions[i, : self.fibre_count[i]]

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "fibre_count": self.fibre_count.tolist(),
            "directions": [self.directions_at(i).tolist() for i in range(len(self.fibre_count))],
            "idm": self.idm.tolist(),
            "inside": self.inside.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GroundTruth":
        n = len(d["fibre_count"])
        dirs = np.full((n, 2, 3), np.nan)
        for i, lst in enumerate(d["directions"]):
            if lst:
                dirs[i, : len(lst)] = lst
        return cls(tuple(d["dims"]), np.array(d["fibre_count"], dtype=int), dirs,
                   np.array(d["idm"], dtype=float), np.array(d["inside"], dtype=bool))

    def save(self, path, spec: PhantomSpec | None = None) -> None:
        d = self.to_dict()
        if spec is not None:
            d["phantom"] = spec.to_dict()
        Path(path).write_text(json.dumps(d), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "GroundTruth":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def bundle_directions(crossing_angle: float) -> np.ndarray:
    """Bundle axes in the x-y plane at +/- half the crossing angle from the y axis."""
    h = np.radians(crossing_angle) / 2.0
    return np.array([[np.sin(h), np.cos(h), 0.0], [-np.sin(h), np.cos(h), 0.0]])


def generate_phantom(spec: PhantomSpec) -> tuple[SignalVolume, GroundTruth]:
    """Signals and ground truth for two straight cylindrical bundles crossing at the centre.

    A voxel belongs to a bundle when its centre lies within ``fibre_radius_vox``
    of the bundle axis. Overlap voxels mix both bundles in equal proportion.
    Fibre voxels carry isotropic fraction ``p_iso_inside``; all other voxels
    are purely isotropic. Rician noise uses one sigma for the whole volume.
    """
    nx, ny, nz = spec.dims
    acq = spec.acquisition()
    sfr = spec.sfr
    axes = bundle_directions(spec.crossing_angle)
    if spec.crossing_angle == 0:
        axes = axes[:1]

    # voxel centres in linear (x-fastest) order
    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    centre = np.array([(nx - 1) / 2.0, (ny - 1) / 2.0, (nz - 1) / 2.0])
    pts = np.column_stack([i.ravel(), j.ravel(), k.ravel()]).astype(float) - centre
    member = []
    for a in axes:
        along = pts @ a
        dist = np.linalg.norm(pts - along[:, None] * a, axis=1)
        member.append(dist <= spec.fibre_radius_vox + 1e-9)
    member = np.array(member)

    n_vox = nx * ny * nz
    counts = member.sum(axis=0).astype(int)
    directions = np.full((n_vox, 2, 3), np.nan)
    iso_value = float(np.exp(-sfr.b_value * spec.iso_diffusivity))
    idm = np.full(n_vox, iso_value)
    inside = counts > 0
    idm[inside] = spec.p_iso_inside * iso_value

    data = np.empty((len(acq), n_vox))
    cache = {}
    for vox in range(n_vox):
        key = tuple(np.flatnonzero(member[:, vox]))
        for slot, m in enumerate(key):
            directions[vox, slot] = axes[m]
        if key not in cache:
            if key:
                comps = [TensorCompartment(axes[m], 1.0 / len(key), sfr.lambda_par, sfr.lambda_perp)
                         for m in key]
                cache[key] = synth_signal(comps, spec.p_iso_inside, spec.iso_diffusivity, acq)
            else:
                cache[key] = synth_signal([], 1.0, spec.iso_diffusivity, acq)
        data[:, vox] = cache[key]

    if not np.isinf(spec.snr):
        data = add_rician_noise(data, spec.snr, np.random.default_rng(spec.seed))
    truth = GroundTruth(spec.dims, counts, directions, idm, inside)
    return SignalVolume(spec.dims, data, acq), truth
