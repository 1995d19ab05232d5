"""Signal and coefficient volumes over a 3-D voxel grid, and their file format.

A volume is stored as a pair ``<name>.json`` (header) and ``<name>.raw``
(payload). The payload holds ``num_rows`` rows, each contiguous over the
``nx * ny * nz`` voxels in x-fastest order, little-endian float32 or float64.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sphere import DirectionSet

__all__ = [
    "SignalVolume",
    "CoefficientVolume",
    "VolumeFormatError",
    "voxel_index",
    "to_grid",
    "from_grid",
    "save_volume",
    "load_volume",
]

_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}


class VolumeFormatError(ValueError):
    pass


def _check_dims(dims):
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or min(dims) < 1:
        raise ValueError(f"dims must be three positive integers, got {dims}")
    return dims


def voxel_index(i: int, j: int, k: int, dims) -> int:
    """Linear index of voxel ``(i, j, k)`` with x varying fastest."""
    nx, ny, nz = _check_dims(dims)
    if not (0 <= i < nx and 0 <= j < ny and 0 <= k < nz):
        raise IndexError(f"voxel ({i}, {j}, {k}) outside grid {dims}")
    return i + nx * (j + ny * k)


def to_grid(data, dims) -> np.ndarray:
    """View ``(..., I)`` voxel rows as ``(..., nz, ny, nx)`` arrays.

    With x-fastest linear indexing the C-order grid axes run z, y, x, so
    the last array axis is x.
    """
    nx, ny, nz = dims
    data = np.asarray(data)
    return data.reshape(data.shape[:-1] + (nz, ny, nx))


def from_grid(grid) -> np.ndarray:
    grid = np.asarray(grid)
    return grid.reshape(grid.shape[:-3] + (-1,))


@dataclass(frozen=True)
class SignalVolume:
    """K x I matrix of normalised diffusion measurements."""

    dims: tuple[int, int, int]
    data: np.ndarray
    acquisition: DirectionSet

    def __post_init__(self):
        dims = _check_dims(self.dims)
        object.__setattr__(self, "dims", dims)
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape != (len(self.acquisition), int(np.prod(dims))):
            raise ValueError(
                f"signal data shape {data.shape} does not match "
                f"K={len(self.acquisition)}, I={int(np.prod(dims))}")
        if not np.all(np.isfinite(data)) or np.any(data < 0):
            raise ValueError("signal entries must be finite and non-negative")

    @property
    def K(self) -> int:
        return self.data.shape[0]

    @property
    def num_voxels(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class CoefficientVolume:
    """Per-voxel fODF coefficients on ``recon_dirs``, plus the IDM row if ``has_iso``."""

    dims: tuple[int, int, int]
    data: np.ndarray
    recon_dirs: DirectionSet
    has_iso: bool = True

    def __post_init__(self):
        dims = _check_dims(self.dims)
        object.__setattr__(self, "dims", dims)
        rows = len(self.recon_dirs) + int(self.has_iso)
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape != (rows, int(np.prod(dims))):
            raise ValueError(f"coefficient data shape {data.shape}, expected ({rows}, {int(np.prod(dims))})")
        if not np.all(np.isfinite(data)):
            raise ValueError("coefficient entries must be finite")

    @property
    def J(self) -> int:
        return len(self.recon_dirs)

    @property
    def fodf(self) -> np.ndarray:
        return self.data[: self.J]

    @property
    def idm(self) -> np.ndarray | None:
        return self.data[self.J] if self.has_iso else None


def _paths(path):
    path = Path(path)
    if path.suffix in (".json", ".raw"):
        path = path.with_suffix("")
    return Path(f"{path}.json"), Path(f"{path}.raw")


def _dirs_header(dirs: DirectionSet):
    return {"vectors": dirs.vectors.tolist(), "b_value": dirs.b_value, "hemisphere": dirs.hemisphere}


def _dirs_from_header(h):
    return DirectionSet(np.array(h["vectors"], dtype=float), h["b_value"], h["hemisphere"])


def save_volume(vol, path, dtype: str = "f64") -> None:
    """Write ``vol`` to ``<path>.json`` + ``<path>.raw``."""
    if dtype not in _DTYPES:
        raise VolumeFormatError(f"unsupported dtype {dtype!r}")
    header_path, raw_path = _paths(path)
    header = {
        "dims": list(vol.dims),
        "num_rows": int(vol.data.shape[0]),
        "dtype": dtype,
        "byte_order": "little",
        "ordering": "x-fastest",
    }
    if isinstance(vol, SignalVolume):
        header["kind"] = "signal"
        header["directions"] = _dirs_header(vol.acquisition)
    elif isinstance(vol, CoefficientVolume):
        header["kind"] = "coefficients"
        header["directions"] = _dirs_header(vol.recon_dirs)
        header["has_iso"] = vol.has_iso
    else:
        raise TypeError(f"cannot save object of type {type(vol).__name__}")
    header_path.parent.mkdir(parents=True, exist_ok=True)
    header_path.write_text(json.dumps(header, indent=1), encoding="utf-8")
    np.ascontiguousarray(vol.data, dtype=_DTYPES[dtype]).tofile(raw_path)


def load_volume(path):
    header_path, raw_path = _paths(path)
    header = json.loads(header_path.read_text(encoding="utf-8"))
    dtype = _DTYPES.get(header.get("dtype"))
    if dtype is None:
        raise VolumeFormatError(f"unsupported payload dtype {header.get('dtype')!r}")
    if header.get("byte_order", "little") != "little" or header.get("ordering", "x-fastest") != "x-fastest":
        raise VolumeFormatError("only little-endian, x-fastest payloads are supported")
    dims = _check_dims(header["dims"])
    rows = int(header["num_rows"])
    expected = rows * int(np.prod(dims)) * dtype.itemsize
    actual = raw_path.stat().st_size
    if actual != expected:
        raise VolumeFormatError(f"payload has {actual} bytes, header implies {expected}")
    data = np.fromfile(raw_path, dtype=dtype).reshape(rows, -1).astype(dtype.newbyteorder("="))
    if not np.all(np.isfinite(data)):
        raise VolumeFormatError("payload contains non-finite entries")
    dirs = _dirs_from_header(header["directions"])
    if header.get("kind") == "coefficients":
        return CoefficientVolume(dims, data, dirs, bool(header.get("has_iso", True)))
    return SignalVolume(dims, data, dirs)
