"""Reference deconvolution methods expressed as solver configurations."""
from __future__ import annotations

import dataclasses

import numpy as np

from .solver import SolverConfig
from .volume import CoefficientVolume, SignalVolume

__all__ = ["PRESETS", "METHOD_NAMES", "make_preset", "residual_idm", "canonical_method"]

# (lam, mu, nu, include_iso_column)
PRESETS = {
    "CSD": (0.0, 0.0, 0.0, False),
    "MinL1": (0.01, 0.0, 0.0, False),
    "CSDFC": (0.0, 0.01, 0.0, False),
    "MinTVL1": (0.07, 0.0, 0.01, True),
    "SCSD": (0.03, 0.4, 0.01, True),
}
METHOD_NAMES = tuple(PRESETS)
_ALIASES = {name.lower(): name for name in PRESETS}


def canonical_method(name: str) -> str:
    try:
        return _ALIASES[name.lower().replace("-", "").replace("_", "")]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(METHOD_NAMES)}") from None


def make_preset(name: str, **overrides) -> SolverConfig:
    """Solver configuration of a named method, optionally with non-weight overrides."""
    lam, mu, nu, iso = PRESETS[canonical_method(name)]
    cfg = SolverConfig(lam=lam, mu=mu, nu=nu, delta_u=0.5, delta_v=0.5, include_iso_column=iso)
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def residual_idm(s: SignalVolume | np.ndarray, H: np.ndarray,
                 f_a: CoefficientVolume | np.ndarray) -> np.ndarray:
    """Per-voxel mean over directions of ``H f_a - s`` (scale constant set to 1)."""
    S = s.data if isinstance(s, SignalVolume) else np.asarray(s, dtype=float)
    F = f_a.fodf if isinstance(f_a, CoefficientVolume) else np.asarray(f_a, dtype=float)
    H = np.asarray(H, dtype=float)
    if H.shape[0] != S.shape[0] or H.shape[1] != F.shape[0] or F.shape[1] != S.shape[1]:
        raise ValueError(f"shape mismatch: H {H.shape}, f_a {F.shape}, s {S.shape}")
    return np.mean(H @ F - S, axis=0)
