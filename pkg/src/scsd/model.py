"""Single-fibre response, dictionaries, multi-tensor synthesis and Rician noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sphere import DirectionSet

__all__ = [
    "SfrParams",
    "Dictionary",
    "TensorCompartment",
    "SfrEstimationError",
    "sfr_eval",
    "build_dictionary",
    "synth_signal",
    "add_rician_noise",
    "fit_sfr",
    "diffusivities_from_fa_md",
]


class SfrEstimationError(ValueError):
    """Tensor fit produced a response that is not cylindrically anisotropic."""


@dataclass(frozen=True)
class SfrParams:
    """Axially symmetric single-fibre response (diffusivities in mm^2/s)."""

    lambda_par: float
    lambda_perp: float
    b_value: float

    def __post_init__(self):
        if not self.lambda_perp > 0:
            raise ValueError(f"lambda_perp must be positive, got {self.lambda_perp}")
        if not self.lambda_par > self.lambda_perp:
            raise ValueError("lambda_par must exceed lambda_perp")
        if not self.b_value > 0:
            raise ValueError(f"b_value must be positive, got {self.b_value}")

    @property
    def alpha_tilde(self) -> float:
        return float(np.exp(-self.b_value * self.lambda_perp))

    @property
    def beta_tilde(self) -> float:
        return float(self.b_value * (self.lambda_par - self.lambda_perp))


def sfr_eval(sfr: SfrParams, cos_angle, squared: bool = True):
    """Response ``alpha * exp(-beta * c**2)`` at ``c = u . v``.

    ``squared=False`` evaluates the kernel with the linear exponent
    ``alpha * exp(-beta * c)``, which is not antipodally symmetric.
    """
    c = np.asarray(cos_angle, dtype=float)
    if np.any(np.abs(c) > 1.0 + 1e-12):
        raise ValueError("cosine argument outside [-1, 1]")
    c = np.clip(c, -1.0, 1.0)
    arg = c * c if squared else c
    out = sfr.alpha_tilde * np.exp(-sfr.beta_tilde * arg)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class Dictionary:
    """Kernel matrix ``H`` (K x J) and its augmentation ``Phi = [H 1]``."""

    H: np.ndarray
    Phi: np.ndarray
    acquisition: DirectionSet
    recon_dirs: DirectionSet
    sfr: SfrParams

    @property
    def K(self) -> int:
        return self.H.shape[0]

    @property
    def J(self) -> int:
        return self.H.shape[1]

    def matrix(self, include_iso_column: bool) -> np.ndarray:
        return self.Phi if include_iso_column else self.H


def build_dictionary(acq: DirectionSet, recon: DirectionSet, sfr: SfrParams,
                     squared: bool = True) -> Dictionary:
    if acq.b_value is None or not np.isclose(acq.b_value, sfr.b_value, rtol=1e-12, atol=0):
        raise ValueError(f"b-value mismatch: acquisition {acq.b_value}, response {sfr.b_value}")
    H = sfr_eval(sfr, acq.vectors @ recon.vectors.T, squared=squared)
    H = np.ascontiguousarray(np.atleast_2d(H))
    Phi = np.hstack([H, np.ones((H.shape[0], 1))])
    H.setflags(write=False)
    Phi.setflags(write=False)
    return Dictionary(H, Phi, acq, recon, sfr)


@dataclass(frozen=True)
class TensorCompartment:
    direction: np.ndarray
    volume_fraction: float
    lambda_par: float
    lambda_perp: float

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if not n > 0:
            raise ValueError("compartment direction must be non-zero")
        object.__setattr__(self, "direction", d / n)
        if not 0.0 <= self.volume_fraction <= 1.0:
            raise ValueError(f"volume fraction outside [0, 1]: {self.volume_fraction}")

    def tensor(self) -> np.ndarray:
        d = self.direction
        return self.lambda_perp * np.eye(3) + (self.lambda_par - self.lambda_perp) * np.outer(d, d)


def synth_signal(compartments, iso_fraction: float, iso_diffusivity: float,
                 acq: DirectionSet) -> np.ndarray:
    """Normalised (``s0 = 1``) Gaussian-mixture signal with an isotropic part.

    ``s(u) = (1 - p_iso) * sum_m w_m exp(-b u^T D_m u) + p_iso * exp(-b lambda_iso)``
    """
    if not 0.0 <= iso_fraction <= 1.0:
        raise ValueError(f"isotropic fraction outside [0, 1]: {iso_fraction}")
    if acq.b_value is None:
        raise ValueError("acquisition scheme has no b-value")
    b = acq.b_value
    u = acq.vectors
    compartments = list(compartments)
    aniso = np.zeros(len(u))
    if compartments:
        total = sum(c.volume_fraction for c in compartments)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"compartment fractions sum to {total}, not 1")
        for c in compartments:
            adc = np.einsum("ki,ij,kj->k", u, c.tensor(), u)
            aniso += c.volume_fraction * np.exp(-b * adc)
    elif iso_fraction < 1.0:
        raise ValueError("no anisotropic compartments but iso_fraction < 1")
    return (1.0 - iso_fraction) * aniso + iso_fraction * np.exp(-b * iso_diffusivity)


def add_rician_noise(signal, snr: float, seed=None) -> np.ndarray:
    """Magnitude of the signal corrupted by complex Gaussian noise.

    The noise level is ``sigma = mean(signal) / snr``, with the mean taken over
    every entry of ``signal``. ``seed`` may be an int or a ``numpy`` Generator.
    """
    s = np.asarray(signal, dtype=float)
    if not snr > 0:
        raise ValueError(f"snr must be positive, got {snr}")
    if np.isinf(snr):
        return s.copy()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sigma = float(np.mean(s)) / snr
    n1 = rng.normal(0.0, sigma, size=s.shape)
    n2 = rng.normal(0.0, sigma, size=s.shape)
    return np.hypot(s + n1, n2)


def fit_sfr(signals, acq: DirectionSet) -> SfrParams:
    """Estimate the single-fibre response from normalised single-fibre signals.

    Each signal is fitted with a log-linear least-squares diffusion tensor;
    the largest eigenvalue gives ``lambda_par``, the mean of the two smaller
    ones ``lambda_perp``, and both are averaged over signals.
    """
    S = np.atleast_2d(np.asarray(signals, dtype=float))
    u = acq.vectors
    if len(u) < 6:
        raise ValueError("tensor fit needs at least 6 directions")
    if S.shape[1] != len(u):
        raise ValueError(f"signals have {S.shape[1]} samples, scheme has {len(u)} directions")
    if np.any(S <= 0):
        raise ValueError("signals must be strictly positive for a log-linear fit")
    b = acq.b_value
    x, y, z = u.T
    B = -b * np.column_stack([x * x, y * y, z * z, 2 * x * y, 2 * x * z, 2 * y * z])
    coef, *_ = np.linalg.lstsq(B, np.log(S).T, rcond=None)
    par, perp = [], []
    for dxx, dyy, dzz, dxy, dxz, dyz in coef.T:
        D = np.array([[dxx, dxy, dxz], [dxy, dyy, dyz], [dxz, dyz, dzz]])
        ev = np.sort(np.linalg.eigvalsh(D))[::-1]
        par.append(ev[0])
        perp.append(0.5 * (ev[1] + ev[2]))
    lam_par, lam_perp = float(np.mean(par)), float(np.mean(perp))
    if not lam_perp > 0 or lam_par - lam_perp <= 1e-6 * abs(lam_par):
        raise SfrEstimationError(
            f"degenerate response estimate: lambda_par={lam_par:.3g}, lambda_perp={lam_perp:.3g}")
    return SfrParams(lam_par, lam_perp, b)


def diffusivities_from_fa_md(fa: float, md: float) -> tuple[float, float]:
    """Axial and radial diffusivity of a cylindrical tensor with given FA and MD."""
    if not 0 <= fa < 1:
        raise ValueError(f"FA out of range: {fa}")
    a = md * fa * np.sqrt(3.0 / (9.0 - 6.0 * fa * fa))
    return md + 2.0 * a, md - a
