"""Wavenumber-domain near-field channel synthesis.

A channel between an AP array with ``N_r`` elements and a UE array with
``N_s`` elements is expanded on the finite set of propagating spatial
frequencies supported by each aperture::

    S = sqrt(N_r N_s) * U_r (Sigma * W) U_s^H,     H = beta * S

where the columns of ``U_r``/``U_s`` are unit-norm plane-wave harmonics
sampled at the array elements and ``W`` is i.i.d. unit complex Gaussian.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .errors import EvanescentPointError, SingularityError
from .geometry import PlanarArray

_TOL = 1e-9

SeedLike = Union[int, np.random.Generator, np.random.SeedSequence, None]


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class LatticeEllipse:
    points: np.ndarray  # (n, 2) integer pairs

    @property
    def n(self) -> int:
        return len(self.points)


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    U: np.ndarray  # (N elements, n points), unit-norm columns

    @property
    def n_elements(self) -> int:
        return self.U.shape[0]

    @property
    def n_points(self) -> int:
        return self.U.shape[1]


@dataclass(frozen=True, eq=False)
class VarianceProfile:
    sigma: np.ndarray  # (n_r, n_s) standard deviations

    @property
    def sigma2(self) -> np.ndarray:
        return self.sigma ** 2

    @property
    def normalization(self) -> float:
        return float(np.sum(self.sigma2))


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    H: np.ndarray
    beta: float
    S: np.ndarray


def lattice_ellipse(L_x: float, L_y: float, wavelength: float) -> LatticeEllipse:
    if L_x <= 0 or L_y <= 0 or wavelength <= 0:
        raise ValueError("lengths and wavelength must be > 0")
    bx = math.floor(L_x / wavelength + _TOL)
    by = math.floor(L_y / wavelength + _TOL)
    pts = []
    for lx in range(-bx, bx + 1):
        for ly in range(-by, by + 1):
            r = (lx * wavelength / L_x) ** 2 + (ly * wavelength / L_y) ** 2
            if r <= 1.0 + _TOL:
                pts.append((lx, ly))
    return LatticeEllipse(np.array(pts, dtype=int).reshape(-1, 2))


def array_ellipse(array: PlanarArray, wavelength: float) -> LatticeEllipse:
    return lattice_ellipse(array.length_x, array.length_y, wavelength)


def spectral_basis(array: PlanarArray, ellipse: LatticeEllipse, wavelength: float) -> SpectralBasis:
    k0 = 2.0 * math.pi / wavelength
    kx = 2.0 * math.pi * ellipse.points[:, 0] / array.length_x
    ky = 2.0 * math.pi * ellipse.points[:, 1] / array.length_y
    kz2 = k0 ** 2 - kx ** 2 - ky ** 2
    if np.any(kz2 < -_TOL * k0 ** 2):
        raise EvanescentPointError("sampling point outside the propagating disk")
    kz = np.sqrt(np.maximum(kz2, 0.0))
    rel = array.element_coords - array.center
    phase = np.outer(rel[:, 0], kx) + np.outer(rel[:, 1], ky) + np.outer(rel[:, 2], kz)
    # absolute position enters as one phase per column
    c = array.center
    col_phase = np.mod(kx * c[0], 2 * math.pi) + np.mod(ky * c[1], 2 * math.pi) \
        + np.mod(kz * c[2], 2 * math.pi)
    U = np.exp(-1j * (phase + col_phase)) / math.sqrt(array.n_elements)
    return SpectralBasis(U)


def variance_profile(ellipse_r: LatticeEllipse, ellipse_s: LatticeEllipse,
                     kind: str = "isotropic", sigma_r=None, sigma_s=None) -> VarianceProfile:
    """Separable standard-deviation profile rescaled to unit total power."""
    n_r, n_s = ellipse_r.n, ellipse_s.n
    if n_r < 1 or n_s < 1:
        raise ValueError("ellipse cardinalities must be > 0")
    if kind == "isotropic":
        sr, ss = np.ones(n_r), np.ones(n_s)
    elif kind == "custom":
        if sigma_r is None or sigma_s is None:
            raise ValueError("custom profile needs sigma_r and sigma_s")
        sr = np.asarray(sigma_r, dtype=float).reshape(-1)
        ss = np.asarray(sigma_s, dtype=float).reshape(-1)
        if sr.shape != (n_r,) or ss.shape != (n_s,):
            raise ValueError("custom profile length does not match ellipse")
        if np.any(sr < 0) or np.any(ss < 0):
            raise ValueError("custom profile entries must be >= 0")
    else:
        raise ValueError(f"unknown profile kind {kind!r}")
    sigma = np.outer(sr, ss)
    total = np.sum(sigma ** 2)
    if total > 0:
        sigma = sigma / math.sqrt(total)
    return VarianceProfile(sigma)


def sample_small_scale(basis_r: SpectralBasis, basis_s: SpectralBasis,
                       profile: VarianceProfile, seed: SeedLike = None) -> np.ndarray:
    if profile.sigma.shape != (basis_r.n_points, basis_s.n_points):
        raise ValueError("profile shape does not match the bases")
    rng = as_generator(seed)
    shape = profile.sigma.shape
    W = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)
    scale = math.sqrt(basis_r.n_elements * basis_s.n_elements)
    return scale * (basis_r.U @ (profile.sigma * W) @ basis_s.U.conj().T)


def large_scale_coeff(distance: float, wavelength: float, gain: float = 1.0,
                      pattern: float = 1.0) -> float:
    if distance <= 0:
        raise SingularityError("distance must be > 0")
    return math.sqrt(gain * pattern) * wavelength / (4.0 * math.pi * distance)


def per_element_large_scale(array_r: PlanarArray, array_s: PlanarArray, wavelength: float,
                            gain: float = 1.0,
                            pattern: Union[float, Callable[[np.ndarray], np.ndarray]] = 1.0,
                            area=None) -> np.ndarray:
    """Exact element-to-element coefficients, shape ``(N_r, N_s)``."""
    diff = array_r.element_coords[:, None, :] - array_s.element_coords[None, :, :]
    if area is not None and area.wrap:
        L = area.side_length
        diff[..., :2] -= L * np.round(diff[..., :2] / L)
    d = np.sqrt(np.sum(diff ** 2, axis=-1))
    if np.any(d <= 0):
        raise SingularityError("coincident elements")
    if callable(pattern):
        theta = np.arccos(np.clip(np.abs(diff[..., 2]) / d, 0.0, 1.0))
        F = pattern(theta)
    else:
        F = pattern
    return np.sqrt(gain * F) * wavelength / (4.0 * math.pi * d)


def pair_seed(master: int, m: int, k: int, step: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master), int(m), int(k), int(step)])


def assemble_channel(scenario, m: int, k: int, seed: SeedLike = None,
                     beta: Optional[float] = None) -> ChannelRealization:
    """Draw ``H_mk = beta_mk * S_mk`` for AP ``m`` and UE ``k``."""
    if not (0 <= m < scenario.n_aps and 0 <= k < scenario.n_ues):
        raise IndexError("AP or UE index out of range")
    if beta is None:
        beta = float(scenario.beta[m, k])
    S = sample_small_scale(scenario.ap_basis(m), scenario.ue_basis(k), scenario.profile, seed)
    return ChannelRealization(beta * S, beta, S)
