"""Planar arrays, wrap-around placement and UE mobility."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AreaConfig:
    side_length: float = 1000.0
    wrap: bool = True

    def __post_init__(self):
        if not self.side_length > 0:
            raise ValueError("side_length must be > 0")


@dataclass(frozen=True, eq=False)
class PlanarArray:
    """Regular grid of patch elements lying in a plane of constant z.

    Elements are indexed row by row: ``b = row * n_h + col``.
    """

    n_h: int
    n_v: int
    spacing: float
    center: np.ndarray
    element_coords: np.ndarray

    @property
    def n_elements(self) -> int:
        return self.n_h * self.n_v

    @property
    def length_x(self) -> float:
        return self.n_h * self.spacing

    @property
    def length_y(self) -> float:
        return self.n_v * self.spacing

    @property
    def aperture(self) -> float:
        # side of the patch surface, each element occupying one spacing cell
        return max(self.n_h, self.n_v) * self.spacing

    def translated(self, delta) -> "PlanarArray":
        delta = np.asarray(delta, dtype=float)
        return PlanarArray(self.n_h, self.n_v, self.spacing,
                           self.center + delta, self.element_coords + delta)


@dataclass(frozen=True, eq=False)
class EntityState:
    position: np.ndarray
    array: PlanarArray


def build_planar_array(n_h: int, n_v: int, spacing: float, center=(0.0, 0.0, 0.0)) -> PlanarArray:
    if n_h < 1 or n_v < 1:
        raise ValueError("array dimensions must be >= 1")
    if not spacing > 0:
        raise ValueError("spacing must be > 0")
    center = np.asarray(center, dtype=float).reshape(3)
    cols = (np.arange(n_h) - (n_h - 1) / 2.0) * spacing
    rows = (np.arange(n_v) - (n_v - 1) / 2.0) * spacing
    yy, xx = np.meshgrid(rows, cols, indexing="ij")
    offsets = np.stack([xx.ravel(), yy.ravel(), np.zeros(n_h * n_v)], axis=1)
    return PlanarArray(n_h, n_v, float(spacing), center, center + offsets)


def wrap_position(p, area: AreaConfig) -> np.ndarray:
    p = np.array(p, dtype=float)
    if area.wrap:
        p[..., :2] = np.mod(p[..., :2], area.side_length)
    return p


def wrapped_delta(p, q, area: AreaConfig) -> np.ndarray:
    """Shortest displacement from ``q`` to ``p`` on the x-y torus."""
    d = np.asarray(p, dtype=float) - np.asarray(q, dtype=float)
    if area.wrap:
        L = area.side_length
        d[..., :2] = d[..., :2] - L * np.round(d[..., :2] / L)
    return d


def wrapped_distance(p, q, area: AreaConfig):
    d = np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))
    if area.wrap:
        L = area.side_length
        d[..., :2] = np.mod(d[..., :2], L)
        d[..., :2] = np.minimum(d[..., :2], L - d[..., :2])
    out = np.sqrt(np.sum(d * d, axis=-1))
    return float(out) if out.ndim == 0 else out


def pairwise_wrapped_distance(a, b, area: AreaConfig) -> np.ndarray:
    """Distances between every row of ``a`` (n,3) and ``b`` (m,3)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return wrapped_distance(a[:, None, :], b[None, :, :], area)


def step_ue(state: EntityState, step: float, angle: float, area: AreaConfig) -> EntityState:
    if step < 0:
        raise ValueError("step must be >= 0")
    move = np.array([step * math.cos(angle), step * math.sin(angle), 0.0])
    new_pos = wrap_position(state.position + move, area)
    return EntityState(new_pos, state.array.translated(new_pos - state.position))


def grid_positions(n: int, area: AreaConfig, height: float) -> np.ndarray:
    """Cell centers of a near-square grid, first ``n`` taken row by row."""
    nx = math.ceil(math.sqrt(n))
    ny = math.ceil(n / nx)
    xs = (np.arange(nx) + 0.5) * area.side_length / nx
    ys = (np.arange(ny) + 0.5) * area.side_length / ny
    pts = [(x, y, height) for y in ys for x in xs][:n]
    return np.array(pts, dtype=float)


def uniform_positions(n: int, area: AreaConfig, height: float, rng: np.random.Generator) -> np.ndarray:
    xy = rng.uniform(0.0, area.side_length, size=(n, 2))
    return np.column_stack([xy, np.full(n, height)])
