"""A placed scenario: AP/UE arrays, bases, variance profile and beta."""
from __future__ import annotations

from typing import Optional

import numpy as np

from . import channel as ch
from .config import SystemConfig
from .geometry import (AreaConfig, EntityState, build_planar_array, grid_positions,
                       pairwise_wrapped_distance, step_ue, uniform_positions)


class Scenario:
    """Geometry plus the channel statistics it induces.

    APs sit on a near-square grid and UEs are uniform unless explicit
    coordinates are given in the config. All arrays face along z.
    """

    def __init__(self, config: SystemConfig, seed: ch.SeedLike = None,
                 profile: Optional[ch.VarianceProfile] = None,
                 ue_positions: Optional[np.ndarray] = None):
        self.config = config
        self.area = AreaConfig(config.side_length, config.wrap)
        rng = ch.as_generator(seed)
        if config.ap_positions is not None:
            ap_xy = np.asarray(config.ap_positions, dtype=float)
            ap_pos = np.column_stack([ap_xy[:, :2], np.full(config.n_aps, config.ap_height)])
        else:
            ap_pos = grid_positions(config.n_aps, self.area, config.ap_height)
        if ue_positions is not None:
            ue_pos = np.asarray(ue_positions, dtype=float)
        elif config.ue_positions is not None:
            ue_xy = np.asarray(config.ue_positions, dtype=float)
            ue_pos = np.column_stack([ue_xy[:, :2], np.full(config.n_ues, config.ue_height)])
        else:
            ue_pos = uniform_positions(config.n_ues, self.area, config.ue_height, rng)
        ah, av = config.ap_array
        uh, uv = config.ue_array
        self.aps = [EntityState(p, build_planar_array(ah, av, config.rx_spacing, p)) for p in ap_pos]
        self.ues = [EntityState(p, build_planar_array(uh, uv, config.tx_spacing, p)) for p in ue_pos]
        lam = config.wavelength
        self.ellipse_r = ch.array_ellipse(self.aps[0].array, lam)
        self.ellipse_s = ch.array_ellipse(self.ues[0].array, lam)
        self.profile = profile if profile is not None else ch.variance_profile(self.ellipse_r, self.ellipse_s)
        self._ap_bases = {}
        self._ue_bases = {}
        self._beta = None

    @property
    def n_aps(self) -> int:
        return len(self.aps)

    @property
    def n_ues(self) -> int:
        return len(self.ues)

    @property
    def n_rx(self) -> int:
        return self.config.n_rx

    @property
    def n_tx(self) -> int:
        return self.config.n_tx

    @property
    def ap_positions(self) -> np.ndarray:
        return np.array([a.position for a in self.aps])

    @property
    def ue_positions(self) -> np.ndarray:
        return np.array([u.position for u in self.ues])

    def ap_basis(self, m: int) -> ch.SpectralBasis:
        if m not in self._ap_bases:
            self._ap_bases[m] = ch.spectral_basis(self.aps[m].array, self.ellipse_r, self.config.wavelength)
        return self._ap_bases[m]

    def ue_basis(self, k: int) -> ch.SpectralBasis:
        if k not in self._ue_bases:
            self._ue_bases[k] = ch.spectral_basis(self.ues[k].array, self.ellipse_s, self.config.wavelength)
        return self._ue_bases[k]

    def distances(self) -> np.ndarray:
        """(M, K) wrapped center distances."""
        return pairwise_wrapped_distance(self.ap_positions, self.ue_positions, self.area)

    @property
    def beta(self) -> np.ndarray:
        if self._beta is None:
            d = self.distances()
            if np.any(d <= 0):
                raise ch.SingularityError("AP and UE centers coincide")
            self._beta = np.sqrt(self.config.antenna_gain) * self.config.wavelength / (4 * np.pi * d)
        return self._beta

    def move_ues(self, steps, angles) -> None:
        for k, (s, a) in enumerate(zip(steps, angles)):
            self.ues[k] = step_ue(self.ues[k], float(s), float(a), self.area)
        self._ue_bases.clear()
        self._beta = None

    def set_ue_positions(self, positions) -> None:
        uh, uv = self.config.ue_array
        self.ues = [EntityState(np.asarray(p, dtype=float),
                                build_planar_array(uh, uv, self.config.tx_spacing, p))
                    for p in positions]
        self._ue_bases.clear()
        self._beta = None

    def channel(self, m: int, k: int, master_seed: int, step: int) -> ch.ChannelRealization:
        return ch.assemble_channel(self, m, k, ch.pair_seed(master_seed, m, k, step))
