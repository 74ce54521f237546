"""Step-wise simulator wrapped around a Scenario for the learners."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import performance as perf
from .clustering import ApAssignment, CoopGraph, ConstraintReport, coop_indicator, validate_constraints
from .config import PowerParams, SystemConfig
from .geometry import uniform_positions
from .scenario import Scenario


@dataclass(frozen=True, eq=False)
class StepMetrics:
    se: np.ndarray
    breakdown: perf.PowerBreakdown
    ee: float
    ue_ee: np.ndarray
    overhead_reward: np.ndarray   # 1 / (|A_k| P_p + P_ue + P_con)
    constraints: ConstraintReport
    tx_trace: np.ndarray

    @property
    def comm_power(self) -> float:
        return self.breakdown.comm_power


class CfxlEnv:
    """UE mobility, clustering and SE/power evaluation for one run.

    ``se_method="closed"`` evaluates the closed-form MR bound, which only
    depends on the large-scale state; ``"mc"`` re-estimates it from fresh
    channel draws every step, seeded by (master seed, step).

    UE layouts are redrawn at every reset. With ``layout_pool`` set,
    episode ``e`` starts from layout ``e % layout_pool`` instead, so runs
    of equal length see the same set of starting layouts.
    """

    def __init__(self, config: SystemConfig, params: Optional[PowerParams] = None, seed: int = 0,
                 se_method: str = "closed", mc_samples: int = 2000,
                 layout_pool: Optional[int] = None):
        if se_method not in ("closed", "mc"):
            raise ValueError("se_method must be 'closed' or 'mc'")
        self.config = config
        self.params = params if params is not None else PowerParams(bandwidth=config.bandwidth)
        self.seed = int(seed)
        self.se_method = se_method
        self.mc_samples = int(mc_samples)
        if layout_pool is not None and layout_pool < 1:
            raise ValueError("layout_pool must be >= 1")
        self.layout_pool = layout_pool
        self.noise = perf.NoiseModel(config.noise_power)
        self.scenario = Scenario(config, seed=np.random.SeedSequence([self.seed, 0]))
        self.episode = 0
        self.t = 0
        self.global_step = 0
        # reference gain of a link spanning the whole side, used to scale observations
        self.beta_ref = math.sqrt(config.antenna_gain) * config.wavelength / (4 * math.pi * config.side_length)

    @property
    def n_aps(self) -> int:
        return self.config.n_aps

    @property
    def n_ues(self) -> int:
        return self.config.n_ues

    def reset(self, episode: int) -> None:
        self.episode = int(episode)
        self.t = 0
        if self.config.ue_positions is None:
            layout = self.episode if self.layout_pool is None else self.episode % self.layout_pool
            rng = np.random.default_rng([self.seed, 1, layout])
            pos = uniform_positions(self.n_ues, self.scenario.area, self.config.ue_height, rng)
            self.scenario.set_ue_positions(pos)

    # -- observations --

    @property
    def beta(self) -> np.ndarray:
        return self.scenario.beta

    def summed_distances(self) -> np.ndarray:
        return self.scenario.distances().sum(axis=0)

    def layer1_state(self) -> np.ndarray:
        return self.summed_distances() / (self.n_aps * self.config.side_length)

    def layer2_state(self) -> np.ndarray:
        return np.log10(self.beta.sum(axis=0) / self.beta_ref)

    def threshold_bounds(self):
        b = self.beta
        return float(b.min()), float(b.max())

    # -- evaluation --

    def evaluate(self, assign: ApAssignment, coop: CoopGraph, power: np.ndarray,
                 arch: str = "proposed") -> StepMetrics:
        p = np.minimum(np.asarray(power, dtype=float), self.config.p_max)
        tx = perf.TxPower(p, self.config.n_tx)
        if self.se_method == "closed":
            se = perf.se_closed_fast(self.scenario, assign, tx, self.noise)
        else:
            se = perf.se_theorem1_mc(self.scenario, assign, tx, self.noise, self.mc_samples,
                                     seed=np.random.SeedSequence([self.seed, 2, self.global_step]))
        bd = perf.power_breakdown(self.scenario, assign, coop, tx, se, self.params, arch=arch)
        ee = perf.energy_efficiency(se, bd.p_total)
        ue_ee = se.se / perf.attributed_power(bd, assign)
        overhead = 1.0 / (assign.cluster_sizes * self.params.p_p_ap + bd.p_ue + bd.p_con)
        report = validate_constraints(assign, coop_indicator(assign))
        return StepMetrics(se.se, bd, ee, ue_ee, overhead, report, tx.trace())

    def step(self, steps, angles) -> None:
        steps = np.clip(np.asarray(steps, dtype=float), 0.0, self.config.step_max)
        self.scenario.move_ues(steps, np.asarray(angles, dtype=float))
        self.t += 1
        self.global_step += 1
