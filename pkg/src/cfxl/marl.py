"""Two-layer multi-agent actor-critic training and the baseline architectures.

Layer 1 agents pick per-UE AP-clustering thresholds from distance
observations. Layer 2 agents pick transmit power, step length and heading
from their summed large-scale gain; each critic only sees the agents it
cooperates with. Baselines reuse the layer-2 learner with a different
sharing graph or critic layout and cluster APs at the median gain.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
from scipy.cluster.vq import kmeans2

from . import nn
from .clustering import ApAssignment, CoopGraph, coop_indicator, threshold_cluster
from .environment import CfxlEnv
from .errors import NumericalError
from .geometry import pairwise_wrapped_distance

BASELINES = ("centralized", "ctde", "decentralized", "kmeans", "r_variable", "q_variable")
ARCHS = ("proposed",) + BASELINES


@dataclass(frozen=True)
class LayerConfig:
    gamma: float = 0.99
    tau: float = 0.01
    r_c: float = 0.75
    r_s: float = 0.25
    episodes: int = 3000
    steps_per_episode: int = 20
    random_episodes: int = 2000
    buffer1: int = 128
    buffer2: int = 256
    batch_size: int = 32
    hidden: tuple = (128, 64)
    lr_actor: float = 1e-3
    lr_critic: float = 1e-3
    optimizer: str = "adam"
    max_grad_norm: float = 0.5
    noise_start: float = 0.3
    noise_end: float = 0.02

    def __post_init__(self):
        errs = self.validate()
        if errs:
            raise ValueError("invalid LayerConfig: " + "; ".join(errs))

    def validate(self) -> list:
        errs = []
        if not 0.0 < self.gamma < 1.0:
            errs.append("gamma must lie in (0, 1)")
        if not 0.0 < self.tau <= 1.0:
            errs.append("tau must lie in (0, 1]")
        if self.r_c < 0 or self.r_s < 0 or not math.isclose(self.r_c + self.r_s, 1.0):
            errs.append("r_c and r_s must be non-negative and sum to 1")
        for name in ("episodes", "random_episodes"):
            if getattr(self, name) < 0:
                errs.append(f"{name} must be >= 0")
        for name in ("steps_per_episode", "buffer1", "buffer2", "batch_size"):
            if getattr(self, name) < 1:
                errs.append(f"{name} must be >= 1")
        if self.batch_size > min(self.buffer1, self.buffer2):
            errs.append("batch_size must not exceed buffer capacities")
        if self.optimizer not in ("adam", "sgd"):
            errs.append("optimizer must be 'adam' or 'sgd'")
        if self.noise_start < 0 or self.noise_end < 0:
            errs.append("noise levels must be >= 0")
        return errs

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown LayerConfig fields: {sorted(unknown)}")
        if "hidden" in d:
            d["hidden"] = tuple(int(h) for h in d["hidden"])
        return cls(**d)


class ReplayBuffer:
    """Fixed-capacity ring of transitions stored as parallel arrays."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self._data: Dict[str, np.ndarray] = {}
        self._next = 0
        self._size = 0
        self._pushed = 0

    def __len__(self) -> int:
        return self._size

    def push(self, **tr) -> None:
        if not self._data:
            for key, val in tr.items():
                val = np.asarray(val, dtype=float)
                self._data[key] = np.zeros((self.capacity,) + val.shape)
        for key, val in tr.items():
            self._data[key][self._next] = val
        self._next = (self._next + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)
        self._pushed += 1

    def field(self, key: str) -> np.ndarray:
        """Stored entries of ``key`` ordered oldest first."""
        arr = self._data[key]
        if self._size < self.capacity:
            return arr[:self._size]
        return np.concatenate([arr[self._next:], arr[:self._next]])

    def sample(self, batch: int, rng: np.random.Generator) -> Dict[str, np.ndarray]:
        if batch > self._size:
            raise ValueError("not enough transitions for a batch")
        idx = rng.choice(self._size, size=batch, replace=False)
        return {k: v[idx] for k, v in self._data.items()}


def mask_views(S: np.ndarray, A: np.ndarray, masks: np.ndarray) -> np.ndarray:
    """Critic inputs ``[s * o_k, a * o_k]`` for every row of ``masks``.

    ``S`` (..., K, s_dim), ``A`` (..., K, a_dim), ``masks`` (..., C, K);
    returns (..., C, K*s_dim + K*a_dim).
    """
    ms = S[..., None, :, :] * masks[..., :, :, None]
    ma = A[..., None, :, :] * masks[..., :, :, None]
    lead = ms.shape[:-2]
    return np.concatenate([ms.reshape(lead + (-1,)), ma.reshape(lead + (-1,))], axis=-1)


class LayerLearner:
    """MADDPG-style learner over K units.

    ``actor_mode`` selects what each actor sees: ``"own"`` its unit's
    state, ``"broadcast"`` its own state followed by every unit's state,
    ``"joint"`` a single actor seeing everything and acting for all units.
    With ``shared_critic`` one critic trained on the mean reward serves
    every actor.
    """

    def __init__(self, n_units: int, s_dim: int, a_dim: int, cfg: LayerConfig,
                 rng: np.random.Generator, actor_mode: str = "own", shared_critic: bool = False,
                 capacity: int = 256):
        if actor_mode not in ("own", "broadcast", "joint"):
            raise ValueError(f"unknown actor_mode {actor_mode!r}")
        self.K, self.s_dim, self.a_dim = n_units, s_dim, a_dim
        self.cfg = cfg
        self.rng = rng
        self.actor_mode = actor_mode
        self.shared_critic = shared_critic or actor_mode == "joint"
        self.n_actors = 1 if actor_mode == "joint" else n_units
        self.n_critics = 1 if self.shared_critic else n_units
        obs_dim = {"own": s_dim, "broadcast": s_dim * (1 + n_units), "joint": s_dim * n_units}[actor_mode]
        out_dim = a_dim * n_units if actor_mode == "joint" else a_dim
        crit_dim = n_units * (s_dim + a_dim)
        h = tuple(cfg.hidden)
        self.actors = [nn.Mlp(obs_dim, h, out_dim, "tanh", rng) for _ in range(self.n_actors)]
        self.critics = [nn.Mlp(crit_dim, h, 1, "linear", rng) for _ in range(self.n_critics)]
        self.actor_targets = [a.copy() for a in self.actors]
        self.critic_targets = [c.copy() for c in self.critics]
        opt = nn.Adam if cfg.optimizer == "adam" else nn.Sgd
        self.actor_opts = [opt(lr=cfg.lr_actor, clip=cfg.max_grad_norm) for _ in self.actors]
        self.critic_opts = [opt(lr=cfg.lr_critic, clip=cfg.max_grad_norm) for _ in self.critics]
        self.buffer = ReplayBuffer(capacity)

    # -- observation plumbing --

    def actor_obs(self, S: np.ndarray, i: int) -> np.ndarray:
        """Observation of actor ``i`` from states ``S`` (..., K, s_dim)."""
        lead = S.shape[:-2]
        if self.actor_mode == "own":
            return S[..., i, :]
        if self.actor_mode == "broadcast":
            return np.concatenate([S[..., i, :], S.reshape(lead + (-1,))], axis=-1)
        return S.reshape(lead + (-1,))

    def critic_masks(self, O: np.ndarray) -> np.ndarray:
        if self.shared_critic:
            return np.ones((1, self.K))
        return np.asarray(O, dtype=float)

    def policy(self, S: np.ndarray, target: bool = False) -> np.ndarray:
        """Joint action (..., K, a_dim) in [-1, 1] from the (target) actors."""
        nets = self.actor_targets if target else self.actors
        if self.actor_mode == "joint":
            out = nets[0](self.actor_obs(S, 0))
            return out.reshape(out.shape[:-1] + (self.K, self.a_dim))
        return np.stack([nets[i](self.actor_obs(S, i)) for i in range(self.K)], axis=-2)

    def act(self, S: np.ndarray, noise_std: float = 0.0, explore_uniform: bool = False) -> np.ndarray:
        if explore_uniform:
            return self.rng.uniform(-1.0, 1.0, (self.K, self.a_dim))
        A = self.policy(S)
        if noise_std > 0:
            A = A + noise_std * self.rng.standard_normal(A.shape)
        return np.clip(A, -1.0, 1.0)

    def store(self, S, A, r, S2, O) -> None:
        masks = self.critic_masks(O)
        self.buffer.push(s=S, a=A, r=r, s2=S2, mask=masks, view=mask_views(S, A, masks))

    # -- learning --

    def _reward(self, r: np.ndarray, c: int) -> np.ndarray:
        return r.mean(axis=-1) if self.shared_critic else r[:, c]

    def critic_target(self, batch: Dict[str, np.ndarray], c: int) -> np.ndarray:
        A2 = self.policy(batch["s2"], target=True)
        view2 = mask_views(batch["s2"], A2, batch["mask"])[:, c]
        q2 = self.critic_targets[c](view2)[:, 0]
        return self._reward(batch["r"], c) + self.cfg.gamma * q2

    def _critic_step(self, batch, c: int) -> float:
        y = self.critic_target(batch, c)
        q = self.critics[c].forward(batch["view"][:, c], keep=True)[:, 0]
        err = q - y
        loss = float(np.mean(err ** 2))
        if not math.isfinite(loss):
            raise NumericalError(f"non-finite critic loss for critic {c}")
        grads, _ = self.critics[c].backward((2.0 / len(err)) * err[:, None])
        self.critic_opts[c].apply(self.critics[c], grads)
        return loss

    def _action_slice(self, i: int) -> slice:
        start = self.K * self.s_dim
        if self.actor_mode == "joint":
            return slice(start, start + self.K * self.a_dim)
        return slice(start + i * self.a_dim, start + (i + 1) * self.a_dim)

    def actor_objective_grad(self, batch, i: int):
        """Mean Q of actor ``i`` and its gradient w.r.t. the actor parameters."""
        c = 0 if self.shared_critic else i
        obs = self.actor_obs(batch["s"], i)
        a = self.actors[i].forward(obs, keep=True)
        if self.actor_mode == "joint":
            A = a.reshape(len(a), self.K, self.a_dim)
        else:
            A = batch["a"].copy()
            A[:, i] = a
        view = mask_views(batch["s"], A, batch["mask"])[:, c]
        q = self.critics[c].forward(view, keep=True)[:, 0]
        _, g_in = self.critics[c].backward(np.full((len(q), 1), 1.0 / len(q)))
        dq_da = g_in[:, self._action_slice(i)]
        # own action is always visible to the own critic, so the mask factor is 1
        grads, _ = self.actors[i].backward(-dq_da)
        return float(q.mean()), grads

    def _actor_step(self, batch, i: int) -> float:
        qm, grads = self.actor_objective_grad(batch, i)
        self.actor_opts[i].apply(self.actors[i], grads)
        return qm

    def update(self) -> Optional[dict]:
        """One update of every agent; ``None`` until a batch is available."""
        B = self.cfg.batch_size
        if len(self.buffer) < B:
            return None
        closs, qvals = [], []
        if self.shared_critic:
            batch = self.buffer.sample(B, self.rng)
            closs.append(self._critic_step(batch, 0))
            for i in range(self.n_actors):
                qvals.append(self._actor_step(batch, i))
        else:
            for i in range(self.n_actors):
                batch = self.buffer.sample(B, self.rng)
                closs.append(self._critic_step(batch, i))
                qvals.append(self._actor_step(batch, i))
        for net, tgt in zip(self.actors + self.critics, self.actor_targets + self.critic_targets):
            nn.soft_update(tgt, net, self.cfg.tau)
        return {"critic_loss": float(np.mean(closs)), "q": float(np.mean(qvals))}

    def networks(self) -> Dict[str, nn.Mlp]:
        nets = {}
        for i, n in enumerate(self.actors):
            nets[f"actor{i}"] = n
            nets[f"actor_target{i}"] = self.actor_targets[i]
        for i, n in enumerate(self.critics):
            nets[f"critic{i}"] = n
            nets[f"critic_target{i}"] = self.critic_targets[i]
        return nets

    def save(self, path) -> None:
        nn.save_checkpoint(path, self.networks())

    def load(self, path) -> None:
        nets = nn.load_checkpoint(path)
        for name, net in self.networks().items():
            if nets[name].sizes != net.sizes:
                raise ValueError(f"shape mismatch for {name}")
            net.params = nets[name].params


# -- action maps ---------------------------------------------------------------

def thresholds_from_action(y: np.ndarray, beta_min: float, beta_max: float) -> np.ndarray:
    """Map squashed outputs in [-1, 1] log-linearly onto [beta_min, beta_max]."""
    u = (np.clip(y, -1.0, 1.0) + 1.0) / 2.0
    lo, hi = math.log(beta_min), math.log(beta_max)
    out = np.exp(lo + u * (hi - lo))
    # pin the endpoints so they compare equal to the gains they came from
    out = np.where(u <= 0.0, beta_min, out)
    return np.where(u >= 1.0, beta_max, out)


def layer2_from_action(A: np.ndarray, p_max: float, step_max: float):
    A = np.clip(A, -1.0, 1.0)
    power = p_max * (A[:, 0] + 1.0) / 2.0
    step = step_max * (A[:, 1] + 1.0) / 2.0
    angle = np.mod(math.pi * (A[:, 2] + 1.0), 2 * math.pi)
    return power, step, angle


def layer1_reward(overhead: np.ndarray, se: np.ndarray, r_c: float, r_s: float) -> np.ndarray:
    return r_c * overhead + r_s * se


# -- baseline sharing graphs -----------------------------------------------------

def kmeans_graph(positions: np.ndarray, n_groups: int, rng: np.random.Generator) -> CoopGraph:
    K = len(positions)
    if n_groups <= 1:
        return CoopGraph(np.ones((K, K), bool))
    _, labels = kmeans2(np.asarray(positions, float)[:, :2], n_groups, minit="++", seed=rng)
    O = labels[:, None] == labels[None, :]
    return CoopGraph(O)


def radius_graph(positions: np.ndarray, radius: float, area) -> CoopGraph:
    d = pairwise_wrapped_distance(positions, positions, area)
    O = d <= radius
    np.fill_diagonal(O, True)
    return CoopGraph(O)


def nearest_graph(positions: np.ndarray, q: int, area) -> CoopGraph:
    """Each UE shares with itself and its ``q`` nearest UEs (rows are directed)."""
    K = len(positions)
    q = int(min(max(q, 0), K - 1))
    d = pairwise_wrapped_distance(positions, positions, area)
    np.fill_diagonal(d, -np.inf)
    order = np.argsort(d, axis=1, kind="stable")[:, :q + 1]
    O = np.zeros((K, K), bool)
    np.put_along_axis(O, order, True, axis=1)
    return CoopGraph(O)


def median_clustering(beta: np.ndarray) -> ApAssignment:
    return threshold_cluster(beta, np.median(beta, axis=0))


# -- training ---------------------------------------------------------------------

@dataclass
class TrainingLog:
    arch: str
    episodes: List[dict] = field(default_factory=list)
    steps: List[dict] = field(default_factory=list)
    aborted: List[dict] = field(default_factory=list)

    def column(self, key: str) -> np.ndarray:
        return np.array([e[key] for e in self.episodes], dtype=float)


class Trainer:
    """Runs one architecture on one environment.

    ``group_param`` is the number of k-means groups, the sharing radius in
    metres or the number of sharing neighbours depending on ``arch``.
    """

    def __init__(self, env: CfxlEnv, cfg: LayerConfig, arch: str = "proposed",
                 group_param: Optional[float] = None, seed: int = 0, record_steps: bool = True):
        if arch not in ARCHS:
            raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHS}")
        self.env, self.cfg, self.arch = env, cfg, arch
        self.seed = int(seed)
        self.record_steps = record_steps
        K = env.n_ues
        if group_param is None:
            group_param = {"kmeans": max(1, K // 2), "r_variable": 0.25 * env.config.side_length,
                           "q_variable": max(0, K // 2)}.get(arch)
        self.group_param = group_param
        self.rng = np.random.default_rng([self.seed, 3])
        net_rng = np.random.default_rng([self.seed, 4])
        self.layer1 = None
        if arch == "proposed":
            self.layer1 = LayerLearner(K, 1, 1, cfg, net_rng, "broadcast", False, cfg.buffer1)
        mode = {"centralized": "joint"}.get(arch, "own")
        self.layer2 = LayerLearner(K, 1, 3, cfg, net_rng, mode, arch == "ctde", cfg.buffer2)
        if arch in ("proposed",):
            self.layer1.rng = self.layer2.rng = np.random.default_rng([self.seed, 5])
        else:
            self.layer2.rng = np.random.default_rng([self.seed, 5])

    def sharing_graph(self, assign: ApAssignment) -> CoopGraph:
        env, K = self.env, self.env.n_ues
        pos = env.scenario.ue_positions
        if self.arch == "proposed":
            return coop_indicator(assign)
        if self.arch in ("centralized", "ctde"):
            return CoopGraph(np.ones((K, K), bool))
        if self.arch == "decentralized":
            return CoopGraph(np.eye(K, dtype=bool))
        if self.arch == "kmeans":
            return kmeans_graph(pos, int(self.group_param), self.rng)
        if self.arch == "r_variable":
            return radius_graph(pos, float(self.group_param), env.scenario.area)
        return nearest_graph(pos, int(self.group_param), env.scenario.area)

    def noise_level(self, episode: int) -> float:
        cfg = self.cfg
        n_learn = cfg.episodes - cfg.random_episodes
        if n_learn <= 1:
            return cfg.noise_end
        frac = min(max((episode - cfg.random_episodes) / (n_learn - 1), 0.0), 1.0)
        return cfg.noise_start + frac * (cfg.noise_end - cfg.noise_start)

    def run_step(self, explore: bool, noise: float, learn: bool) -> dict:
        env, cfg = self.env, self.cfg
        # layer 1: thresholds and reclustering
        s1 = env.layer1_state()[:, None]
        if self.layer1 is not None:
            a1 = self.layer1.act(s1, noise, explore)
            thr = thresholds_from_action(a1[:, 0], *env.threshold_bounds())
            assign = threshold_cluster(env.beta, thr)
        else:
            a1 = None
            assign = median_clustering(env.beta)
        coop = self.sharing_graph(assign)
        # layer 2: states, actions, rewards
        s2 = env.layer2_state()[:, None]
        a2 = self.layer2.act(s2, noise, explore)
        power, step, angle = layer2_from_action(a2, env.config.p_max, env.config.step_max)
        met = env.evaluate(assign, coop, power, arch=self.arch)
        r2 = met.ue_ee
        r1 = layer1_reward(met.overhead_reward, met.se, cfg.r_c, cfg.r_s)
        env.step(step, angle)
        s1n = env.layer1_state()[:, None]
        s2n = env.layer2_state()[:, None]
        if self.layer1 is not None:
            self.layer1.store(s1, a1, r1, s1n, np.ones((env.n_ues, env.n_ues)))
        self.layer2.store(s2, a2, r2, s2n, coop.O)
        if learn:
            if self.layer1 is not None:
                self.layer1.update()
            self.layer2.update()
        return {"met": met, "assign": assign, "coop": coop, "r1": r1, "r2": r2, "power": power}

    def train(self) -> TrainingLog:
        cfg, env = self.cfg, self.env
        log = TrainingLog(self.arch)
        for ep in range(cfg.episodes):
            env.reset(ep)
            explore = ep < cfg.random_episodes
            noise = 0.0 if explore else self.noise_level(ep)
            rows = []
            try:
                for t in range(cfg.steps_per_episode):
                    out = self.run_step(explore, noise, learn=not explore)
                    rows.append(self._step_row(ep, t, out))
            except NumericalError as exc:
                log.aborted.append({"episode": ep, "step": len(rows), "error": str(exc)})
            if self.record_steps:
                log.steps.extend(rows)
            if rows:
                log.episodes.append(self._episode_row(ep, rows, explore))
        return log

    def _step_row(self, ep: int, t: int, out: dict) -> dict:
        met, assign, coop = out["met"], out["assign"], out["coop"]
        M = self.env.n_aps
        row = {"episode": ep, "step": t, "sum_se": float(np.sum(met.se)), "ee": met.ee,
               "comm_power": met.comm_power, "p_total": met.breakdown.p_total,
               "o_density": coop.density, "mean_cluster": float(assign.cluster_sizes.mean()),
               "reward1": float(np.mean(out["r1"])), "reward2": float(np.mean(out["r2"])),
               "max_trace": float(np.max(met.tx_trace)),
               "constraints_ok": bool(met.constraints.all_pass)}
        for k, r in enumerate(out["r2"]):
            row[f"reward2_ue{k}"] = float(r)
        for k, v in enumerate(met.se):
            row[f"se_ue{k}"] = float(v)
        hist = np.bincount(assign.cluster_sizes, minlength=M + 1)[1:]
        for s, c in enumerate(hist, start=1):
            row[f"cluster_hist_{s}"] = int(c)
        return row

    @staticmethod
    def _episode_row(ep: int, rows: List[dict], explore: bool) -> dict:
        keys = ("sum_se", "ee", "comm_power", "p_total", "o_density", "mean_cluster", "reward1", "reward2")
        row = {"episode": ep, "random": bool(explore), "n_steps": len(rows)}
        for k in keys:
            row[k] = float(np.mean([r[k] for r in rows]))
        row["max_trace"] = float(max(r["max_trace"] for r in rows))
        row["constraints_ok"] = bool(all(r["constraints_ok"] for r in rows))
        return row


def train(env: CfxlEnv, cfg: LayerConfig, seed: int = 0, record_steps: bool = True) -> TrainingLog:
    return Trainer(env, cfg, "proposed", seed=seed, record_steps=record_steps).train()


def baseline(env: CfxlEnv, kind: str, cfg: LayerConfig, seed: int = 0,
             group_param: Optional[float] = None, record_steps: bool = True) -> TrainingLog:
    if kind not in BASELINES:
        raise ValueError(f"unknown baseline {kind!r}; expected one of {BASELINES}")
    return Trainer(env, cfg, kind, group_param=group_param, seed=seed, record_steps=record_steps).train()
