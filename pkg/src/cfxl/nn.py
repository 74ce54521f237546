"""Small float64 MLPs with manual backprop, Adam and soft target updates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import NumericalError

CHECKPOINT_VERSION = 1
LEAKY_SLOPE = 0.01


def _act(name, x):
    if name == "leaky_relu":
        return np.where(x > 0, x, LEAKY_SLOPE * x)
    if name == "tanh":
        return np.tanh(x)
    if name == "linear":
        return x
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name, x, y):
    if name == "leaky_relu":
        return np.where(x > 0, 1.0, LEAKY_SLOPE)
    if name == "tanh":
        return 1.0 - y * y
    return np.ones_like(x)


class Mlp:
    """Fully connected net: leaky-ReLU hidden layers and a chosen output map."""

    def __init__(self, n_in: int, hidden: Sequence[int], n_out: int, out_act: str = "linear",
                 rng: Optional[np.random.Generator] = None):
        if n_in < 1 or n_out < 1 or any(h < 1 for h in hidden):
            raise ValueError("layer widths must be >= 1")
        _act(out_act, np.zeros(1))
        rng = rng if rng is not None else np.random.default_rng()
        self.sizes = [int(n_in), *map(int, hidden), int(n_out)]
        self.acts = ["leaky_relu"] * len(hidden) + [out_act]
        self.params: List[np.ndarray] = []
        for a, b in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / math.sqrt(a)
            self.params.append(rng.uniform(-bound, bound, (a, b)))
            self.params.append(np.zeros(b))
        if out_act == "tanh":
            # small last layer keeps initial actions away from saturation
            self.params[-2] *= 0.1
        self._cache = None

    @property
    def n_in(self) -> int:
        return self.sizes[0]

    @property
    def n_out(self) -> int:
        return self.sizes[-1]

    def forward(self, x: np.ndarray, keep: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        h = x[None] if single else x
        if h.shape[-1] != self.n_in:
            raise ValueError(f"expected input width {self.n_in}, got {h.shape[-1]}")
        cache = [h]
        for i, act in enumerate(self.acts):
            z = h @ self.params[2 * i] + self.params[2 * i + 1]
            h = _act(act, z)
            cache.append((z, h))
        if keep:
            self._cache = cache
        return h[0] if single else h

    __call__ = forward

    def backward(self, grad_out: np.ndarray):
        """Gradients w.r.t. parameters and input for the last kept forward pass."""
        if self._cache is None:
            raise RuntimeError("backward called without a cached forward pass")
        cache = self._cache
        g = np.asarray(grad_out, dtype=float)
        if g.ndim == 1:
            g = g[None]
        grads = [None] * len(self.params)
        for i in reversed(range(len(self.acts))):
            z, y = cache[i + 1]
            h_prev = cache[i] if i == 0 else cache[i][1]
            g = g * _act_grad(self.acts[i], z, y)
            grads[2 * i] = h_prev.T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            g = g @ self.params[2 * i].T
        self._cache = None
        return grads, g

    def copy(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.sizes = list(self.sizes)
        other.acts = list(self.acts)
        other.params = [p.copy() for p in self.params]
        other._cache = None
        return other

    def state(self) -> Dict[str, np.ndarray]:
        return {f"p{i}": p for i, p in enumerate(self.params)}


def clip_by_global_norm(grads, max_norm: float):
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if not math.isfinite(norm):
        raise NumericalError("non-finite gradient")
    if max_norm is not None and norm > max_norm:
        s = max_norm / norm
        grads = [g * s for g in grads]
    return grads, norm


@dataclass
class Adam:
    lr: float = 1e-3
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8
    clip: Optional[float] = 0.5
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def apply(self, net: Mlp, grads) -> float:
        grads, norm = clip_by_global_norm(grads, self.clip)
        if not self.m:
            self.m = [np.zeros_like(p) for p in net.params]
            self.v = [np.zeros_like(p) for p in net.params]
        self.t += 1
        c1 = 1 - self.b1 ** self.t
        c2 = 1 - self.b2 ** self.t
        for i, (p, g) in enumerate(zip(net.params, grads)):
            self.m[i] = self.b1 * self.m[i] + (1 - self.b1) * g
            self.v[i] = self.b2 * self.v[i] + (1 - self.b2) * g * g
            p -= self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)
        return norm


@dataclass
class Sgd:
    lr: float = 1e-3
    clip: Optional[float] = 0.5

    def apply(self, net: Mlp, grads) -> float:
        grads, norm = clip_by_global_norm(grads, self.clip)
        for p, g in zip(net.params, grads):
            p -= self.lr * g
        return norm


def soft_update(target: Mlp, source: Mlp, tau: float) -> None:
    """``theta_target <- tau * theta + (1 - tau) * theta_target``."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    for pt, ps in zip(target.params, source.params):
        pt *= 1.0 - tau
        pt += tau * ps


def save_checkpoint(path, nets: Dict[str, Mlp], meta: Optional[dict] = None) -> None:
    arrays = {"version": np.array(CHECKPOINT_VERSION)}
    for name, net in nets.items():
        arrays[f"{name}/sizes"] = np.array(net.sizes)
        arrays[f"{name}/acts"] = np.array(net.acts)
        for key, p in net.state().items():
            arrays[f"{name}/{key}"] = p
    for key, val in (meta or {}).items():
        arrays[f"meta/{key}"] = np.asarray(val)
    np.savez(path, **arrays)


def load_checkpoint(path) -> Dict[str, Mlp]:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        names = sorted({k.split("/")[0] for k in data.files if k.endswith("/sizes")})
        nets = {}
        for name in names:
            net = Mlp.__new__(Mlp)
            net.sizes = [int(s) for s in data[f"{name}/sizes"]]
            net.acts = [str(a) for a in data[f"{name}/acts"]]
            net.params = [data[f"{name}/p{i}"].copy() for i in range(2 * len(net.acts))]
            net._cache = None
            nets[name] = net
    return nets
