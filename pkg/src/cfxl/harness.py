"""Experiment configuration, seeded runs, sweeps and CSV output.

Configs are YAML files with four optional sections (``system``, ``power``,
``layer``, ``experiment``). Precedence, lowest first: built-in defaults,
a named preset, the config file, then command-line flags.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import yaml

from . import complexity
from .config import PowerParams, SystemConfig
from .environment import CfxlEnv
from .marl import ARCHS, LayerConfig, Trainer

log = logging.getLogger(__name__)

SCHEMA = "cfxl-metrics"
SCHEMA_VERSION = 1

EXPERIMENT_FIELDS = ("arch", "group_param", "seeds", "sweep_axis", "sweep_values",
                     "se_method", "mc_samples", "layout_pool", "out_dir")


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    power: PowerParams = field(default_factory=PowerParams)
    layer: LayerConfig = field(default_factory=LayerConfig)
    arch: str = "proposed"
    group_param: Optional[float] = None
    seeds: tuple = (0,)
    sweep_axis: Optional[str] = None
    sweep_values: tuple = ()
    se_method: str = "closed"
    mc_samples: int = 2000
    layout_pool: Optional[int] = None
    out_dir: str = "runs"

    def validate(self) -> List[str]:
        errs = []
        if self.arch not in ARCHS:
            errs.append(f"experiment.arch: unknown architecture {self.arch!r}")
        if not self.seeds:
            errs.append("experiment.seeds: at least one seed required")
        if self.se_method not in ("closed", "mc"):
            errs.append("experiment.se_method: must be 'closed' or 'mc'")
        if self.mc_samples < 1:
            errs.append("experiment.mc_samples: must be >= 1")
        if self.layout_pool is not None and self.layout_pool < 1:
            errs.append("experiment.layout_pool: must be >= 1")
        if self.sweep_axis is not None and not self.sweep_values:
            errs.append("experiment.sweep_values: required when sweep_axis is set")
        if self.sweep_axis is not None and self.sweep_axis not in SWEEP_AXES:
            errs.append(f"experiment.sweep_axis: unknown axis {self.sweep_axis!r}")
        if abs(self.power.bandwidth - self.system.bandwidth) > 0:
            errs.append("power.bandwidth: must equal system.bandwidth")
        return errs

    def to_dict(self) -> dict:
        return {
            "system": self.system.to_dict(),
            "power": self.power.to_dict(),
            "layer": self.layer.to_dict(),
            "experiment": {
                "arch": self.arch,
                "group_param": self.group_param,
                "seeds": list(self.seeds),
                "sweep_axis": self.sweep_axis,
                "sweep_values": list(self.sweep_values),
                "se_method": self.se_method,
                "mc_samples": self.mc_samples,
                "layout_pool": self.layout_pool,
                "out_dir": self.out_dir,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d or {})
        unknown = set(d) - {"system", "power", "layer", "experiment"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        errs = []
        parts = {}
        for key, typ in (("system", SystemConfig), ("power", PowerParams), ("layer", LayerConfig)):
            try:
                parts[key] = typ.from_dict(d.get(key) or {})
            except (ValueError, TypeError) as exc:
                errs.append(f"{key}: {exc}")
        exp = dict(d.get("experiment") or {})
        bad = set(exp) - set(EXPERIMENT_FIELDS)
        if bad:
            errs.append(f"experiment: unknown fields {sorted(bad)}")
        if errs:
            raise ValueError("; ".join(errs))
        for key in ("seeds", "sweep_values"):
            if key in exp:
                val = exp[key]
                exp[key] = tuple(val) if isinstance(val, (list, tuple)) else (val,)
        if "seeds" in exp:
            exp["seeds"] = tuple(int(s) for s in exp["seeds"])
        cfg = cls(**parts, **exp)
        errs = cfg.validate()
        if errs:
            raise ValueError("; ".join(errs))
        return cfg

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


def parse_config(text: str) -> ExperimentConfig:
    return ExperimentConfig.from_dict(yaml.safe_load(text) or {})


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def merge_dicts(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge_dicts(out[k], v)
        else:
            out[k] = v
    return out


# -- sweep presets, one per figure-style experiment ------------------------------

def _preset(M, K, axis=None, values=(), arch="proposed"):
    return {"system": {"n_aps": M, "n_ues": K},
            "experiment": {"arch": arch, "sweep_axis": axis, "sweep_values": list(values)}}


PRESETS: Dict[str, dict] = {
    "fig3": _preset(9, 6, "group_param", range(1, 6), "q_variable"),
    "fig4": _preset(9, 6, "group_param", range(1, 6), "q_variable"),
    "fig5": _preset(16, 6, "n_ues", range(4, 10)),
    "fig6": _preset(16, 6, "n_ues", range(4, 10)),
    "fig7": _preset(16, 8, "n_aps", (9, 16, 25, 36)),
    "fig8": _preset(16, 8, "n_aps", (9, 16, 25, 36)),
    "fig9": _preset(16, 6, "ue_array", ("1x1", "2x2", "3x3", "5x5", "7x7", "8x8")),
    "fig10": _preset(16, 6, "arch", ARCHS),
    "fig11": _preset(9, 6, "arch", ARCHS),
    # desk-scale learning check: 4x1 AP arrays, single-antenna UEs, 2:3 random share as in the full runs
    "smoke": {"system": {"n_aps": 4, "n_ues": 3, "ap_array": [4, 1], "ue_array": [1, 1]},
              "layer": {"episodes": 500, "random_episodes": 333},
              "experiment": {"seeds": [0, 1, 2, 3, 4], "layout_pool": 50}},
}


def apply_axis(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis == "arch":
        return replace(cfg, arch=str(value))
    if axis == "group_param":
        return replace(cfg, group_param=float(value))
    if axis in ("n_aps", "n_ues"):
        return replace(cfg, system=replace(cfg.system, **{axis: int(value)}))
    if axis in ("ap_array", "ue_array"):
        if isinstance(value, str):
            shape = tuple(int(v) for v in value.lower().split("x"))
        else:
            shape = tuple(int(v) for v in value)
        return replace(cfg, system=replace(cfg.system, **{axis: shape}))
    raise ValueError(f"unknown sweep axis {axis!r}")


SWEEP_AXES = ("arch", "group_param", "n_aps", "n_ues", "ap_array", "ue_array")


# -- records ----------------------------------------------------------------------

@dataclass
class RunRecord:
    config_hash: str
    seed: int
    arch: str
    axis_value: Optional[str]
    episodes: List[dict]
    summary: dict
    ue_se: List[float]
    wall_time: float
    path: Optional[str] = None


def convergence_episode(rewards: np.ndarray, window: int = 10, tol: float = 0.05) -> int:
    """First episode whose trailing mean stays within ``tol`` of the final level."""
    r = np.asarray(rewards, dtype=float)
    if len(r) == 0:
        return -1
    w = max(1, min(window, len(r)))
    ma = np.convolve(r, np.ones(w) / w, mode="valid")
    final = ma[-1]
    scale = max(abs(final), 1e-12)
    inside = np.abs(ma - final) <= tol * scale
    # last index where it was outside, plus one
    outside = np.flatnonzero(~inside)
    first = 0 if len(outside) == 0 else int(outside[-1]) + 1
    return first + w - 1


def summarize_episodes(episodes: List[dict], random_episodes: int) -> dict:
    learn = [e for e in episodes if not e["random"]] or episodes
    keys = ("sum_se", "ee", "comm_power", "reward2", "mean_cluster", "o_density")
    out = {f"mean_{k}": float(np.mean([e[k] for e in learn])) for k in keys}
    out["convergence_episode"] = convergence_episode([e["reward2"] for e in episodes])
    out["constraints_ok"] = bool(all(e["constraints_ok"] for e in episodes))
    return out


METRIC_COLUMNS = ("episode", "random", "n_steps", "sum_se", "ee", "comm_power", "p_total",
                  "o_density", "mean_cluster", "reward1", "reward2", "max_trace", "constraints_ok")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


def metrics_csv(episodes: List[dict]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {SCHEMA} v{SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_COLUMNS)
    for e in episodes:
        w.writerow([_fmt(e[c]) for c in METRIC_COLUMNS])
    return buf.getvalue()


def read_metrics(path) -> List[dict]:
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        expected = f"# schema: {SCHEMA} v{SCHEMA_VERSION}"
        if first != expected:
            raise ValueError(f"unsupported metrics schema line {first!r}")
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        row = {}
        for k, v in r.items():
            if k in ("episode", "n_steps"):
                row[k] = int(v)
            elif k in ("random", "constraints_ok"):
                row[k] = bool(int(v))
            else:
                row[k] = float(v)
        out.append(row)
    return out


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def run(cfg: ExperimentConfig, seed: Optional[int] = None, out_dir=None,
        axis_value=None, write: bool = True) -> RunRecord:
    errs = cfg.validate()
    if errs:
        raise ValueError("; ".join(errs))
    seed = cfg.seeds[0] if seed is None else int(seed)
    run_cfg = replace(cfg, seeds=(seed,))
    h = run_cfg.config_hash()
    env = CfxlEnv(cfg.system, cfg.power, seed=seed, se_method=cfg.se_method, mc_samples=cfg.mc_samples,
                  layout_pool=cfg.layout_pool)
    trainer = Trainer(env, cfg.layer, cfg.arch, group_param=cfg.group_param, seed=seed)
    t0 = time.perf_counter()
    tlog = trainer.train()
    wall = time.perf_counter() - t0
    last_ep = tlog.episodes[-1]["episode"] if tlog.episodes else -1
    last_rows = [r for r in tlog.steps if r["episode"] == last_ep]
    ue_se = []
    if last_rows:
        K = cfg.system.n_ues
        ue_se = [float(np.mean([r[f"se_ue{k}"] for r in last_rows])) for k in range(K)]
    summary = summarize_episodes(tlog.episodes, cfg.layer.random_episodes)
    summary["aborted_episodes"] = len(tlog.aborted)
    rec = RunRecord(h, seed, cfg.arch, None if axis_value is None else str(axis_value),
                    tlog.episodes, summary, ue_se, wall)
    if write:
        base = Path(out_dir if out_dir is not None else cfg.out_dir) / h
        _write(base / "metrics.csv", metrics_csv(tlog.episodes))
        _write(base / "config.yaml", dump_config(run_cfg))
        rec.path = str(base)
    log.info("run %s seed=%d arch=%s done in %.1fs", h, seed, cfg.arch, wall)
    return rec


def sweep(cfg: ExperimentConfig, axis: Optional[str] = None, values: Sequence = (),
          out_dir=None, write: bool = True) -> List[RunRecord]:
    axis = axis or cfg.sweep_axis
    values = tuple(values) or tuple(cfg.sweep_values)
    if axis is None or not values:
        raise ValueError("sweep needs an axis and at least one value")
    records = []
    for v in values:
        point = apply_axis(cfg, axis, v)
        for s in cfg.seeds:
            records.append(run(point, s, out_dir=out_dir, axis_value=v, write=write))
    if write:
        base = Path(out_dir if out_dir is not None else cfg.out_dir)
        write_summary(summarize(records), base)
    return records


def estimate_complexity(cfg: ExperimentConfig, arch: str, n_b: Optional[float] = None,
                        n_share: Optional[float] = None, wall_time: Optional[float] = None) -> dict:
    """Instantiate the per-architecture operation-count formulas.

    Without measured ``n_b``/``n_share`` the fully connected values ``M``
    and ``K`` are used.
    """
    M, K = cfg.system.n_aps, cfg.system.n_ues
    n_b = float(M if n_b is None else n_b)
    n_share = float(K if n_share is None else n_share)
    hidden = tuple(cfg.layer.hidden)
    clus_formula, net_formula = complexity.FORMULAS.get(arch, (None, None))
    return {
        "arch": arch,
        "clustering_formula": clus_formula,
        "network_formula": net_formula,
        "M": M, "K": K, "N_B": n_b, "N_share": n_share,
        "clustering_ops": complexity.clustering_ops(arch, M, K, n_b, n_share),
        "network_ops": complexity.network_ops(arch, M, K, n_b, n_share, hidden, hidden),
        "wall_time_s": wall_time,
    }


# -- aggregation --------------------------------------------------------------------

SUMMARY_KEYS = ("mean_sum_se", "mean_ee", "mean_comm_power", "mean_reward2", "convergence_episode")


def summarize(records: Sequence[RunRecord]) -> dict:
    if not records:
        raise ValueError("summarize needs at least one record")
    groups: Dict[tuple, List[RunRecord]] = {}
    for r in records:
        groups.setdefault((r.arch, r.axis_value or ""), []).append(r)
    table = []
    for (arch, val) in sorted(groups):
        recs = sorted(groups[(arch, val)], key=lambda r: r.seed)
        row = {"arch": arch, "axis_value": val, "n_seeds": len(recs)}
        for k in SUMMARY_KEYS:
            xs = np.array([r.summary[k] for r in recs], dtype=float)
            row[f"{k}_mean"] = float(xs.mean())
            row[f"{k}_std"] = float(xs.std())
        table.append(row)
    se_rows = [{"arch": r.arch, "axis_value": r.axis_value or "", "seed": r.seed, "ue": k, "se": s}
               for r in sorted(records, key=lambda r: (r.arch, r.axis_value or "", r.seed))
               for k, s in enumerate(r.ue_se)]
    curves = []
    for (arch, val) in sorted(groups):
        recs = groups[(arch, val)]
        n = min(len(r.episodes) for r in recs)
        for i in range(n):
            xs = np.array([r.episodes[i]["reward2"] for r in recs])
            curves.append({"arch": arch, "axis_value": val, "episode": recs[0].episodes[i]["episode"],
                           "reward2_mean": float(xs.mean()), "reward2_std": float(xs.std())})
    return {"table": table, "ue_se": se_rows, "curves": curves}


def _rows_csv(rows: List[dict]) -> str:
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(v) for k, v in r.items()})
    return buf.getvalue()


def write_summary(summary: dict, out_dir) -> None:
    base = Path(out_dir)
    _write(base / "summary.csv", _rows_csv(summary["table"]))
    _write(base / "ue_se.csv", _rows_csv(summary["ue_se"]))
    _write(base / "curves.csv", _rows_csv(summary["curves"]))


def load_records(paths: Sequence) -> List[RunRecord]:
    """Rebuild records from run directories written by ``run``."""
    recs = []
    for p in paths:
        p = Path(p)
        cfg = load_config(p / "config.yaml")
        eps = read_metrics(p / "metrics.csv")
        summary = summarize_episodes(eps, cfg.layer.random_episodes)
        recs.append(RunRecord(p.name, cfg.seeds[0], cfg.arch, None, eps, summary, [], float("nan"), str(p)))
    return recs
