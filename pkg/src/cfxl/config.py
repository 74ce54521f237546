"""Scenario and power-model parameters."""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional, Tuple

DEFAULT_WAVELENGTH = 0.01  # 30 GHz


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """Counts, array shapes and physical constants of one scenario.

    Array shapes are ``(n_h, n_v)``; spacings default to a third of the
    wavelength when left as ``None``.
    """

    n_aps: int = 9
    n_ues: int = 6
    ap_array: Tuple[int, int] = (9, 9)
    ue_array: Tuple[int, int] = (3, 3)
    wavelength: float = DEFAULT_WAVELENGTH
    ap_spacing: Optional[float] = None
    ue_spacing: Optional[float] = None
    side_length: float = 1000.0
    wrap: bool = True
    ap_height: float = 10.0
    ue_height: float = 1.5
    noise_dbm: float = -96.0
    bandwidth: float = 20e6
    p_max: float = 0.2
    step_max: float = 5.0
    antenna_gain: float = 1.0
    ap_positions: Optional[Tuple[Tuple[float, float], ...]] = None
    ue_positions: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        errors = self.validate()
        if errors:
            raise ValueError("invalid SystemConfig: " + "; ".join(errors))

    def validate(self) -> list:
        errs = []
        if self.n_aps < 1:
            errs.append("n_aps must be >= 1")
        if self.n_ues < 1:
            errs.append("n_ues must be >= 1")
        for name in ("ap_array", "ue_array"):
            shape = getattr(self, name)
            if len(shape) != 2 or min(shape) < 1:
                errs.append(f"{name} must be two positive counts")
        if self.wavelength <= 0:
            errs.append("wavelength must be > 0")
        for name in ("ap_spacing", "ue_spacing"):
            val = getattr(self, name)
            if val is not None and not (0 < val < self.wavelength / 2):
                errs.append(f"{name} must lie in (0, wavelength/2)")
        if self.side_length <= 0:
            errs.append("side_length must be > 0")
        if self.p_max < 0:
            errs.append("p_max must be >= 0")
        if self.step_max < 0:
            errs.append("step_max must be >= 0")
        if self.bandwidth <= 0:
            errs.append("bandwidth must be > 0")
        if self.ap_positions is not None and len(self.ap_positions) != self.n_aps:
            errs.append("ap_positions length must equal n_aps")
        if self.ue_positions is not None and len(self.ue_positions) != self.n_ues:
            errs.append("ue_positions length must equal n_ues")
        return errs

    @property
    def rx_spacing(self) -> float:
        return self.ap_spacing if self.ap_spacing is not None else self.wavelength / 3

    @property
    def tx_spacing(self) -> float:
        return self.ue_spacing if self.ue_spacing is not None else self.wavelength / 3

    @property
    def n_rx(self) -> int:
        return self.ap_array[0] * self.ap_array[1]

    @property
    def n_tx(self) -> int:
        return self.ue_array[0] * self.ue_array[1]

    @property
    def noise_power(self) -> float:
        return dbm_to_watt(self.noise_dbm)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ap_array"] = list(self.ap_array)
        d["ue_array"] = list(self.ue_array)
        for key in ("ap_positions", "ue_positions"):
            if d[key] is not None:
                d[key] = [list(p) for p in d[key]]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        d = dict(d)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown system fields: {sorted(unknown)}")
        for key in ("ap_array", "ue_array"):
            if key in d:
                d[key] = tuple(int(v) for v in d[key])
        for key in ("ap_positions", "ue_positions"):
            if d.get(key) is not None:
                d[key] = tuple(tuple(float(c) for c in p) for p in d[key])
        return cls(**d)


@dataclass(frozen=True)
class PowerParams:
    """Power-consumption constants (watts unless noted).

    ``c_con``/``c_cpu`` are flop counts per channel use; ``None`` means they
    are derived at evaluation time from the active clustering.
    """

    p_c_ap: float = 0.1        # per AP antenna
    p_p_ap: float = 0.2        # per served UE
    p_fh_ap: float = 0.825     # per AP fronthaul
    p_c_ue: float = 0.1        # per UE antenna
    p_con_ue: float = 0.05     # per UE antenna and sharing link
    p_cpu_fix: float = 5.0
    p_en: float = 0.1          # per bit/s/Hz
    p_de: float = 0.1          # per bit/s/Hz
    bandwidth: float = 20e6
    c_con: Optional[float] = None
    c_cpu: Optional[float] = None
    l_sys: float = 75e9        # flops per watt

    def __post_init__(self):
        for name, val in asdict(self).items():
            if val is not None and (not math.isfinite(val) or val < 0):
                raise ValueError(f"PowerParams.{name} must be finite and >= 0")
        if self.l_sys <= 0:
            raise ValueError("PowerParams.l_sys must be > 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PowerParams":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown power fields: {sorted(unknown)}")
        return cls(**d)
