"""Run configuration: one structured file, strict keys, table defaults."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .errors import ConfigError


@dataclass
class DeviceSection:
    r_p: float = 1.21e6
    r_ap: float = 2.5e6
    theta_sh: float = 0.3
    w_mtj: float = 32e-9
    t_hm: float = 2e-9
    r_hm: float = 400.0
    rho_hm: float = 2.0e-6
    v_dd: float = 1.0
    t_write: float = 0.5e-9
    t_read: float = 0.5e-9
    t_reset: float = 0.5e-9
    i_reset: float = 150e-6
    e_inverter: float = 1.47e-15


@dataclass
class MagneticsSection:
    major_axis: float = 100e-9
    minor_axis: float = 40e-9
    thickness: float = 1.2e-9
    m_s: float = 1.0e6
    alpha: float = 0.0122
    temperature: float = 300.0
    dt: float = 1e-12
    seed: int = 0


@dataclass
class SweepSection:
    currents: list | None = None
    eb_kt: list = field(default_factory=lambda: [10.0, 20.0, 30.0])
    pulse_widths: list = field(default_factory=lambda: [0.2e-9, 0.5e-9, 1e-9])
    trials: int = 1000
    temperature: float = 300.0
    seed: int = 12345
    drive: str = "spin_hall"
    points: int = 25


@dataclass
class NetworkSection:
    n_neurons: int = 9
    p_max: float = 0.064
    steps_per_image: int = 340
    tau_0: int = 50
    tau_inh: int = 50
    tau_plus: float = 4.5
    tau_minus: float = 5.0
    eta_plus: float = 0.03
    eta_minus: float = 0.01
    homeostasis_beta: float = 0.02
    v_row: float | None = None
    seed: int = 7


@dataclass
class IoSection:
    out_dir: str = "."
    csv: bool = True


@dataclass
class RunConfig:
    device: DeviceSection = field(default_factory=DeviceSection)
    magnetics: MagneticsSection = field(default_factory=MagneticsSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    io: IoSection = field(default_factory=IoSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        cfg = cls()
        sections = {f.name: f for f in dataclasses.fields(cls)}
        for key, body in data.items():
            if key not in sections:
                raise ConfigError(f"unknown config section {key!r}")
            section = getattr(cfg, key)
            valid = {f.name for f in dataclasses.fields(section)}
            if not isinstance(body, dict):
                raise ConfigError(f"section {key!r} must be a mapping")
            for name, value in body.items():
                if name not in valid:
                    raise ConfigError(f"unknown key {key}.{name}")
                setattr(section, name, value)
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            with open(path) as f:
                data = json.load(f)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(data)

    def apply_overrides(self, pairs: list[str]) -> None:
        """Apply ``section.key=value`` command-line overrides."""
        for pair in pairs:
            if "=" not in pair or "." not in pair.split("=", 1)[0]:
                raise ConfigError(f"override must look like section.key=value: {pair!r}")
            dotted, raw = pair.split("=", 1)
            sec_name, key = dotted.split(".", 1)
            try:
                section = getattr(self, sec_name)
            except AttributeError:
                raise ConfigError(f"unknown config section {sec_name!r}") from None
            if key not in {f.name for f in dataclasses.fields(section)}:
                raise ConfigError(f"unknown key {dotted}")
            setattr(section, key, json.loads(raw))

    def device_params(self):
        from .device import DeviceParams
        d = self.device
        return DeviceParams(r_p=d.r_p, r_ap=d.r_ap, theta_sh=d.theta_sh, w_mtj=d.w_mtj,
                            t_hm=d.t_hm, r_hm=d.r_hm, rho_hm=d.rho_hm, v_dd=d.v_dd,
                            t_write=d.t_write, t_read=d.t_read, t_reset=d.t_reset,
                            i_reset=d.i_reset, e_inverter=d.e_inverter)
