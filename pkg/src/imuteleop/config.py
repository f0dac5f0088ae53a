"""Configuration: every tunable constant in the stack under one TOML file.

Any key can be omitted (defaults apply) and any value overridden from the
command line.  ``save_config`` writes the full effective configuration, so
load -> save -> load is the identity.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

try:
    import tomllib  # py311+
except ImportError:
    import tomli as tomllib

from . import protocol


class ConfigInvalid(ValueError):
    pass


@dataclass
class WireConfig:
    glove_port: int = protocol.GLOVE_PORT
    telemetry_port: int = protocol.TELEMETRY_PORT
    command_port: int = protocol.COMMAND_PORT
    haptic_port: int = protocol.HAPTIC_PORT
    emulator_ctl_port: int = protocol.EMULATOR_CTL_PORT
    http_port: int = 8080
    host: str = "127.0.0.1"
    fingers: int = 2
    rate_hz: float = 100.0


@dataclass
class FilterConfig:
    median_half_width: int = 2
    alpha: float = 0.98          # complementary fusion coefficient
    beta: float = 0.1            # Madgwick gain
    accel_min: float = 0.5       # m/s^2 degenerate-accel guard
    calib_samples: int = 100
    calib_motion_tol: float = 0.1  # rad/s


@dataclass
class ReferenceConfig:
    zero_back_band_deg: float = 5.0
    zero_back_rate: float = 0.02   # fraction of deviation per second
    stillness_gyro: float = 0.05   # rad/s
    lock_release_s: float = 0.3
    warmup_s: float = 1.0


@dataclass
class GestureConfig:
    close_deg: float = -50.0
    open_deg: float = -30.0
    flick_max_s: float = 0.5
    alt_down_roll_deg: float = -15.0


@dataclass
class MappingConfig:
    v_max: float = 1.0
    omega_max: float = 0.8
    deadzone_deg: float = 5.0
    full_scale_deg: float = 30.0
    accel_limit: float = 2.0
    yaw_accel_limit: float = 4.0
    altitude_step: float = 0.25
    initial_altitude: float = 1.0
    watchdog_s: float = 0.2


@dataclass
class SimConfig:
    tau_xy: float = 0.3
    tau_z: float = 1.0
    vz_max: float = 0.5
    dt: float = 0.01
    telemetry_hz: float = 50.0
    gripper_travel_s: float = 0.5
    spawn: list = field(default_factory=lambda: [0.0, 0.0, 1.0])
    grasp_zone_enabled: bool = False
    grasp_zone_center: list = field(default_factory=lambda: [1.5, 0.0, 1.0])
    grasp_zone_radius: float = 0.3
    obstacles: list = field(default_factory=list)  # [[x, y, radius], ...] console geometry only
    waypoints: list = field(default_factory=list)  # [[x, y, z], ...] scenario checkpoints


@dataclass
class HapticsConfig:
    threshold_1: float = 0.7
    threshold_2: float = 0.9
    hysteresis: float = 0.1


@dataclass
class EmulatorConfig:
    gyro_noise: float = 0.005   # rad/s std dev
    accel_noise: float = 0.05   # m/s^2 std dev
    seed: int = 0
    hold_end_s: float = 1.0     # keep streaming the final pose this long


@dataclass
class PipelineConfig:
    auto_reset_after_s: float = 0.0  # 0 disables; measured on the device clock
    armed_on_start: bool = True


@dataclass
class Config:
    wire: WireConfig = field(default_factory=WireConfig)
    filters: FilterConfig = field(default_factory=FilterConfig)
    reference: ReferenceConfig = field(default_factory=ReferenceConfig)
    gestures: GestureConfig = field(default_factory=GestureConfig)
    mapping: MappingConfig = field(default_factory=MappingConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    haptics: HapticsConfig = field(default_factory=HapticsConfig)
    emulator: EmulatorConfig = field(default_factory=EmulatorConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)


def validate(cfg: Config) -> Config:
    f = cfg.filters
    if not 0.0 <= f.alpha <= 1.0:
        raise ConfigInvalid(f"filters.alpha must be in [0, 1], got {f.alpha}")
    if f.beta < 0.0:
        raise ConfigInvalid("filters.beta must be >= 0")
    if f.median_half_width < 1:
        raise ConfigInvalid("filters.median_half_width must be >= 1")
    if not 1 <= cfg.wire.fingers <= protocol.MAX_FINGERS:
        raise ConfigInvalid(f"wire.fingers must be 1..{protocol.MAX_FINGERS}")
    if cfg.wire.rate_hz <= 0:
        raise ConfigInvalid("wire.rate_hz must be > 0")
    h = cfg.haptics
    if not (0.0 < h.threshold_1 < h.threshold_2 and 0.0 < h.hysteresis < h.threshold_1):
        raise ConfigInvalid("haptics thresholds must satisfy 0 < h < t1 < t2")
    if not 0.0 < cfg.sim.dt <= 0.1:
        raise ConfigInvalid("sim.dt must be in (0, 0.1]")
    if cfg.mapping.deadzone_deg >= cfg.mapping.full_scale_deg:
        raise ConfigInvalid("mapping.deadzone_deg must be < full_scale_deg")
    for name in ("v_max", "omega_max", "accel_limit", "yaw_accel_limit", "altitude_step"):
        if getattr(cfg.mapping, name) <= 0:
            raise ConfigInvalid(f"mapping.{name} must be > 0")
    return cfg


def _apply_section(section_obj, data: dict, section_name: str) -> None:
    valid = {f.name for f in dataclasses.fields(section_obj)}
    for key, value in data.items():
        if key not in valid:
            raise ConfigInvalid(f"unknown key {section_name}.{key}")
        current = getattr(section_obj, key)
        if isinstance(current, bool):
            if not isinstance(value, bool):
                raise ConfigInvalid(f"{section_name}.{key} must be a boolean")
        elif isinstance(current, int) and not isinstance(value, bool) and isinstance(value, int):
            pass
        elif isinstance(current, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigInvalid(f"{section_name}.{key} must be a number")
            value = float(value)
        elif isinstance(current, int):
            raise ConfigInvalid(f"{section_name}.{key} must be an integer")
        elif isinstance(current, str):
            if not isinstance(value, str):
                raise ConfigInvalid(f"{section_name}.{key} must be a string")
        elif isinstance(current, list):
            if not isinstance(value, list):
                raise ConfigInvalid(f"{section_name}.{key} must be an array")
        setattr(section_obj, key, value)


def load_config(path: Optional[Union[str, Path]] = None) -> Config:
    cfg = Config()
    if path is None:
        return validate(cfg)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigInvalid(f"bad TOML: {e}") from e
    sections = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)}
    for section_name, section_data in data.items():
        if section_name not in sections:
            raise ConfigInvalid(f"unknown section [{section_name}]")
        if not isinstance(section_data, dict):
            raise ConfigInvalid(f"[{section_name}] must be a table")
        _apply_section(sections[section_name], section_data, section_name)
    return validate(cfg)


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)):
        return str(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ConfigInvalid("non-finite value in config")
        return repr(v) if v != int(v) else f"{v:.1f}"
    if isinstance(v, str):
        escaped = v.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigInvalid(f"cannot serialize {type(v).__name__}")


def save_config(cfg: Config, path: Union[str, Path]) -> None:
    lines = []
    for section_field in dataclasses.fields(cfg):
        section = getattr(cfg, section_field.name)
        lines.append(f"[{section_field.name}]")
        for f in dataclasses.fields(section):
            lines.append(f"{f.name} = {_toml_value(getattr(section, f.name))}")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")
