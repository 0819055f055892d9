"""Run configuration: one dataclass tree covering the simulator, rewards,
gait schedules, SAC, CMA-ES, and estimator settings, loadable from YAML.

Unknown keys are rejected by name.  Training defaults: batch 128,
buffer 1e6, lr 3e-4, weight decay 1e-6, soft target update 0.001,
discounts 0.995 (recovery) / 0.955 (gaits), CMA population 50 with sigma
1.0 m warm-started at (2.0, 5.0), estimator lr 0.001 / decay 0.0005 /
batch 1024.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np
import yaml

from .cma import CmaConfig
from .core import LegGeometry
from .env import EnvSettings
from .gaits import ContactPattern, GaitTable, GaitType, LOCOMOTION_GAITS
from .rewards import TaskReferences
from .sac import SacConfig
from .sim import PdGains, SimConfig


@dataclass
class EstimatorConfig:
    lr: float = 0.001
    weight_decay: float = 0.0005
    batch_size: int = 1024
    epochs: int = 40
    episodes: int = 100
    target_pairs: int = 215_000


@dataclass
class RunConfig:
    seed: int = 0
    sim: SimConfig = field(default_factory=SimConfig)
    rewards: TaskReferences = field(default_factory=TaskReferences)
    gaits: GaitTable = field(default_factory=GaitTable)
    sac: SacConfig = field(default_factory=SacConfig)
    cma: CmaConfig = field(default_factory=CmaConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)

    def env_settings(self) -> EnvSettings:
        return EnvSettings(sim=self.sim, refs=self.rewards, gait_table=self.gaits)


class ConfigError(ValueError):
    pass


def _check_keys(section: str, data: dict, allowed) -> None:
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown config key: {section}.{key}" if section else f"unknown config key: {key}")


def _simple_section(section: str, cls, data: dict, tuples=()):
    allowed = {f.name for f in fields(cls)}
    _check_keys(section, data, allowed)
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = tuple(value) if key in tuples else value
    return cls(**kwargs)


def _sim_from_dict(data: dict) -> SimConfig:
    allowed = ({f.name for f in fields(SimConfig)} - {"gains"}) | {"kp", "kd", "torque_limit"}
    _check_keys("sim", data, allowed)
    kwargs = dict(data)
    gains = PdGains(
        kp=np.asarray(kwargs.pop("kp", 40.0), dtype=float),
        kd=np.asarray(kwargs.pop("kd", 1.0), dtype=float),
        torque_limit=float(kwargs.pop("torque_limit", 33.5)),
    )
    if "geometry" in kwargs:
        kwargs["geometry"] = _simple_section("sim.geometry", LegGeometry, kwargs["geometry"])
    if "box_dims" in kwargs:
        kwargs["box_dims"] = tuple(kwargs["box_dims"])
    for key in ("joint_lower", "joint_upper"):
        if key in kwargs:
            kwargs[key] = np.asarray(kwargs[key], dtype=float)
    return SimConfig(gains=gains, **kwargs)


def _gaits_from_dict(data: dict) -> GaitTable:
    table = GaitTable()
    allowed = {g.value for g in LOCOMOTION_GAITS}
    _check_keys("gaits", data, allowed)
    for name, entry in data.items():
        _check_keys(f"gaits.{name}", entry, {"frequency", "feet"})
        gait = GaitType(name)
        if "frequency" in entry:
            table.frequencies[gait] = float(entry["frequency"])
        if "feet" in entry:
            feet = tuple(tuple(tuple(float(v) for v in span) for span in foot) for foot in entry["feet"])
            table.patterns[gait] = ContactPattern(feet)
    return table


def from_dict(data: dict) -> RunConfig:
    if data is None:
        data = {}
    _check_keys("", data, {"seed", "sim", "rewards", "gaits", "sac", "cma", "estimator"})
    cfg = RunConfig()
    if "seed" in data:
        cfg.seed = int(data["seed"])
    if "sim" in data:
        cfg.sim = _sim_from_dict(data["sim"])
    if "rewards" in data:
        cfg.rewards = _simple_section("rewards", TaskReferences, data["rewards"])
    if "gaits" in data:
        cfg.gaits = _gaits_from_dict(data["gaits"])
    if "sac" in data:
        cfg.sac = _simple_section("sac", SacConfig, data["sac"], tuples=("hidden",))
    if "cma" in data:
        cfg.cma = _simple_section("cma", CmaConfig, data["cma"], tuples=("warm_start",))
    if "estimator" in data:
        cfg.estimator = _simple_section("estimator", EstimatorConfig, data["estimator"])
    return cfg


def to_dict(cfg: RunConfig) -> dict:
    sim = cfg.sim
    return {
        "seed": cfg.seed,
        "sim": {
            "mass": sim.mass,
            "box_dims": list(sim.box_dims),
            "gravity": sim.gravity,
            "contact_kn": sim.contact_kn,
            "contact_cn": sim.contact_cn,
            "friction_mu": sim.friction_mu,
            "friction_kt": sim.friction_kt,
            "joint_inertia": sim.joint_inertia,
            "contact_threshold": sim.contact_threshold,
            "body_contact_height": sim.body_contact_height,
            "body_contact_forces": sim.body_contact_forces,
            "joint_vel_limit": sim.joint_vel_limit,
            "base_height": sim.base_height,
            "kp": sim.gains.kp.tolist(),
            "kd": sim.gains.kd.tolist(),
            "torque_limit": sim.gains.torque_limit,
            "joint_lower": sim.joint_lower.tolist(),
            "joint_upper": sim.joint_upper.tolist(),
            "geometry": {
                "hip_offset": sim.geometry.hip_offset,
                "thigh": sim.geometry.thigh,
                "calf": sim.geometry.calf,
                "hip_x": sim.geometry.hip_x,
                "hip_y": sim.geometry.hip_y,
            },
        },
        "rewards": {
            "base_height": cfg.rewards.base_height,
            "foot_swing_height": cfg.rewards.foot_swing_height,
            "velocity_trot": cfg.rewards.velocity_trot,
            "velocity_bound": cfg.rewards.velocity_bound,
            "velocity_cap": cfg.rewards.velocity_cap,
            "nominal_foot_positions": cfg.rewards.nominal_foot_positions.tolist(),
        },
        "gaits": {
            gait.value: {
                "frequency": cfg.gaits.frequencies[gait],
                "feet": [[list(span) for span in foot] for foot in cfg.gaits.patterns[gait].intervals],
            }
            for gait in LOCOMOTION_GAITS
        },
        "sac": {f.name: (list(getattr(cfg.sac, f.name)) if f.name == "hidden" else getattr(cfg.sac, f.name))
                for f in fields(SacConfig)},
        "cma": {f.name: (list(getattr(cfg.cma, f.name)) if f.name == "warm_start" else getattr(cfg.cma, f.name))
                for f in fields(CmaConfig)},
        "estimator": {f.name: getattr(cfg.estimator, f.name) for f in fields(EstimatorConfig)},
    }


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    with open(path) as f:
        data = yaml.safe_load(f)
    try:
        return from_dict(data)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{path}: {err}") from err


def save_config(cfg: RunConfig, path: str) -> None:
    with open(path, "w") as f:
        yaml.safe_dump(to_dict(cfg), f, sort_keys=True)
