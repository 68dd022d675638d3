"""Scenario configuration: flat key/value sections (INI).

A scenario pins everything a closed-loop run needs: epoch, initial orbit
(state vector or classical elements), initial attitude and rates,
spacecraft parameters, gain profile, sensor noise and seed, estimator
tuning overrides, manager thresholds, ground-command schedule, and run
timing. Both the in-process runner and the two-process split load the
same file, which is what makes the two topologies bit-comparable.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from . import control as ctl
from . import manager as mgr
from . import orbit
from . import timeframe as tf
from .plant import SensorParams, SpacecraftParams

__all__ = ["Scenario", "load_scenario", "scenario_from_parser"]


@dataclass
class Scenario:
    epoch: tf.EpochUtc
    r_eci_m: np.ndarray
    v_eci_m_s: np.ndarray
    q_bo0: np.ndarray
    w_bi0: np.ndarray
    h_wheel0: float = 0.0
    mflag0: int = 0
    spacecraft: SpacecraftParams = field(default_factory=SpacecraftParams)
    sensors: SensorParams = field(default_factory=SensorParams)
    noise_seed: int | None = 2018
    gains_profile: str = "text"
    manager: mgr.ManagerConfig = field(default_factory=mgr.ManagerConfig)
    gyro_r_epsilon: float = 1e-12
    schedule: list[tuple[float, int]] = field(default_factory=list)
    boom_deploy_time_s: float | None = None
    duration_s: float = 5680.0
    control_period_s: float = 0.25
    telemetry_period_s: float = 1.0
    env_period_s: float = 0.25
    substep_s: float = 0.01
    field_model: str = "WMM"
    orbit_method: str = "semi_implicit"
    plant_method: str = "rk4"

    def __post_init__(self):
        if self.duration_s <= 0.0:
            raise ValueError("duration must be positive")
        ratio = self.telemetry_period_s / self.control_period_s
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("control period must divide the telemetry period")

    def gains(self) -> ctl.ControlGains:
        if self.gains_profile == "legacy":
            return ctl.ControlGains.legacy_profile()
        return ctl.ControlGains()


def _vec(raw: str) -> np.ndarray:
    return np.array([float(x) for x in raw.replace(",", " ").split()])


def scenario_from_parser(cp: configparser.ConfigParser) -> Scenario:
    e = cp["epoch"]
    epoch = tf.EpochUtc(e.getint("year"), e.getint("mon"), e.getint("day"),
                        e.getint("hr", 0), e.getint("min", 0), e.getfloat("sec", 0.0))
    epoch.validate()

    o = cp["orbit"]
    if "r_eci_m" in o:
        r = _vec(o["r_eci_m"])
        v = _vec(o["v_eci_m_s"])
    else:
        st = orbit.state_from_kepler(o.getfloat("semi_major_km") * 1e3,
                                     o.getfloat("ecc", 0.0),
                                     o.getfloat("inc_deg"),
                                     o.getfloat("raan_deg", 0.0),
                                     o.getfloat("argp_deg", 0.0),
                                     o.getfloat("nu_deg", 0.0))
        r, v = st.r_eci, st.v_eci

    a = cp["attitude"]
    q_bo0 = _vec(a.get("q_bo", "0 0 0 1"))
    w_bi0 = np.radians(_vec(a.get("w_bi_deg_s", "0 0 0")))

    sensors = SensorParams()
    seed: int | None = 2018
    if cp.has_section("sensors"):
        s = cp["sensors"]
        seed = s.getint("seed", 2018)
        if not s.getboolean("noise", True):
            seed = None
        sensors.mag_sigma_t = s.getfloat("mag_sigma_nt", 120.0) * 1e-9
        sensors.sun_sigma_rad = math.radians(s.getfloat("sun_sigma_deg", 0.3))
        sensors.sun_fov_rad = math.radians(s.getfloat("sun_fov_deg", 60.0))
        sensors.gyro_sigma_rad_s = math.radians(s.getfloat("gyro_sigma_deg_s", 0.22))
        if "gyro_drift_rad_s" in s:
            sensors.gyro_drift_rad_s = _vec(s["gyro_drift_rad_s"])

    man = mgr.ManagerConfig()
    if cp.has_section("manager"):
        m = cp["manager"]
        man.damping_law = m.get("damping_law", "rate")
        man.to_point_rad_s = math.radians(m.getfloat("to_point_deg_s", 0.2))
        man.to_damp_rad_s = math.radians(m.getfloat("to_damp_deg_s", 0.5))
        man.safe_mode_rad_s = math.radians(m.getfloat("safe_mode_deg_s", 5.0))
        man.maneuver_blend_rad = math.radians(m.getfloat("maneuver_blend_deg", 20.0))

    gyro_eps = 1e-12
    if cp.has_section("estimator"):
        gyro_eps = cp["estimator"].getfloat("gyro_r_epsilon", 1e-12)

    schedule: list[tuple[float, int]] = []
    if cp.has_section("schedule"):
        for _, raw in cp["schedule"].items():
            t_s, mode = raw.replace(",", " ").split()
            schedule.append((float(t_s), int(mode)))
        schedule.sort()

    run = cp["run"] if cp.has_section("run") else {}
    getf = (lambda key, dv: float(run.get(key, dv))) if run else (lambda key, dv: dv)

    boom = None
    if cp.has_section("boom") and "deploy_time_s" in cp["boom"]:
        boom = cp["boom"].getfloat("deploy_time_s")

    return Scenario(
        epoch=epoch,
        r_eci_m=r,
        v_eci_m_s=v,
        q_bo0=q_bo0,
        w_bi0=w_bi0,
        h_wheel0=float(a.get("h_wheel", 0.0)),
        mflag0=int(a.get("mflag", 0)),
        sensors=sensors,
        noise_seed=seed,
        gains_profile=cp.get("gains", "profile", fallback="text"),
        manager=man,
        gyro_r_epsilon=gyro_eps,
        schedule=schedule,
        boom_deploy_time_s=boom,
        duration_s=getf("duration_s", 5680.0),
        control_period_s=getf("control_period_s", 0.25),
        telemetry_period_s=getf("telemetry_period_s", 1.0),
        env_period_s=getf("env_period_s", 0.25),
        substep_s=getf("substep_s", 0.01),
        field_model=str(run.get("field_model", "WMM")) if run else "WMM",
        orbit_method=str(run.get("orbit_method", "semi_implicit")) if run else "semi_implicit",
        plant_method=str(run.get("plant_method", "rk4")) if run else "rk4",
    )


def load_scenario(path: str) -> Scenario:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = cp.read(path)
    if not read:
        raise FileNotFoundError(path)
    return scenario_from_parser(cp)
