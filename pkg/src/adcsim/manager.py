"""ADCS mode management.

Control modes (BZ1): 2 rate/field damping, 3 Earth pointing,
5 pointing + wheel spin, 6 stabilization + wheel despin. Wheel sub-mode
(BZ6): 1 spin-up, 4 hold, 2 unload, 0 despun. Autonomous transitions:
2 -> 3 when the estimated body rate falls below 0.2 deg/s, 3 -> 2 above
0.5 deg/s, 6 -> 3 when despin completes; a safe-mode guard forces mode 2
above 5 deg/s and dominates everything else. Ground commands override
the mode once per cycle before dispatch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import control as ctl
from . import timeframe as tf
from .estimation import AttitudeEstimate
from .mathcore import max_abs, quat_to_dcm
from .plant import SensorReadings, SpacecraftParams

__all__ = [
    "ModeState",
    "MissionClock",
    "time_manager",
    "safe_mode_guard",
    "ManagerConfig",
    "ModeManager",
]

VALID_MODES = (2, 3, 5, 6)


@dataclass
class ModeState:
    bz1: int = 2                 # control mode
    bz6: int = 1                 # wheel sub-mode
    zt1: int = 2                 # ground-commanded mode
    zt1_update_flag: int = 0
    failure_flag: int = 0
    mflag: int = 0               # boom deployed


@dataclass
class MissionClock:
    epoch: tf.EpochUtc
    k: int = 0                   # control-cycle counter


def time_manager(clock: MissionClock, dt: float) -> MissionClock:
    """Advance the mission clock, cascading through the calendar."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return MissionClock(tf.add_seconds(clock.epoch, dt), clock.k + 1)


def safe_mode_guard(est: AttitudeEstimate, mode: ModeState,
                    threshold_rad_s: float = math.radians(5.0)) -> ModeState:
    """Force the damping mode when the estimated body rate is excessive."""
    if max_abs(est.w_bi) > threshold_rad_s:
        mode.bz1 = 2
    return mode


@dataclass
class ManagerConfig:
    to_point_rad_s: float = math.radians(0.2)    # 2 -> 3 threshold
    to_damp_rad_s: float = math.radians(0.5)     # 3 -> 2 threshold
    safe_mode_rad_s: float = math.radians(5.0)
    damping_law: str = "rate"                    # "rate" | "bdot"
    # pointing-mode handoff: above this error angle the rate-profile slew
    # law runs (yaw free, rate capped), below it the quaternion PD law
    # regulates all three axes. 20 deg keeps the PD's implied slew rate
    # under the 0.5 deg/s mode-flip threshold with margin.
    maneuver_blend_rad: float = math.radians(20.0)


class ModeManager:
    """Owns the mode state machine and the per-mode control dispatch."""

    def __init__(self, gains: ctl.ControlGains | None = None,
                 params: SpacecraftParams | None = None,
                 config: ManagerConfig | None = None,
                 mode: ModeState | None = None):
        self.gains = gains if gains is not None else ctl.ControlGains()
        self.params = params if params is not None else SpacecraftParams()
        self.config = config if config is not None else ManagerConfig()
        self.mode = mode if mode is not None else ModeState()
        self.wheel = ctl.WheelState(bz6=self.mode.bz6)
        self.bdot_history = ctl.BdotHistory()
        self._pending_command: int | None = None

    def command_mode(self, zt1: int):
        """Queue a ground command; applied once at the next cycle."""
        self._pending_command = int(zt1)

    def _damping(self, est: AttitudeEstimate, readings: SensorReadings, k: int) -> ctl.ControlOutput:
        if self.config.damping_law == "bdot":
            b_km2 = self.bdot_history.push(readings.b_body)
            if b_km2 is None:
                return ctl.ControlOutput()
            return ctl.bdot_control(readings.b_body, b_km2, k, self.mode.mflag, self.params)
        return ctl.rate_damping(est.w_bo, readings.b_body, self.gains,
                                self.mode.mflag, self.params)

    def _pointing(self, est: AttitudeEstimate, readings: SensorReadings) -> ctl.ControlOutput:
        dcm_bo = quat_to_dcm(est.q_bo)
        if ctl.pointing_error_angle(dcm_bo) > self.config.maneuver_blend_rad:
            return ctl.attitude_maneuver(est.q_bo, est.w_bo, dcm_bo, readings.b_body,
                                         self.gains, self.mode.mflag, self.params)
        return ctl.earth_pointing(est.q_bo, est.w_bo, readings.b_body,
                                  self.gains, self.mode.mflag, self.params)

    def step(self, est: AttitudeEstimate, readings: SensorReadings,
             h_wheel: float, k: int, w_bi_true_overflow: bool = False) -> ctl.ControlOutput:
        """One manager cycle: override, guard, dispatch, transition.

        Subordinate control errors set the failure flag and zero the
        command instead of raising.
        """
        mode = self.mode
        if self._pending_command is not None:
            mode.zt1 = self._pending_command
            mode.zt1_update_flag = 1
            self._pending_command = None
        if mode.zt1_update_flag:
            if mode.zt1 in VALID_MODES:
                mode.bz1 = mode.zt1
                if mode.bz1 in (5, 6) and self.wheel.bz6 == 0:
                    self.wheel.bz6 = 1
            mode.zt1_update_flag = 0

        safe_mode_guard(est, mode, self.config.safe_mode_rad_s)

        out = ctl.ControlOutput()
        try:
            if mode.bz1 == 2:
                out = self._damping(est, readings, k)
                if max_abs(est.w_bi) < self.config.to_point_rad_s:
                    mode.bz1 = 3
            elif mode.bz1 == 3:
                out = self._pointing(est, readings)
                if max_abs(est.w_bi) > self.config.to_damp_rad_s:
                    mode.bz1 = 2
            elif mode.bz1 == 5:
                out = self._pointing(est, readings)
                wheel_out = ctl.wheel_spin(self.wheel, h_wheel, est.q_bo, est.w_bo,
                                           est.w_bi, self.gains, mode.mflag)
                out.t_w = wheel_out.t_w
                out.hw_set = wheel_out.hw_set
            elif mode.bz1 == 6:
                out = ctl.earth_pointing(est.q_bo, est.w_bo, readings.b_body,
                                         self.gains, mode.mflag, self.params)
                wheel_out = ctl.wheel_despin(self.wheel, h_wheel, est.w_bi)
                out.t_w = wheel_out.t_w
                out.hw_set = wheel_out.hw_set
                if self.wheel.bz6 == 0:
                    mode.bz1 = 3
                    self.wheel.bz6 = 1
            else:
                mode.failure_flag = 1
                mode.bz1 = 2
        except (ctl.FieldTooWeak, ValueError):
            mode.failure_flag = 1
            out = ctl.ControlOutput()
            out.hw_set = h_wheel

        if mode.bz1 not in (5, 6):
            out.hw_set = h_wheel   # wheel coasts when not actively managed
        mode.bz6 = self.wheel.bz6
        return out
