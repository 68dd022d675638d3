"""Magnetic control laws and momentum-wheel management.

Four magnetic laws share the moment pipeline: desired torque ->
component perpendicular to the measured field -> magnetic moment
M = -(T_perp x B)/|B|^2 -> per-axis voltage clamp U = sat(k_UM M, 9 V).
The realized torque M x B always stays perpendicular to B. Projection
angle gates (alpha) suppress the command when the achievable torque is
too far from the desired one.

Bang-bang detumbling (field-derivative law) alternates full-off/full-on
while the boom is stowed (time-division coefficient k mod 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mathcore as mc
from .plant import SpacecraftParams

__all__ = [
    "FieldTooWeak",
    "ControlGains",
    "ControlOutput",
    "BdotHistory",
    "moment_to_voltage",
    "bdot_control",
    "rate_damping",
    "attitude_maneuver",
    "earth_pointing",
    "pointing_error_angle",
    "target_quaternion",
    "WheelState",
    "wheel_spin",
    "wheel_despin",
    "CONTROL_PERIOD",
]

CONTROL_PERIOD = 0.25  # s

# wheel momentum thresholds in N m s (1 rpm = 0.067/6000)
RPM_QUANTUM = 0.067 / 6000.0
HW_STAND1 = 4000.0 * RPM_QUANTUM     # spin-up bias setpoint
HW_STAND2 = 5000.0 * RPM_QUANTUM     # unload trigger
HW_STAND3 = 2.0 * RPM_QUANTUM        # despun threshold
SPIN_RATE = HW_STAND1 / 1000.0       # N m s per second while spinning up
UNLOAD_RATE = -HW_STAND1 / 2000.0    # while unloading / despinning


class FieldTooWeak(ValueError):
    """Measured field magnitude below the usable floor."""


def _diag(a, b, c):
    return np.diag([a, b, c])


@dataclass
class ControlGains:
    """Gain tables; each matrix has stowed (mflag 0) and deployed variants."""

    kd_damp_stowed: np.ndarray = field(default_factory=lambda: _diag(5.1101, 5.0611, 9.4984))
    kd_damp_deployed: np.ndarray = field(default_factory=lambda: _diag(34.1221, 34.0776, 4.7492))
    kd_maneuver_stowed: np.ndarray = field(default_factory=lambda: _diag(4.4287, 4.3863, 8.2320))
    kd_maneuver_deployed: np.ndarray = field(default_factory=lambda: _diag(29.5725, 29.5339, 4.1160))
    kp_point_stowed: np.ndarray = field(default_factory=lambda: _diag(0.0566, 0.0561, 0.0263))
    kp_point_deployed: np.ndarray = field(default_factory=lambda: _diag(0.3780, 0.3775, 0.0263))
    kd_point_stowed: np.ndarray = field(default_factory=lambda: _diag(3.4067, 3.3740, 6.332))
    kd_point_deployed: np.ndarray = field(default_factory=lambda: _diag(22.7481, 22.7184, 3.1661))
    w_max: float = math.radians(0.15)        # maneuver rate ceiling, rad/s
    sita_d: float = math.radians(2.0)        # profile knee angle, rad
    alpha_damp: float = 1.0235987            # rad, damping-law gate
    alpha_point: float = 1.134464            # rad, pointing-law gate

    def kd_damp(self, mflag):
        return self.kd_damp_deployed if mflag else self.kd_damp_stowed

    def kd_maneuver(self, mflag):
        return self.kd_maneuver_deployed if mflag else self.kd_maneuver_stowed

    def kp_point(self, mflag):
        return self.kp_point_deployed if mflag else self.kp_point_stowed

    def kd_point(self, mflag):
        return self.kd_point_deployed if mflag else self.kd_point_stowed

    @staticmethod
    def legacy_profile() -> "ControlGains":
        """Flight-code initialization values (pointing Kp a decade lower)."""
        g = ControlGains()
        g.kp_point_stowed = _diag(0.0378, 0.03775, 0.00263)
        g.kp_point_deployed = _diag(0.0378, 0.03775, 0.00263)
        g.kd_point_stowed = _diag(22.7481, 22.7184, 3.1661)
        g.kd_point_deployed = _diag(22.7481, 22.7184, 3.1661)
        return g


@dataclass
class ControlOutput:
    m_c: np.ndarray = field(default_factory=lambda: np.zeros(3))   # A m^2
    u_m: np.ndarray = field(default_factory=lambda: np.zeros(3))   # V
    t_m: np.ndarray = field(default_factory=lambda: np.zeros(3))   # expected magnetic torque
    t_w: np.ndarray = field(default_factory=lambda: np.zeros(3))   # wheel torque terms
    hw_set: float = 0.0


def moment_to_voltage(m_c, params: SpacecraftParams | None = None) -> np.ndarray:
    """U = clamp(k_UM * M, +-U_max) per axis."""
    if params is None:
        params = SpacecraftParams()
    u = params.volts_per_moment * np.asarray(m_c, dtype=float)
    return np.clip(u, -params.max_voltage, params.max_voltage)


def _magnetic_pipeline(torque_desired, b_body, gains: ControlGains,
                       params: SpacecraftParams, gate: str) -> ControlOutput:
    """Shared projection/moment/voltage mapping for the linear laws."""
    b = np.asarray(b_body, dtype=float)
    bmag = float(np.linalg.norm(b))
    if bmag < 1e-7:
        raise FieldTooWeak(f"|B| = {bmag:.2e} T")
    t_des = np.asarray(torque_desired, dtype=float)
    t_mag = float(np.linalg.norm(t_des))
    if t_mag == 0.0:
        return ControlOutput()
    b_hat = b / bmag
    t_perp = t_des - np.dot(t_des, b_hat) * b_hat
    m_c = -np.cross(t_perp, b) / (bmag * bmag)

    emit = True
    if gate == "damp":
        # realized-vs-desired torque angle must be small enough
        t_real = np.cross(m_c, b)
        denom = np.linalg.norm(t_real) * t_mag
        if denom > 0.0:
            ang = math.acos(float(np.clip(np.dot(t_real, t_des) / denom, -1.0, 1.0)))
            emit = ang < gains.alpha_damp
    elif gate == "point":
        # desired torque must lie close enough to the plane normal to B
        ang = math.acos(float(np.clip(abs(np.dot(t_des, b_hat)) / t_mag, -1.0, 1.0)))
        emit = ang > gains.alpha_point
    if not emit:
        return ControlOutput()

    u_m = moment_to_voltage(m_c, params)
    m_real = u_m / params.volts_per_moment
    return ControlOutput(m_real, u_m, np.cross(m_real, b))


def bdot_control(b_k, b_km2, k: int, mflag: int,
                 params: SpacecraftParams | None = None,
                 period: float = CONTROL_PERIOD) -> ControlOutput:
    """Bang-bang detumbling from the two-step field derivative.

    B_dot = (B_k - B_{k-2}) / (2T); the commanded moment opposes it at
    maximum magnitude, each axis scaled off the largest one. k mod 2
    time-division applies while the boom is stowed.
    """
    if params is None:
        params = SpacecraftParams()
    b_dot = (np.asarray(b_k, dtype=float) - np.asarray(b_km2, dtype=float)) / (2.0 * period)
    mag = float(np.linalg.norm(b_dot))
    if mag < 1e-18:
        return ControlOutput()   # degenerate: field unchanged
    m_n = -b_dot / mag
    u0 = params.volts_per_moment * m_n * params.max_moment
    k_m = (k % 2) if mflag == 0 else 1
    u_m = k_m * params.max_voltage * u0 / mc.max_abs(u0)
    m_c = u_m / params.volts_per_moment
    return ControlOutput(m_c, u_m, np.cross(m_c, np.asarray(b_k, dtype=float)))


def rate_damping(w_bo, b_body, gains: ControlGains, mflag: int,
                 params: SpacecraftParams | None = None) -> ControlOutput:
    """Angular-velocity feedback damping: T = -Kd w_bo through the coils."""
    if params is None:
        params = SpacecraftParams()
    t_des = -(gains.kd_damp(mflag) @ np.asarray(w_bo, dtype=float))
    return _magnetic_pipeline(t_des, b_body, gains, params, gate="damp")


def pointing_error_angle(dcm_bo) -> float:
    """Angle between the body z axis and nadir (orbital z), radians."""
    return math.acos(float(np.clip(np.asarray(dcm_bo)[2, 2], -1.0, 1.0)))


def target_quaternion(dcm_bo) -> np.ndarray:
    """Nearest-rotation quaternion pulling body z onto nadir.

    Built from the Euler axis normalize(z_body x (C_bo z_orbit)) and the
    pointing error angle; identity when already aligned.
    """
    dcm_bo = np.asarray(dcm_bo, dtype=float)
    a_zn = pointing_error_angle(dcm_bo)
    nadir_b = dcm_bo @ np.array([0.0, 0.0, 1.0])
    axis = np.cross(np.array([0.0, 0.0, 1.0]), nadir_b)
    n = np.linalg.norm(axis)
    if n < 1e-12:
        return np.array([0.0, 0.0, 0.0, 1.0])
    return mc.quat_from_axis_angle(axis / n, a_zn)


def attitude_maneuver(q_bo, w_bo, dcm_bo, b_body, gains: ControlGains, mflag: int,
                      params: SpacecraftParams | None = None) -> ControlOutput:
    """Slew back to Earth pointing along the nearest rotation.

    The commanded rate follows the saturated-linear profile
    W = W_max * min(1, Sita/SitaD) along the Euler axis of the target
    quaternion; the torque damps the rate error toward that profile.
    """
    if params is None:
        params = SpacecraftParams()
    q_br = target_quaternion(dcm_bo)
    vec = q_br[:3]
    s = np.linalg.norm(vec)
    sita = 2.0 * math.asin(min(1.0, s))
    if s > 1e-12:
        axis = vec / s
        w_cmd = gains.w_max * min(1.0, sita / gains.sita_d) * axis
    else:
        w_cmd = np.zeros(3)
    t_des = -(gains.kd_maneuver(mflag) @ (np.asarray(w_bo, dtype=float) - w_cmd))
    return _magnetic_pipeline(t_des, b_body, gains, params, gate="point")


def earth_pointing(q_bo, w_bo, b_body, gains: ControlGains, mflag: int,
                   params: SpacecraftParams | None = None) -> ControlOutput:
    """Small-error quaternion-feedback PD about the orbital frame."""
    if params is None:
        params = SpacecraftParams()
    q_bo = np.asarray(q_bo, dtype=float)
    t_des = -(gains.kp_point(mflag) @ q_bo[:3]) - (gains.kd_point(mflag) @ np.asarray(w_bo, dtype=float))
    return _magnetic_pipeline(t_des, b_body, gains, params, gate="point")


@dataclass
class BdotHistory:
    """Two-cycle body-field memory for the derivative law."""

    b_km1: np.ndarray | None = None
    b_km2: np.ndarray | None = None

    def push(self, b_body) -> np.ndarray | None:
        """Record this cycle's field; return B_{k-2} if available."""
        out = self.b_km2
        self.b_km2 = self.b_km1
        self.b_km1 = np.asarray(b_body, dtype=float).copy()
        return out


@dataclass
class WheelState:
    """Wheel sub-mode (BZ6) bookkeeping for spin/despin management."""

    bz6: int = 1   # 1 spin-up, 4 hold/fine, 2 unload, 0 despun


def _wheel_torque_terms(w_bi, hw_real, dhw_real, dt):
    return np.array([-w_bi[2] * hw_real, dhw_real / dt, w_bi[0] * hw_real])


def _quantize(hw):
    return math.ceil(hw / RPM_QUANTUM) * RPM_QUANTUM


def wheel_spin(ws: WheelState, hw: float, q_bo, w_bo, w_bi, gains: ControlGains,
               mflag: int, dt: float = CONTROL_PERIOD) -> ControlOutput:
    """Momentum-wheel spin management toward the bias setpoint.

    Sub-modes: 1 ramps toward the bias momentum, 4 holds it while
    exchanging a scaled share of the pointing torque on the wheel axis,
    2 unloads back down after exceeding the upper threshold. Setpoints
    quantize to the 1-rpm momentum grid.
    """
    dhw = 0.0
    if ws.bz6 == 1:
        dhw = SPIN_RATE * dt
        if hw > HW_STAND1:
            ws.bz6 = 4
    if ws.bz6 == 2:
        dhw = UNLOAD_RATE * dt
        if hw < HW_STAND1:
            ws.bz6 = 4
    if ws.bz6 == 4:
        t_pd = -(gains.kp_point(mflag) @ np.asarray(q_bo, dtype=float)[:3]) \
            - (gains.kd_point(mflag) @ np.asarray(w_bo, dtype=float))
        dhw = float(t_pd[1]) / 30000.0
        if hw > HW_STAND2:
            ws.bz6 = 2
    hw_set = hw + dhw
    hw_real = _quantize(hw_set)
    dhw_real = hw_real - _quantize(hw)
    return ControlOutput(t_w=_wheel_torque_terms(np.asarray(w_bi, dtype=float), hw_real, dhw_real, dt),
                         hw_set=hw_set)


def wheel_despin(ws: WheelState, hw: float, w_bi,
                 dt: float = CONTROL_PERIOD) -> ControlOutput:
    """Ramp the wheel down; flags BZ6 = 0 once below the despun threshold."""
    if hw < HW_STAND3:
        ws.bz6 = 0
    hw_set = hw + UNLOAD_RATE * dt
    if hw_set < 0.0:
        hw_set = 0.0
    hw_real = _quantize(hw_set)
    dhw_real = hw_real - _quantize(hw)
    return ControlOutput(t_w=_wheel_torque_terms(np.asarray(w_bi, dtype=float), hw_real, dhw_real, dt),
                         hw_set=hw_set)
