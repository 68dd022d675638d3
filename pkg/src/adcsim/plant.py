"""Ground-truth rigid-body plant.

Attitude dynamics with a single momentum wheel on the body y axis,
gravity-gradient torque, magnetorquer torque, boom-deployment inertia
switching, and sensor emulation (magnetometer, sun sensor, gyro).

State conventions: w_bi is the body rate wrt inertial in body axes;
q_bo the body-relative-to-orbital quaternion (the integrated state);
q_bi derived through the orbital frame each step. The wheel momentum
H_w lives along the wheel axis in body coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import mathcore as mc
from .environment import gravity_gradient_torque
from .orbit import OrbitalFrame

__all__ = [
    "RateOverflow",
    "AlreadyDeployed",
    "SingularInertia",
    "SpacecraftParams",
    "PlantState",
    "ActuatorCommand",
    "SensorParams",
    "SensorNoise",
    "SensorReadings",
    "apply_magnetorquer",
    "step_dynamics",
    "measure",
    "deploy_boom",
    "linearize_dynamics",
]

INERTIA_STOWED = np.array([
    [7.6590, -0.0020, 0.0380],
    [-0.0020, 7.6490, -0.0170],
    [0.0380, -0.0170, 0.5330],
])
# boom deployment raises the two lateral principal moments by the
# mission budget's I_max - I_min figure
BOOM_LATERAL_INCREMENT = 5.108


class RateOverflow(RuntimeError):
    """Body rate exceeded the blow-up guard (simulation diverged)."""


class AlreadyDeployed(RuntimeError):
    """Boom deployment commanded twice."""


class SingularInertia(ValueError):
    """Inertia tensor is not invertible."""


def _deployed_default() -> np.ndarray:
    out = INERTIA_STOWED.copy()
    out[0, 0] += BOOM_LATERAL_INCREMENT
    out[1, 1] += BOOM_LATERAL_INCREMENT
    return out


@dataclass
class SpacecraftParams:
    inertia_stowed: np.ndarray = field(default_factory=lambda: INERTIA_STOWED.copy())
    inertia_deployed: np.ndarray = field(default_factory=_deployed_default)
    wheel_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    wheel_inertia: float = 1.067e-4          # kg m^2
    wheel_momentum_limit: float = 0.067      # N m s
    wheel_torque_limit: float = 0.01         # N m
    max_moment: float = 12.0                 # A m^2 per axis
    max_voltage: float = 9.0                 # V
    volts_per_moment: float = 9.0 / 12.0     # k_UM, V/(A m^2)
    residual_dipole: float = 0.5             # A m^2

    def inertia(self, mflag: int) -> np.ndarray:
        return self.inertia_deployed if mflag else self.inertia_stowed


@dataclass
class PlantState:
    w_bi: np.ndarray                  # rad/s, body axes
    q_bo: np.ndarray                  # body <- orbital
    q_bi: np.ndarray                  # body <- inertial
    h_wheel: float = 0.0              # N m s along wheel axis
    mflag: int = 0

    def __post_init__(self):
        self.w_bi = np.asarray(self.w_bi, dtype=float)
        self.q_bo = mc.quat_normalize(self.q_bo)
        self.q_bi = mc.quat_normalize(self.q_bi)

    @property
    def dcm_bo(self) -> np.ndarray:
        return mc.quat_to_dcm(self.q_bo)

    @property
    def dcm_bi(self) -> np.ndarray:
        return mc.quat_to_dcm(self.q_bi)

    @staticmethod
    def from_orbital_attitude(q_bo, w_bi, frame: OrbitalFrame, h_wheel: float = 0.0,
                              mflag: int = 0) -> "PlantState":
        q_bi = mc.quat_mul(frame.q_oi, mc.quat_normalize(q_bo))
        return PlantState(np.asarray(w_bi, dtype=float), q_bo, q_bi, h_wheel, mflag)


@dataclass
class ActuatorCommand:
    """What the flight software sends to the actuators each control cycle."""

    u_m: np.ndarray = field(default_factory=lambda: np.zeros(3))    # coil volts
    t_w: np.ndarray = field(default_factory=lambda: np.zeros(3))    # wheel torque bookkeeping
    hw_set: float = 0.0                                             # wheel momentum setpoint

    def __post_init__(self):
        self.u_m = np.asarray(self.u_m, dtype=float)
        self.t_w = np.asarray(self.t_w, dtype=float)


@dataclass
class SensorParams:
    mag_sigma_t: float = 120.0e-9            # magnetometer noise, Tesla
    sun_sigma_rad: float = math.radians(0.3)
    sun_fov_rad: float = math.radians(60.0)
    sun_boresight: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -1.0]))
    gyro_sigma_rad_s: float = math.radians(0.22)
    gyro_drift_rad_s: np.ndarray = field(default_factory=lambda: np.full(3, 5.0e-6))


class SensorNoise:
    """Per-sensor split PRNG streams; deterministic for a given seed."""

    def __init__(self, seed: int | None):
        if seed is None:
            self.mag = self.sun = self.gyro = None
        else:
            streams = np.random.SeedSequence(seed).spawn(3)
            self.mag = np.random.default_rng(streams[0])
            self.sun = np.random.default_rng(streams[1])
            self.gyro = np.random.default_rng(streams[2])


@dataclass
class SensorReadings:
    b_body: np.ndarray            # Tesla
    sun_body: np.ndarray          # unit vector (meaningful only if sun_flag)
    gyro: np.ndarray              # rad/s
    sun_flag: int


def apply_magnetorquer(u_m, b_body, params: SpacecraftParams) -> np.ndarray:
    """Torque (N m) from coil voltages and the body-frame field (Tesla)."""
    moment = np.asarray(u_m, dtype=float) / params.volts_per_moment
    return np.cross(moment, np.asarray(b_body, dtype=float))


def step_dynamics(state: PlantState, r_eci_m, b_eci_t, frame: OrbitalFrame,
                  cmd: ActuatorCommand, params: SpacecraftParams, dt: float,
                  substep: float = 0.01, gravity_gradient: bool = True,
                  method: str = "rk4") -> PlantState:
    """Advance the plant by one control period using fixed substeps.

    The environment inputs (position, inertial field, orbital frame) are
    held over the control period; attitude-dependent quantities
    (body-frame field, gravity-gradient lever arm) are re-evaluated at
    every derivative evaluation. The quaternion is renormalized each
    substep. `method` is "rk4" (meets the 1e-4/60 s torque-free
    conservation budget at the 0.01 s substep) or "euler" (reference
    first-order behavior).
    """
    if not (0.0 < dt and 0.0 < substep <= 0.1):
        raise ValueError("dt must be positive and substep in (0, 0.1]")
    if method not in ("rk4", "euler"):
        raise ValueError(f"unknown integration method {method!r}")
    inertia = params.inertia(state.mflag)
    inv_inertia = np.linalg.inv(inertia)
    r_eci_m = np.asarray(r_eci_m, dtype=float)
    b_eci_t = np.asarray(b_eci_t, dtype=float)
    axis = params.wheel_axis
    dcm_oi = frame.dcm_oi
    w_oi = frame.w_oi
    r_orb = dcm_oi @ r_eci_m
    gg_scale = 3.0 * 3.986004418e14 / float(np.linalg.norm(r_eci_m)) ** 5

    # wheel ramp toward the commanded setpoint, torque- and momentum-limited
    hw_target = float(np.clip(cmd.hw_set, -params.wheel_momentum_limit,
                              params.wheel_momentum_limit))
    hw_rate = float(np.clip((hw_target - state.h_wheel) / dt,
                            -params.wheel_torque_limit, params.wheel_torque_limit))
    moment = cmd.u_m / params.volts_per_moment

    # constants seen by the substep kernel, all in orbit axes or body scalars
    b_orb = dcm_oi @ b_eci_t
    bo1, bo2, bo3 = float(b_orb[0]), float(b_orb[1]), float(b_orb[2])
    ro1, ro2, ro3 = float(r_orb[0]), float(r_orb[1]), float(r_orb[2])
    wo1, wo2, wo3 = float(w_oi[0]), float(w_oi[1]), float(w_oi[2])
    m1, m2, m3 = float(moment[0]), float(moment[1]), float(moment[2])
    a1, a2, a3 = float(axis[0]), float(axis[1]), float(axis[2])
    (i11, i12, i13), (i21, i22, i23), (i31, i32, i33) = inertia.tolist()
    (v11, v12, v13), (v21, v22, v23), (v31, v32, v33) = inv_inertia.tolist()
    gg = gg_scale if gravity_gradient else 0.0

    def deriv(w1, w2, w3, q1, q2, q3, q4, hw_s):
        # body <- orbital DCM from q_bo (scalar-last passive convention)
        c11 = q1 * q1 - q2 * q2 - q3 * q3 + q4 * q4
        c12 = 2.0 * (q1 * q2 + q3 * q4)
        c13 = 2.0 * (q1 * q3 - q2 * q4)
        c21 = 2.0 * (q1 * q2 - q3 * q4)
        c22 = -q1 * q1 + q2 * q2 - q3 * q3 + q4 * q4
        c23 = 2.0 * (q2 * q3 + q1 * q4)
        c31 = 2.0 * (q1 * q3 + q2 * q4)
        c32 = 2.0 * (q2 * q3 - q1 * q4)
        c33 = -q1 * q1 - q2 * q2 + q3 * q3 + q4 * q4
        # magnetorquer torque: moment x (C_bo b_orb)
        bb1 = c11 * bo1 + c12 * bo2 + c13 * bo3
        bb2 = c21 * bo1 + c22 * bo2 + c23 * bo3
        bb3 = c31 * bo1 + c32 * bo2 + c33 * bo3
        t1 = m2 * bb3 - m3 * bb2
        t2 = m3 * bb1 - m1 * bb3
        t3 = m1 * bb2 - m2 * bb1
        if gg:
            rb1 = c11 * ro1 + c12 * ro2 + c13 * ro3
            rb2 = c21 * ro1 + c22 * ro2 + c23 * ro3
            rb3 = c31 * ro1 + c32 * ro2 + c33 * ro3
            ir1 = i11 * rb1 + i12 * rb2 + i13 * rb3
            ir2 = i21 * rb1 + i22 * rb2 + i23 * rb3
            ir3 = i31 * rb1 + i32 * rb2 + i33 * rb3
            t1 += gg * (rb2 * ir3 - rb3 * ir2)
            t2 += gg * (rb3 * ir1 - rb1 * ir3)
            t3 += gg * (rb1 * ir2 - rb2 * ir1)
        # - w x (I w + hw axis) - hw_rate axis
        l1 = i11 * w1 + i12 * w2 + i13 * w3 + hw_s * a1
        l2 = i21 * w1 + i22 * w2 + i23 * w3 + hw_s * a2
        l3 = i31 * w1 + i32 * w2 + i33 * w3 + hw_s * a3
        t1 += -(w2 * l3 - w3 * l2) - hw_rate * a1
        t2 += -(w3 * l1 - w1 * l3) - hw_rate * a2
        t3 += -(w1 * l2 - w2 * l1) - hw_rate * a3
        wd1 = v11 * t1 + v12 * t2 + v13 * t3
        wd2 = v21 * t1 + v22 * t2 + v23 * t3
        wd3 = v31 * t1 + v32 * t2 + v33 * t3
        # q_bo kinematics with w_bo = w - C_bo w_oi
        wb1 = w1 - (c11 * wo1 + c12 * wo2 + c13 * wo3)
        wb2 = w2 - (c21 * wo1 + c22 * wo2 + c23 * wo3)
        wb3 = w3 - (c31 * wo1 + c32 * wo2 + c33 * wo3)
        qd1 = 0.5 * (q4 * wb1 - q3 * wb2 + q2 * wb3)
        qd2 = 0.5 * (q3 * wb1 + q4 * wb2 - q1 * wb3)
        qd3 = 0.5 * (-q2 * wb1 + q1 * wb2 + q4 * wb3)
        qd4 = 0.5 * (-q1 * wb1 - q2 * wb2 - q3 * wb3)
        return (wd1, wd2, wd3, qd1, qd2, qd3, qd4)

    y = (float(state.w_bi[0]), float(state.w_bi[1]), float(state.w_bi[2]),
         float(state.q_bo[0]), float(state.q_bo[1]), float(state.q_bo[2]),
         float(state.q_bo[3]))
    hw = state.h_wheel

    n_sub = max(1, int(round(dt / substep)))
    h = dt / n_sub
    h6 = h / 6.0
    for _ in range(n_sub):
        if method == "euler":
            k1 = deriv(*y, hw)
            y = tuple(y[i] + h * k1[i] for i in range(7))
        else:
            hm = hw + 0.5 * h * hw_rate
            k1 = deriv(*y, hw)
            k2 = deriv(*(y[i] + 0.5 * h * k1[i] for i in range(7)), hm)
            k3 = deriv(*(y[i] + 0.5 * h * k2[i] for i in range(7)), hm)
            k4 = deriv(*(y[i] + h * k3[i] for i in range(7)), hw + h * hw_rate)
            y = tuple(y[i] + h6 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]) for i in range(7))
        qn = math.sqrt(y[3] * y[3] + y[4] * y[4] + y[5] * y[5] + y[6] * y[6])
        y = (y[0], y[1], y[2], y[3] / qn, y[4] / qn, y[5] / qn, y[6] / qn)
        hw_new = hw + h * hw_rate
        if abs(hw_new) > params.wheel_momentum_limit:
            hw_new = math.copysign(params.wheel_momentum_limit, hw_new)
        hw = hw_new

    w = np.array(y[0:3])
    q_bo = np.array(y[3:7])
    if np.linalg.norm(w) > 10.0:
        raise RateOverflow(f"|w| = {np.linalg.norm(w):.2f} rad/s")

    q_bi = mc.quat_normalize(mc.quat_mul(frame.q_oi, q_bo))
    q_bi = mc.quat_sign_continuity(q_bi, state.q_bi)
    q_bo = mc.quat_sign_continuity(q_bo, state.q_bo)
    return PlantState(w, q_bo, q_bi, hw, state.mflag)


def _perp_basis(v: np.ndarray):
    helper = np.array([1.0, 0.0, 0.0]) if abs(v[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(v, helper)
    e1 /= np.linalg.norm(e1)
    return e1, np.cross(v, e1)


def measure(state: PlantState, b_eci_t, sun_eci, in_eclipse: bool,
            noise: SensorNoise | None = None,
            sensors: SensorParams | None = None) -> SensorReadings:
    """Emulate one sensor sample set at the current true state."""
    if sensors is None:
        sensors = SensorParams()
    c_bi = state.dcm_bi
    b_body = c_bi @ np.asarray(b_eci_t, dtype=float)
    if noise is not None and noise.mag is not None:
        b_body = b_body + noise.mag.normal(0.0, sensors.mag_sigma_t, 3)

    sun_body = c_bi @ np.asarray(sun_eci, dtype=float)
    sun_body = sun_body / np.linalg.norm(sun_body)
    if noise is not None and noise.sun is not None:
        e1, e2 = _perp_basis(sun_body)
        t1, t2 = noise.sun.normal(0.0, sensors.sun_sigma_rad, 2)
        sun_body = sun_body + t1 * e1 + t2 * e2
        sun_body /= np.linalg.norm(sun_body)
    bore = sensors.sun_boresight / np.linalg.norm(sensors.sun_boresight)
    in_fov = math.acos(float(np.clip(np.dot(sun_body, bore), -1.0, 1.0))) <= sensors.sun_fov_rad
    sun_flag = int((not in_eclipse) and in_fov)

    gyro = state.w_bi + sensors.gyro_drift_rad_s
    if noise is not None and noise.gyro is not None:
        gyro = gyro + noise.gyro.normal(0.0, sensors.gyro_sigma_rad_s, 3)

    return SensorReadings(b_body, sun_body, gyro, sun_flag)


def deploy_boom(state: PlantState, params: SpacecraftParams) -> PlantState:
    """Switch to the deployed inertia, conserving body angular momentum."""
    if state.mflag:
        raise AlreadyDeployed("boom already deployed")
    h_body = params.inertia_stowed @ state.w_bi
    w_new = np.linalg.solve(params.inertia_deployed, h_body)
    return replace(state, w_bi=w_new, mflag=1)


def linearize_dynamics(w_bar, h_bar, inertia):
    """Jacobians of the 9-state (rate, attitude-vector, wheel-momentum)
    small-signal model about (w_bar, h_bar).

    Returns (A, B_u, B_d) with x = (dw, dg, h), u = control torque,
    d = disturbance torque. The attitude kinematic block is I3/2.
    """
    w_bar = np.asarray(w_bar, dtype=float)
    h_bar = np.asarray(h_bar, dtype=float)
    inertia = np.asarray(inertia, dtype=float)
    if abs(np.linalg.det(inertia)) < 1e-12:
        raise SingularInertia("inertia tensor is singular")
    inv_i = np.linalg.inv(inertia)

    a_ww = inv_i @ (mc.skew(inertia @ w_bar + h_bar) - mc.skew(w_bar) @ inertia)
    a_wh = inv_i @ (-mc.skew(w_bar))
    A = np.zeros((9, 9))
    A[0:3, 0:3] = a_ww
    A[0:3, 6:9] = a_wh
    A[3:6, 0:3] = 0.5 * np.eye(3)
    B_u = np.zeros((9, 3))
    B_u[0:3, :] = inv_i
    B_u[6:9, :] = -np.eye(3)
    B_d = np.zeros((9, 3))
    B_d[0:3, :] = inv_i
    return A, B_u, B_d
