"""Attitude determination.

TRIAD two-vector geometric solution (used to initialize the filter and,
through an SVD of its quaternion column, to seed the measurement noise),
a 10-state magnetometer-gyro EKF (primary), a 7-state star-gyro EKF
(backup), and the conversion of inertial estimates to orbital-frame
quantities.

Units at this boundary: magnetic fields in Tesla, rates in rad/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mathcore as mc
from .orbit import OrbitalFrame
from .plant import SensorReadings

__all__ = [
    "CollinearVectors",
    "InnovationCovSingular",
    "TriadResult",
    "triad",
    "MagGyroEkfState",
    "mag_gyro_ekf_step",
    "StarGyroEkfState",
    "star_gyro_ekf_step",
    "AttitudeEstimate",
    "to_orbital_estimate",
    "AttitudeDetermination",
    "FILTER_PERIOD",
]

FILTER_PERIOD = 0.25  # s

# printed filter tuning
MAG_GYRO_Q_DIAG = np.array([1e-11] * 4 + [1e-9] * 3 + [2e-12] * 3)
MAG_GYRO_R_DIAG = np.array([1e-10] * 3 + [0.0] * 3)
GYRO_R_EPSILON = 1e-12  # substituted for the printed zero gyro block
STAR_GYRO_Q_DIAG = np.full(7, 1e-13)
STAR_GYRO_R_DIAG = np.full(4, 4e-8)


class CollinearVectors(ValueError):
    """The two observation vectors are too close to parallel."""


class InnovationCovSingular(np.linalg.LinAlgError):
    """Innovation covariance H P H' + R is not invertible."""


@dataclass
class TriadResult:
    dcm_bi: np.ndarray
    q_bi: np.ndarray
    sigma: np.ndarray   # singular values of the quaternion column


def triad(b1, b2, o1, o2) -> TriadResult:
    """Deterministic attitude from two vector pairs.

    b1/b2 are measured in the body frame, o1/o2 modelled in the reference
    frame; the first pair anchors the solution. Returns the DCM mapping
    reference coordinates into the body frame.
    """
    b1 = np.asarray(b1, dtype=float)
    b2 = np.asarray(b2, dtype=float)
    o1 = np.asarray(o1, dtype=float)
    o2 = np.asarray(o2, dtype=float)
    m1 = mc.unit(b1)
    cb = np.cross(b1, b2)
    co = np.cross(o1, o2)
    if np.linalg.norm(cb) <= 1e-6 * np.linalg.norm(b1) * np.linalg.norm(b2) or \
       np.linalg.norm(co) <= 1e-6 * np.linalg.norm(o1) * np.linalg.norm(o2):
        raise CollinearVectors("observation pairs are (near) parallel")
    m2 = mc.unit(cb)
    m3 = np.cross(m1, m2)
    r1 = mc.unit(o1)
    r2 = mc.unit(co)
    r3 = np.cross(r1, r2)
    C = np.outer(m1, r1) + np.outer(m2, r2) + np.outer(m3, r3)
    q = mc.dcm_to_quat(C)
    _, sigma, _ = mc.svd_small(q.reshape(4, 1))
    sig4 = np.zeros(4)
    sig4[: len(sigma)] = sigma
    return TriadResult(C, q, sig4)


@dataclass
class MagGyroEkfState:
    """[q1..q4, wx, wy, wz, cx, cy, cz] with covariance."""

    x: np.ndarray
    p: np.ndarray
    q_noise: np.ndarray = field(default_factory=lambda: np.diag(MAG_GYRO_Q_DIAG))
    r_noise: np.ndarray = field(
        default_factory=lambda: np.diag(MAG_GYRO_R_DIAG + np.array([0.0] * 3 + [GYRO_R_EPSILON] * 3)))
    period: float = FILTER_PERIOD

    @staticmethod
    def initial(q_bi=(0.0, 0.0, 0.0, 1.0), w=(0.0, 0.0, 0.0),
                p_att: float = 1e-2, p_rate: float = 1e-4, p_drift: float = 1e-6,
                gyro_r_epsilon: float = GYRO_R_EPSILON) -> "MagGyroEkfState":
        x = np.concatenate([mc.quat_normalize(q_bi), np.asarray(w, dtype=float), np.zeros(3)])
        p = np.diag([p_att] * 4 + [p_rate] * 3 + [p_drift] * 3)
        r = np.diag(MAG_GYRO_R_DIAG + np.array([0.0] * 3 + [gyro_r_epsilon] * 3))
        return MagGyroEkfState(x, p, np.diag(MAG_GYRO_Q_DIAG), r)


def _mag_gyro_f(x, inertia_diag):
    q, w = x[0:4], x[4:7]
    ix, iy, iz = inertia_diag
    f = np.zeros(10)
    f[0:4] = 0.5 * mc.quat_kinematic_matrix(q) @ w
    f[4] = -((iz - iy) / ix) * w[1] * w[2]
    f[5] = -((ix - iz) / iy) * w[2] * w[0]
    f[6] = -((iy - ix) / iz) * w[0] * w[1]
    return f


def _mag_gyro_F(x, inertia_diag):
    q, w = x[0:4], x[4:7]
    ix, iy, iz = inertia_diag
    F = np.zeros((10, 10))
    wx, wy, wz = w
    F[0:4, 0:4] = 0.5 * np.array([
        [0.0, wz, -wy, wx],
        [-wz, 0.0, wx, wy],
        [wy, -wx, 0.0, wz],
        [-wx, -wy, -wz, 0.0],
    ])
    F[0:4, 4:7] = 0.5 * mc.quat_kinematic_matrix(q)
    F[4, 5] = -((iz - iy) / ix) * wz
    F[4, 6] = -((iz - iy) / ix) * wy
    F[5, 4] = -((ix - iz) / iy) * wz
    F[5, 6] = -((ix - iz) / iy) * wx
    F[6, 4] = -((iy - ix) / iz) * wy
    F[6, 5] = -((iy - ix) / iz) * wx
    return F


def _mag_gyro_h(x, b_i):
    q = x[0:4]
    out = np.zeros(6)
    out[0:3] = mc.quat_to_dcm(q) @ b_i
    out[3:6] = x[4:7] + x[7:10]
    return out


def _mag_gyro_H(x, b_i):
    q1, q2, q3, q4 = x[0:4]
    bx, by, bz = b_i
    H = np.zeros((6, 10))
    H[0, 0:4] = 2.0 * np.array([q1 * bx + q2 * by + q3 * bz,
                                -(q2 * bx - q1 * by + q4 * bz),
                                -(q3 * bx - q4 * by - q1 * bz),
                                q4 * bx + q3 * by - q2 * bz])
    H[1, 0:4] = 2.0 * np.array([q2 * bx - q1 * by + q4 * bz,
                                q1 * bx + q2 * by + q3 * bz,
                                -(q4 * bx + q3 * by - q2 * bz),
                                -(q3 * bx - q4 * by - q1 * bz)])
    H[2, 0:4] = 2.0 * np.array([q3 * bx - q4 * by - q1 * bz,
                                q4 * bx + q3 * by - q2 * bz,
                                q1 * bx + q2 * by + q3 * bz,
                                q2 * bx - q1 * by + q4 * bz])
    H[3:6, 4:7] = np.eye(3)
    H[3:6, 7:10] = np.eye(3)
    return H


def _kalman_update(x_pred, p_pred, z, h_pred, H, R):
    s = H @ p_pred @ H.T + R
    try:
        k_gain = np.linalg.solve(s.T, (p_pred @ H.T).T).T
    except np.linalg.LinAlgError as exc:
        raise InnovationCovSingular(str(exc)) from exc
    x_new = x_pred + k_gain @ (z - h_pred)
    ikh = np.eye(len(x_pred)) - k_gain @ H
    p_new = ikh @ p_pred @ ikh.T + k_gain @ R @ k_gain.T   # Joseph form
    p_new = 0.5 * (p_new + p_new.T)
    return x_new, p_new


def mag_gyro_ekf_step(s: MagGyroEkfState, z: SensorReadings, b_i,
                      control_torque=(0.0, 0.0, 0.0),
                      inertia_diag=(7.6590, 7.6490, 0.5330)) -> MagGyroEkfState:
    """One predict/update cycle of the magnetometer-gyro filter.

    b_i is the modelled inertial field in Tesla; the measurement vector is
    (body field [T], gyro [rad/s]). The commanded torque feeds the rate
    prediction through the diagonal inertia.
    """
    b_i = np.asarray(b_i, dtype=float)
    t = s.period
    u = np.zeros(10)
    u[4:7] = np.asarray(control_torque, dtype=float) / np.asarray(inertia_diag, dtype=float)

    x_pred = s.x + (_mag_gyro_f(s.x, inertia_diag) + u) * t
    phi = np.eye(10) + t * _mag_gyro_F(s.x, inertia_diag)
    p_pred = phi @ s.p @ phi.T + s.q_noise

    meas = np.concatenate([np.asarray(z.b_body, dtype=float), np.asarray(z.gyro, dtype=float)])
    x_new, p_new = _kalman_update(x_pred, p_pred, meas,
                                  _mag_gyro_h(x_pred, b_i), _mag_gyro_H(x_pred, b_i),
                                  s.r_noise)
    x_new[0:4] = mc.quat_normalize(x_new[0:4])
    return MagGyroEkfState(x_new, p_new, s.q_noise, s.r_noise, s.period)


@dataclass
class StarGyroEkfState:
    """[q1..q4, cx, cy, cz] with covariance; star sensor delivers q directly."""

    x: np.ndarray
    p: np.ndarray
    q_noise: np.ndarray = field(default_factory=lambda: np.diag(STAR_GYRO_Q_DIAG))
    r_noise: np.ndarray = field(default_factory=lambda: np.diag(STAR_GYRO_R_DIAG))
    period: float = FILTER_PERIOD

    @staticmethod
    def initial(q_bi=(0.0, 0.0, 0.0, 1.0), p_att: float = 1e-4,
                p_drift: float = 1e-8) -> "StarGyroEkfState":
        x = np.concatenate([mc.quat_normalize(q_bi), np.zeros(3)])
        return StarGyroEkfState(x, np.diag([p_att] * 4 + [p_drift] * 3))


def _star_f(x, gyro):
    q, c = x[0:4], x[4:7]
    f = np.zeros(7)
    f[0:4] = 0.5 * mc.quat_kinematic_matrix(q) @ (gyro - c)
    return f


def _star_F(x, gyro):
    q, c = x[0:4], x[4:7]
    w = gyro - c
    F = np.zeros((7, 7))
    wx, wy, wz = w
    F[0:4, 0:4] = 0.5 * np.array([
        [0.0, wz, -wy, wx],
        [-wz, 0.0, wx, wy],
        [wy, -wx, 0.0, wz],
        [-wx, -wy, -wz, 0.0],
    ])
    F[0:4, 4:7] = -0.5 * mc.quat_kinematic_matrix(q)
    return F


def star_gyro_ekf_step(s: StarGyroEkfState, q_meas, gyro) -> StarGyroEkfState:
    """One cycle of the star-gyro filter; q_meas is the star quaternion."""
    q_meas = np.asarray(q_meas, dtype=float)
    n = np.linalg.norm(q_meas)
    if abs(n - 1.0) > 1e-3:
        raise ValueError(f"star quaternion norm {n:.4f} too far from unity")
    gyro = np.asarray(gyro, dtype=float)
    t = s.period
    # keep the measured quaternion on the filter's sign branch
    if np.dot(q_meas, s.x[0:4]) < 0.0:
        q_meas = -q_meas

    x_pred = s.x + _star_f(s.x, gyro) * t
    phi = np.eye(7) + t * _star_F(s.x, gyro)
    p_pred = phi @ s.p @ phi.T + s.q_noise

    H = np.zeros((4, 7))
    H[0:4, 0:4] = np.eye(4)
    x_new, p_new = _kalman_update(x_pred, p_pred, q_meas, x_pred[0:4], H, s.r_noise)
    x_new[0:4] = mc.quat_normalize(x_new[0:4])
    return StarGyroEkfState(x_new, p_new, s.q_noise, s.r_noise, s.period)


@dataclass
class AttitudeEstimate:
    q_bi: np.ndarray
    q_bo: np.ndarray
    w_bi: np.ndarray
    w_bo: np.ndarray
    gyro_drift: np.ndarray


def to_orbital_estimate(q_bi, w_bi, frame: OrbitalFrame, gyro_drift=(0.0, 0.0, 0.0),
                        q_bo_prev=None) -> AttitudeEstimate:
    """Convert inertial attitude/rate into orbital-frame quantities.

    q_bo = conj(q_oi) (x) q_bi and w_bo = w_bi - C_bo w_oi; the quaternion
    sign-continuity rule is applied against the previous orbital estimate
    when one is supplied.
    """
    q_bi = mc.quat_normalize(q_bi)
    q_bo = mc.quat_mul(mc.quat_conj(frame.q_oi), q_bi)
    if q_bo_prev is not None:
        q_bo = mc.quat_sign_continuity(q_bo, q_bo_prev)
    c_bo = mc.quat_to_dcm(q_bo)
    w_bi = np.asarray(w_bi, dtype=float)
    w_bo = w_bi - c_bo @ frame.w_oi
    return AttitudeEstimate(q_bi, q_bo, w_bi, w_bo, np.asarray(gyro_drift, dtype=float))


class AttitudeDetermination:
    """Stateful attitude-determination pipeline.

    When the sun sensor is valid, TRIAD provides the filter
    initialization and the SVD-derived scale of the measurement noise
    attitude block; in eclipse the filter runs on magnetometer + gyro
    alone with the printed measurement covariance.
    """

    def __init__(self, inertia_diag=(7.6590, 7.6490, 0.5330),
                 gyro_r_epsilon: float = GYRO_R_EPSILON,
                 p0_att: float = 1e-2, p0_rate: float = 1e-4, p0_drift: float = 1e-6):
        self.inertia_diag = np.asarray(inertia_diag, dtype=float)
        self.gyro_r_epsilon = gyro_r_epsilon
        self.p0 = (p0_att, p0_rate, p0_drift)
        self.ekf: MagGyroEkfState | None = None
        self._q_bo_prev: np.ndarray | None = None
        self._base_r_diag = MAG_GYRO_R_DIAG + np.array([0.0] * 3 + [gyro_r_epsilon] * 3)

    def step(self, readings: SensorReadings, b_i, sun_i, frame: OrbitalFrame,
             control_torque=(0.0, 0.0, 0.0)) -> AttitudeEstimate:
        """Run one 0.25 s determination cycle and return the orbital estimate."""
        b_i = np.asarray(b_i, dtype=float)
        r_diag = self._base_r_diag.copy()
        if readings.sun_flag:
            fix = triad(readings.b_body, readings.sun_body, b_i, np.asarray(sun_i, dtype=float))
            # rotation-angle error scale from the TRIAD quaternion column
            r_diag[0:3] = r_diag[0:3] * float(fix.sigma[0]) ** 2
            if self.ekf is None:
                self.ekf = MagGyroEkfState.initial(
                    fix.q_bi, readings.gyro, *self.p0, gyro_r_epsilon=self.gyro_r_epsilon)
        elif self.ekf is None:
            self.ekf = MagGyroEkfState.initial(
                (0.0, 0.0, 0.0, 1.0), readings.gyro, *self.p0,
                gyro_r_epsilon=self.gyro_r_epsilon)

        state = MagGyroEkfState(self.ekf.x, self.ekf.p, self.ekf.q_noise,
                                np.diag(r_diag), self.ekf.period)
        self.ekf = mag_gyro_ekf_step(state, readings, b_i, control_torque, self.inertia_diag)
        est = to_orbital_estimate(self.ekf.x[0:4], self.ekf.x[4:7], frame,
                                  self.ekf.x[7:10], self._q_bo_prev)
        self._q_bo_prev = est.q_bo
        return est
