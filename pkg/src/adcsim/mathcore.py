"""Vector/matrix/quaternion primitives shared by every other module.

Conventions used throughout the package:

* Quaternions are scalar-last arrays ``[q1, q2, q3, q4]`` where
  ``(q1, q2, q3)`` is the vector (Gibbs) part and ``q4`` the scalar.
* A quaternion represents a passive rotation of the reference frame into
  the body frame: ``v_body = quat_to_dcm(q) @ v_ref``.
* ``quat_mul(p, q)`` is the Hamilton product, composed so that
  ``quat_to_dcm(quat_mul(p, q)) == quat_to_dcm(q) @ quat_to_dcm(p)``.
  Hence for frames o (orbital), i (inertial), b (body):
  ``q_bo = quat_mul(quat_conj(q_oi), q_bi)``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "NonOrthonormalInput",
    "SingularNormalMatrix",
    "NoConvergence",
    "norm",
    "unit",
    "skew",
    "max_abs",
    "quat_normalize",
    "quat_conj",
    "quat_mul",
    "quat_to_dcm",
    "dcm_to_quat",
    "quat_sign_continuity",
    "quat_from_axis_angle",
    "quat_kinematic_matrix",
    "omega_from_quat_rate",
    "svd_small",
]


class NonOrthonormalInput(ValueError):
    """Rotation-matrix input is not orthonormal within tolerance."""


class SingularNormalMatrix(ValueError):
    """Normal equations of the quaternion-rate solve are singular."""


class NoConvergence(RuntimeError):
    """Iterative kernel failed to converge."""


def norm(v) -> float:
    """Euclidean norm of a vector of length >= 1."""
    v = np.asarray(v, dtype=float)
    if v.size < 1:
        raise ValueError("norm of empty vector")
    return float(np.sqrt(np.dot(v, v)))


def unit(v) -> np.ndarray:
    """Unit vector along v. Raises on zero input."""
    n = norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return np.asarray(v, dtype=float) / n


def skew(w) -> np.ndarray:
    """Skew-symmetric matrix S(w) with S(w) @ v = w x v."""
    wx, wy, wz = np.asarray(w, dtype=float)
    return np.array([
        [0.0, -wz, wy],
        [wz, 0.0, -wx],
        [-wy, wx, 0.0],
    ])


def max_abs(v) -> float:
    """max_i |v_i|.

    Deliberately takes absolute values; the magnitude of the largest
    component is what actuator saturation scaling needs, also for
    all-negative inputs.
    """
    v = np.asarray(v, dtype=float)
    if v.size < 1:
        raise ValueError("max_abs of empty vector")
    return float(np.max(np.abs(v)))


def quat_normalize(q) -> np.ndarray:
    """Return q scaled to unit norm."""
    q = np.asarray(q, dtype=float)
    n = norm(q)
    if n == 0.0:
        raise ValueError("cannot normalize zero quaternion")
    return q / n


def quat_conj(q) -> np.ndarray:
    """Conjugate (inverse for unit quaternions): vector part negated."""
    q = np.asarray(q, dtype=float)
    return np.array([-q[0], -q[1], -q[2], q[3]])


def quat_mul(p, q) -> np.ndarray:
    """Hamilton product p (x) q, scalar-last.

    Composition rule: quat_to_dcm(p (x) q) = quat_to_dcm(q) @ quat_to_dcm(p).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pv, ps = p[:3], p[3]
    qv, qs = q[:3], q[3]
    vec = ps * qv + qs * pv + np.cross(pv, qv)
    return np.array([vec[0], vec[1], vec[2], ps * qs - np.dot(pv, qv)])


def quat_to_dcm(q) -> np.ndarray:
    """DCM mapping reference-frame vectors into the body frame.

    |q| must be 1 within about 1e-6; the result is orthonormal with
    det +1 to 1e-9 for unit input.
    """
    q = np.asarray(q, dtype=float)
    q1, q2, q3, q4 = q
    return np.array([
        [q1 * q1 - q2 * q2 - q3 * q3 + q4 * q4, 2 * (q1 * q2 + q3 * q4), 2 * (q1 * q3 - q2 * q4)],
        [2 * (q1 * q2 - q3 * q4), -q1 * q1 + q2 * q2 - q3 * q3 + q4 * q4, 2 * (q2 * q3 + q1 * q4)],
        [2 * (q1 * q3 + q2 * q4), 2 * (q2 * q3 - q1 * q4), -q1 * q1 - q2 * q2 + q3 * q3 + q4 * q4],
    ])


def dcm_to_quat(C, tol: float = 1e-6) -> np.ndarray:
    """Unit quaternion of a proper orthonormal rotation matrix.

    Uses the max-trace/max-diagonal branch selection so every attitude is
    handled without catastrophic cancellation. Raises NonOrthonormalInput
    when C'C deviates from identity by more than `tol` or det(C) is not +1.
    """
    C = np.asarray(C, dtype=float)
    if C.shape != (3, 3):
        raise NonOrthonormalInput("expected 3x3 matrix")
    err = np.max(np.abs(C.T @ C - np.eye(3)))
    if err > tol or np.linalg.det(C) < 0.0:
        raise NonOrthonormalInput(f"input deviates from a proper rotation by {err:.3e}")

    tr = C[0, 0] + C[1, 1] + C[2, 2]
    q = np.empty(4)
    if tr > 0.0:
        s = np.sqrt(tr + 1.0)
        q[3] = 0.5 * s
        s = 0.5 / s
        q[0] = (C[1, 2] - C[2, 1]) * s
        q[1] = (C[2, 0] - C[0, 2]) * s
        q[2] = (C[0, 1] - C[1, 0]) * s
    else:
        # trace <= 0: pick the dominant diagonal element
        i = int(np.argmax([C[0, 0], C[1, 1], C[2, 2]]))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(C[i, i] - C[j, j] - C[k, k] + 1.0)
        q[i] = 0.5 * s
        s = 0.5 / s
        q[3] = (C[j, k] - C[k, j]) * s
        q[j] = (C[i, j] + C[j, i]) * s
        q[k] = (C[i, k] + C[k, i]) * s
    return quat_normalize(q)


def quat_sign_continuity(q, q_prev, jump: float = 0.1) -> np.ndarray:
    """Negate q if any component jumped by more than `jump` vs q_prev.

    q and -q are the same rotation; this keeps sampled sequences on one
    sign branch.
    """
    q = np.asarray(q, dtype=float)
    q_prev = np.asarray(q_prev, dtype=float)
    if np.any(np.abs(q - q_prev) > jump):
        return -q
    return q


def quat_from_axis_angle(axis, angle: float) -> np.ndarray:
    """Quaternion for a rotation of `angle` rad about unit `axis`."""
    e = unit(axis)
    h = 0.5 * angle
    s = np.sin(h)
    return np.array([e[0] * s, e[1] * s, e[2] * s, np.cos(h)])


def quat_kinematic_matrix(q) -> np.ndarray:
    """4x3 map Xi(q) with dq/dt = 0.5 * Xi(q) @ omega (scalar-last)."""
    q1, q2, q3, q4 = np.asarray(q, dtype=float)
    return np.array([
        [q4, -q3, q2],
        [q3, q4, -q1],
        [-q2, q1, q4],
        [-q1, -q2, -q3],
    ])


def omega_from_quat_rate(q, dq, det_tol: float = 1e-12) -> np.ndarray:
    """Angular rate from a quaternion and its time derivative.

    Solves dq = 0.5 * Xi(q) @ omega for omega in the least-squares sense
    via the 3x3 normal equations (A'A)^-1 A' dq with A = Xi(q); four
    equations, three unknowns. |q| should be within ~1e-3 of unity.
    """
    A = quat_kinematic_matrix(q)
    AtA = A.T @ A
    det = np.linalg.det(AtA)
    if abs(det) < det_tol:
        raise SingularNormalMatrix(f"det(A'A) = {det:.3e}")
    return 2.0 * np.linalg.solve(AtA, A.T @ np.asarray(dq, dtype=float))


def svd_small(A):
    """SVD of a small (m x n, m >= n, both <= 4) matrix.

    Returns (U, s, V) with A = U @ diag(s) @ V.T, singular values sorted
    descending and non-negative. Raises NoConvergence on pathological
    input (propagated from the LAPACK driver).
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] < A.shape[1]:
        raise ValueError("expected m x n with m >= n")
    try:
        U, s, Vh = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return U, s, Vh.T
