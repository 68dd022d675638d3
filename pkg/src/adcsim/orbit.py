"""Two-body orbit propagation and orbital-frame construction.

The orbital (LVLH) frame: z toward nadir, y opposite the orbit normal,
x completing the right-handed triad (along-track for circular orbits).
For a circular orbit the frame rate expressed in orbit axes is
(0, -w0, 0) with w0 = sqrt(mu/|r|^3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import mathcore as mc
from .environment import MU_EARTH

__all__ = [
    "SubOrbital",
    "DegenerateGeometry",
    "OrbitState",
    "OrbitalFrame",
    "propagate_two_body",
    "orbital_frame",
    "state_from_kepler",
    "circular_period",
]

R_EARTH_M = 6378137.0


class SubOrbital(RuntimeError):
    """Propagated position fell to or below the Earth's surface."""


class DegenerateGeometry(ValueError):
    """Position and velocity are too close to parallel to define a frame."""


@dataclass
class OrbitState:
    """ECI position (m) and velocity (m/s)."""

    r_eci: np.ndarray
    v_eci: np.ndarray

    def __post_init__(self):
        self.r_eci = np.asarray(self.r_eci, dtype=float)
        self.v_eci = np.asarray(self.v_eci, dtype=float)


@dataclass
class OrbitalFrame:
    dcm_oi: np.ndarray      # orbit <- inertial
    q_oi: np.ndarray        # quaternion of the same rotation
    w_oi: np.ndarray        # frame rate in orbit axes, (0, -w0, 0)


def propagate_two_body(s: OrbitState, dt: float, method: str = "semi_implicit") -> OrbitState:
    """One two-body step.

    methods:
      * "semi_implicit" (default): velocity first, position with the new
        velocity. Conserves angular momentum exactly for a central force,
        which keeps per-orbit drift inside the stated budget at dt = 1 s.
      * "euler": fully explicit ordering (position with the pre-step
        velocity), kept for reference-behavior comparison.
      * "rk4": classic fourth order, for drift studies.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    r, v = s.r_eci, s.v_eci

    def accel(rr):
        n = np.linalg.norm(rr)
        return -MU_EARTH / (n * n * n) * rr

    if method == "euler":
        r_new = r + v * dt
        v_new = v + accel(r) * dt
    elif method == "semi_implicit":
        v_new = v + accel(r) * dt
        r_new = r + v_new * dt
    elif method == "rk4":
        k1r, k1v = v, accel(r)
        k2r, k2v = v + 0.5 * dt * k1v, accel(r + 0.5 * dt * k1r)
        k3r, k3v = v + 0.5 * dt * k2v, accel(r + 0.5 * dt * k2r)
        k4r, k4v = v + dt * k3v, accel(r + dt * k3r)
        r_new = r + dt / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r)
        v_new = v + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    else:
        raise ValueError(f"unknown propagation method {method!r}")

    if np.linalg.norm(r_new) <= R_EARTH_M:
        raise SubOrbital("orbit radius fell below the Earth's surface")
    return OrbitState(r_new, v_new)


def orbital_frame(s: OrbitState) -> OrbitalFrame:
    """Construct the LVLH frame from the current state (z = -r_hat, y = z x v_hat)."""
    r, v = s.r_eci, s.v_eci
    rmag, vmag = np.linalg.norm(r), np.linalg.norm(v)
    if rmag == 0.0 or vmag == 0.0 or np.linalg.norm(np.cross(r, v)) < 1e-3 * rmag * vmag:
        raise DegenerateGeometry("r and v do not span a plane")
    z = -r / rmag
    y = np.cross(z, v / vmag)
    y /= np.linalg.norm(y)
    x = np.cross(y, z)
    dcm_oi = np.array([x, y, z])
    w0 = math.sqrt(MU_EARTH / rmag ** 3)
    return OrbitalFrame(dcm_oi, mc.dcm_to_quat(dcm_oi), np.array([0.0, -w0, 0.0]))


def circular_period(radius_m: float) -> float:
    """Orbit period of a circular orbit at the given radius."""
    return 2.0 * math.pi * math.sqrt(radius_m ** 3 / MU_EARTH)


def state_from_kepler(a_m: float, ecc: float, inc_deg: float, raan_deg: float,
                      argp_deg: float, nu_deg: float) -> OrbitState:
    """Classical elements to an ECI state (m, m/s)."""
    inc, raan = math.radians(inc_deg), math.radians(raan_deg)
    argp, nu = math.radians(argp_deg), math.radians(nu_deg)
    p = a_m * (1.0 - ecc * ecc)
    rmag = p / (1.0 + ecc * math.cos(nu))
    # perifocal
    r_pf = rmag * np.array([math.cos(nu), math.sin(nu), 0.0])
    v_pf = math.sqrt(MU_EARTH / p) * np.array([-math.sin(nu), ecc + math.cos(nu), 0.0])
    cO, sO = math.cos(raan), math.sin(raan)
    ci, si = math.cos(inc), math.sin(inc)
    cw, sw = math.cos(argp), math.sin(argp)
    rot = np.array([
        [cO * cw - sO * sw * ci, -cO * sw - sO * cw * ci, sO * si],
        [sO * cw + cO * sw * ci, -sO * sw + cO * cw * ci, -cO * si],
        [sw * si, cw * si, ci],
    ])
    return OrbitState(rot @ r_pf, rot @ v_pf)
