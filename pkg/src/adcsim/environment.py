"""Space environment models.

* Analytic low-precision solar ephemeris (mean-element polynomial with
  obliquity rotation, precessed to J2000), good to ~0.01 deg.
* Geomagnetic main field via Schmidt semi-normalized spherical-harmonic
  synthesis; WMM2015 (degree 12) and IGRF (degree 13) coefficient files
  ship in ``data/``. Synthesis yields nT.
* Conical umbra/penumbra eclipse state.
* Worst-case disturbance-torque budget (closed forms) and the
  gravity-gradient torque used by the plant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

import numpy as np

from . import timeframe as tf
from .timeframe import EpochUtc, InvalidDate

__all__ = [
    "OutOfValidity",
    "BelowSurface",
    "GeomagModel",
    "load_geomag_model",
    "mag_field_ned",
    "mag_field_eci",
    "sun_vector_eci",
    "EclipseCondition",
    "EclipseState",
    "eclipse_state",
    "WorstCaseParams",
    "DisturbanceBudget",
    "disturbance_budget",
    "gravity_gradient_torque",
    "MU_EARTH",
]

MU_EARTH = 3.986004418e14  # m^3/s^2, WGS-84
R_EARTH_KM = 6378.137
R_SUN_KM = 6.957e5
AU_KM = 1.495978707e8
GEOMAG_REF_RADIUS_KM = 6371.2


class OutOfValidity(ValueError):
    """Requested evaluation time/place outside the model's validity."""


class BelowSurface(ValueError):
    """Field requested below the model's altitude floor."""


@dataclass
class GeomagModel:
    """Spherical-harmonic main-field model (Schmidt semi-normalized).

    g/h are (N+1, N+1) arrays indexed [n][m] in nT; gdot/hdot the secular
    variation in nT/yr, valid for `epoch` <= t <= `epoch` + 5.
    """

    name: str
    epoch: float
    nmax: int
    g: np.ndarray
    h: np.ndarray
    gdot: np.ndarray
    hdot: np.ndarray

    def coefficients_at(self, year: float, strict: bool = True):
        dt = year - self.epoch
        if strict and not (0.0 <= dt <= 5.0):
            raise OutOfValidity(f"{self.name} valid {self.epoch}..{self.epoch + 5}, got {year}")
        return self.g + dt * self.gdot, self.h + dt * self.hdot


_MODEL_FILES = {"WMM": "wmm2015.txt", "IGRF": "igrf2015.txt"}
_MODEL_CACHE: dict[str, GeomagModel] = {}


def load_geomag_model(name: str = "WMM") -> GeomagModel:
    """Load a shipped coefficient file ('WMM' or 'IGRF')."""
    key = name.upper()
    if key not in _MODEL_FILES:
        raise ValueError(f"unknown geomagnetic model {name!r}")
    if key in _MODEL_CACHE:
        return _MODEL_CACHE[key]
    text = resources.files("adcsim.data").joinpath(_MODEL_FILES[key]).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    hdr = lines[0].split()
    epoch, nmax = float(hdr[1]), int(hdr[2])
    g = np.zeros((nmax + 1, nmax + 1))
    h = np.zeros((nmax + 1, nmax + 1))
    gdot = np.zeros((nmax + 1, nmax + 1))
    hdot = np.zeros((nmax + 1, nmax + 1))
    for ln in lines[1:]:
        n_s, m_s, gv, hv, gd, hd = ln.split()
        n, m = int(n_s), int(m_s)
        g[n, m], h[n, m] = float(gv), float(hv)
        gdot[n, m], hdot[n, m] = float(gd), float(hd)
    model = GeomagModel(hdr[0], epoch, nmax, g, h, gdot, hdot)
    _MODEL_CACHE[key] = model
    return model


def _schmidt_legendre(nmax: int, theta: float):
    """Schmidt semi-normalized P[n][m](cos theta) and dP/dtheta."""
    ct, st = math.cos(theta), math.sin(theta)
    P = np.zeros((nmax + 1, nmax + 1))
    dP = np.zeros((nmax + 1, nmax + 1))
    P[0, 0] = 1.0
    if nmax >= 1:
        P[1, 0], dP[1, 0] = ct, -st
        P[1, 1], dP[1, 1] = st, ct
    for n in range(2, nmax + 1):
        k = math.sqrt((2.0 * n - 1.0) / (2.0 * n))
        P[n, n] = k * st * P[n - 1, n - 1]
        dP[n, n] = k * (st * dP[n - 1, n - 1] + ct * P[n - 1, n - 1])
        for m in range(0, n):
            a = (2.0 * n - 1.0) / math.sqrt(n * n - m * m)
            b = math.sqrt((n - 1.0) ** 2 - m * m) / math.sqrt(n * n - m * m)
            P[n, m] = a * ct * P[n - 1, m] - b * P[n - 2, m]
            dP[n, m] = a * (ct * dP[n - 1, m] - st * P[n - 1, m]) - b * dP[n - 2, m]
    return P, dP


def synth_geocentric(model: GeomagModel, r_km: float, theta: float, phi: float,
                     year: float, nmax: int | None = None, strict: bool = True):
    """Field (B_r, B_theta, B_phi) in nT at geocentric (r, colatitude, east lon).

    `nmax` truncates the expansion (e.g. 1 for the dipole term only).
    """
    N = model.nmax if nmax is None else min(nmax, model.nmax)
    g, h = model.coefficients_at(year, strict=strict)
    P, dP = _schmidt_legendre(N, theta)
    st = math.sin(theta)
    br = bt = bp = 0.0
    ratio = GEOMAG_REF_RADIUS_KM / r_km
    for n in range(1, N + 1):
        rn = ratio ** (n + 2)
        for m in range(0, n + 1):
            c, s = math.cos(m * phi), math.sin(m * phi)
            gh_c = g[n, m] * c + h[n, m] * s
            br += rn * (n + 1) * gh_c * P[n, m]
            bt -= rn * gh_c * dP[n, m]
            if m > 0:
                gh_s = -g[n, m] * s + h[n, m] * c
                if st > 1e-12:
                    bp -= rn * m * gh_s * P[n, m] / st
                else:
                    # pole limit: P[n,1]/sin(theta) -> dP[n,1]
                    if m == 1:
                        bp -= rn * gh_s * dP[n, m]
    return br, bt, bp


def mag_field_ned(lat_deg: float, lon_deg: float, h_km: float, year: float,
                  model: GeomagModel | None = None, nmax: int | None = None,
                  strict: bool = True) -> np.ndarray:
    """Geomagnetic field (north, east, down) in nT at a WGS-84 geodetic point."""
    if model is None:
        model = load_geomag_model("WMM")
    if h_km < -1.0:
        raise BelowSurface(f"height {h_km} km below the model floor")
    lat = math.radians(lat_deg)
    # geodetic -> geocentric radius/latitude
    r_ecef = tf.geod_to_ecef(tf.GeodeticPos(lat_deg, lon_deg, h_km))
    r = float(np.linalg.norm(r_ecef))
    lat_gc = math.asin(r_ecef[2] / r)
    theta = math.pi / 2.0 - lat_gc
    br, bt, bp = synth_geocentric(model, r, theta, math.radians(lon_deg), year,
                                  nmax=nmax, strict=strict)
    # geocentric components to geodetic north/east/down
    xp, zp = -bt, -br
    psi = lat_gc - lat
    x = xp * math.cos(psi) - zp * math.sin(psi)
    z = xp * math.sin(psi) + zp * math.cos(psi)
    return np.array([x, bp, z])


def mag_field_eci(r_eci_km, t: EpochUtc, model: GeomagModel | None = None,
                  nmax: int | None = None) -> np.ndarray:
    """Geomagnetic field vector in nT, J2000 ECI axes, at an ECI position (km)."""
    r_eci_km = np.asarray(r_eci_km, dtype=float)
    alt = float(np.linalg.norm(r_eci_km)) - R_EARTH_KM
    if alt <= 100.0:
        raise BelowSurface(f"altitude {alt:.0f} km at or below 100 km")
    if alt >= 10000.0:
        raise OutOfValidity(f"altitude {alt:.0f} km above the 10000 km ceiling")
    r_ecef = tf.eci_to_ecef(r_eci_km, t)
    geod = tf.ecef_to_geod(r_ecef)
    year = tf.datetime_to_years(t)
    b_ned = mag_field_ned(geod.lat_deg, geod.lon_deg, geod.height_km, year, model, nmax=nmax)
    lat, lon = math.radians(geod.lat_deg), math.radians(geod.lon_deg)
    e_n = np.array([-math.sin(lat) * math.cos(lon), -math.sin(lat) * math.sin(lon), math.cos(lat)])
    e_e = np.array([-math.sin(lon), math.cos(lon), 0.0])
    e_d = np.array([-math.cos(lat) * math.cos(lon), -math.cos(lat) * math.sin(lon), -math.sin(lat)])
    b_ecef = b_ned[0] * e_n + b_ned[1] * e_e + b_ned[2] * e_d
    return tf.ecef_to_eci(b_ecef, t)


def sun_vector_eci(t: EpochUtc) -> np.ndarray:
    """Unit vector from Earth to Sun in J2000 ECI.

    Mean-longitude/mean-anomaly polynomial with the equation of center,
    rotated by the mean obliquity and precessed to J2000.
    """
    if not (1950 < t.year < 2100):
        raise InvalidDate(f"solar ephemeris valid 1950-2100, got {t.year}")
    jd = tf.datetime_to_jd(t)
    tut1 = tf.jd_to_jc(jd)
    lam_mean = math.radians((280.460 + 36000.771 * tut1) % 360.0)
    m_sun = math.radians((357.5291092 + 35999.05034 * tut1) % 360.0)
    lam_ecl = lam_mean + math.radians(1.914666471) * math.sin(m_sun) \
        + math.radians(0.019994643) * math.sin(2.0 * m_sun)
    ttt = tf.jd_to_jc(jd + tf.TT_MINUS_UTC_SEC / 86400.0)
    eps = tf.mean_obliquity(ttt)
    v_mod = np.array([
        math.cos(lam_ecl),
        math.cos(eps) * math.sin(lam_ecl),
        math.sin(eps) * math.sin(lam_ecl),
    ])
    return tf.precession_matrix(ttt) @ v_mod


class EclipseCondition(Enum):
    SUNLIGHT = 0
    PENUMBRA = 1
    UMBRA = 2


@dataclass
class EclipseState:
    condition: EclipseCondition

    @property
    def sun_flag(self) -> int:
        return 1 if self.condition is EclipseCondition.SUNLIGHT else 0


def eclipse_state(r_eci_km, sun_eci) -> EclipseState:
    """Conical umbra/penumbra eclipse state at an ECI position (km).

    `sun_eci` is the unit geocentric Sun direction; the Sun's angular
    radius uses the mean Earth-Sun distance (variation is negligible at
    the accuracy the sun-flag feeds).
    """
    r = np.asarray(r_eci_km, dtype=float)
    rmag = float(np.linalg.norm(r))
    if rmag <= R_EARTH_KM:
        raise ValueError("position is inside the Earth")
    s_hat = np.asarray(sun_eci, dtype=float)
    s_hat = s_hat / np.linalg.norm(s_hat)
    # apparent directions seen from the satellite
    to_sun = s_hat * AU_KM - r
    to_sun /= np.linalg.norm(to_sun)
    to_earth = -r / rmag
    alpha_sun = math.asin(R_SUN_KM / AU_KM)
    alpha_earth = math.asin(R_EARTH_KM / rmag)
    theta = math.acos(float(np.clip(np.dot(to_sun, to_earth), -1.0, 1.0)))
    if theta < alpha_earth - alpha_sun:
        return EclipseState(EclipseCondition.UMBRA)
    if theta < alpha_earth + alpha_sun:
        return EclipseState(EclipseCondition.PENUMBRA)
    return EclipseState(EclipseCondition.SUNLIGHT)


@dataclass
class WorstCaseParams:
    """Worst-case disturbance inputs (defaults: the mission budget)."""

    rho: float = 3.76e-12        # kg/m^3 atmospheric density
    drag_coeff: float = 2.6
    ram_area: float = 0.23       # m^2
    speed: float = 7612.0        # m/s
    cp_cm_aero: float = 0.1      # m, pressure/mass center offset
    solar_flux: float = 1367.0   # W/m^2
    light_speed: float = 3.0e8   # m/s (budget-table value)
    sun_area: float = 1.21       # m^2
    reflectance: float = 0.6
    cp_cm_solar: float = 0.1     # m
    sun_angle_rad: float = 0.0
    mu: float = 3.986e14         # m^3/s^2 (budget-table value)
    orbit_radius: float = 6878137.0  # m
    inertia_delta: float = 5.108     # kg m^2, I_max - I_min
    gg_angle_rad: float = math.radians(30.0)
    residual_dipole: float = 0.5     # A m^2
    earth_dipole: float = 7.8e15     # T m^3 (field constant M)
    field_multiplier: float = 2.0    # lambda, polar worst case


@dataclass
class DisturbanceBudget:
    aero: float
    solar: float
    gravity_gradient: float
    magnetic: float

    @property
    def total(self) -> float:
        return self.aero + self.solar + self.gravity_gradient + self.magnetic


def disturbance_budget(p: WorstCaseParams | None = None) -> DisturbanceBudget:
    """Evaluate the four closed-form worst-case torques (N m)."""
    if p is None:
        p = WorstCaseParams()
    t_a = 0.5 * p.rho * p.drag_coeff * p.ram_area * p.speed ** 2 * p.cp_cm_aero
    t_s = (p.solar_flux / p.light_speed) * p.sun_area * (1.0 + p.reflectance) \
        * p.cp_cm_solar * math.cos(p.sun_angle_rad)
    t_g = 1.5 * p.mu / p.orbit_radius ** 3 * p.inertia_delta * math.sin(2.0 * p.gg_angle_rad)
    t_m = p.residual_dipole * p.earth_dipole * p.field_multiplier / p.orbit_radius ** 3
    return DisturbanceBudget(t_a, t_s, t_g, t_m)


def gravity_gradient_torque(inertia: np.ndarray, r_body_m) -> np.ndarray:
    """Gravity-gradient torque (N m): (3 mu / |r|^5) * (r x I r), body axes, r in m."""
    r = np.asarray(r_body_m, dtype=float)
    rmag = float(np.linalg.norm(r))
    return (3.0 * MU_EARTH / rmag ** 5) * np.cross(r, inertia @ r)
