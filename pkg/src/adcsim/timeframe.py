"""Calendar/astronomical time conversions and reference-frame transforms.

Frames:

* ECI: mean equator, mean equinox of J2000.
* MOD/TOD: mean/true equator and equinox of date (intermediate only).
* TEME: true equator, mean equinox of date (the SGP4 output frame).
* ECEF: Earth fixed (ITRF); polar motion is taken as zero and UT1 = UTC
  (no Earth-orientation data on board), which is far below the attitude
  accuracy this stack targets.

All transforms are proper rotations built from the IAU-76 precession
polynomials and the IAU-1980 nutation series loaded from
``data/nut80.dat``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

__all__ = [
    "InvalidDate",
    "NoConvergence",
    "EpochUtc",
    "GeodeticPos",
    "datetime_to_jd",
    "jd_to_datetime",
    "jd_to_jc",
    "jc_to_jd",
    "gstime",
    "add_seconds",
    "utc_to_tt",
    "tt_to_utc",
    "datetime_to_days",
    "days_to_datetime",
    "datetime_to_years",
    "years_to_datetime",
    "rot1",
    "rot2",
    "rot3",
    "precession_matrix",
    "nutation_angles",
    "nutation_matrix",
    "mean_obliquity",
    "eci_to_ecef",
    "ecef_to_eci",
    "ecef_to_geod",
    "geod_to_ecef",
    "eci_to_teme",
    "teme_to_eci",
    "days_in_month",
    "is_leap_year",
]

# WGS-84
REQU_KM = 6378.137
FLATTENING = 1.0 / 298.257223563
RPOL_KM = REQU_KM * (1.0 - FLATTENING)
ECC_SQ = 2.0 * FLATTENING - FLATTENING * FLATTENING

# fixed TT - UTC over the supported 2005-2050 window: 32.184 s (TT-TAI)
# plus 37 leap seconds (TAI-UTC as of 2017)
TT_MINUS_UTC_SEC = 69.184

ARCSEC = math.pi / (180.0 * 3600.0)

_MONTH_DAYS = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)


class InvalidDate(ValueError):
    """Calendar fields do not form a valid date/time."""


class NoConvergence(RuntimeError):
    """Iterative conversion failed to converge."""


def is_leap_year(year: int) -> bool:
    return year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)


def days_in_month(year: int, mon: int) -> int:
    if mon == 2 and is_leap_year(year):
        return 29
    return _MONTH_DAYS[mon - 1]


@dataclass
class EpochUtc:
    """Civil UTC epoch. `sec` may carry a fractional part in [0, 60)."""

    year: int
    mon: int
    day: int
    hr: int = 0
    minute: int = 0
    sec: float = 0.0

    def validate(self) -> "EpochUtc":
        if not (1900 <= self.year <= 2100):
            raise InvalidDate(f"year {self.year} outside 1900-2100")
        if not (1 <= self.mon <= 12):
            raise InvalidDate(f"month {self.mon}")
        if not (1 <= self.day <= days_in_month(self.year, self.mon)):
            raise InvalidDate(f"day {self.day} invalid for {self.year}-{self.mon:02d}")
        if not (0 <= self.hr <= 23 and 0 <= self.minute <= 59 and 0.0 <= self.sec < 60.0):
            raise InvalidDate("time of day out of range")
        return self


@dataclass
class GeodeticPos:
    """WGS-84 geodetic position; latitude/longitude deg, height km."""

    lat_deg: float
    lon_deg: float
    height_km: float


def datetime_to_jd(t: EpochUtc) -> float:
    """Gregorian calendar date to Julian date (days from 4713 BC)."""
    t.validate()
    y, m = t.year, t.mon
    jd = (367.0 * y
          - math.floor(7.0 * (y + math.floor((m + 9.0) / 12.0)) * 0.25)
          + math.floor(275.0 * m / 9.0)
          + t.day + 1721013.5)
    return jd + ((t.sec / 60.0 + t.minute) / 60.0 + t.hr) / 24.0


def jd_to_datetime(jd: float) -> EpochUtc:
    """Inverse of datetime_to_jd, good to well under 1 ms."""
    days_1900 = jd - 2415019.5
    year = 1900 + int(days_1900 / 365.25)
    for _ in range(3):
        # leap days between 1900 and `year` exclusive (int() truncation
        # makes the 1900 boundary come out right)
        leaps = int((year - 1900 - 1) * 0.25)
        doy = days_1900 - ((year - 1900) * 365.0 + leaps)
        if doy >= 1.0:
            break
        year -= 1
    ndays = 366 if is_leap_year(year) else 365
    if doy >= ndays + 1:
        year += 1
        doy -= ndays
    return days_to_datetime(year, doy)


def jd_to_jc(jd: float) -> float:
    """Julian centuries from J2000: (jd - 2451545.0) / 36525."""
    return (jd - 2451545.0) / 36525.0


def jc_to_jd(jc: float) -> float:
    return jc * 36525.0 + 2451545.0


def gstime(jdut1: float) -> float:
    """Greenwich mean sidereal time (IAU-82), radians in [0, 2*pi)."""
    t = jd_to_jc(jdut1)
    sec = (67310.54841
           + (876600.0 * 3600.0 + 8640184.812866) * t
           + 0.093104 * t * t
           - 6.2e-6 * t * t * t)
    rad = math.radians((sec % 86400.0) / 240.0)
    return rad % (2.0 * math.pi)


def add_seconds(t: EpochUtc, dt_sec: float) -> EpochUtc:
    """Advance (or rewind) a calendar epoch by dt_sec seconds, exactly.

    Keeps the arithmetic in the calendar domain so no Julian-date float
    granularity is picked up.
    """
    sec = t.sec + dt_sec
    minute, hr, day, mon, year = t.minute, t.hr, t.day, t.mon, t.year
    carry, sec = divmod(sec, 60.0)
    minute += int(carry)
    carry, minute = divmod(minute, 60)
    hr += carry
    carry, hr = divmod(hr, 24)
    day += carry
    while day > days_in_month(year, mon):
        day -= days_in_month(year, mon)
        mon += 1
        if mon > 12:
            mon, year = 1, year + 1
    while day < 1:
        mon -= 1
        if mon < 1:
            mon, year = 12, year - 1
        day += days_in_month(year, mon)
    return EpochUtc(year, mon, day, hr, minute, sec)


def utc_to_tt(t: EpochUtc) -> EpochUtc:
    """UTC to terrestrial time with the fixed 69.184 s offset."""
    return add_seconds(t, TT_MINUS_UTC_SEC)


def tt_to_utc(t: EpochUtc) -> EpochUtc:
    return add_seconds(t, -TT_MINUS_UTC_SEC)


def datetime_to_days(t: EpochUtc) -> float:
    """Fractional day of year; Jan 1 00:00 is day 1.0."""
    t.validate()
    doy = sum(days_in_month(t.year, m) for m in range(1, t.mon)) + t.day
    return doy + (t.hr + (t.minute + t.sec / 60.0) / 60.0) / 24.0


def days_to_datetime(year: int, days: float) -> EpochUtc:
    """Fractional day of year back to month/day/time."""
    doy = int(days)
    frac = days - doy
    mon = 1
    while doy > days_in_month(year, mon):
        doy -= days_in_month(year, mon)
        mon += 1
        if mon > 12:
            raise InvalidDate(f"day of year {days} too large for {year}")
    sec_total = frac * 86400.0
    hr = int(sec_total / 3600.0)
    minute = int((sec_total - hr * 3600.0) / 60.0)
    sec = sec_total - hr * 3600.0 - minute * 60.0
    # fold float artifacts at unit boundaries (jd granularity ~50 us,
    # stated round-trip accuracy 1 ms)
    if sec >= 60.0 - 5e-4:
        sec = 0.0
        minute += 1
    if minute >= 60:
        minute -= 60
        hr += 1
    if hr >= 24:
        hr -= 24
        doy += 1
        if doy > days_in_month(year, mon):
            doy = 1
            mon += 1
            if mon > 12:
                mon = 1
                year += 1
    return EpochUtc(year, mon, doy, hr, minute, sec)


def datetime_to_years(t: EpochUtc) -> float:
    """Decimal year, e.g. 2015-01-01 00:00 -> 2015.0."""
    ndays = 366.0 if is_leap_year(t.year) else 365.0
    return t.year + (datetime_to_days(t) - 1.0) / ndays


def years_to_datetime(years: float) -> EpochUtc:
    year = int(years)
    ndays = 366.0 if is_leap_year(year) else 365.0
    return days_to_datetime(year, (years - year) * ndays + 1.0)


def rot1(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])


def rot2(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])


def rot3(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def precession_matrix(ttt: float) -> np.ndarray:
    """IAU-76 precession; maps mean-of-date (MOD) coordinates to J2000."""
    zeta = (2306.2181 * ttt + 0.30188 * ttt**2 + 0.017998 * ttt**3) * ARCSEC
    theta = (2004.3109 * ttt - 0.42665 * ttt**2 - 0.041833 * ttt**3) * ARCSEC
    z = (2306.2181 * ttt + 1.09468 * ttt**2 + 0.018203 * ttt**3) * ARCSEC
    return rot3(zeta) @ rot2(-theta) @ rot3(z)


_NUT_TERMS: np.ndarray | None = None


def _nutation_table() -> np.ndarray:
    global _NUT_TERMS
    if _NUT_TERMS is None:
        rows = []
        text = resources.files("adcsim.data").joinpath("nut80.dat").read_text()
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            rows.append([float(x) for x in line.split()])
        _NUT_TERMS = np.array(rows)
    return _NUT_TERMS


def mean_obliquity(ttt: float) -> float:
    """Mean obliquity of the ecliptic, radians (IAU-80 polynomial)."""
    eps = 23.439291 - 0.0130042 * ttt - 1.64e-7 * ttt**2 + 5.04e-7 * ttt**3
    return math.radians(eps)


def nutation_angles(ttt: float) -> tuple[float, float]:
    """(delta_psi, delta_eps) in radians from the shipped 1980 series."""
    d2r = math.pi / 180.0
    # Delaunay fundamental arguments, degrees
    l = 134.96298139 + (1325.0 * 360.0 + 198.8673981) * ttt + 0.0086972 * ttt**2 + 1.78e-5 * ttt**3
    lp = 357.52772333 + (99.0 * 360.0 + 359.0503400) * ttt - 0.0001603 * ttt**2 - 3.3e-6 * ttt**3
    f = 93.27191028 + (1342.0 * 360.0 + 82.0175381) * ttt - 0.0036825 * ttt**2 + 3.1e-6 * ttt**3
    d = 297.85036306 + (1236.0 * 360.0 + 307.1114800) * ttt - 0.0019142 * ttt**2 + 5.3e-6 * ttt**3
    om = 125.04452222 - (5.0 * 360.0 + 134.1362608) * ttt + 0.0020708 * ttt**2 + 2.2e-6 * ttt**3

    terms = _nutation_table()
    arg = d2r * (terms[:, 0] * l + terms[:, 1] * lp + terms[:, 2] * f
                 + terms[:, 3] * d + terms[:, 4] * om)
    # coefficients are in 1e-4 arcsec
    dpsi = np.sum((terms[:, 5] + terms[:, 6] * ttt) * np.sin(arg)) * 1e-4 * ARCSEC
    deps = np.sum((terms[:, 7] + terms[:, 8] * ttt) * np.cos(arg)) * 1e-4 * ARCSEC
    return float(dpsi), float(deps)


def nutation_matrix(ttt: float) -> tuple[np.ndarray, float, float, float]:
    """Nutation rotation mapping true-of-date (TOD) to mean-of-date (MOD).

    Returns (N, delta_psi, mean_eps, true_eps).
    """
    dpsi, deps = nutation_angles(ttt)
    meaneps = mean_obliquity(ttt)
    trueeps = meaneps + deps
    N = rot1(-meaneps) @ rot3(dpsi) @ rot1(trueeps)
    return N, dpsi, meaneps, trueeps


def _equation_of_equinoxes(ttt: float, dpsi: float, meaneps: float) -> float:
    om = math.radians(125.04452222 - (5.0 * 360.0 + 134.1362608) * ttt
                      + 0.0020708 * ttt**2 + 2.2e-6 * ttt**3)
    return dpsi * math.cos(meaneps) + (0.00264 * math.sin(om) + 0.000063 * math.sin(2.0 * om)) * ARCSEC


def _eci_from_ecef_matrix(t: EpochUtc) -> np.ndarray:
    """Rotation taking ECEF coordinates to J2000 ECI at epoch t."""
    jd_utc = datetime_to_jd(t)
    ttt = jd_to_jc(jd_utc + TT_MINUS_UTC_SEC / 86400.0)
    P = precession_matrix(ttt)
    N, dpsi, meaneps, _ = nutation_matrix(ttt)
    gast = gstime(jd_utc) + _equation_of_equinoxes(ttt, dpsi, meaneps)
    S = rot3(-gast)
    return P @ N @ S  # polar motion omitted (EOP assumed zero)


def eci_to_ecef(r_eci, t: EpochUtc) -> np.ndarray:
    """J2000 ECI vector to Earth-fixed, norm preserving."""
    return _eci_from_ecef_matrix(t).T @ np.asarray(r_eci, dtype=float)


def ecef_to_eci(r_ecef, t: EpochUtc) -> np.ndarray:
    return _eci_from_ecef_matrix(t) @ np.asarray(r_ecef, dtype=float)


def _eci_from_teme_matrix(t: EpochUtc) -> np.ndarray:
    jd_utc = datetime_to_jd(t)
    ttt = jd_to_jc(jd_utc + TT_MINUS_UTC_SEC / 86400.0)
    P = precession_matrix(ttt)
    N, dpsi, meaneps, _ = nutation_matrix(ttt)
    eqe = _equation_of_equinoxes(ttt, dpsi, meaneps)
    return P @ N @ rot3(-eqe)


def teme_to_eci(r_teme, t: EpochUtc) -> np.ndarray:
    """True-equator mean-equinox of date to J2000 ECI."""
    return _eci_from_teme_matrix(t) @ np.asarray(r_teme, dtype=float)


def eci_to_teme(r_eci, t: EpochUtc) -> np.ndarray:
    return _eci_from_teme_matrix(t).T @ np.asarray(r_eci, dtype=float)


def ecef_to_geod(r_ecef, max_iter: int = 50, tol: float = 1e-12) -> GeodeticPos:
    """ECEF position (km) to WGS-84 geodetic lat/lon/height.

    Iterative latitude recursion; |r| must exceed 100 km.
    """
    x, y, z = np.asarray(r_ecef, dtype=float)
    if math.sqrt(x * x + y * y + z * z) <= 100.0:
        raise ValueError("position is inside the Earth")
    lon = math.atan2(y, x)
    p = math.sqrt(x * x + y * y)
    if p < 1e-12:
        # pole: closed form
        lat = math.copysign(math.pi / 2.0, z)
        n = REQU_KM / math.sqrt(1.0 - ECC_SQ)
        h = abs(z) - n * (1.0 - ECC_SQ)
        return GeodeticPos(math.degrees(lat), math.degrees(lon), h)
    lat = math.atan2(z, p * (1.0 - ECC_SQ))
    for _ in range(max_iter):
        sin_lat = math.sin(lat)
        n = REQU_KM / math.sqrt(1.0 - ECC_SQ * sin_lat * sin_lat)
        lat_new = math.atan2(z + n * ECC_SQ * sin_lat, p)
        if abs(lat_new - lat) < tol:
            lat = lat_new
            break
        lat = lat_new
    else:
        raise NoConvergence("geodetic latitude recursion did not converge")
    sin_lat = math.sin(lat)
    n = REQU_KM / math.sqrt(1.0 - ECC_SQ * sin_lat * sin_lat)
    if abs(math.degrees(lat)) < 89.9:
        h = p / math.cos(lat) - n
    else:
        h = z / sin_lat - n * (1.0 - ECC_SQ)
    lon_deg = math.degrees(lon)
    if lon_deg <= -180.0:
        lon_deg += 360.0
    return GeodeticPos(math.degrees(lat), lon_deg, h)


def geod_to_ecef(pos: GeodeticPos) -> np.ndarray:
    """WGS-84 geodetic lat/lon/height to ECEF position (km)."""
    lat = math.radians(pos.lat_deg)
    lon = math.radians(pos.lon_deg)
    sin_lat = math.sin(lat)
    n = REQU_KM / math.sqrt(1.0 - ECC_SQ * sin_lat * sin_lat)
    x = (n + pos.height_km) * math.cos(lat) * math.cos(lon)
    y = (n + pos.height_km) * math.cos(lat) * math.sin(lon)
    z = (n * (1.0 - ECC_SQ) + pos.height_km) * sin_lat
    return np.array([x, y, z])
