"""Telemetry records and CSV output.

Three record shapes: the plant side's truth record, the flight-software
side's estimate/command record, and the combined record that zips the
two. In the split (two-process) topology each side writes its half with
the same writer used in-process, so the files are directly byte
comparable; the combined file is a deterministic merge.

Floats are written with 17 significant digits so a parse round-trips
bit-exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields

import numpy as np

__all__ = [
    "PlantRecord",
    "FswRecord",
    "combined_header",
    "combined_row",
    "write_telemetry",
    "read_telemetry",
    "merge_records",
    "euler_321_deg",
]

PLANT_HEADER = [
    "t_s",
    "q_bo_true_1", "q_bo_true_2", "q_bo_true_3", "q_bo_true_4",
    "w_bo_true_x_rad_s", "w_bo_true_y_rad_s", "w_bo_true_z_rad_s",
    "euler_roll_deg", "euler_pitch_deg", "euler_yaw_deg",
    "b_body_mag_t", "h_wheel_nms", "sun_flag", "eclipse_state",
    "pointing_err_deg",
]

FSW_HEADER = [
    "t_s", "bz1", "bz6",
    "q_bo_est_1", "q_bo_est_2", "q_bo_est_3", "q_bo_est_4",
    "w_bo_est_x_rad_s", "w_bo_est_y_rad_s", "w_bo_est_z_rad_s",
    "m_c_x_am2", "m_c_y_am2", "m_c_z_am2",
    "u_m_x_v", "u_m_y_v", "u_m_z_v",
    "hw_set_nms", "sun_flag",
]


@dataclass
class PlantRecord:
    t_s: float
    q_bo_true: np.ndarray
    w_bo_true: np.ndarray
    euler_deg: np.ndarray
    b_body_mag_t: float
    h_wheel: float
    sun_flag: int
    eclipse_state: int
    pointing_err_deg: float

    def row(self):
        return ([self.t_s] + list(self.q_bo_true) + list(self.w_bo_true)
                + list(self.euler_deg)
                + [self.b_body_mag_t, self.h_wheel, float(self.sun_flag),
                   float(self.eclipse_state), self.pointing_err_deg])


@dataclass
class FswRecord:
    t_s: float
    bz1: int
    bz6: int
    q_bo_est: np.ndarray
    w_bo_est: np.ndarray
    m_c: np.ndarray
    u_m: np.ndarray
    hw_set: float
    sun_flag: int

    def row(self):
        return ([self.t_s, float(self.bz1), float(self.bz6)]
                + list(self.q_bo_est) + list(self.w_bo_est)
                + list(self.m_c) + list(self.u_m)
                + [self.hw_set, float(self.sun_flag)])


def euler_321_deg(dcm_bo) -> np.ndarray:
    """3-2-1 (yaw-pitch-roll) Euler angles of the body-orbital DCM, degrees."""
    C = np.asarray(dcm_bo, dtype=float)
    pitch = -math.asin(float(np.clip(C[0, 2], -1.0, 1.0)))
    roll = math.atan2(C[1, 2], C[2, 2])
    yaw = math.atan2(C[0, 1], C[0, 0])
    return np.degrees([roll, pitch, yaw])


def combined_header():
    # one row per telemetry period; fixed width
    return (["t_s", "bz1", "bz6"]
            + PLANT_HEADER[1:11]
            + FSW_HEADER[3:17]
            + ["sun_flag", "eclipse_state", "pointing_err_deg", "b_body_mag_t",
               "h_wheel_nms"])


def combined_row(p: PlantRecord, f: FswRecord):
    if p.t_s != f.t_s:
        raise ValueError(f"record time mismatch: {p.t_s} vs {f.t_s}")
    return ([p.t_s, float(f.bz1), float(f.bz6)]
            + list(p.q_bo_true) + list(p.w_bo_true) + list(p.euler_deg)
            + list(f.q_bo_est) + list(f.w_bo_est) + list(f.m_c) + list(f.u_m)
            + [f.hw_set]
            + [float(p.sun_flag), float(p.eclipse_state), p.pointing_err_deg,
               p.b_body_mag_t, p.h_wheel])


def merge_records(plant_records, fsw_records):
    if len(plant_records) != len(fsw_records):
        raise ValueError("telemetry halves have different lengths")
    return [combined_row(p, f) for p, f in zip(plant_records, fsw_records)]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_telemetry(rows, path: str, header) -> None:
    """Write rows (lists of floats or records with .row()) as RFC-4180 CSV."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            vals = r.row() if hasattr(r, "row") else r
            w.writerow([_fmt(v) for v in vals])


def read_telemetry(path: str):
    """Parse a telemetry CSV back into (header, float rows)."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        rows = [[float(v) for v in row] for row in rd]
    return header, rows
