"""Command-line interface.

Subcommands: sim (closed-loop run from a scenario file), plant / fsw
(the two halves of the split topology over TCP), magfield, sunvec,
frames, disturbances (prints the worst-case torque budget), lintest
(linearization vs finite differences report).

Exit codes: 0 success, 1 usage/validation error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import environment as env
from . import telemetry as tlm
from . import timeframe as tf
from .plant import linearize_dynamics, SpacecraftParams

__all__ = ["main"]


def _parse_epoch(text: str) -> tf.EpochUtc:
    """Accept YYYY-MM-DD[THH:MM:SS[.sss]] or a decimal year."""
    try:
        if "-" in text:
            date, _, clock = text.partition("T")
            y, m, d = (int(x) for x in date.split("-"))
            if clock:
                hh, mm, ss = clock.split(":")
                return tf.EpochUtc(y, m, d, int(hh), int(mm), float(ss)).validate()
            return tf.EpochUtc(y, m, d).validate()
        return tf.years_to_datetime(float(text)).validate()
    except (ValueError, tf.InvalidDate) as exc:
        raise SystemExit(f"error: bad date {text!r}: {exc}")


def _cmd_sim(args) -> int:
    from .scenario import load_scenario
    from .sil import run_sil
    try:
        scn = load_scenario(args.scenario)
    except (FileNotFoundError, KeyError, ValueError, configparser_error()) as exc:
        print(f"error: cannot load scenario: {exc}", file=sys.stderr)
        return 1
    os.makedirs(args.out, exist_ok=True)

    def progress(k, n):
        if not args.quiet:
            print(f"\r{k}/{n} cycles", end="", file=sys.stderr, flush=True)

    plant_side, fsw_side, summary = run_sil(scn, progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
    tlm.write_telemetry(plant_side.records, os.path.join(args.out, "plant_telemetry.csv"),
                        tlm.PLANT_HEADER)
    tlm.write_telemetry(fsw_side.records, os.path.join(args.out, "fsw_telemetry.csv"),
                        tlm.FSW_HEADER)
    tlm.write_telemetry(tlm.merge_records(plant_side.records, fsw_side.records),
                        os.path.join(args.out, "telemetry.csv"), tlm.combined_header())
    print(f"duration            {summary.duration_s:.1f} s")
    print(f"final mode          BZ1 = {summary.final_mode}")
    entry = "never" if summary.mode3_entry_s is None else f"{summary.mode3_entry_s:.1f} s"
    print(f"pointing-mode entry {entry}")
    print(f"accuracy  (3 sigma) {summary.accuracy_3sigma_deg:.4f} deg over final two orbits")
    print(f"stability (3 sigma) {summary.stability_3sigma_deg_s:.4f} deg/s over final two orbits")
    print(f"telemetry           {args.out}/telemetry.csv (+ plant/fsw halves)")
    return 0


def _split_endpoint(text: str):
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def _cmd_plant(args) -> int:
    from .pil import run_plant_server
    from .scenario import load_scenario
    scn = load_scenario(args.scenario)
    host, port = _split_endpoint(args.listen)
    os.makedirs(args.out, exist_ok=True)

    def ready(addr):
        print(f"plant server listening on {addr[0]}:{addr[1]}", flush=True)

    plant_side = run_plant_server(scn, host, port, timeout_s=args.timeout, ready_callback=ready)
    tlm.write_telemetry(plant_side.records, os.path.join(args.out, "plant_telemetry.csv"),
                        tlm.PLANT_HEADER)
    print(f"wrote {args.out}/plant_telemetry.csv ({len(plant_side.records)} records)")
    return 0


def _cmd_fsw(args) -> int:
    from .pil import run_fsw_client
    from .scenario import load_scenario
    scn = load_scenario(args.scenario)
    host, port = _split_endpoint(args.connect)
    os.makedirs(args.out, exist_ok=True)
    fsw_side = run_fsw_client(scn, host, port, timeout_s=args.timeout)
    tlm.write_telemetry(fsw_side.records, os.path.join(args.out, "fsw_telemetry.csv"),
                        tlm.FSW_HEADER)
    print(f"wrote {args.out}/fsw_telemetry.csv ({len(fsw_side.records)} records)")
    return 0


def _cmd_magfield(args) -> int:
    t = _parse_epoch(args.date)
    year = tf.datetime_to_years(t)
    try:
        model = env.load_geomag_model(args.model)
        ned = env.mag_field_ned(args.lat, args.lon, args.alt_km, year, model)
    except (env.OutOfValidity, env.BelowSurface, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    h = math.hypot(ned[0], ned[1])
    print(f"model {model.name}{model.epoch:.1f}  epoch {year:.4f}")
    print(f"north {ned[0]:12.1f} nT")
    print(f"east  {ned[1]:12.1f} nT")
    print(f"down  {ned[2]:12.1f} nT")
    print(f"H     {h:12.1f} nT   F {math.hypot(h, ned[2]):10.1f} nT")
    print(f"decl  {math.degrees(math.atan2(ned[1], ned[0])):10.4f} deg   "
          f"incl {math.degrees(math.atan2(ned[2], h)):8.4f} deg")
    return 0


def _cmd_sunvec(args) -> int:
    t = _parse_epoch(args.date)
    s = env.sun_vector_eci(t)
    print(f"sun unit vector (J2000 ECI) at {t.year}-{t.mon:02d}-{t.day:02d} "
          f"{t.hr:02d}:{t.minute:02d}:{t.sec:06.3f} UTC")
    print(f"x {s[0]:+.9f}\ny {s[1]:+.9f}\nz {s[2]:+.9f}")
    return 0


def _cmd_frames(args) -> int:
    t = _parse_epoch(args.date)
    v = np.array([args.x, args.y, args.z])
    ops = {
        "eci2ecef": lambda: tf.eci_to_ecef(v, t),
        "ecef2eci": lambda: tf.ecef_to_eci(v, t),
        "eci2teme": lambda: tf.eci_to_teme(v, t),
        "teme2eci": lambda: tf.teme_to_eci(v, t),
    }
    if args.op in ops:
        out = ops[args.op]()
        print(f"{out[0]:.9f} {out[1]:.9f} {out[2]:.9f}")
        return 0
    if args.op == "ecef2geod":
        g = tf.ecef_to_geod(v)
        print(f"lat {g.lat_deg:.9f} deg  lon {g.lon_deg:.9f} deg  h {g.height_km:.6f} km")
        return 0
    if args.op == "geod2ecef":
        out = tf.geod_to_ecef(tf.GeodeticPos(args.x, args.y, args.z))
        print(f"{out[0]:.9f} {out[1]:.9f} {out[2]:.9f}")
        return 0
    print(f"error: unknown frame op {args.op!r}", file=sys.stderr)
    return 1


def _cmd_disturbances(_args) -> int:
    b = env.disturbance_budget()
    print("worst-case disturbance torques (N m)")
    print(f"aerodynamic drag   {b.aero:.3e}")
    print(f"solar radiation    {b.solar:.3e}")
    print(f"gravity gradient   {b.gravity_gradient:.3e}")
    print(f"magnetic residual  {b.magnetic:.3e}")
    print(f"total              {b.total:.4e}")
    return 0


def _cmd_lintest(args) -> int:
    rng = np.random.default_rng(args.seed)
    inertia = SpacecraftParams().inertia_stowed

    def f9(x, t_c, t_d):
        w, h = x[0:3], x[6:9]
        return np.concatenate([
            np.linalg.solve(inertia, -np.cross(w, inertia @ w + h) + t_c + t_d),
            0.5 * w, -t_c])

    worst = 0.0
    w0 = math.sqrt(env.MU_EARTH / 6.87814e6 ** 3)
    points = [np.array([0.0, -w0, 0.0])] + [rng.normal(0, 0.05, 3) for _ in range(args.points - 1)]
    for w_bar in points:
        h_bar = rng.normal(0, 0.02, 3)
        A, _, _ = linearize_dynamics(w_bar, h_bar, inertia)
        x0 = np.concatenate([w_bar, np.zeros(3), h_bar])
        eps = 1e-6
        fd = np.zeros((9, 9))
        for j in range(9):
            dx = np.zeros(9)
            dx[j] = eps
            fd[:, j] = (f9(x0 + dx, np.zeros(3), np.zeros(3))
                        - f9(x0 - dx, np.zeros(3), np.zeros(3))) / (2 * eps)
        err = np.max(np.abs(A - fd)) / max(1.0, np.max(np.abs(fd)))
        worst = max(worst, err)
    print(f"linearization vs central finite differences over {args.points} operating points")
    print(f"worst relative error {worst:.3e} (tolerance 1.0e-05)")
    print("PASS" if worst < 1e-5 else "FAIL")
    return 0 if worst < 1e-5 else 2


def configparser_error():
    import configparser
    return configparser.Error


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="adcsim",
                                 description="micro-satellite ADCS simulation stack")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sim", help="run the closed loop in-process")
    p.add_argument("scenario", help="scenario config file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=_cmd_sim)

    p = sub.add_parser("plant", help="serve the plant over TCP")
    p.add_argument("--listen", required=True, metavar="HOST:PORT")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", default="out_plant")
    p.add_argument("--timeout", type=float, default=5.0)
    p.set_defaults(func=_cmd_plant)

    p = sub.add_parser("fsw", help="run flight software against a remote plant")
    p.add_argument("--connect", required=True, metavar="HOST:PORT")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", default="out_fsw")
    p.add_argument("--timeout", type=float, default=5.0)
    p.set_defaults(func=_cmd_fsw)

    p = sub.add_parser("magfield", help="geomagnetic field at a geodetic point")
    p.add_argument("lat", type=float)
    p.add_argument("lon", type=float)
    p.add_argument("alt_km", type=float)
    p.add_argument("date", help="YYYY-MM-DD[THH:MM:SS] or decimal year")
    p.add_argument("--model", default="WMM", choices=["WMM", "IGRF", "wmm", "igrf"])
    p.set_defaults(func=_cmd_magfield)

    p = sub.add_parser("sunvec", help="unit sun vector in J2000 ECI")
    p.add_argument("date")
    p.set_defaults(func=_cmd_sunvec)

    p = sub.add_parser("frames", help="frame transformations")
    p.add_argument("op", choices=["eci2ecef", "ecef2eci", "eci2teme", "teme2eci",
                                  "ecef2geod", "geod2ecef"])
    p.add_argument("x", type=float)
    p.add_argument("y", type=float)
    p.add_argument("z", type=float)
    p.add_argument("date", nargs="?", default="2018-11-20")
    p.set_defaults(func=_cmd_frames)

    p = sub.add_parser("disturbances", help="print the worst-case torque budget")
    p.set_defaults(func=_cmd_disturbances)

    p = sub.add_parser("lintest", help="linearization vs finite-difference report")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_lintest)

    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except SystemExit as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (FileNotFoundError, ValueError, tf.InvalidDate) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
