"""Closed-loop runner.

The loop is factored into two half-systems so the in-process (SIL) run
and the two-process split (PIL topology) execute identical code on
identical numbers:

* PlantSide: mission clock, orbit propagation, environment models,
  truth dynamics, sensor emulation. Produces one sensor sample per
  control cycle and consumes one actuator command.
* FswSide: its own orbit/field models (the flight software carries its
  own predictors), attitude determination, mode manager, ground-command
  schedule. Consumes sensor samples, produces actuator commands.

Per 0.25 s cycle: orbit step -> environment -> measure -> attitude
determination -> manager -> plant dynamics step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import environment as env
from . import estimation as est
from . import manager as mgr
from . import orbit
from . import telemetry as tlm
from . import timeframe as tf
from .control import CONTROL_PERIOD
from .mathcore import quat_to_dcm
from .plant import (ActuatorCommand, PlantState, SensorNoise, SensorReadings,
                    deploy_boom, measure, step_dynamics)
from .scenario import Scenario

__all__ = ["PlantSide", "FswSide", "RunSummary", "run_sil", "summarize"]

NT_TO_TESLA = 1e-9  # single nT -> Tesla conversion point for the whole stack


class PlantSide:
    """Truth half: clock, orbit, environment, rigid-body plant, sensors."""

    def __init__(self, scn: Scenario):
        self.scn = scn
        self.clock = mgr.MissionClock(scn.epoch)
        self.orbit_state = orbit.OrbitState(scn.r_eci_m, scn.v_eci_m_s)
        self.frame = orbit.orbital_frame(self.orbit_state)
        self.state = PlantState.from_orbital_attitude(
            scn.q_bo0, scn.w_bi0, self.frame, scn.h_wheel0, scn.mflag0)
        self.params = scn.spacecraft
        self.noise = SensorNoise(scn.noise_seed)
        self.model = env.load_geomag_model(scn.field_model)
        self._env_every = max(1, int(round(scn.env_period_s / scn.control_period_s)))
        self._telem_every = int(round(scn.telemetry_period_s / scn.control_period_s))
        self.records: list[tlm.PlantRecord] = []
        self._b_eci_t = np.zeros(3)
        self._sun_eci = np.zeros(3)
        self._eclipse = env.EclipseState(env.EclipseCondition.SUNLIGHT)
        self._boom_done = scn.boom_deploy_time_s is None
        self._last_readings: SensorReadings | None = None
        self._refresh_environment()

    @property
    def k(self) -> int:
        return self.clock.k

    @property
    def t_s(self) -> float:
        return self.clock.k * self.scn.control_period_s

    def _refresh_environment(self):
        r_km = self.orbit_state.r_eci / 1e3
        self._b_eci_t = env.mag_field_eci(r_km, self.clock.epoch, self.model) * NT_TO_TESLA
        self._sun_eci = env.sun_vector_eci(self.clock.epoch)
        self._eclipse = env.eclipse_state(r_km, self._sun_eci)

    def sense(self):
        """Produce (time payload, sensor readings) for the current cycle."""
        if self.k > 0:
            self.orbit_state = orbit.propagate_two_body(
                self.orbit_state, self.scn.control_period_s, self.scn.orbit_method)
            self.frame = orbit.orbital_frame(self.orbit_state)
            if self.k % self._env_every == 0:
                self._refresh_environment()
        if not self._boom_done and self.t_s >= self.scn.boom_deploy_time_s:
            self.state = deploy_boom(self.state, self.params)
            self._boom_done = True
        readings = measure(self.state, self._b_eci_t, self._sun_eci,
                           self._eclipse.sun_flag == 0, self.noise, self.scn.sensors)
        self._last_readings = readings
        e = self.clock.epoch
        time_payload = (float(e.year), float(e.mon), float(e.day),
                        float(e.hr), float(e.minute), e.sec)
        return time_payload, readings

    def apply(self, cmd: ActuatorCommand):
        """Record telemetry at this cycle, then advance truth and clock."""
        if self.k % self._telem_every == 0:
            dcm_bo = self.state.dcm_bo
            self.records.append(tlm.PlantRecord(
                t_s=self.t_s,
                q_bo_true=self.state.q_bo.copy(),
                w_bo_true=self.state.w_bi - dcm_bo @ self.frame.w_oi,
                euler_deg=tlm.euler_321_deg(dcm_bo),
                b_body_mag_t=float(np.linalg.norm(self._last_readings.b_body)),
                h_wheel=self.state.h_wheel,
                sun_flag=self._last_readings.sun_flag,
                eclipse_state=self._eclipse.condition.value,
                pointing_err_deg=math.degrees(
                    math.acos(float(np.clip(dcm_bo[2, 2], -1.0, 1.0)))),
            ))
        self.state = step_dynamics(self.state, self.orbit_state.r_eci, self._b_eci_t,
                                   self.frame, cmd, self.params,
                                   self.scn.control_period_s, self.scn.substep_s,
                                   method=self.scn.plant_method)
        self.clock = mgr.time_manager(self.clock, self.scn.control_period_s)


class FswSide:
    """Flight-software half: estimator, controller, mode manager."""

    def __init__(self, scn: Scenario):
        self.scn = scn
        self.orbit_state = orbit.OrbitState(scn.r_eci_m, scn.v_eci_m_s)
        self.frame = orbit.orbital_frame(self.orbit_state)
        self.model = env.load_geomag_model(scn.field_model)
        inertia = scn.spacecraft.inertia_stowed
        self.ad = est.AttitudeDetermination(
            inertia_diag=np.diag(inertia), gyro_r_epsilon=scn.gyro_r_epsilon)
        self.manager = mgr.ModeManager(scn.gains(), scn.spacecraft, scn.manager,
                                       mgr.ModeState(mflag=scn.mflag0))
        self._env_every = max(1, int(round(scn.env_period_s / scn.control_period_s)))
        self._telem_every = int(round(scn.telemetry_period_s / scn.control_period_s))
        self.records: list[tlm.FswRecord] = []
        self.k = 0
        self._hw_track = scn.h_wheel0
        self._prev_torque = np.zeros(3)
        self._schedule = sorted(scn.schedule)
        self._sched_idx = 0
        self._boom_done = scn.boom_deploy_time_s is None
        self._b_i_t = np.zeros(3)
        self._sun_i = np.zeros(3)

    @property
    def t_s(self) -> float:
        return self.k * self.scn.control_period_s

    def _refresh_environment(self, epoch: tf.EpochUtc):
        r_km = self.orbit_state.r_eci / 1e3
        self._b_i_t = env.mag_field_eci(r_km, epoch, self.model) * NT_TO_TESLA
        self._sun_i = env.sun_vector_eci(epoch)

    def inject_command(self, mode: int):
        """Ground command arriving outside the scenario schedule."""
        self.manager.command_mode(mode)

    def step(self, time_payload, readings: SensorReadings) -> ActuatorCommand:
        epoch = tf.EpochUtc(int(time_payload[0]), int(time_payload[1]), int(time_payload[2]),
                            int(time_payload[3]), int(time_payload[4]), float(time_payload[5]))
        if self.k > 0:
            self.orbit_state = orbit.propagate_two_body(
                self.orbit_state, self.scn.control_period_s, self.scn.orbit_method)
            self.frame = orbit.orbital_frame(self.orbit_state)
        if self.k == 0 or self.k % self._env_every == 0:
            self._refresh_environment(epoch)
        if not self._boom_done and self.t_s >= self.scn.boom_deploy_time_s:
            self.manager.mode.mflag = 1
            self._boom_done = True
        while self._sched_idx < len(self._schedule) and self.t_s >= self._schedule[self._sched_idx][0]:
            self.manager.command_mode(self._schedule[self._sched_idx][1])
            self._sched_idx += 1

        estimate = self.ad.step(readings, self._b_i_t, self._sun_i, self.frame,
                                self._prev_torque)
        out = self.manager.step(estimate, readings, self._hw_track, self.k)
        self._prev_torque = out.t_m + out.t_w
        self._hw_track = out.hw_set

        if self.k % self._telem_every == 0:
            self.records.append(tlm.FswRecord(
                t_s=self.t_s,
                bz1=self.manager.mode.bz1,
                bz6=self.manager.mode.bz6,
                q_bo_est=estimate.q_bo.copy(),
                w_bo_est=estimate.w_bo.copy(),
                m_c=out.m_c.copy(),
                u_m=out.u_m.copy(),
                hw_set=out.hw_set,
                sun_flag=readings.sun_flag,
            ))
        self.k += 1
        return ActuatorCommand(out.u_m, out.t_w, out.hw_set)


@dataclass
class RunSummary:
    duration_s: float
    final_mode: int
    mode3_entry_s: float | None
    accuracy_3sigma_deg: float
    stability_3sigma_deg_s: float
    window_s: tuple[float, float]


def summarize(plant_records, fsw_records, orbit_period_s: float) -> RunSummary:
    """Performance metrics over the final two orbits.

    Accuracy is 3x the rms of the worst true Euler-angle channel,
    stability 3x the rms of the worst true orbital-rate channel.
    """
    t_end = plant_records[-1].t_s
    t_lo = max(0.0, t_end - 2.0 * orbit_period_s)
    window = [p for p in plant_records if p.t_s >= t_lo]
    eulers = np.array([p.euler_deg for p in window])
    rates = np.array([np.degrees(p.w_bo_true) for p in window])
    acc = 3.0 * float(np.max(np.sqrt(np.mean(eulers ** 2, axis=0))))
    stab = 3.0 * float(np.max(np.sqrt(np.mean(rates ** 2, axis=0))))
    entry = None
    for f in fsw_records:
        if f.bz1 == 3:
            entry = f.t_s
            break
    return RunSummary(t_end, fsw_records[-1].bz1, entry, acc, stab, (t_lo, t_end))


def run_sil(scn: Scenario, progress=None):
    """Run the closed loop in-process; returns (plant_side, fsw_side, summary)."""
    plant_side = PlantSide(scn)
    fsw_side = FswSide(scn)
    n_cycles = int(round(scn.duration_s / scn.control_period_s))
    for k in range(n_cycles):
        time_payload, readings = plant_side.sense()
        cmd = fsw_side.step(time_payload, readings)
        plant_side.apply(cmd)
        if progress is not None and k % 4000 == 0:
            progress(k, n_cycles)
    period = orbit.circular_period(float(np.linalg.norm(scn.r_eci_m)))
    summary = summarize(plant_side.records, fsw_side.records, period)
    return plant_side, fsw_side, summary
