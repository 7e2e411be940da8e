"""Plant/observer co-simulation for dynamic state estimation.

Both halves use fixed-step classical RK4 on the grid ``t_k = k * dt``.  The
plant records, besides its state and output at every grid point, the output
seen at each of the four RK4 stages of every step; the observer consumes
those stage outputs, so running it after the plant is the same computation
as integrating the joint plant-observer system in one pass.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .model import DerivedConstants, StateMatrices, eval_dynamics, eval_output

__all__ = [
    "InputFileError",
    "SimulationError",
    "InputTrajectory",
    "SimConfig",
    "PlantTrace",
    "ObserverTrace",
    "SimTrace",
    "load_inputs",
    "parse_inputs",
    "sample_input",
    "sample_inputs",
    "step_rk4",
    "simulate_plant",
    "simulate_observer",
    "simulate_dse",
    "error_metrics",
    "trace_to_csv",
    "write_trace_csv",
]

INPUT_HEADER = ("t", "Tm", "Efd", "iR", "iI")
TRACE_HEADER = (
    "t", "x1", "x2", "x3", "x4", "xh1", "xh2", "xh3", "xh4",
    "y1", "y2", "yh1", "yh2", "err",
)
INTERPOLATIONS = ("zoh", "linear")


class InputFileError(ValueError):
    """Malformed input-trajectory file; message names the offending line."""


class SimulationError(RuntimeError):
    def __init__(self, message: str, step: int):
        super().__init__(f"{message} (step {step})")
        self.step = step


@dataclass(frozen=True)
class InputTrajectory:
    times: np.ndarray
    values: np.ndarray
    interpolation: str = "linear"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).reshape(-1)
        v = np.asarray(self.values, dtype=float).reshape(len(t), 4)
        if len(t) == 0:
            raise ValueError("input trajectory needs at least one record")
        if np.any(np.diff(t) <= 0):
            raise ValueError("input times must be strictly increasing")
        if self.interpolation not in INTERPOLATIONS:
            raise ValueError(f"interpolation must be one of {INTERPOLATIONS}")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, u) -> "InputTrajectory":
        return cls(np.array([0.0]), np.asarray(u, dtype=float).reshape(1, 4), "zoh")


@dataclass(frozen=True)
class SimConfig:
    """Fixed-step simulation settings.

    ``pmu_decimation`` > 1 makes the observer see a measurement only every
    that many steps, held in between.  ``noise_std`` adds Gaussian noise to
    the reported measurements (off by default).
    """

    dt: float = 1e-3
    t_final: float = 10.0
    x0: np.ndarray = field(default_factory=lambda: np.zeros(4))
    xhat0: np.ndarray = field(default_factory=lambda: np.zeros(4))
    pmu_decimation: int = 1
    noise_std: float = 0.0
    noise_seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_final >= self.dt:
            raise ValueError("t_final must be at least dt")
        if self.pmu_decimation < 1:
            raise ValueError("pmu_decimation must be >= 1")
        if self.noise_std < 0:
            raise ValueError("noise_std must be nonnegative")
        for name in ("x0", "xhat0"):
            v = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if v.shape != (4,) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be 4 finite numbers")
            object.__setattr__(self, name, v)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def grid(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


@dataclass
class PlantTrace:
    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray
    stage_outputs: np.ndarray  # (n_steps, 4, 2)


@dataclass
class ObserverTrace:
    times: np.ndarray
    states: np.ndarray
    outputs: np.ndarray


@dataclass
class SimTrace:
    times: np.ndarray
    plant_states: np.ndarray
    observer_states: np.ndarray
    plant_outputs: np.ndarray
    observer_outputs: np.ndarray
    error_norm: np.ndarray

    @classmethod
    def combine(cls, plant: PlantTrace, obs: ObserverTrace) -> "SimTrace":
        if plant.times.shape != obs.times.shape or np.any(plant.times != obs.times):
            raise ValueError("plant and observer traces are on different time grids")
        err = np.linalg.norm(plant.states - obs.states, axis=1)
        return cls(plant.times, plant.states, obs.states, plant.outputs, obs.outputs, err)


def parse_inputs(text: str, interpolation: str = "linear", source: str = "<inputs>") -> InputTrajectory:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise InputFileError(f"{source}: empty file")
    header = tuple(h.strip() for h in rows[0])
    if header != INPUT_HEADER:
        raise InputFileError(f"{source}:1: expected header {','.join(INPUT_HEADER)}, got {','.join(header)}")
    times, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(INPUT_HEADER):
            raise InputFileError(f"{source}:{lineno}: expected {len(INPUT_HEADER)} columns, got {len(row)}")
        try:
            nums = [float(cell) for cell in row]
        except ValueError:
            raise InputFileError(f"{source}:{lineno}: non-numeric field in {row!r}") from None
        if not all(math.isfinite(v) for v in nums):
            raise InputFileError(f"{source}:{lineno}: non-finite field in {row!r}")
        if times and nums[0] <= times[-1]:
            raise InputFileError(
                f"{source}:{lineno}: time {nums[0]!r} is not after the previous time {times[-1]!r}"
            )
        times.append(nums[0])
        values.append(nums[1:])
    if not times:
        raise InputFileError(f"{source}: no data rows")
    return InputTrajectory(np.array(times), np.array(values), interpolation)


def load_inputs(path, interpolation: str = "linear") -> InputTrajectory:
    """Read an input CSV with header ``t,Tm,Efd,iR,iI``."""
    path = Path(path)
    return parse_inputs(path.read_text(encoding="utf-8"), interpolation, source=str(path))


def sample_inputs(traj: InputTrajectory, ts) -> np.ndarray:
    """Inputs at each time in ``ts``; shape ``ts.shape + (4,)``."""
    ts = np.asarray(ts, dtype=float)
    times, values = traj.times, traj.values
    flat = ts.reshape(-1)
    if len(times) == 1:
        out = np.repeat(values[:1], flat.size, axis=0)
    elif traj.interpolation == "zoh":
        idx = np.clip(np.searchsorted(times, flat, side="right") - 1, 0, len(times) - 1)
        out = values[idx]
    else:
        out = np.column_stack([np.interp(flat, times, values[:, j]) for j in range(values.shape[1])])
    return out.reshape(ts.shape + (values.shape[1],))


def sample_input(traj: InputTrajectory, t: float) -> np.ndarray:
    """Zero-order hold or linear interpolation, clamped outside the data."""
    return sample_inputs(traj, np.array([t]))[0]


def step_rk4(fun: Callable, x, t: float, dt: float, step: int = 0) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of ``xdot = fun(t, x)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    k1 = fun(t, x)
    k2 = fun(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = fun(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = fun(t + dt, x + dt * k3)
    if not _finite(k1, k2, k3, k4):
        raise SimulationError("non-finite derivative", step)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _stage_times(times: np.ndarray, dt: float) -> np.ndarray:
    t = times[:-1, None]
    return t + np.array([0.0, 0.5, 0.5, 1.0]) * dt


def _finite(*ks) -> bool:
    return math.isfinite(float(np.sum(ks)))


def simulate_plant(c: DerivedConstants, m: StateMatrices, traj: InputTrajectory, cfg: SimConfig) -> PlantTrace:
    times = cfg.grid()
    n, dt = cfg.n_steps, cfg.dt
    us = sample_inputs(traj, _stage_times(times, dt))
    ug = sample_inputs(traj, times)
    states = np.empty((n + 1, 4))
    outputs = np.empty((n + 1, 2))
    stage_y = np.empty((n, 4, 2))
    x = cfg.x0.copy()
    states[0] = x
    outputs[0] = eval_output(c, m, x, ug[0])
    for k in range(n):
        u = us[k]
        k1 = eval_dynamics(c, m, x, u[0])
        x2 = x + 0.5 * dt * k1
        k2 = eval_dynamics(c, m, x2, u[1])
        x3 = x + 0.5 * dt * k2
        k3 = eval_dynamics(c, m, x3, u[2])
        x4 = x + dt * k3
        k4 = eval_dynamics(c, m, x4, u[3])
        if not _finite(k1, k2, k3, k4):
            raise SimulationError("non-finite plant derivative", k)
        for j, xs in enumerate((x, x2, x3, x4)):
            stage_y[k, j] = eval_output(c, m, xs, u[j])
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[k + 1] = x
        outputs[k + 1] = eval_output(c, m, x, ug[k + 1])
    return PlantTrace(times, states, outputs, stage_y)


def _measurements(plant: PlantTrace, cfg: SimConfig) -> np.ndarray:
    """Stage measurements as seen by the observer, after decimation and noise."""
    y = plant.stage_outputs.copy()
    if cfg.pmu_decimation > 1:
        # hold the last reported grid sample through each step
        report = (np.arange(cfg.n_steps) // cfg.pmu_decimation) * cfg.pmu_decimation
        y = np.repeat(plant.outputs[report][:, None, :], 4, axis=1)
    if cfg.noise_std > 0:
        rng = np.random.default_rng(cfg.noise_seed)
        noise = rng.normal(0.0, cfg.noise_std, size=(cfg.n_steps, 2))
        y = y + noise[:, None, :]
    return y


def simulate_observer(
    c: DerivedConstants,
    m: StateMatrices,
    L,
    traj: InputTrajectory,
    cfg: SimConfig,
    plant: PlantTrace,
) -> ObserverTrace:
    """Integrate the Lipschitz observer driven by the plant's measurements.

    ``xhat' = A xhat + f(xhat, u) + Bu u + L (y - yhat)`` with the nonlinear
    output ``yhat = h(xhat, u) + Du u``.
    """
    L = np.asarray(getattr(L, "L", L), dtype=float)
    if L.shape != (4, 2):
        raise ValueError(f"observer gain must be 4x2, got {L.shape}")
    times = cfg.grid()
    if plant.times.shape != times.shape or np.any(plant.times != times):
        raise ValueError("plant trace time grid does not match the simulation config")
    if plant.stage_outputs.shape != (cfg.n_steps, 4, 2):
        raise ValueError("plant trace is missing per-stage outputs for this grid")
    y = _measurements(plant, cfg)
    n, dt = cfg.n_steps, cfg.dt
    us = sample_inputs(traj, _stage_times(times, dt))
    ug = sample_inputs(traj, times)
    states = np.empty((n + 1, 4))
    outputs = np.empty((n + 1, 2))
    xh = cfg.xhat0.copy()
    states[0] = xh
    outputs[0] = eval_output(c, m, xh, ug[0])

    for k in range(n):
        u, yk = us[k], y[k]

        def rhs(j, z):
            return eval_dynamics(c, m, z, u[j]) + L @ (yk[j] - eval_output(c, m, z, u[j]))

        k1 = rhs(0, xh)
        k2 = rhs(1, xh + 0.5 * dt * k1)
        k3 = rhs(2, xh + 0.5 * dt * k2)
        k4 = rhs(3, xh + dt * k3)
        if not _finite(k1, k2, k3, k4):
            raise SimulationError("non-finite observer derivative", k)
        xh = xh + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[k + 1] = xh
        outputs[k + 1] = eval_output(c, m, xh, ug[k + 1])
    return ObserverTrace(times, states, outputs)


def simulate_dse(c, m, L, traj: InputTrajectory, cfg: SimConfig) -> SimTrace:
    plant = simulate_plant(c, m, traj, cfg)
    obs = simulate_observer(c, m, L, traj, cfg, plant)
    return SimTrace.combine(plant, obs)


def error_metrics(trace: SimTrace, fraction: float = 0.01) -> dict:
    """RMSE per state, final error norm and convergence time.

    Convergence time is the first grid time after which the error norm
    stays below ``fraction`` of its initial value; ``None`` if it never does.
    """
    err = np.asarray(trace.error_norm, dtype=float)
    if err.size == 0:
        raise ValueError("empty trace")
    diff = trace.plant_states - trace.observer_states
    rmse = np.sqrt(np.mean(diff**2, axis=0))
    threshold = fraction * err[0]
    if err[0] == 0.0:
        conv = 0.0 if np.all(err == 0.0) else None
    else:
        above = np.nonzero(err >= threshold)[0]
        last = above[-1]
        conv = None if last == len(err) - 1 else float(trace.times[last + 1])
    return {
        "rmse": [float(v) for v in rmse],
        "final_err": float(err[-1]),
        "convergence_time": conv,
    }


def trace_to_csv(trace: SimTrace) -> str:
    buf = io.StringIO()
    buf.write(",".join(TRACE_HEADER) + "\n")
    cols = np.column_stack([
        trace.times, trace.plant_states, trace.observer_states,
        trace.plant_outputs, trace.observer_outputs, trace.error_norm,
    ])
    for row in cols:
        buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def write_trace_csv(trace: SimTrace, path) -> None:
    Path(path).write_text(trace_to_csv(trace), encoding="utf-8", newline="\n")
