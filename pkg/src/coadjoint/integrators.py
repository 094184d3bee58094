"""Time-stepping kernels and the trajectory driver.

Schemes: stochastic Heun (trapezoidal predictor-corrector) for Stratonovich
systems, Euler-Maruyama for Ito systems carrying an analytic correction
drift, and classical RK4 as the deterministic oracle.  Steps are pure
functions; the driver ties the uniform time step to a Brownian grid so that
pathwise comparisons reuse identical noise.

All step kernels broadcast over leading state axes, which the Monte-Carlo
ensemble estimator uses to advance every path at once.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "SdeSystem",
    "Trajectory",
    "IntegrationDiverged",
    "heun_stratonovich_step",
    "euler_ito_step",
    "rk4_step",
    "integrate",
    "write_trajectory_csv",
    "read_trajectory_csv",
]

SCHEMES = ("heun_strat", "euler_ito", "rk4")


class IntegrationDiverged(RuntimeError):
    """A state component became non-finite; carries the failing step index.

    ``partial`` holds the trajectory up to the last finite state when the
    driver raised this (step kernels raise without it).
    """

    def __init__(self, step: int, last_state: np.ndarray, message: str = "",
                 partial: "Trajectory | None" = None):
        self.step = step
        self.last_state = np.asarray(last_state)
        self.partial = partial
        super().__init__(
            message or f"integration diverged at step {step}; "
            f"last finite state {self.last_state}"
        )


@dataclass(frozen=True)
class SdeSystem:
    """Drift, per-channel diffusion fields, and optional Ito correction drift.

    ``drift(t, x)`` and ``diffusion(t, x, k)`` return arrays shaped like x;
    ``ito_correction`` is the bounded-variation extra drift that makes the
    Euler-Maruyama scheme integrate the same law the Stratonovich fields
    define.  Callbacks must be pure and broadcast over leading axes of x.
    """

    state_dim: int
    channels: int
    drift: Callable[[float, np.ndarray], np.ndarray]
    diffusion: Callable[[float, np.ndarray, int], np.ndarray]
    ito_correction: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    labels: tuple = ()
    name: str = ""
    post_step: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.labels and len(self.labels) != self.state_dim:
            raise ValueError(
                f"{len(self.labels)} labels for state dimension {self.state_dim}"
            )


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled states of one integration run."""

    times: np.ndarray
    states: np.ndarray
    labels: tuple = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if states.shape[0] != times.shape[0]:
            raise ValueError("times and states must have equal length")
        dt = np.diff(times)
        # uniform up to float rounding of i * dt near the end of the horizon
        slack = max(1e-12 * dt[0], 8.0 * np.finfo(float).eps * abs(times[-1])) if times.size > 1 else 0.0
        if times.size > 1 and (np.any(dt <= 0) or np.ptp(dt) > slack):
            raise ValueError("times must be strictly increasing and uniform")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def steps(self) -> int:
        return self.times.shape[0] - 1

    def final(self) -> np.ndarray:
        return self.states[-1]


def heun_stratonovich_step(sys: SdeSystem, t: float, x, dt: float, dW) -> np.ndarray:
    """One stochastic Heun step for the Stratonovich interpretation.

    Predictor: Euler with drift and noise; corrector: trapezoidal average of
    both fields at the base point and the predictor.
    """
    x = np.asarray(x, dtype=float)
    dW = np.asarray(dW, dtype=float)
    fx = sys.drift(t, x)
    incr = fx * dt
    for k in range(sys.channels):
        incr = incr + sys.diffusion(t, x, k) * dW[..., k, None]
    xp = x + incr
    tp = t + dt
    out = x + 0.5 * dt * (fx + sys.drift(tp, xp))
    for k in range(sys.channels):
        out = out + 0.5 * (sys.diffusion(t, x, k) + sys.diffusion(tp, xp, k)) * dW[..., k, None]
    return out


def euler_ito_step(sys: SdeSystem, t: float, x, dt: float, dW) -> np.ndarray:
    """One Euler-Maruyama step of the Ito form drift + correction.

    Refuses to run without an ito_correction: silently integrating the
    Stratonovich fields in Ito form would solve a different equation.
    """
    if sys.ito_correction is None:
        raise ValueError(
            f"system {sys.name!r} has no ito_correction; supply one "
            "(exactly zero is acceptable) before using the euler_ito scheme"
        )
    x = np.asarray(x, dtype=float)
    dW = np.asarray(dW, dtype=float)
    out = x + (sys.drift(t, x) + sys.ito_correction(t, x)) * dt
    for k in range(sys.channels):
        out = out + sys.diffusion(t, x, k) * dW[..., k, None]
    return out


def rk4_step(drift: Callable[[float, np.ndarray], np.ndarray], t: float, x,
             dt: float) -> np.ndarray:
    """Classical fourth-order Runge-Kutta step for the drift alone."""
    x = np.asarray(x, dtype=float)
    k1 = drift(t, x)
    k2 = drift(t + 0.5 * dt, x + 0.5 * dt * k1)
    k3 = drift(t + 0.5 * dt, x + 0.5 * dt * k2)
    k4 = drift(t + dt, x + dt * k3)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(sys: SdeSystem, scheme: str, grid, x0) -> Trajectory:
    """Apply the chosen step over every grid interval, recording every state.

    Deterministic given (sys, scheme, grid, x0).  Raises
    :class:`IntegrationDiverged` on the first non-finite component.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    if scheme != "rk4" and grid.channels != sys.channels:
        raise ValueError(
            f"grid has {grid.channels} channels, system expects {sys.channels}"
        )
    x = np.asarray(x0, dtype=float)
    if x.shape != (sys.state_dim,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({sys.state_dim},)")
    M = grid.steps
    dt = grid.dt
    states = np.empty((M + 1, sys.state_dim))
    states[0] = x
    for i in range(M):
        t = i * dt
        # blowup is detected and reported below; suppress the transient
        # overflow warnings the diverging step itself emits
        with np.errstate(over="ignore", invalid="ignore"):
            if scheme == "heun_strat":
                x_new = heun_stratonovich_step(sys, t, x, dt, grid.dW[i])
            elif scheme == "euler_ito":
                x_new = euler_ito_step(sys, t, x, dt, grid.dW[i])
            else:
                x_new = rk4_step(sys.drift, t, x, dt)
        if not np.all(np.isfinite(x_new)):
            partial = Trajectory(
                times=np.arange(i + 1) * dt,
                states=states[: i + 1],
                labels=tuple(sys.labels),
                metadata={
                    "system": sys.name,
                    "scheme": scheme,
                    "seed": int(grid.seed),
                    "M": int(M),
                    "T": float(grid.T),
                    "generator": grid.generator,
                    "diverged_at": i + 1,
                },
            )
            raise IntegrationDiverged(step=i + 1, last_state=x, partial=partial)
        if sys.post_step is not None:
            x_new = sys.post_step(x_new, states[0])
        states[i + 1] = x_new
        x = x_new
    times = np.arange(M + 1) * dt
    meta = {
        "system": sys.name,
        "scheme": scheme,
        "seed": int(grid.seed),
        "M": int(M),
        "T": float(grid.T),
        "generator": grid.generator,
    }
    return Trajectory(times=times, states=states, labels=tuple(sys.labels), metadata=meta)


def write_trajectory_csv(traj: Trajectory, csv_path, meta_path=None) -> None:
    """CSV with a header row (t plus state labels) and shortest-roundtrip
    float64 text; optional JSON metadata sidecar."""
    labels = traj.labels or tuple(f"x{i}" for i in range(traj.states.shape[1]))
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t",) + tuple(labels))
        for t, row in zip(traj.times, traj.states):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    if meta_path is not None:
        with open(meta_path, "w") as fh:
            json.dump(traj.metadata, fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_trajectory_csv(csv_path) -> Trajectory:
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader])
    return Trajectory(times=rows[:, 0], states=rows[:, 1:], labels=tuple(header[1:]))
