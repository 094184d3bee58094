"""Quantitative test instruments: drift series, pathwise errors, convergence orders.

All instruments are pure functions of their trajectory inputs, so re-running
on identical inputs is bit-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .fields import ScalarField
from .integrators import Trajectory

__all__ = [
    "DriftSeries",
    "observable_series",
    "strong_error",
    "empirical_order",
    "write_series_csv",
]


@dataclass(frozen=True)
class DriftSeries:
    """An observable along a trajectory, minus its initial value."""

    times: np.ndarray
    values: np.ndarray
    observable: str = ""

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape:
            raise ValueError("times and values must have equal shapes")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))


def observable_series(traj: Trajectory, f: ScalarField) -> DriftSeries:
    """Evaluate f along the trajectory and subtract f(x0)."""
    vals = np.array([f(x) for x in traj.states])
    return DriftSeries(times=traj.times, values=vals - vals[0],
                       observable=f.name or "observable")


def strong_error(a: Trajectory, b: Trajectory) -> float:
    """Max-over-time Euclidean distance on the shared time grid.

    If one trajectory is a dyadic refinement of the other, the finer one is
    subsampled to the coarser grid.
    """
    if a.states.shape[1] != b.states.shape[1]:
        raise ValueError("trajectories live in different state spaces")
    if a.steps > b.steps:
        a, b = b, a
    if b.steps % a.steps != 0:
        raise ValueError(
            f"incompatible grids: {b.steps} steps is not a multiple of {a.steps}"
        )
    stride = b.steps // a.steps
    tb = b.times[::stride]
    if np.max(np.abs(tb - a.times)) > 1e-9 * max(1.0, a.times[-1]):
        raise ValueError("trajectories do not share a time grid")
    diff = b.states[::stride] - a.states
    return float(np.max(np.linalg.norm(diff, axis=1)))


def empirical_order(hs, errs) -> float:
    """Least-squares slope of log(err) against log(h)."""
    hs = np.asarray(hs, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if hs.size < 3:
        raise ValueError("need at least 3 points to fit an order")
    if np.any(hs <= 0) or np.any(errs <= 0):
        raise ValueError("step sizes and errors must be positive")
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    return float(slope)


def write_series_csv(series: DriftSeries, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("t", series.observable or "drift"))
        for t, v in zip(series.times, series.values):
            writer.writerow([repr(float(t)), repr(float(v))])
