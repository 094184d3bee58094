#!/usr/bin/env python3
"""Stochastic free rigid body: one path, its Casimir drift, and its energy.

Integrates the collective dynamics dm = ad*(Km, m) dt + ad*(xi, m) o dW on
so(3)* with both schemes on the same Brownian path, then writes trajectory
and drift CSVs next to this script (or under --out).
"""

import argparse
from pathlib import Path

import numpy as np

from coadjoint.algebra import builtin
from coadjoint.diagnostics import observable_series, write_series_csv
from coadjoint.dynamics import casimir, lie_poisson_system
from coadjoint.fields import ScalarField
from coadjoint.integrators import integrate, write_trajectory_csv
from coadjoint.noise import NoiseSpec, sample_grid


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--steps", type=int, default=4096)
    parser.add_argument("--horizon", type=float, default=5.0)
    parser.add_argument("--out", default="rigid_body_out")
    args = parser.parse_args()

    so3 = builtin("so3")
    K = np.diag([1.0, 0.5, 1.0 / 3.0])  # principal moments (1, 2, 3)
    noise = NoiseSpec.make([[0.0, 0.0, 1.0]], seed=args.seed)
    system = lie_poisson_system(so3, K, noise)
    grid = sample_grid(noise, args.horizon, args.steps)
    m0 = np.array([0.8, 0.3, 0.5])

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = {}
    for scheme in ("heun_strat", "euler_ito"):
        traj = integrate(system, scheme, grid, m0)
        write_trajectory_csv(traj, out / f"{scheme}.csv", out / f"{scheme}.meta.json")
        C = casimir(so3)
        drift = observable_series(traj, C)
        write_series_csv(drift, out / f"{scheme}.casimir.csv")
        energy = ScalarField(
            value=lambda m: float(0.5 * m @ K @ m), grad=lambda m: K @ m, name="energy"
        )
        e_series = observable_series(traj, energy)
        write_series_csv(e_series, out / f"{scheme}.energy.csv")
        results[scheme] = (drift.sup(), e_series.sup())

    print(f"wrote trajectories and drift series to {out}/")
    for scheme, (c_drift, e_drift) in results.items():
        print(f"{scheme:11s}  sup |C - C0| = {c_drift:.3e}   sup |h - h0| = {e_drift:.3e}")
    print("Casimir drift is discretization error only; energy genuinely wanders.")


if __name__ == "__main__":
    main()
