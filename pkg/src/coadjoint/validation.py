"""Named validation suites with pinned seeds, one table row per check.

Each suite function returns a list of :class:`CheckRow`; the CLI prints them
and exits nonzero if any row fails.  The rows mirror the package's
acceptance gates: algebraic identities, momentum-map equivariance, the
Ito/Stratonovich double-bracket equivalence, Casimir conservation,
collectivization, and the Kolmogorov generator checks.

Everything here is deterministic: seeds are fixed arguments, ensembles
recombine in path order, and values format identically across runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import algebra as lie
from .actions import (
    PhaseState,
    builtin_chart,
    canonical_poisson,
    equivariance_residual,
    momentum_map,
)
from .diagnostics import empirical_order, observable_series, strong_error
from .dynamics import (
    QuadraticLagrangian,
    ReducedHamiltonian,
    casimir,
    hamel_system,
    lie_poisson_system,
    momentum_pairing_field,
    phase_space_system,
    reconstruct_momentum,
)
from .fields import (
    CanonicalBracket,
    HamelBracket,
    LiePoissonBracket,
    ScalarField,
    double_bracket,
)
from .integrators import integrate
from .kolmogorov import (
    GridGeometry,
    backward_solve,
    ensemble_finals,
    generator_apply,
    adjoint_apply,
    interpolate,
    lie_poisson_generator,
    mc_expectation,
)
from .noise import NoiseSpec, coarsen, sample_grid, time_grid

__all__ = ["CheckRow", "SUITES", "run_suite", "format_rows", "SHORT_TIME_C"]

# Standard rigid-body configuration used across suites: principal moments
# (1, 2, 3), so K = G^(-1) = diag(1, 1/2, 1/3).
K_RIGID = np.diag([1.0, 0.5, 1.0 / 3.0])
G_RIGID = np.diag([1.0, 2.0, 3.0])
M0 = np.array([0.8, 0.3, 0.5])
Q0 = np.array([1.0, 0.2, -0.3])
P0 = np.array([0.1, 0.7, 0.4])
XI_PAIR = np.array([[0.0, 0.0, 1.0], [0.3, 0.4, 0.1]])
XI_SINGLE = np.array([[1.0, 0.0, 0.0]])
M_EXPONENTS = range(8, 14)

# Gate constant for the short-time generator consistency check,
# |(E f(X_h) - f(x)) / h - Lf(x)| <= C (h + stderr / h), calibrated once at
# h = 1e-3 and 5e-4 on the pinned seeds (observed ratios were below 1.8).
SHORT_TIME_C = 3.0

MC_CROSSCHECK = {
    "m0": np.array([0.8, 0.45, 0.3]),
    "T": 0.2,
    "nodes": 48,
    "box": 1.4,
    "paths": 10_000,
    "mc_steps": 256,
    "seed": 2024,
}


@dataclass(frozen=True)
class CheckRow:
    check: str
    value: float
    threshold: float
    mode: str  # "max": value <= threshold, "min": value >= threshold

    @property
    def passed(self) -> bool:
        if self.mode == "max":
            return self.value <= self.threshold
        return self.value >= self.threshold


def _row_max(check, value, threshold):
    return CheckRow(check, float(value), float(threshold), "max")


def _row_min(check, value, threshold):
    return CheckRow(check, float(value), float(threshold), "min")


def suite_algebra(seeds: int = 8) -> list:
    rng = np.random.default_rng(101)
    rows = []
    for name in ("so3", "h3", "se2"):
        alg = lie.builtin(name)
        rows.append(_row_max(f"{name} antisymmetry residual", lie.antisymmetry_residual(alg), 1e-12))
        rows.append(_row_max(f"{name} jacobi residual", lie.jacobi_residual(alg), 1e-12))
        pairing = 0.0
        bilin = 0.0
        for _ in range(100):
            v, w, m = rng.normal(size=(3, alg.dim))
            a, b = rng.normal(size=2)
            norm = 1.0 + np.linalg.norm(m) * np.linalg.norm(v) * np.linalg.norm(w)
            pairing = max(
                pairing,
                abs(lie.ad_star(alg, v, m) @ w - m @ lie.bracket(alg, v, w)) / norm,
            )
            lhs = lie.bracket(alg, a * v + b * w, m)
            rhs = a * lie.bracket(alg, v, m) + b * lie.bracket(alg, w, m)
            bilin = max(bilin, float(np.max(np.abs(lhs - rhs))) / norm)
            lhs = lie.ad_star(alg, v, a * m + b * w)
            rhs = a * lie.ad_star(alg, v, m) + b * lie.ad_star(alg, v, w)
            bilin = max(bilin, float(np.max(np.abs(lhs - rhs))) / norm)
        rows.append(_row_max(f"{name} ad*-pairing identity", pairing, 1e-12))
        rows.append(_row_max(f"{name} bilinearity", bilin, 1e-12))
    return rows


def suite_equivariance(seeds: int = 8) -> list:
    rng = np.random.default_rng(202)
    rows = []
    for chart_name in ("so3_on_r3", "rn_translation", "h3_on_r3"):
        chart = builtin_chart(chart_name)
        closure = max(
            chart.closure_residual(rng.uniform(-2, 2, size=chart.n)) for _ in range(100)
        )
        rows.append(_row_max(f"{chart_name} commutation closure", closure, 1e-9))
        resid = 0.0
        pairing = 0.0
        for _ in range(100):
            s = PhaseState(rng.normal(size=chart.n), rng.normal(size=chart.n))
            resid = max(resid, float(np.max(np.abs(equivariance_residual(chart, s)))))
            u, v = rng.normal(size=(2, chart.alg.dim))
            fu = momentum_pairing_field(chart, u)
            fv = momentum_pairing_field(chart, v)
            lhs = canonical_poisson(fu, fv, s)
            rhs = momentum_map(chart, s) @ lie.bracket(chart.alg, u, v)
            pairing = max(pairing, abs(lhs + rhs))
        rows.append(_row_max(f"{chart_name} equivariance residual", resid, 1e-9))
        rows.append(_row_max(f"{chart_name} bracket pairing", pairing, 1e-9))
    return rows


def _nested_correction_residual(seed: int = 303) -> dict:
    """Closed-form Ito correction vs nested double bracket, all three builders."""
    rng = np.random.default_rng(seed)
    so3 = lie.builtin("so3")
    chart = builtin_chart("so3_on_r3")
    noise = NoiseSpec(channels=2, xi=XI_PAIR, seed=0)
    out = {}

    sys_lp = lie_poisson_system(so3, K_RIGID, noise)
    br = LiePoissonBracket(so3)
    worst = 0.0
    for _ in range(20):
        m = rng.normal(size=3)
        closed = sys_lp.ito_correction(0.0, m)
        oracle = np.array(
            [
                sum(
                    0.5 * double_bracket(br, ScalarField.linear(noise.xi[k]),
                                         ScalarField.coordinate(a, 3), m)
                    for k in range(noise.channels)
                )
                for a in range(3)
            ]
        )
        worst = max(worst, float(np.max(np.abs(closed - oracle))))
    out["lie_poisson"] = worst

    L = QuadraticLagrangian(alg=so3, kinetic=G_RIGID, chart=chart)
    sys_ps = phase_space_system(L, noise)
    cb = CanonicalBracket(3)
    gks = [momentum_pairing_field(chart, noise.xi[k]) for k in range(noise.channels)]
    worst = 0.0
    for _ in range(20):
        x = rng.normal(size=6)
        closed = sys_ps.ito_correction(0.0, x)
        oracle = np.array(
            [
                sum(0.5 * double_bracket(cb, g, ScalarField.coordinate(i, 6), x) for g in gks)
                for i in range(6)
            ]
        )
        worst = max(worst, float(np.max(np.abs(closed - oracle))))
    out["phase_space"] = worst

    h = ReducedHamiltonian(alg=so3, kinetic_inverse=K_RIGID)
    sys_h = hamel_system(chart, h, noise)
    hb = HamelBracket(chart)
    gmq = [
        ScalarField(
            value=lambda y, w=noise.xi[k]: float(w @ y[:3]),
            grad=lambda y, w=noise.xi[k]: np.concatenate([w, np.zeros(3)]),
        )
        for k in range(noise.channels)
    ]
    worst = 0.0
    for _ in range(20):
        x = rng.normal(size=6)
        closed = sys_h.ito_correction(0.0, x)
        oracle = np.array(
            [
                sum(0.5 * double_bracket(hb, g, ScalarField.coordinate(i, 6), x) for g in gmq)
                for i in range(6)
            ]
        )
        worst = max(worst, float(np.max(np.abs(closed - oracle))))
    out["hamel"] = worst
    return out


def coupled_scheme_errors(seeds: int = 8):
    """Strat-vs-Ito strong errors on shared paths, averaged across seeds."""
    so3 = lie.builtin("so3")
    hs = [2.0 ** -ex for ex in M_EXPONENTS]
    all_errs = []
    for seed in range(seeds):
        noise = NoiseSpec(channels=2, xi=XI_PAIR, seed=seed)
        sys = lie_poisson_system(so3, K_RIGID, noise)
        fine = sample_grid(noise, 1.0, 2 ** max(M_EXPONENTS))
        errs = []
        for ex in M_EXPONENTS:
            g = coarsen(fine, 2 ** max(M_EXPONENTS) // 2 ** ex)
            th = integrate(sys, "heun_strat", g, M0)
            ti = integrate(sys, "euler_ito", g, M0)
            errs.append(strong_error(th, ti))
        all_errs.append(errs)
    return hs, np.mean(all_errs, axis=0)


def suite_ito(seeds: int = 8) -> list:
    rows = []
    residuals = _nested_correction_residual()
    for builder, worst in residuals.items():
        rows.append(_row_max(f"{builder} correction vs nested bracket", worst, 1e-9))
    hs, errs = coupled_scheme_errors(seeds)
    order = empirical_order(hs, errs)
    rows.append(_row_min(f"strat/ito coupled order ({seeds} seeds)", order, 0.4))
    rows.append(_row_max("strat/ito coupled order (upper)", order, 1.2))
    ratios = errs[:-1] / errs[1:]
    rows.append(_row_min("strat/ito mean halving ratio", float(np.mean(ratios)), 1.3))
    return rows


def casimir_drift_errors(seeds: int = 8):
    """Pathwise sup Casimir drift under Heun, averaged across seeds."""
    so3 = lie.builtin("so3")
    C = casimir(so3)
    hs = [2.0 ** -ex for ex in M_EXPONENTS]
    all_errs = []
    for seed in range(seeds):
        noise = NoiseSpec(channels=2, xi=XI_PAIR, seed=seed)
        sys = lie_poisson_system(so3, K_RIGID, noise)
        fine = sample_grid(noise, 1.0, 2 ** max(M_EXPONENTS))
        errs = []
        for ex in M_EXPONENTS:
            g = coarsen(fine, 2 ** max(M_EXPONENTS) // 2 ** ex)
            t = integrate(sys, "heun_strat", g, M0)
            errs.append(observable_series(t, C).sup())
        all_errs.append(errs)
    return hs, np.mean(all_errs, axis=0)


def suite_casimir(seeds: int = 8) -> list:
    so3 = lie.builtin("so3")
    C = casimir(so3)
    rng = np.random.default_rng(404)
    noise = NoiseSpec(channels=2, xi=XI_PAIR, seed=0)
    sys = lie_poisson_system(so3, K_RIGID, noise)
    worst = 0.0
    for _ in range(100):
        m = rng.normal(size=3)
        grad = C.gradient(m)
        worst = max(worst, abs(grad @ sys.drift(0.0, m)))
        for k in range(noise.channels):
            worst = max(worst, abs(grad @ sys.diffusion(0.0, m, k)))
    rows = [_row_max("grad C . (drift, diffusion) orthogonality", worst, 1e-12)]
    hs, errs = casimir_drift_errors(seeds)
    rows.append(_row_min(f"casimir pathwise drift order ({seeds} seeds)", empirical_order(hs, errs), 1.0))
    noise_e3 = NoiseSpec(channels=1, xi=np.array([[0.0, 0.0, 1.0]]), seed=0)
    sys_e3 = lie_poisson_system(so3, K_RIGID, noise_e3)
    m = np.array([1.0, 0.0, 0.0])
    nonorth = abs(C.gradient(m) @ sys_e3.ito_correction(0.0, m))
    rows.append(_row_min("ito correction leaves Casimir sphere (detector)", nonorth, 1e-1))
    return rows


def collectivization_errors(seeds: int = 4, exponents=range(8, 13)):
    """Coupled phase-space-through-J vs direct collective errors per step size.

    The phase-space integration dominates the cost, so this study defaults
    to a smaller seed set than the scheme-comparison ones; the measured
    order sits near 1, far above the 0.5 gate.
    """
    so3 = lie.builtin("so3")
    chart = builtin_chart("so3_on_r3")
    x0 = np.concatenate([Q0, P0])
    m0 = momentum_map(chart, PhaseState(Q0, P0))
    hs = [2.0 ** -ex for ex in exponents]
    all_errs = []
    for seed in range(seeds):
        noise = NoiseSpec(channels=2, xi=XI_PAIR, seed=seed)
        L = QuadraticLagrangian(alg=so3, kinetic=G_RIGID, chart=chart)
        ps = phase_space_system(L, noise)
        lp = lie_poisson_system(so3, K_RIGID, noise)
        fine = sample_grid(noise, 1.0, 2 ** max(exponents))
        errs = []
        for ex in exponents:
            g = coarsen(fine, 2 ** max(exponents) // 2 ** ex)
            tp = integrate(ps, "heun_strat", g, x0)
            tl = integrate(lp, "heun_strat", g, m0)
            errs.append(strong_error(reconstruct_momentum(tp, chart), tl))
        all_errs.append(errs)
    return hs, np.mean(all_errs, axis=0)


def suite_collectivize(seeds: int = 8) -> list:
    so3 = lie.builtin("so3")
    chart = builtin_chart("so3_on_r3")
    no_noise = NoiseSpec(channels=0, xi=np.zeros((0, 3)), seed=0)
    L = QuadraticLagrangian(alg=so3, kinetic=G_RIGID, chart=chart)
    x0 = np.concatenate([Q0, P0])
    m0 = momentum_map(chart, PhaseState(Q0, P0))
    grid = time_grid(1.0, 10_000)  # dt = 1e-4
    tp = integrate(phase_space_system(L, no_noise), "rk4", grid, x0)
    tl = integrate(lie_poisson_system(so3, K_RIGID, no_noise), "rk4", grid, m0)
    det_err = strong_error(reconstruct_momentum(tp, chart), tl)
    rows = [_row_max("deterministic collectivization error (dt=1e-4)", det_err, 1e-6)]
    n_seeds = max(2, seeds // 2)
    hs, errs = collectivization_errors(n_seeds)
    rows.append(_row_min(f"stochastic collectivization order ({n_seeds} seeds)", empirical_order(hs, errs), 0.5))
    return rows


def short_time_consistency(xi, h: float, seed: int = 7, ensemble: int = 200_000):
    """Worst |(E f(X_h) - f(x))/h - Lf(x)| / (h + stderr/h) over f in {m1, m2, m3}."""
    so3 = lie.builtin("so3")
    spec = lie_poisson_generator(so3, K_RIGID, xi)
    noise = NoiseSpec(channels=len(xi), xi=np.asarray(xi, dtype=float), seed=0)
    sys = lie_poisson_system(so3, K_RIGID, noise)
    x0 = MC_CROSSCHECK["m0"]
    finals = ensemble_finals(sys, x0, T=h, M=2, ensemble=ensemble, seed=seed)
    worst = 0.0
    for i in range(3):
        f = ScalarField.coordinate(i, 3, name=f"m{i+1}")
        vals = finals[:, i]
        mean = float(np.mean(vals))
        stderr = float(np.std(vals, ddof=1) / np.sqrt(ensemble))
        est = (mean - f(x0)) / h
        lf = generator_apply(spec, f, x0)
        worst = max(worst, abs(est - lf) / (h + stderr / h))
    return worst


def suite_kolmogorov(seeds: int = 8) -> list:
    so3 = lie.builtin("so3")
    C = casimir(so3)
    one = ScalarField.constant(1.0, 3)
    spec = lie_poisson_generator(so3, K_RIGID, XI_SINGLE)
    rng = np.random.default_rng(505)
    kill = 0.0
    kill_adj = 0.0
    for _ in range(50):
        m = rng.normal(size=3)
        kill = max(kill, abs(generator_apply(spec, C, m)))
        kill_adj = max(kill_adj, abs(adjoint_apply(spec, C, m)))
    rows = [
        _row_max("generator kills Casimir", kill, 1e-8),
        _row_max("adjoint kills Casimir", kill_adj, 1e-8),
        _row_max("generator kills constants", abs(generator_apply(spec, one, M0)), 0.0),
    ]
    for label, xi in (("xi=e1", XI_SINGLE), ("xi=pair", XI_PAIR)):
        for h in (1e-3, 5e-4):
            ratio = short_time_consistency(xi, h)
            rows.append(_row_max(f"short-time consistency {label} h={h:g}", ratio, SHORT_TIME_C))
    cfg = MC_CROSSCHECK
    geo = GridGeometry.cube(-cfg["box"], cfg["box"], cfg["nodes"])
    f = ScalarField.coordinate(2, 3, "m3")
    rho = backward_solve(spec, f, cfg["T"], geo)
    pde_val = interpolate(rho, cfg["m0"])
    noise = NoiseSpec(channels=1, xi=XI_SINGLE, seed=0)
    sys = lie_poisson_system(so3, K_RIGID, noise)
    mean, stderr = mc_expectation(
        sys, f, cfg["m0"], cfg["T"], cfg["mc_steps"], cfg["paths"], cfg["seed"]
    )
    dx = float(geo.dx[0])
    gate = 3.0 * stderr + 2.0 * dx ** 2
    rows.append(_row_max("PDE vs MC expectation (rigid body)", abs(mean - pde_val), gate))
    return rows


SUITES = {
    "algebra": suite_algebra,
    "equivariance": suite_equivariance,
    "ito": suite_ito,
    "casimir": suite_casimir,
    "collectivize": suite_collectivize,
    "kolmogorov": suite_kolmogorov,
}


def run_suite(name: str, seeds: int = 8):
    """Run one suite (or 'all'); returns (rows, all_passed)."""
    if name == "all":
        rows = []
        for suite_name in SUITES:
            rows.extend(run_suite(suite_name, seeds)[0])
        return rows, all(r.passed for r in rows)
    try:
        fn = SUITES[name]
    except KeyError:
        raise LookupError(
            f"unknown suite {name!r}; available: {sorted(SUITES)} or 'all'"
        ) from None
    rows = fn(seeds)
    return rows, all(r.passed for r in rows)


def format_rows(rows) -> str:
    width = max(len(r.check) for r in rows) + 2
    lines = [f"{'check':<{width}}{'value':>14}  {'threshold':>14}  pass"]
    for r in rows:
        rel = "<=" if r.mode == "max" else ">="
        lines.append(
            f"{r.check:<{width}}{r.value:>14.6e}  {rel} {r.threshold:<11.4e}  "
            f"{'ok' if r.passed else 'FAIL'}"
        )
    return "\n".join(lines)
