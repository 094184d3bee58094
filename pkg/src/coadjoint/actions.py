"""Coordinate charts for Lie algebra actions on Q and the cotangent-lift momentum map.

A chart stores the coefficient functions A_a^i(q) of the action vector
fields, plus their first and second derivatives (analytic for the built-in
charts, central finite differences as a fallback for user charts).  The
rotation chart's sign is pinned so that the vector-field commutators close
on the so(3) structure constants of :mod:`coadjoint.algebra` with a plus
sign; with that choice the momentum map is m = p x q.

All chart callbacks broadcast over leading axes of q, which the ensemble
Monte-Carlo paths rely on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .algebra import LieAlgebraSpec, abelian, builtin
from .fields import FD_STEP_SCALE, CanonicalBracket, ScalarField

__all__ = [
    "ActionChart",
    "PhaseState",
    "action_field",
    "momentum_map",
    "canonical_poisson",
    "hamiltonian_vector_field",
    "equivariance_residual",
    "builtin_chart",
    "register_chart",
    "chart_names",
]


@dataclass(frozen=True)
class PhaseState:
    """Standard cotangent coordinates (q, p)."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float))
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        if q.shape != p.shape:
            raise ValueError(f"q and p must conform, got shapes {q.shape} and {p.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return self.q.shape[-1]

    def packed(self) -> np.ndarray:
        return np.concatenate([self.q, self.p], axis=-1)

    @staticmethod
    def unpack(x: np.ndarray) -> "PhaseState":
        x = np.asarray(x, dtype=float)
        n = x.shape[-1] // 2
        return PhaseState(x[..., :n], x[..., n:])


@dataclass(frozen=True)
class ActionChart:
    """Action coefficients A_a^i(q) on one coordinate chart of Q.

    ``A(q)`` returns shape (..., r, n); ``dA(q)`` shape (..., r, n, n) with
    dA[..., a, i, j] = dA_a^i/dq^j; ``d2A(q)`` shape (..., r, n, n, n) with
    the two derivative indices last.  Missing derivative callbacks fall back
    to central differences (built-in charts are always analytic).
    """

    alg: LieAlgebraSpec
    n: int
    A: Callable[[np.ndarray], np.ndarray]
    dA: Optional[Callable[[np.ndarray], np.ndarray]] = None
    d2A: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def coefficients(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return np.asarray(self.A(q), dtype=float)

    def d_coefficients(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.dA is not None:
            return np.asarray(self.dA(q), dtype=float)
        return _fd_jacobian(self.coefficients, q)

    def d2_coefficients(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.d2A is not None:
            return np.asarray(self.d2A(q), dtype=float)
        return _fd_jacobian(self.d_coefficients, q)

    def closure_residual(self, q) -> float:
        """max |[A_a, A_b]^k - c_ab^g A_g^k| at q."""
        a = self.coefficients(q)
        da = self.d_coefficients(q)
        # [A_a, A_b]^k = A_a^s dA_b^k/dq^s - A_b^s dA_a^k/dq^s
        comm = np.einsum("...as,...bks->...abk", a, da)
        comm = comm - comm.swapaxes(-3, -2)
        target = np.einsum("abg,...gk->...abk", self.alg.c, a)
        return float(np.max(np.abs(comm - target)))

    def validate(self, rng: np.random.Generator, samples: int = 100,
                 closure_tol: float = 1e-9, fd_rel_tol: float = 1e-6,
                 scale: float = 2.0) -> None:
        """Check commutation closure and dA/A consistency at sampled points."""
        qs = rng.uniform(-scale, scale, size=(samples, self.n))
        res = self.closure_residual(qs)
        if res > closure_tol:
            raise ValueError(
                f"chart {self.name!r} fails commutation closure "
                f"(residual {res:.3e} > {closure_tol:.1e})"
            )
        if self.dA is not None:
            da = self.d_coefficients(qs)
            da_fd = _fd_jacobian(self.coefficients, qs)
            err = np.max(np.abs(da - da_fd)) / (1.0 + np.max(np.abs(da)))
            if err > fd_rel_tol:
                raise ValueError(
                    f"chart {self.name!r}: analytic dA disagrees with finite "
                    f"differences (relative error {err:.3e} > {fd_rel_tol:.1e})"
                )


def _fd_jacobian(fn: Callable[[np.ndarray], np.ndarray], q: np.ndarray) -> np.ndarray:
    """Central differences of fn(q) along the last axis of q, appended as a new axis."""
    q = np.asarray(q, dtype=float)
    n = q.shape[-1]
    h = FD_STEP_SCALE * (1.0 + float(np.max(np.abs(q))))
    cols = []
    for j in range(n):
        dq = np.zeros(n)
        dq[j] = h
        cols.append((fn(q + dq) - fn(q - dq)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def action_field(chart: ActionChart, u, q) -> np.ndarray:
    """Infinitesimal generator v^i = A_a^i(q) u^a."""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != chart.alg.dim:
        raise ValueError(f"u has dimension {u.shape[-1]}, expected {chart.alg.dim}")
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != chart.n:
        raise ValueError(f"q has dimension {q.shape[-1]}, expected {chart.n}")
    return np.einsum("...ai,...a->...i", chart.coefficients(q), u)


def momentum_map(chart: ActionChart, state) -> np.ndarray:
    """Cotangent-lift momentum map m_a = p_i A_a^i(q).

    ``state`` is a PhaseState or a packed (..., 2n) array.
    """
    if isinstance(state, PhaseState):
        q, p = state.q, state.p
    else:
        x = np.asarray(state, dtype=float)
        q, p = x[..., : chart.n], x[..., chart.n :]
    if q.shape[-1] != chart.n:
        raise ValueError(f"state chart dimension {q.shape[-1]} != {chart.n}")
    return np.einsum("...ai,...i->...a", chart.coefficients(q), p)


def canonical_poisson(f: ScalarField, g: ScalarField, state: PhaseState) -> float:
    """{f, g} = df/dq^k dg/dp_k - dg/dq^k df/dp_k at the given state."""
    return CanonicalBracket(state.n)(f, g, state.packed())


def hamiltonian_vector_field(h: ScalarField, state: PhaseState):
    """Components (dh/dp, -dh/dq) of the Hamiltonian vector field of h."""
    grad = h.gradient(state.packed())
    n = state.n
    return grad[n:].copy(), -grad[:n]


def equivariance_residual(chart: ActionChart, state: PhaseState) -> np.ndarray:
    """R_ab = {m_a, m_b}(s) + c_ab^g m_g(s), with analytic chart derivatives.

    Identically zero for a valid chart; a corrupted A shows up as a large
    entry.
    """
    q, p = state.q, state.p
    a = chart.coefficients(q)
    da = chart.d_coefficients(q)
    m = np.einsum("ai,i->a", a, p)
    # {m_a, m_b} = (p_j dA_a^j/dq^k) A_b^k - (p_j dA_b^j/dq^k) A_a^k
    grad_q_m = np.einsum("j,ajk->ak", p, da)
    pb = np.einsum("ak,bk->ab", grad_q_m, a)
    pb = pb - pb.T
    return pb + np.einsum("abg,g->ab", chart.alg.c, m)


def _so3_chart() -> ActionChart:
    eps = builtin("so3").c  # Levi-Civita

    def A(q):
        return np.einsum("aij,...j->...ai", eps, q)

    def dA(q):
        return np.broadcast_to(eps, q.shape[:-1] + (3, 3, 3)).copy()

    def d2A(q):
        return np.zeros(q.shape[:-1] + (3, 3, 3, 3))

    # Sign pinned so [A_a, A_b] = +c_ab^g A_g with c = Levi-Civita; then
    # A_a(q) = q x e_a and the momentum map is m = p x q.
    return ActionChart(alg=builtin("so3"), n=3, A=A, dA=dA, d2A=d2A, name="so3_on_r3")


def _translation_chart(n: int) -> ActionChart:
    eye = np.eye(n)

    def A(q):
        return np.broadcast_to(eye, q.shape[:-1] + (n, n)).copy()

    def dA(q):
        return np.zeros(q.shape[:-1] + (n, n, n))

    def d2A(q):
        return np.zeros(q.shape[:-1] + (n, n, n, n))

    return ActionChart(alg=abelian(n), n=n, A=A, dA=dA, d2A=d2A,
                       name="rn_translation")


def _h3_chart() -> ActionChart:
    # A_1 = d/dx, A_2 = d/dy + x d/dz, A_3 = d/dz; closure gives c_12^3 = 1.
    def A(q):
        out = np.zeros(q.shape[:-1] + (3, 3))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0
        out[..., 1, 2] = q[..., 0]
        out[..., 2, 2] = 1.0
        return out

    def dA(q):
        out = np.zeros(q.shape[:-1] + (3, 3, 3))
        out[..., 1, 2, 0] = 1.0
        return out

    def d2A(q):
        return np.zeros(q.shape[:-1] + (3, 3, 3, 3))

    return ActionChart(alg=builtin("h3"), n=3, A=A, dA=dA, d2A=d2A, name="h3_on_r3")


_CHART_REGISTRY: dict[str, Callable[[], ActionChart]] = {
    "so3_on_r3": _so3_chart,
    "rn_translation": _translation_chart,
    "h3_on_r3": _h3_chart,
}


def builtin_chart(name: str, n: int = 3) -> ActionChart:
    """Built-in charts: "so3_on_r3", "rn_translation" (dimension n), "h3_on_r3"."""
    try:
        make = _CHART_REGISTRY[name]
    except KeyError:
        raise LookupError(
            f"unknown chart {name!r}; available: {sorted(_CHART_REGISTRY)}"
        ) from None
    if name == "rn_translation":
        return make(n)
    return make()


def register_chart(name: str, factory: Callable[[], ActionChart]) -> None:
    """Register a user chart factory under a name (overwrites existing)."""
    _CHART_REGISTRY[name] = factory


def chart_names() -> list[str]:
    return sorted(_CHART_REGISTRY)
