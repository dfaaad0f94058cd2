"""Cascade connection and cascade decomposition of multiparametric systems.

The cascade alpha2 * alpha1 routes the output of alpha1 into alpha2 through
an intermediate space V (equal to alpha1's output and alpha2's input space);
because the systems carry a unit delay, V becomes part of the state space:
X = X2 (+) V (+) X1, and the transfer functions multiply,
theta = theta2 * theta1.

The inverse direction: a conservative system together with a subspace X2
that (i) is invariant for every A_k and (ii) has a z-independent defect
space V_z = (zG)*(X2 (+) Y) (-) X2 splits into two conservative subsystems
whose cascade reproduces the original system up to a unitary state-space
basis change.

Condition (ii) is decided by an exact rank criterion rather than by
quantifying over torus points: with M := sum_k range(G_k* on X2 (+) Y),
every (zG)*(X2 (+) Y) is contained in M, and for a conservative system each
has dimension dim X2 + dim Y; so the spaces coincide for every z exactly
when dim M = dim X2 + dim Y.  A torus-sampling oracle in the test suite
cross-checks this reduction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .subspaces import (
    Subspace,
    is_invariant,
    orthogonal_complement,
    orthonormal_basis,
    subspace_sum,
)
from .systems import (
    MultiSystem,
    is_closely_connected,
    pencil_blocks,
    require_conservative,
    transfer_eval,
    validate,
)


class CascadeError(ValueError):
    """Raised on incompatible spaces or failed decomposition conditions."""


class TheoremViolationError(AssertionError):
    """A property that holds by theorem failed numerically; treated as a bug."""


def cascade(alpha2: MultiSystem, alpha1: MultiSystem) -> MultiSystem:
    """Cascade connection alpha2 * alpha1 with state space X2 (+) V (+) X1."""
    validate(alpha2)
    validate(alpha1)
    if alpha2.n_params != alpha1.n_params:
        raise CascadeError(
            f"n_params mismatch: {alpha2.n_params} vs {alpha1.n_params}"
        )
    if alpha2.dim_u != alpha1.dim_y:
        raise CascadeError(
            f"intermediate space mismatch: alpha2 input dim {alpha2.dim_u}, "
            f"alpha1 output dim {alpha1.dim_y}"
        )
    n = alpha2.n_params
    x2, dv, x1 = alpha2.dim_x, alpha2.dim_u, alpha1.dim_x
    du, dy = alpha1.dim_u, alpha2.dim_y
    a, b, c, d = [], [], [], []
    for k in range(n):
        a.append(np.block([
            [alpha2.a[k], alpha2.b[k], np.zeros((x2, x1))],
            [np.zeros((dv, x2 + dv)), alpha1.c[k]],
            [np.zeros((x1, x2 + dv)), alpha1.a[k]],
        ]))
        b.append(np.vstack([
            np.zeros((x2, du)),
            alpha1.d[k],
            alpha1.b[k],
        ]))
        c.append(np.hstack([alpha2.c[k], alpha2.d[k], np.zeros((dy, x1))]))
        d.append(np.zeros((dy, du)))
    return MultiSystem(a=a, b=b, c=c, d=d)


def check_condition_i(s: MultiSystem, x2: Subspace, tol: float = 1e-8) -> bool:
    """X2 invariant for every A_k."""
    validate(s)
    if x2.ambient_dim != s.dim_x:
        raise CascadeError("x2 ambient dimension does not match dim_x")
    return all(is_invariant(s.a[k], x2, tol) for k in range(s.n_params))


@dataclass(frozen=True)
class ConditionIIResult:
    holds: bool
    intermediate: Optional[Subspace]  # V = M (-) X2, in C^(dim_x + dim_u)
    dim_m: int
    dim_expected: int


def check_condition_ii(s: MultiSystem, x2: Subspace,
                       tol: float = 1e-9) -> ConditionIIResult:
    """Decide whether the defect spaces V_z coincide for all torus points z.

    Rank criterion: M = sum_k G_k*(X2 (+) Y) must have dimension
    dim X2 + dim Y; V = M (-) X2 is then returned (as a subspace of the
    pencil's domain X (+) U).
    """
    require_conservative(s)
    if not check_condition_i(s, x2):
        raise CascadeError("condition (i) fails: x2 is not invariant for all A_k")
    dx, du, dy = s.dim_x, s.dim_u, s.dim_y
    target = np.zeros((dx + dy, x2.dim + dy), dtype=complex)
    target[:dx, :x2.dim] = x2.basis
    target[dx:, x2.dim:] = np.eye(dy)
    gs = pencil_blocks(s)
    cols = np.hstack([g.conj().T @ target for g in gs])
    m_space = orthonormal_basis(cols, tol)
    expected = x2.dim + dy
    if m_space.dim != expected:
        return ConditionIIResult(False, None, m_space.dim, expected)
    x2_embedded = Subspace(
        dx + du, np.vstack([x2.basis, np.zeros((du, x2.dim), dtype=complex)])
    )
    if x2_embedded.containment_residual(m_space) > 1e-8:
        return ConditionIIResult(False, None, m_space.dim, expected)
    v = orthogonal_complement(x2_embedded, within=m_space, tol=tol)
    return ConditionIIResult(True, v, m_space.dim, expected)


@dataclass(frozen=True)
class CascadeDecomposition:
    alpha2: MultiSystem
    alpha1: MultiSystem
    intermediate: Subspace  # V inside the original state space
    x2: Subspace
    x1: Subspace

    @property
    def state_basis(self) -> np.ndarray:
        """Unitary [Q_x2 Q_v Q_x1] relating the cascade layout to the source."""
        return np.hstack([self.x2.basis, self.intermediate.basis, self.x1.basis])


def decompose(s: MultiSystem, x2: Subspace, tol: float = 1e-9) -> CascadeDecomposition:
    """Split a conservative system along an invariant subspace X2.

    Requires conditions (i) and (ii); additionally the defect space V must
    be supported in the state space (automatic for the systems produced by
    cascades, where D = 0), otherwise the three-block state layout does not
    exist and a CascadeError is raised.
    """
    require_conservative(s)
    cond2 = check_condition_ii(s, x2, tol)
    if not cond2.holds:
        raise CascadeError(
            f"condition (ii) fails: dim M = {cond2.dim_m}, expected {cond2.dim_expected}"
        )
    dx, du = s.dim_x, s.dim_u
    v_raw = cond2.intermediate
    spill = np.linalg.norm(v_raw.basis[dx:, :]) if v_raw.dim else 0.0
    if spill > 1e-8:
        raise CascadeError(
            f"intermediate space is not contained in the state space "
            f"(input-component norm {spill:.3e})"
        )
    v = orthonormal_basis(v_raw.basis[:dx, :], tol)
    x2pv = subspace_sum(x2, v, tol)
    eye = np.eye(dx, dtype=complex)
    x1 = orthonormal_basis(eye - x2pv.projector(), tol)

    q2, qv, q1 = x2.basis, v.basis, x1.basis
    n = s.n_params
    alpha2 = MultiSystem(
        a=[q2.conj().T @ s.a[k] @ q2 for k in range(n)],
        b=[q2.conj().T @ s.a[k] @ qv for k in range(n)],
        c=[s.c[k] @ q2 for k in range(n)],
        d=[s.c[k] @ qv for k in range(n)],
    )
    alpha1 = MultiSystem(
        a=[q1.conj().T @ s.a[k] @ q1 for k in range(n)],
        b=[q1.conj().T @ s.b[k] for k in range(n)],
        c=[qv.conj().T @ s.a[k] @ q1 for k in range(n)],
        d=[qv.conj().T @ s.b[k] for k in range(n)],
    )
    return CascadeDecomposition(alpha2=alpha2, alpha1=alpha1,
                                intermediate=v, x2=x2, x1=x1)


def sample_polydisk(n_params: int, count: int, radius: float,
                    seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    moduli = radius * rng.uniform(0.1, 1.0, size=(count, n_params))
    phases = np.exp(2j * np.pi * rng.uniform(size=(count, n_params)))
    return moduli * phases


def verify_factor_tf(alpha: MultiSystem, alpha2: MultiSystem, alpha1: MultiSystem,
                     n_points: int = 20, radius: float = 0.5,
                     seed: int = 0) -> float:
    """Max over sampled z of ||theta_alpha(z) - theta_alpha2(z) theta_alpha1(z)||."""
    validate(alpha)
    worst = 0.0
    for z in sample_polydisk(alpha.n_params, n_points, radius, seed):
        lhs = transfer_eval(alpha, z)
        rhs = transfer_eval(alpha2, z) @ transfer_eval(alpha1, z)
        worst = max(worst, float(np.linalg.norm(lhs - rhs, 2)))
    return worst


@dataclass(frozen=True)
class CloseConnectednessReport:
    cascade_closely_connected: bool
    alpha2_closely_connected: bool
    alpha1_closely_connected: bool


def closcon_property_check(alpha2: MultiSystem,
                           alpha1: MultiSystem) -> CloseConnectednessReport:
    """Executable form of: cascade closely connected => both factors are.

    An implication violation would falsify the underlying theorem and is
    raised as a TheoremViolationError.
    """
    require_conservative(alpha2)
    require_conservative(alpha1)
    combined = cascade(alpha2, alpha1)
    report = CloseConnectednessReport(
        cascade_closely_connected=is_closely_connected(combined),
        alpha2_closely_connected=is_closely_connected(alpha2),
        alpha1_closely_connected=is_closely_connected(alpha1),
    )
    if report.cascade_closely_connected and not (
        report.alpha2_closely_connected and report.alpha1_closely_connected
    ):
        raise TheoremViolationError(
            f"cascade is closely connected but a factor is not: {report}"
        )
    return report


__all__ = [
    "CascadeError", "TheoremViolationError", "ConditionIIResult",
    "CascadeDecomposition", "CloseConnectednessReport",
    "cascade", "check_condition_i", "check_condition_ii", "decompose",
    "verify_factor_tf", "closcon_property_check", "sample_polydisk",
]
