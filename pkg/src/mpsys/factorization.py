"""Factorization of operator-valued functions with a multiple zero at 0.

Two families of results are implemented:

* Left/right factorizations theta(z) = zL^(1) ... zL^(m) phi(z) (and the
  mirror image with the tail on the left), where m is the multiplicity of
  the zero of theta at the origin, each zL^(j) is a homogeneous linear
  operator pencil, and phi(0) != 0.  The inductive construction unrolls to
  the closed-form chain (C, A, ..., A, [A B]) with tail
  col((I - zA)^(-1) zB, I_U).
* The Agler-class factorization theta = theta2 * theta1 with both factors
  transfer functions of conservative systems, obtained by searching for a
  common invariant subspace of the A-tuple of a closely-connected
  conservative realization that admits a cascade decomposition.  This is a
  bounded heuristic search: a miss is inconclusive, never a proof of
  non-existence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cascade import (
    CascadeError,
    cascade,
    check_condition_i,
    check_condition_ii,
    decompose,
    verify_factor_tf,
)
from .subspaces import (
    Subspace,
    orthonormal_basis,
    projector_distance,
    subspace_intersection,
    subspace_sum,
    zero_space,
)
from .systems import (
    MultiSystem,
    PolyGerm,
    SystemShapeError,
    adjoint,
    closely_connected_subspace,
    combine,
    compress_to,
    require_conservative,
    taylor_coefficients,
    transfer_eval,
    validate,
)


class MultiplicityError(ValueError):
    """Raised when the declared multiplicity is inconsistent with the system."""


@dataclass(frozen=True, eq=False)
class LinearFactorChain:
    """A product z F^(1) ... z F^(m) of homogeneous linear operator pencils.

    ``factors[j]`` is an N-tuple of matrices mapping C^spaces[j+1] into
    C^spaces[j] (0-based), so the evaluated product maps C^spaces[-1] into
    C^spaces[0].
    """

    spaces: tuple
    factors: tuple

    def __post_init__(self):
        factors = tuple(
            tuple(np.asarray(m, dtype=complex) for m in tup) for tup in self.factors
        )
        spaces = tuple(int(x) for x in self.spaces)
        if len(factors) < 1:
            raise SystemShapeError("a factor chain needs at least one factor")
        if len(spaces) != len(factors) + 1:
            raise SystemShapeError("spaces list must have one more entry than factors")
        for j, tup in enumerate(factors):
            for k, m in enumerate(tup):
                if m.shape != (spaces[j], spaces[j + 1]):
                    raise SystemShapeError(
                        f"factor {j + 1}, component {k + 1} has shape {m.shape}, "
                        f"expected {(spaces[j], spaces[j + 1])}"
                    )
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "spaces", spaces)

    @property
    def length(self) -> int:
        return len(self.factors)

    @property
    def n_params(self) -> int:
        return len(self.factors[0])


def chain_eval(chain: LinearFactorChain, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex).reshape(-1)
    out = np.eye(chain.spaces[0], dtype=complex)
    for tup in chain.factors:
        out = out @ combine(tup, z)
    return out


def chain_to_germ(chain: LinearFactorChain, drop_tol: float = 1e-14) -> PolyGerm:
    """Coefficientwise expansion of the chain product (all terms homogeneous)."""
    n = chain.n_params
    frontier = {(0,) * n: np.eye(chain.spaces[0], dtype=complex)}
    for tup in chain.factors:
        new = {}
        for t, m in frontier.items():
            for k in range(n):
                t_k = list(t)
                t_k[k] += 1
                t_k = tuple(t_k)
                prod = m @ tup[k]
                if t_k in new:
                    new[t_k] = new[t_k] + prod
                else:
                    new[t_k] = prod
        frontier = new
    kept = {t: m for t, m in frontier.items() if np.linalg.norm(m) > drop_tol}
    return PolyGerm(n, chain.spaces[-1], chain.spaces[0], kept)


@dataclass(frozen=True, eq=False)
class TailFunction:
    """phi(z) = constant + theta_vanishing(z), with phi(0) = constant != 0."""

    constant: np.ndarray
    vanishing_part: MultiSystem

    def __post_init__(self):
        constant = np.asarray(self.constant, dtype=complex)
        if np.linalg.norm(constant) == 0:
            raise MultiplicityError("tail function must not vanish at the origin")
        object.__setattr__(self, "constant", constant)


def tail_eval(tail: TailFunction, z) -> np.ndarray:
    return tail.constant + transfer_eval(tail.vanishing_part, z)


def multiplicity(s: MultiSystem, degree_cap: int) -> Optional[int]:
    """Least total degree of a nonzero Taylor term, or None if all vanish
    up to the cap (which does not prove theta = 0 for N > 1)."""
    if degree_cap < 1:
        raise ValueError("degree_cap must be >= 1")
    germ = taylor_coefficients(s, degree_cap)
    return germ.min_total_degree()


def default_degree_cap(s: MultiSystem) -> int:
    return s.dim_x + 2


def _check_multiplicity(s: MultiSystem, m: int, tol: float = 1e-10) -> None:
    if m < 1:
        raise MultiplicityError("multiplicity must be >= 1")
    if m > 1:
        worst_d = max(np.linalg.norm(dk) for dk in s.d)
        if worst_d > tol:
            raise MultiplicityError(
                f"multiplicity {m} > 1 requires D = 0, but ||D|| = {worst_d:.3e}"
            )
        low = taylor_coefficients(s, m - 1)
        if low.coeffs:
            raise MultiplicityError(
                f"a Taylor term of degree {low.min_total_degree()} is nonzero, "
                f"contradicting multiplicity {m}"
            )


def _resolvent_tail(s: MultiSystem) -> TailFunction:
    """phi(z) = col((I - zA)^(-1) zB, I_U), realized without re-expansion."""
    dx, du = s.dim_x, s.dim_u
    constant = np.vstack([np.zeros((dx, du)), np.eye(du)]).astype(complex)
    vanishing = MultiSystem(
        a=list(s.a),
        b=list(s.b),
        c=[np.vstack([s.a[k], np.zeros((du, dx))]) for k in range(s.n_params)],
        d=[np.vstack([s.b[k], np.zeros((du, du))]) for k in range(s.n_params)],
    )
    return TailFunction(constant=constant, vanishing_part=vanishing)


def factor_left(s: MultiSystem, m: int) -> tuple:
    """theta(z) = zL^(1) ... zL^(m) phi(z) with phi(0) != 0.

    For m = 1 the single factor is [C_k D_k]; for m > 1 the chain is
    (C, A, ..., A, [A B]).  The tail is col((I - zA)^(-1) zB, I_U) in both
    cases.
    """
    validate(s)
    _check_multiplicity(s, m)
    dx, du, dy = s.dim_x, s.dim_u, s.dim_y
    n = s.n_params
    tail = _resolvent_tail(s)
    if m == 1:
        factors = (tuple(np.hstack([s.c[k], s.d[k]]) for k in range(n)),)
        spaces = (dy, dx + du)
        return LinearFactorChain(spaces=spaces, factors=factors), tail
    factors = [tuple(s.c)]
    factors.extend(tuple(s.a) for _ in range(m - 2))
    factors.append(tuple(np.hstack([s.a[k], s.b[k]]) for k in range(n)))
    spaces = (dy,) + (dx,) * (m - 1) + (dx + du,)
    return LinearFactorChain(spaces=spaces, factors=tuple(factors)), tail


def factor_right(s: MultiSystem, m: int) -> tuple:
    """theta(z) = psi(z) zR^(m) ... zR^(1) with psi(0) != 0.

    Obtained by factoring the adjoint system on the left and taking
    adjoints, using theta_adj(z) = theta(conj(z))*.  Returns (psi, chain);
    the chain is stored so that chain_eval gives zR^(m) ... zR^(1), i.e.
    theta(z) = tail_eval(psi, z) @ chain_eval(chain, z).
    """
    adj = adjoint(s)
    left_chain, left_tail = factor_left(adj, m)
    psi = TailFunction(
        constant=left_tail.constant.conj().T,
        vanishing_part=adjoint(left_tail.vanishing_part),
    )
    factors = tuple(
        tuple(m_.conj().T for m_ in left_chain.factors[j])
        for j in reversed(range(left_chain.length))
    )
    spaces = tuple(reversed(left_chain.spaces))
    return psi, LinearFactorChain(spaces=spaces, factors=factors)


def factor_homogeneous(s: MultiSystem, m: int,
                       check_cap: Optional[int] = None) -> LinearFactorChain:
    """Factor a homogeneous polynomial transfer function into linear pencils.

    For m = 1 the chain is (D_k); for m > 1 it is (C, A, ..., A, B), so the
    product equals zC (zA)^(m-2) zB coefficientwise.  Homogeneity is
    verified up to ``check_cap`` (default m + 2).  When the input system is
    conservative each factor pencil is contractive on the torus.
    """
    validate(s)
    if m < 1:
        raise MultiplicityError("degree must be >= 1")
    cap = check_cap if check_cap is not None else m + 2
    germ = taylor_coefficients(s, max(cap, m))
    if not germ.coeffs:
        raise MultiplicityError("transfer function vanishes up to the checked degree")
    off_degree = [t for t in germ.coeffs if sum(t) != m]
    if off_degree:
        raise MultiplicityError(
            f"transfer function is not homogeneous of degree {m}: "
            f"nonzero term at {off_degree[0]}"
        )
    dx, du, dy = s.dim_x, s.dim_u, s.dim_y
    if m == 1:
        return LinearFactorChain(spaces=(dy, du), factors=(tuple(s.d),))
    _check_multiplicity(s, m)
    factors = [tuple(s.c)]
    factors.extend(tuple(s.a) for _ in range(m - 2))
    factors.append(tuple(s.b))
    spaces = (dy,) + (dx,) * (m - 1) + (du,)
    return LinearFactorChain(spaces=spaces, factors=tuple(factors))


def _krylov_closure(s: MultiSystem, seed_cols: np.ndarray,
                    tol: float = 1e-9) -> Subspace:
    space = orthonormal_basis(seed_cols, tol)
    for _ in range(s.dim_x + 1):
        cols = [space.basis]
        for ak in s.a:
            cols.append(ak @ space.basis)
        grown = orthonormal_basis(np.hstack(cols), tol)
        if grown.dim == space.dim:
            return grown
        space = grown
    return space


def invariant_subspace_candidates(s: MultiSystem, budget: int = 64,
                                  seed: int = 0) -> list:
    """Candidate common invariant subspaces of the A-tuple.

    Always includes {0}; adds Krylov closures (under all A_k) of random
    vectors and of eigenvectors of random linear combinations of the A_k,
    then closes the collection under pairwise sums (sums of invariant
    subspaces are invariant), deduplicating by projector distance.  Sorted
    by dimension, capped at ``budget`` entries.
    """
    validate(s)
    dx = s.dim_x
    candidates = [zero_space(dx)]
    if dx == 0 or budget <= 1:
        return candidates[:max(budget, 1)]
    rng = np.random.default_rng(seed)

    def add(space: Subspace) -> bool:
        for known in candidates:
            if known.dim == space.dim and projector_distance(known, space) < 1e-8:
                return False
        candidates.append(space)
        return True

    n = s.n_params
    for _ in range(3):
        coeff = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        combo = combine(s.a, coeff)
        _, vecs = np.linalg.eig(combo)
        for i in range(vecs.shape[1]):
            if len(candidates) >= budget:
                break
            add(_krylov_closure(s, vecs[:, i:i + 1]))
    for _ in range(4):
        if len(candidates) >= budget:
            break
        v = rng.standard_normal((dx, 1)) + 1j * rng.standard_normal((dx, 1))
        add(_krylov_closure(s, v))

    # close under pairwise sums within budget
    changed = True
    while changed and len(candidates) < budget:
        changed = False
        snapshot = list(candidates)
        for i in range(len(snapshot)):
            for j in range(i + 1, len(snapshot)):
                if len(candidates) >= budget:
                    break
                merged = subspace_sum(snapshot[i], snapshot[j])
                if merged.dim in (snapshot[i].dim, snapshot[j].dim):
                    continue
                if add(merged):
                    changed = True
            if len(candidates) >= budget:
                break

    kept = [c for c in candidates if check_condition_i(s, c)]
    kept.sort(key=lambda c: c.dim)
    return kept[:budget]


@dataclass(frozen=True, eq=False)
class FactorizationOutcome:
    theta2: MultiSystem
    theta1: MultiSystem
    intermediate_dim: int
    witness_x2: Subspace
    residual: float


def solve_problem2(s: MultiSystem, budget: int = 64, seed: int = 0,
                   tol: float = 1e-9) -> Optional[FactorizationOutcome]:
    """Search for theta = theta2 * theta1 with both factors conservative.

    Restricts to the closely-connected part, then tries invariant-subspace
    candidates against the cascade-decomposition conditions.  Returns None
    if the budget is exhausted; that outcome is inconclusive, not a proof
    that no factorization exists.
    """
    require_conservative(s)
    m = multiplicity(s, default_degree_cap(s))
    if m is None or m <= 1:
        raise MultiplicityError(
            f"solve_problem2 requires multiplicity > 1, found {m}"
        )
    acc = compress_to(s, closely_connected_subspace(s))
    for candidate in invariant_subspace_candidates(acc, budget, seed):
        cond2 = check_condition_ii(acc, candidate)
        if not cond2.holds:
            continue
        try:
            dec = decompose(acc, candidate)
        except CascadeError:
            continue
        residual = verify_factor_tf(acc, dec.alpha2, dec.alpha1)
        if residual >= tol:
            continue
        return FactorizationOutcome(
            theta2=dec.alpha2,
            theta1=dec.alpha1,
            intermediate_dim=dec.intermediate.dim,
            witness_x2=candidate,
            residual=residual,
        )
    return None


def from_factorization(alpha2: MultiSystem, alpha1: MultiSystem) -> tuple:
    """Rebuild the closely-connected cascade and its candidate subspaces.

    Returns (alpha_cc, p_closure_candidate, intersection_candidate): the
    closely-connected restriction of cascade(alpha2, alpha1) together with
    the two subspaces P_{X_cc} X2 and X_cc intersect X2 (both expressed in
    the coordinates of alpha_cc); each satisfies the cascade-decomposition
    conditions (i) and (ii).
    """
    require_conservative(alpha2)
    require_conservative(alpha1)
    combined = cascade(alpha2, alpha1)
    cc = closely_connected_subspace(combined)
    acc = compress_to(combined, cc)
    dx2 = alpha2.dim_x
    x2_block = np.zeros((combined.dim_x, dx2), dtype=complex)
    x2_block[:dx2, :dx2] = np.eye(dx2)
    p_closure = orthonormal_basis(cc.basis.conj().T @ x2_block)
    inter = subspace_intersection(cc, Subspace(combined.dim_x, x2_block))
    inter_cc = orthonormal_basis(cc.basis.conj().T @ inter.basis)
    return acc, p_closure, inter_cc


__all__ = [
    "MultiplicityError", "LinearFactorChain", "TailFunction",
    "FactorizationOutcome", "chain_eval", "chain_to_germ", "tail_eval",
    "multiplicity", "default_degree_cap", "factor_left", "factor_right",
    "factor_homogeneous", "invariant_subspace_candidates", "solve_problem2",
    "from_factorization",
]
