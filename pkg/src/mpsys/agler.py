"""Property-based falsifier for Agler-Schur class membership.

Membership quantifies over all commuting contraction tuples on all
separable Hilbert spaces, which cannot be enumerated; this module is
therefore strictly one-sided.  It evaluates theta(rT) on generated finite
commuting contraction tuples and samples polydisk sup-norms: a norm above
1 is a certified NON-membership witness, a pass is only a failure to
falsify.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .systems import (
    MultiSystem,
    PolyGerm,
    combine,
    germ_eval,
    haar_unitary,
    sample_torus,
    transfer_eval,
    validate,
)


class TupleInvariantError(ValueError):
    """Raised when a tuple fails the commutation or contraction invariants."""


class DivergentTailError(ArithmeticError):
    """Raised when the geometric tail bound of the series does not converge."""


STRATEGIES = ("jointly-diagonal", "power-family", "scalar")


@dataclass(frozen=True, eq=False)
class ContractionTuple:
    """N pairwise-commuting contractions of a common finite dimension."""

    mats: tuple

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=complex) for m in self.mats)
        object.__setattr__(self, "mats", mats)
        validate_tuple(self)

    @property
    def n_params(self) -> int:
        return len(self.mats)

    @property
    def dim(self) -> int:
        return self.mats[0].shape[0]


def validate_tuple(t: ContractionTuple, commutator_tol: float = 1e-10,
                   norm_tol: float = 1e-12) -> None:
    mats = t.mats
    if not mats:
        raise TupleInvariantError("empty tuple")
    dim = mats[0].shape[0]
    for k, m in enumerate(mats):
        if m.shape != (dim, dim):
            raise TupleInvariantError(f"component {k} has shape {m.shape}")
        norm = np.linalg.norm(m, 2)
        if norm > 1.0 + norm_tol:
            raise TupleInvariantError(f"component {k} has norm {norm:.12f} > 1")
    for j in range(len(mats)):
        for k in range(j + 1, len(mats)):
            comm = np.linalg.norm(mats[j] @ mats[k] - mats[k] @ mats[j], 2)
            if comm > commutator_tol:
                raise TupleInvariantError(
                    f"components {j}, {k} do not commute (residual {comm:.3e})"
                )


def gen_commuting_contractions(n_params: int, dim: int, strategy: str,
                               seed: int = 0) -> ContractionTuple:
    """Generate a commuting contraction tuple.

    Strategies: 'jointly-diagonal' (a common random unitary conjugating
    random diagonal contractions -- a commuting normal family),
    'power-family' (T_k = T^k for one random, generally non-normal,
    contraction T), 'scalar' (T_k = c_k I with |c_k| <= 1).  Moduli are
    drawn with mass on |c| = 1: class violations concentrate near the
    distinguished boundary, so strictly interior draws are weak witnesses.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = np.random.default_rng(seed)

    def moduli(count):
        interior = rng.uniform(0.0, 1.0, count)
        return np.where(rng.uniform(size=count) < 0.5, 1.0, interior)

    if strategy == "jointly-diagonal":
        q = haar_unitary(dim, rng)
        mats = []
        for _ in range(n_params):
            diag = moduli(dim) * np.exp(2j * np.pi * rng.uniform(size=dim))
            mats.append(q @ np.diag(diag) @ q.conj().T)
        return ContractionTuple(tuple(mats))
    if strategy == "power-family":
        z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        base = z / (np.linalg.norm(z, 2) * (1.0 + 1e-12))
        mats = []
        power = np.eye(dim, dtype=complex)
        for _ in range(n_params):
            power = power @ base
            mats.append(power)
        return ContractionTuple(tuple(mats))
    if strategy == "scalar":
        coeffs = moduli(n_params) * np.exp(2j * np.pi * rng.uniform(size=n_params))
        return ContractionTuple(tuple(c * np.eye(dim, dtype=complex) for c in coeffs))
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


@dataclass(frozen=True)
class TupleEvaluation:
    value: np.ndarray
    truncation_degree: int
    tail_bound: float


def _sampled_pencil_norm(blocks, n_params: int, samples: int = 32) -> float:
    worst = 0.0
    for zeta in sample_torus(n_params, samples, seed=1):
        worst = max(worst, float(np.linalg.norm(combine(blocks, zeta), 2)))
    return worst


def eval_at_tuple(f: Union[PolyGerm, MultiSystem], t: ContractionTuple,
                  r: float, tol: float = 1e-10) -> TupleEvaluation:
    """Evaluate theta(rT) = sum_t coeff_t (x) (rT)^t.

    Germ input: exact finite sum over the stored coefficients.  System
    input: Neumann-series summation of the tensorized pencil, truncated
    once the geometric tail bound (built from sampled torus norms of the
    coefficient blocks) drops below ``tol``; the bound is reported.
    """
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie in (0, 1)")
    validate_tuple(t)
    if isinstance(f, PolyGerm):
        if f.n_params != t.n_params:
            raise ValueError("n_params mismatch between germ and tuple")
        h = t.dim
        value = np.zeros((f.dim_y * h, f.dim_u * h), dtype=complex)
        for idx, coeff in f.coeffs.items():
            factor = np.eye(h, dtype=complex) * (r ** sum(idx))
            for k, power in enumerate(idx):
                for _ in range(power):
                    factor = factor @ t.mats[k]
            value += np.kron(coeff, factor)
        return TupleEvaluation(value, f.max_total_degree(), 0.0)

    s = f
    validate(s)
    if s.n_params != t.n_params:
        raise ValueError("n_params mismatch between system and tuple")
    h = t.dim
    scaled = [r * m for m in t.mats]
    d_t = sum(np.kron(s.d[k], scaled[k]) for k in range(s.n_params))
    if s.dim_x == 0:
        return TupleEvaluation(d_t, 1, 0.0)

    growth = _sampled_pencil_norm(s.a, s.n_params)
    c_norm = _sampled_pencil_norm(s.c, s.n_params)
    b_norm = _sampled_pencil_norm(s.b, s.n_params)
    ratio = r * growth
    if ratio >= 1.0 - 1e-12:
        raise DivergentTailError(
            f"tail bound diverges: r * max_z||zA|| = {ratio:.6f} >= 1"
        )
    # smallest degree with  c b r^2 ratio^(deg-1) / (1 - ratio) < tol
    degree = 2
    def tail(deg):
        return c_norm * b_norm * r * r * ratio ** (deg - 1) / (1.0 - ratio)
    while tail(degree) >= tol and degree < 100000:
        degree += 1

    a_t = sum(np.kron(s.a[k], scaled[k]) for k in range(s.n_params))
    b_t = sum(np.kron(s.b[k], scaled[k]) for k in range(s.n_params))
    c_t = sum(np.kron(s.c[k], scaled[k]) for k in range(s.n_params))
    value = d_t.copy()
    state = b_t
    for _ in range(2, degree + 1):
        value += c_t @ state
        state = a_t @ state
    return TupleEvaluation(value, degree, float(tail(degree)))


@dataclass(frozen=True, eq=False)
class AglerReport:
    max_norm: float
    trials: int
    witness: Optional[ContractionTuple] = None
    witness_norm: float = 0.0

    @property
    def falsified(self) -> bool:
        return self.witness is not None


def agler_test(f: Union[PolyGerm, MultiSystem], trials: int = 50,
               r: float = 0.9, tol: float = 1e-8, seed: int = 0) -> AglerReport:
    """Try to falsify ||theta(rT)|| <= 1 over generated tuples.

    A norm above 1 + tol is re-checked at a tighter truncation tolerance
    before being reported as a certified witness.
    """
    n_params = f.n_params
    dims = itertools.cycle((1, 2, 3))
    strategies = itertools.cycle(STRATEGIES)
    max_norm = 0.0
    for trial in range(trials):
        tup = gen_commuting_contractions(
            n_params, next(dims), next(strategies), seed=seed * 10007 + trial
        )
        norm = float(np.linalg.norm(eval_at_tuple(f, tup, r).value, 2))
        max_norm = max(max_norm, norm)
        if norm > 1.0 + tol:
            confirm = float(np.linalg.norm(eval_at_tuple(f, tup, r, tol=1e-13).value, 2))
            if confirm > 1.0 + tol:
                return AglerReport(max_norm=max_norm, trials=trial + 1,
                                   witness=tup, witness_norm=confirm)
    return AglerReport(max_norm=max_norm, trials=trials)


def polydisk_sup_norm(f: Union[PolyGerm, MultiSystem], grid_per_axis: int = 12,
                      radius: float = 0.95) -> float:
    """Max of ||theta(z)|| over a torus-scaled grid {radius * zeta}.

    For N = 1 this samples the Schur-norm criterion directly; for N >= 2
    a small value is only a necessary condition for class membership.
    """
    if not 0.0 < radius < 1.0:
        raise ValueError("radius must lie in (0, 1)")
    n = f.n_params
    angles = 2.0 * np.pi * np.arange(grid_per_axis) / grid_per_axis
    ring = radius * np.exp(1j * angles)
    evaluate = germ_eval if isinstance(f, PolyGerm) else transfer_eval
    worst = 0.0
    for z in itertools.product(ring, repeat=n):
        worst = max(worst, float(np.linalg.norm(evaluate(f, np.array(z)), 2)))
    return worst


__all__ = [
    "ContractionTuple", "TupleEvaluation", "AglerReport",
    "TupleInvariantError", "DivergentTailError", "STRATEGIES",
    "validate_tuple", "gen_commuting_contractions", "eval_at_tuple",
    "agler_test", "polydisk_sup_norm",
]
