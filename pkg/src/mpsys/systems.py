"""N-parametric discrete-time linear systems over finite-dimensional spaces.

A system is an N-tuple of block operators (A_k, B_k, C_k, D_k) acting on
state/input/output spaces C^dim_x, C^dim_u, C^dim_y.  Its transfer function

    theta(z) = zD + zC (I - zA)^(-1) zB,        zT := sum_k z_k T_k,

is holomorphic near z = 0 and vanishes there.  The module provides transfer
evaluation, Taylor (multi-index) expansion, conservativity and dissipativity
checks, closely-connected and unitary-part subspace extraction, a generator
of random conservative systems, and a shift realization of polynomial germs.

Conservativity ("the pencil zG is unitary for every z on the unit torus") is
decided by finitely many matrix identities obtained by matching Fourier
coefficients of z -> (zG)*(zG) on the torus:

    sum_k G_k* G_k = I   and   G_j* G_k = 0  (j != k)

plus the adjoint versions.  The torus-sampling oracle in the test suite
validates this reduction independently.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .subspaces import (
    Subspace,
    orthonormal_basis,
    whole_space,
    zero_space,
)


class SystemShapeError(ValueError):
    """Raised when a system's block shapes are inconsistent."""


class ResolventError(ArithmeticError):
    """Raised when I - zA is singular or numerically near-singular."""


class ConservativityError(ValueError):
    """Raised when an operation requires a conservative system and the check fails."""


def _blocks(mats, name: str) -> tuple:
    out = []
    for i, m in enumerate(mats):
        m = np.asarray(m, dtype=complex)
        if m.ndim != 2:
            raise SystemShapeError(f"{name}[{i}] is not a matrix (ndim={m.ndim})")
        if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
            raise SystemShapeError(f"{name}[{i}] has non-finite entries")
        out.append(m)
    return tuple(out)


@dataclass(frozen=True, eq=False)
class MultiSystem:
    """An N-parametric system (N; A, B, C, D; C^dim_x, C^dim_u, C^dim_y).

    Block shapes: A_k is dim_x x dim_x, B_k is dim_x x dim_u, C_k is
    dim_y x dim_x, D_k is dim_y x dim_u.  dim_x = 0 (stateless) is legal;
    the transfer function is then zD.
    """

    a: tuple
    b: tuple
    c: tuple
    d: tuple

    def __post_init__(self):
        object.__setattr__(self, "a", _blocks(self.a, "a"))
        object.__setattr__(self, "b", _blocks(self.b, "b"))
        object.__setattr__(self, "c", _blocks(self.c, "c"))
        object.__setattr__(self, "d", _blocks(self.d, "d"))

    @property
    def n_params(self) -> int:
        return len(self.a)

    @property
    def dim_x(self) -> int:
        return self.a[0].shape[0] if self.a else 0

    @property
    def dim_u(self) -> int:
        return self.d[0].shape[1] if self.d else 0

    @property
    def dim_y(self) -> int:
        return self.d[0].shape[0] if self.d else 0


def validate(s: MultiSystem) -> None:
    """Check all shape invariants, raising a diagnostic naming the offender."""
    n = len(s.a)
    if n < 1:
        raise SystemShapeError("a-list is empty; need n_params >= 1")
    for name, blocks in (("b", s.b), ("c", s.c), ("d", s.d)):
        if len(blocks) != n:
            raise SystemShapeError(
                f"{name}-list has length {len(blocks)}, expected n_params={n}"
            )
    dx, du, dy = s.dim_x, s.dim_u, s.dim_y
    for k in range(n):
        if s.a[k].shape != (dx, dx):
            raise SystemShapeError(f"a[{k}] has shape {s.a[k].shape}, expected {(dx, dx)}")
        if s.b[k].shape != (dx, du):
            raise SystemShapeError(f"b[{k}] has shape {s.b[k].shape}, expected {(dx, du)}")
        if s.c[k].shape != (dy, dx):
            raise SystemShapeError(f"c[{k}] has shape {s.c[k].shape}, expected {(dy, dx)}")
        if s.d[k].shape != (dy, du):
            raise SystemShapeError(f"d[{k}] has shape {s.d[k].shape}, expected {(dy, du)}")


def _check_point(s: MultiSystem, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex).reshape(-1)
    if z.shape[0] != s.n_params:
        raise SystemShapeError(
            f"point has {z.shape[0]} coordinates, system has n_params={s.n_params}"
        )
    return z


def pencil_blocks(s: MultiSystem) -> list:
    """The block matrices G_k = [[A_k, B_k], [C_k, D_k]]."""
    return [
        np.block([[s.a[k], s.b[k]], [s.c[k], s.d[k]]])
        for k in range(s.n_params)
    ]


def pencil(s: MultiSystem, z) -> np.ndarray:
    """zG = sum_k z_k G_k, of shape (dim_x + dim_y) x (dim_x + dim_u)."""
    validate(s)
    z = _check_point(s, z)
    gs = pencil_blocks(s)
    out = np.zeros_like(gs[0])
    for zk, gk in zip(z, gs):
        out += zk * gk
    return out


def combine(blocks, z) -> np.ndarray:
    """sum_k z_k blocks[k] for an N-tuple of equal-shaped matrices."""
    out = np.zeros_like(blocks[0], dtype=complex)
    for zk, mk in zip(z, blocks):
        out = out + zk * mk
    return out


def transfer_eval(s: MultiSystem, z, cond_limit: float = 1e12) -> np.ndarray:
    """theta(z) = zD + zC (I - zA)^(-1) zB; for dim_x = 0 just zD."""
    validate(s)
    z = _check_point(s, z)
    zd = combine(s.d, z)
    if s.dim_x == 0:
        return zd
    za = combine(s.a, z)
    resolvent_arg = np.eye(s.dim_x) - za
    cond = np.linalg.cond(resolvent_arg)
    if not np.isfinite(cond) or cond > cond_limit:
        raise ResolventError(
            f"I - zA is near-singular (condition estimate {cond:.3e})"
        )
    zb = combine(s.b, z)
    zc = combine(s.c, z)
    return zd + zc @ np.linalg.solve(resolvent_arg, zb)


@dataclass(frozen=True, eq=False)
class PolyGerm:
    """Finitely many Taylor coefficients of an operator-valued germ.

    ``coeffs`` maps multi-indices t (tuples of length n_params, entries >= 0)
    to dim_y x dim_u matrices.  Zero coefficients are absent.
    """

    n_params: int
    dim_u: int
    dim_y: int
    coeffs: dict

    def __post_init__(self):
        clean = {}
        for t, m in self.coeffs.items():
            t = tuple(int(x) for x in t)
            if len(t) != self.n_params or any(x < 0 for x in t):
                raise SystemShapeError(f"bad multi-index {t} for n_params={self.n_params}")
            m = np.asarray(m, dtype=complex)
            if m.shape != (self.dim_y, self.dim_u):
                raise SystemShapeError(
                    f"coefficient at {t} has shape {m.shape}, expected {(self.dim_y, self.dim_u)}"
                )
            if np.linalg.norm(m) > 0:
                clean[t] = m
        object.__setattr__(self, "coeffs", clean)

    def min_total_degree(self) -> Optional[int]:
        if not self.coeffs:
            return None
        return min(sum(t) for t in self.coeffs)

    def max_total_degree(self) -> int:
        if not self.coeffs:
            return 0
        return max(sum(t) for t in self.coeffs)


def germ_eval(g: PolyGerm, z) -> np.ndarray:
    z = np.asarray(z, dtype=complex).reshape(-1)
    if z.shape[0] != g.n_params:
        raise SystemShapeError("point length does not match n_params")
    out = np.zeros((g.dim_y, g.dim_u), dtype=complex)
    for t, m in g.coeffs.items():
        out += m * np.prod(z ** np.array(t))
    return out


def taylor_coefficients(s: MultiSystem, max_total_degree: int,
                        drop_tol: float = 1e-12) -> PolyGerm:
    """Taylor coefficients of theta_s up to the given total degree.

    The coefficient at multi-index t with |t| = j >= 2 is the sum of
    C_{k0} A_{k1} ... A_{k_{j-2}} B_{k_{j-1}} over all words with
    abelianization t; D_k contributes at t = e_k.  Words are accumulated
    with prefix products merged by abelianization, so the cost is polynomial
    in the degree rather than N^degree.
    """
    validate(s)
    if max_total_degree < 1:
        raise ValueError("max_total_degree must be >= 1")
    n = s.n_params
    coeffs: dict = defaultdict(lambda: np.zeros((s.dim_y, s.dim_u), dtype=complex))

    def unit(k):
        t = [0] * n
        t[k] = 1
        return tuple(t)

    for k in range(n):
        coeffs[unit(k)] = coeffs[unit(k)] + s.d[k]

    if s.dim_x > 0 and max_total_degree >= 2:
        # frontier: abelianization of (k0, ..., k_i) -> sum of C_{k0} A_{k1} ... A_{k_i}
        frontier = {unit(k): s.c[k].copy() for k in range(n)}
        for _ in range(1, max_total_degree):
            new_frontier: dict = {}
            for t, m in frontier.items():
                for k in range(n):
                    t_k = list(t)
                    t_k[k] += 1
                    t_k = tuple(t_k)
                    coeffs[t_k] = coeffs[t_k] + m @ s.b[k]
                    if sum(t_k) <= max_total_degree - 1:
                        if t_k in new_frontier:
                            new_frontier[t_k] = new_frontier[t_k] + m @ s.a[k]
                        else:
                            new_frontier[t_k] = m @ s.a[k]
            frontier = new_frontier

    kept = {t: m for t, m in coeffs.items() if np.linalg.norm(m) > drop_tol}
    return PolyGerm(n, s.dim_u, s.dim_y, kept)


@dataclass(frozen=True)
class ConservativityReport:
    is_isometric_family: bool
    is_coisometric_family: bool
    worst_residual: float
    failing_pair: Optional[tuple] = None

    @property
    def is_conservative(self) -> bool:
        return self.is_isometric_family and self.is_coisometric_family


def is_conservative(s: MultiSystem, tol: float = 1e-10) -> ConservativityReport:
    """Exact algebraic conservativity test (see module docstring)."""
    validate(s)
    gs = pencil_blocks(s)
    n = s.n_params
    eye_in = np.eye(s.dim_x + s.dim_u)
    eye_out = np.eye(s.dim_x + s.dim_y)

    worst = 0.0
    failing = None
    iso_ok = True
    coiso_ok = True

    iso_sum = sum(g.conj().T @ g for g in gs) - eye_in
    r = np.linalg.norm(iso_sum, 2)
    if r > worst:
        worst, failing = r, None
    if r > tol:
        iso_ok = False
    coiso_sum = sum(g @ g.conj().T for g in gs) - eye_out
    r = np.linalg.norm(coiso_sum, 2)
    if r > worst:
        worst, failing = r, None
    if r > tol:
        coiso_ok = False
    for j in range(n):
        for k in range(n):
            if j == k:
                continue
            r = np.linalg.norm(gs[j].conj().T @ gs[k], 2)
            if r > worst:
                worst, failing = r, (j, k)
            if r > tol:
                iso_ok = False
            r = np.linalg.norm(gs[j] @ gs[k].conj().T, 2)
            if r > worst:
                worst, failing = r, (j, k)
            if r > tol:
                coiso_ok = False
    return ConservativityReport(iso_ok, coiso_ok, worst, failing)


def require_conservative(s: MultiSystem, tol: float = 1e-8) -> ConservativityReport:
    report = is_conservative(s, tol)
    if not report.is_conservative:
        raise ConservativityError(
            f"system is not conservative (worst residual {report.worst_residual:.3e})"
        )
    return report


def sample_torus(n_params: int, count: int, seed: int = 0) -> np.ndarray:
    """``count`` quasi-random points on the N-torus (Halton angles)."""
    halton = qmc.Halton(d=n_params, seed=seed)
    angles = 2.0 * np.pi * halton.random(count)
    return np.exp(1j * angles)


@dataclass(frozen=True)
class DissipativityVerdict:
    passed: bool
    max_norm: float
    witness: Optional[np.ndarray] = None


def is_dissipative_sampled(s: MultiSystem, n_samples: int = 100,
                           tol: float = 1e-10, seed: int = 0) -> DissipativityVerdict:
    """Necessary-condition check: ||zG|| <= 1 + tol at sampled torus points.

    A fail comes with a witness point; a pass is not a proof (the sup over
    the torus is only sampled).
    """
    validate(s)
    gs = pencil_blocks(s)
    worst = 0.0
    witness = None
    for zeta in sample_torus(s.n_params, n_samples, seed):
        norm = np.linalg.norm(combine(gs, zeta), 2)
        if norm > worst:
            worst = norm
            witness = zeta
        if norm > 1.0 + tol:
            return DissipativityVerdict(False, worst, witness)
    return DissipativityVerdict(True, worst, None)


def closely_connected_subspace(s: MultiSystem, tol: float = 1e-9) -> Subspace:
    """Smallest subspace containing all B_k U and C_j* Y invariant under A_k, A_k*."""
    validate(s)
    dx = s.dim_x
    if dx == 0:
        return zero_space(0)
    seed_cols = np.hstack([*(s.b[k] for k in range(s.n_params)),
                           *(s.c[k].conj().T for k in range(s.n_params))])
    space = orthonormal_basis(seed_cols, tol)
    for _ in range(dx + 1):
        cols = [space.basis]
        for k in range(s.n_params):
            cols.append(s.a[k] @ space.basis)
            cols.append(s.a[k].conj().T @ space.basis)
        grown = orthonormal_basis(np.hstack(cols), tol)
        if grown.dim == space.dim:
            return grown
        space = grown
    return space


def is_closely_connected(s: MultiSystem, tol: float = 1e-9) -> bool:
    return closely_connected_subspace(s, tol).dim == s.dim_x


def compress_to(s: MultiSystem, sub: Subspace) -> MultiSystem:
    """Compression of the system onto a state subspace, in the subspace basis."""
    validate(s)
    if sub.ambient_dim != s.dim_x:
        raise SystemShapeError("subspace ambient dimension does not match dim_x")
    q = sub.basis
    qh = q.conj().T
    return MultiSystem(
        a=[qh @ s.a[k] @ q for k in range(s.n_params)],
        b=[qh @ s.b[k] for k in range(s.n_params)],
        c=[s.c[k] @ q for k in range(s.n_params)],
        d=list(s.d),
    )


def restrict_to_cc(s: MultiSystem, tol: float = 1e-8) -> MultiSystem:
    """Restriction of a conservative system to its closely-connected subspace.

    The closely-connected subspace reduces every A_k and carries all of
    B_k U and C_k* Y, so the compression is again conservative and has the
    same transfer function.
    """
    require_conservative(s, tol)
    sub = closely_connected_subspace(s)
    return compress_to(s, sub)


def _restricted_kernel(op: np.ndarray, space: Subspace, tol: float) -> Subspace:
    """{v in space : op v = 0} within tolerance."""
    if space.dim == 0:
        return space
    m = op @ space.basis
    u, sv, vh = np.linalg.svd(m)
    cutoff = tol * (1.0 + (sv[0] if sv.size else 0.0))
    rank = int(np.count_nonzero(sv > cutoff))
    null_cols = vh.conj().T[:, rank:]
    return orthonormal_basis(space.basis @ null_cols)


def unitary_part(s: MultiSystem, tol: float = 1e-8) -> Subspace:
    """Maximal subspace reducing every A_k on which the pencil zA is unitary.

    Iterative refinement: shrink the candidate to the joint kernel of the
    defect operators (I - sum A_k*A_k), (I - sum A_kA_k*), A_j*A_k and
    A_jA_k* (j != k) restricted to it, then to its largest part invariant
    under every A_k and A_k*, until a fixed point.
    """
    validate(s)
    dx = s.dim_x
    if dx == 0:
        return zero_space(0)
    n = s.n_params
    eye = np.eye(dx)
    defects = [eye - sum(a.conj().T @ a for a in s.a),
               eye - sum(a @ a.conj().T for a in s.a)]
    for j in range(n):
        for k in range(n):
            if j != k:
                defects.append(s.a[j].conj().T @ s.a[k])
                defects.append(s.a[j] @ s.a[k].conj().T)

    space = whole_space(dx)
    for _ in range(dx + 1):
        before = space.dim
        for op in defects:
            space = _restricted_kernel(op, space, tol)
        # largest subspace of `space` invariant under every A_k and A_k*
        for _ in range(dx + 1):
            dim_before = space.dim
            if space.dim == 0:
                break
            proj_out = np.eye(dx) - space.projector()
            for k in range(n):
                space = _restricted_kernel(proj_out @ s.a[k], space, tol)
                space = _restricted_kernel(proj_out @ s.a[k].conj().T, space, tol)
                proj_out = np.eye(dx) - space.projector()
            if space.dim == dim_before:
                break
        if space.dim == before:
            break
    return space


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed n x n unitary (QR of a complex Ginibre matrix)."""
    if n == 0:
        return np.zeros((0, 0), dtype=complex)
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    phases = np.diag(r).copy()
    phases = phases / np.abs(phases)
    return q * phases


def random_conservative(n_params: int, dim_x: int, dim_u: int, dim_y: int,
                        seed: int = 0) -> MultiSystem:
    """Random conservative system: G_k = P_k W with W Haar unitary and
    {P_k} a random orthogonal resolution of the identity on the output space.

    Requires dim_u = dim_y so that the pencil is square.
    """
    if dim_u != dim_y:
        raise SystemShapeError("random_conservative requires dim_u == dim_y")
    if n_params < 1:
        raise SystemShapeError("n_params must be >= 1")
    rng = np.random.default_rng(seed)
    n = dim_x + dim_u
    w = haar_unitary(n, rng)
    v = haar_unitary(n, rng)
    if n >= n_params:
        sizes = np.ones(n_params, dtype=int)
        extra = rng.multinomial(n - n_params, np.full(n_params, 1.0 / n_params))
        sizes += extra
    else:
        sizes = rng.multinomial(n, np.full(n_params, 1.0 / n_params))
    a, b, c, d = [], [], [], []
    offset = 0
    for k in range(n_params):
        cols = v[:, offset:offset + sizes[k]]
        offset += sizes[k]
        g = cols @ (cols.conj().T @ w)
        a.append(g[:dim_x, :dim_x])
        b.append(g[:dim_x, dim_x:])
        c.append(g[dim_x:, :dim_x])
        d.append(g[dim_x:, dim_x:])
    return MultiSystem(a=a, b=b, c=c, d=d)


def adjoint(s: MultiSystem) -> MultiSystem:
    """The adjoint system (A*, C*, B*, D*); its transfer is theta(conj(z))*."""
    validate(s)
    return MultiSystem(
        a=[m.conj().T for m in s.a],
        b=[m.conj().T for m in s.c],
        c=[m.conj().T for m in s.b],
        d=[m.conj().T for m in s.d],
    )


def scale_output(s: MultiSystem, factor: complex) -> MultiSystem:
    """System whose transfer function is factor * theta_s."""
    validate(s)
    return MultiSystem(
        a=list(s.a),
        b=list(s.b),
        c=[factor * m for m in s.c],
        d=[factor * m for m in s.d],
    )


def _words_up_to(n: int, max_len: int):
    """All words over {0..n-1} of length 1..max_len, sorted by (length, lex)."""
    words = []
    frontier = [()]
    for _ in range(max_len):
        frontier = [w + (k,) for w in frontier for k in range(n)]
        words.extend(frontier)
    return words


def realize_germ(g: PolyGerm) -> MultiSystem:
    """Word-indexed shift realization of a polynomial germ.

    State space: one copy of the input space per word over {1..N} of length
    1..d-1, d the total degree of the germ.  B_k injects into the word (k),
    A_k prepends the letter k (words of length d-1 are annihilated), and
    C_k reads off the coefficient at abel(k . w), split equally among the
    t!-pattern words with the same abelianization.  The Taylor expansion of
    the result up to degree d reproduces the germ exactly.
    """
    if any(sum(t) == 0 for t in g.coeffs):
        raise SystemShapeError("germ has a coefficient at |t| = 0; germs must vanish at 0")
    n, du, dy = g.n_params, g.dim_u, g.dim_y

    def unit(k):
        t = [0] * n
        t[k] = 1
        return tuple(t)

    d_blocks = [g.coeffs.get(unit(k), np.zeros((dy, du), dtype=complex)) for k in range(n)]
    degree = g.max_total_degree()
    if degree <= 1:
        return MultiSystem(
            a=[np.zeros((0, 0), dtype=complex)] * n,
            b=[np.zeros((0, du), dtype=complex)] * n,
            c=[np.zeros((dy, 0), dtype=complex)] * n,
            d=d_blocks,
        )

    words = _words_up_to(n, degree - 1)
    slot = {w: i for i, w in enumerate(words)}
    dx = du * len(words)

    def rows(word):
        i = slot[word]
        return slice(i * du, (i + 1) * du)

    from math import factorial

    a_blocks = [np.zeros((dx, dx), dtype=complex) for _ in range(n)]
    b_blocks = [np.zeros((dx, du), dtype=complex) for _ in range(n)]
    c_blocks = [np.zeros((dy, dx), dtype=complex) for _ in range(n)]
    eye_u = np.eye(du, dtype=complex)

    for k in range(n):
        b_blocks[k][rows((k,)), :] = eye_u
        for w in words:
            if len(w) <= degree - 2:
                a_blocks[k][rows((k,) + w), rows(w)] = eye_u
            t = [0] * n
            t[k] += 1
            for letter in w:
                t[letter] += 1
            t = tuple(t)
            coeff = g.coeffs.get(t)
            if coeff is not None:
                total = sum(t)
                weight = np.prod([factorial(x) for x in t]) / factorial(total)
                c_blocks[k][:, rows(w)] = coeff * weight

    return MultiSystem(a=a_blocks, b=b_blocks, c=c_blocks, d=d_blocks)


__all__ = [
    "MultiSystem", "PolyGerm", "ConservativityReport", "DissipativityVerdict",
    "SystemShapeError", "ResolventError", "ConservativityError",
    "validate", "pencil", "pencil_blocks", "combine", "transfer_eval",
    "germ_eval", "taylor_coefficients", "is_conservative",
    "require_conservative", "is_dissipative_sampled", "sample_torus",
    "closely_connected_subspace", "is_closely_connected", "compress_to",
    "restrict_to_cc", "unitary_part", "haar_unitary", "random_conservative",
    "adjoint", "scale_output", "realize_germ",
]
