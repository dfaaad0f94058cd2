"""Subspace arithmetic over finite-dimensional complex spaces.

Subspaces are stored by orthonormal bases (columns of a complex matrix),
which keeps dimensions explicit and composition cheap; orthoprojectors are
derived on demand.  All rank decisions go through a single relative
threshold, ``DEFAULT_RANK_TOL``.

Every constructor canonicalizes the returned basis (pivoted QR of the
orthoprojector plus a phase fix), so equal subspaces get the same basis
up to rounding regardless of the path that produced them.  In particular
the span of coordinate vectors comes back as those coordinate vectors, in
index order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

DEFAULT_RANK_TOL = 1e-9


class SubspaceError(ValueError):
    """Raised on invalid subspace inputs (shape, finiteness, containment)."""


def _as_complex(m) -> np.ndarray:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise SubspaceError(f"expected a 2-d array, got shape {m.shape}")
    if not np.all(np.isfinite(m.real)) or not np.all(np.isfinite(m.imag)):
        raise SubspaceError("matrix has non-finite entries")
    return m


def _canonicalize(q: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of range(q), q already orthonormal."""
    r = q.shape[1]
    if r == 0:
        return q
    proj = q @ q.conj().T
    qf, _, _ = scipy.linalg.qr(proj, pivoting=True)
    basis = np.array(qf[:, :r])
    peaks = np.empty(r, dtype=int)
    for j in range(r):
        i = int(np.argmax(np.abs(basis[:, j])))
        peaks[j] = i
        pivot = basis[i, j]
        if abs(pivot) > 0:
            basis[:, j] *= np.conj(pivot) / abs(pivot)
    # pivoted QR breaks ties between equal pivots arbitrarily; ordering the
    # columns by the row of their largest entry restores index order for
    # coordinate-block subspaces
    return basis[:, np.argsort(peaks, kind="stable")]


@dataclass(frozen=True, eq=False)
class Subspace:
    """A subspace of C^ambient_dim given by an orthonormal basis.

    ``basis`` has shape (ambient_dim, dim) with orthonormal columns.
    """

    ambient_dim: int
    basis: np.ndarray

    def __post_init__(self):
        basis = _as_complex(self.basis)
        if basis.shape[0] != self.ambient_dim:
            raise SubspaceError(
                f"basis has {basis.shape[0]} rows, ambient dimension is {self.ambient_dim}"
            )
        if basis.shape[1] > self.ambient_dim:
            raise SubspaceError("more basis vectors than ambient dimension")
        gram_err = np.linalg.norm(
            basis.conj().T @ basis - np.eye(basis.shape[1]), 2
        ) if basis.shape[1] else 0.0
        if gram_err > 1e-10:
            raise SubspaceError(f"basis not orthonormal (Gram residual {gram_err:.3e})")
        object.__setattr__(self, "basis", basis)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.conj().T

    def contains_vector(self, v, tol: float = 1e-8) -> bool:
        v = np.asarray(v, dtype=complex).reshape(self.ambient_dim)
        resid = np.linalg.norm(v - self.basis @ (self.basis.conj().T @ v))
        return resid <= tol * (1.0 + np.linalg.norm(v))

    def containment_residual(self, other: "Subspace") -> float:
        """How far self is from being a subspace of other."""
        if other.ambient_dim != self.ambient_dim:
            raise SubspaceError("ambient dimension mismatch")
        if self.dim == 0:
            return 0.0
        return float(np.linalg.norm(self.basis - other.projector() @ self.basis, 2))


def zero_space(ambient_dim: int) -> Subspace:
    return Subspace(ambient_dim, np.zeros((ambient_dim, 0), dtype=complex))


def whole_space(ambient_dim: int) -> Subspace:
    return Subspace(ambient_dim, np.eye(ambient_dim, dtype=complex))


def orthonormal_basis(vectors, tol: float = DEFAULT_RANK_TOL) -> Subspace:
    """Orthonormal basis of the column span of ``vectors``.

    Columns whose residual against the retained span falls below
    ``tol * (1 + leading singular value)`` are discarded.
    """
    m = _as_complex(vectors)
    ambient = m.shape[0]
    if m.shape[1] == 0 or not np.any(m):
        return zero_space(ambient)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    cutoff = tol * (1.0 + s[0])
    rank = int(np.count_nonzero(s > cutoff))
    return Subspace(ambient, _canonicalize(u[:, :rank]))


def subspace_sum(a: Subspace, b: Subspace, tol: float = DEFAULT_RANK_TOL) -> Subspace:
    """Span of the union of two subspaces (the finite-dimensional closed span)."""
    if a.ambient_dim != b.ambient_dim:
        raise SubspaceError("ambient dimension mismatch")
    return orthonormal_basis(np.hstack([a.basis, b.basis]), tol)


def subspace_intersection(a: Subspace, b: Subspace, tol: float = DEFAULT_RANK_TOL) -> Subspace:
    """Intersection, computed as the complement of the sum of complements."""
    if a.ambient_dim != b.ambient_dim:
        raise SubspaceError("ambient dimension mismatch")
    n = a.ambient_dim
    eye = np.eye(n, dtype=complex)
    comp_a = orthonormal_basis(eye - a.projector(), tol)
    comp_b = orthonormal_basis(eye - b.projector(), tol)
    comp_sum = subspace_sum(comp_a, comp_b, tol)
    return orthonormal_basis(eye - comp_sum.projector(), tol)


def orthogonal_complement(a: Subspace, within: Subspace,
                          tol: float = DEFAULT_RANK_TOL,
                          containment_tol: float = 1e-8) -> Subspace:
    """Complement of ``a`` inside ``within``, i.e. b with a + b = within, a _|_ b."""
    if a.ambient_dim != within.ambient_dim:
        raise SubspaceError("ambient dimension mismatch")
    resid = a.containment_residual(within)
    if resid > containment_tol:
        raise SubspaceError(
            f"subspace not contained in the enclosing space (residual {resid:.3e})"
        )
    n = a.ambient_dim
    reduced = (np.eye(n, dtype=complex) - a.projector()) @ within.basis
    return orthonormal_basis(reduced, tol)


def is_invariant(m, s: Subspace, tol: float = 1e-8) -> bool:
    """True iff m maps s into s: ||(I - P_s) m basis_s|| < tol."""
    m = _as_complex(m)
    if m.shape != (s.ambient_dim, s.ambient_dim):
        raise SubspaceError(
            f"operator shape {m.shape} does not match ambient dimension {s.ambient_dim}"
        )
    if s.dim == 0:
        return True
    image = m @ s.basis
    resid = np.linalg.norm(image - s.projector() @ image, 2)
    return resid < tol


def image_subspace(m, s: Subspace, tol: float = DEFAULT_RANK_TOL) -> Subspace:
    """Orthonormal basis of m * s."""
    m = _as_complex(m)
    if m.shape[1] != s.ambient_dim:
        raise SubspaceError(
            f"operator has {m.shape[1]} columns, ambient dimension is {s.ambient_dim}"
        )
    return orthonormal_basis(m @ s.basis, tol)


def projector_distance(a: Subspace, b: Subspace) -> float:
    if a.ambient_dim != b.ambient_dim:
        raise SubspaceError("ambient dimension mismatch")
    return float(np.linalg.norm(a.projector() - b.projector(), 2))
