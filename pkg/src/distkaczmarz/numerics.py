"""Dense complex linear algebra shared by the solvers and their analysis.

Vectors are 1-d ``numpy`` arrays, matrices 2-d arrays; everything is
promoted to ``complex128``.  The inner product conjugates its *second*
argument, so ``inner(x, a) == a* x`` matches the row-action convention
``S_v x = a_v* x`` used by the solvers.

All functions are pure and safe to call concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericalFailureError, PreconditionError

DEFAULT_RANK_TOL = 1e-10
DEFAULT_ORTHO_TOL = 1e-10


def as_vector(x) -> np.ndarray:
    v = np.asarray(x, dtype=np.complex128)
    if v.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {v.shape}")
    if not (np.all(np.isfinite(v.real)) and np.all(np.isfinite(v.imag))):
        raise ValueError("vector contains non-finite entries")
    return v


def as_matrix(m, square: bool = False) -> np.ndarray:
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got shape {a.shape}")
    if square and a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if a.size and not (np.all(np.isfinite(a.real)) and np.all(np.isfinite(a.imag))):
        raise ValueError("matrix contains non-finite entries")
    return a


def inner(x, y) -> complex:
    """Inner product that conjugates the second argument."""
    return complex(np.vdot(np.asarray(y, dtype=np.complex128), np.asarray(x, dtype=np.complex128)))


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (with multiplicity, sorted by decreasing modulus) and their max modulus."""

    eigenvalues: np.ndarray
    radius: float


def eigenvalues(m) -> Spectrum:
    """All eigenvalues of a square matrix, with multiplicity.

    Raises :class:`NumericalFailureError` if the underlying QR iteration
    fails to converge within the backend's sweep limit.
    """
    a = as_matrix(m, square=True)
    if a.shape[0] < 1:
        raise DimensionError("matrix must have dimension >= 1")
    try:
        vals = np.linalg.eigvals(a)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - backend dependent
        raise NumericalFailureError(f"eigenvalue iteration did not converge: {exc}") from exc
    order = np.lexsort((vals.imag, vals.real, -np.abs(vals)))
    vals = vals[order]
    return Spectrum(eigenvalues=vals, radius=float(np.max(np.abs(vals))))


def spectral_radius(m) -> float:
    return eigenvalues(m).radius


def gram(vectors) -> np.ndarray:
    """Gram matrix G[i, j] = <x_i, x_j> of a nonempty family of equal-length vectors."""
    vecs = [as_vector(v) for v in vectors]
    if not vecs:
        raise DimensionError("gram requires at least one vector")
    dim = vecs[0].shape[0]
    for v in vecs:
        if v.shape[0] != dim:
            raise DimensionError("gram vectors must share their dimension")
    m = np.vstack(vecs)
    return m @ m.conj().T


def min_norm_solution(a, b, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Least-squares solution of ``a x = b`` with minimal Euclidean norm.

    Computed from the Hermitian eigendecomposition of ``a a*``; eigenvalues
    below ``rank_tol`` times the largest are treated as zero.  The result
    lies in the row space of ``a``; a zero matrix yields the zero vector.
    """
    mat = as_matrix(a)
    rhs = as_vector(b)
    if mat.shape[0] != rhs.shape[0]:
        raise DimensionError(
            f"matrix has {mat.shape[0]} rows but right-hand side has {rhs.shape[0]} entries"
        )
    g = mat @ mat.conj().T
    vals, vecs = np.linalg.eigh(g)
    if vals.size == 0 or vals[-1] <= 0.0:
        return np.zeros(mat.shape[1], dtype=np.complex128)
    keep = vals > rank_tol * vals[-1]
    if not np.any(keep):
        return np.zeros(mat.shape[1], dtype=np.complex128)
    u = vecs[:, keep]
    coeff = (u.conj().T @ rhs) / vals[keep]
    return mat.conj().T @ (u @ coeff)


def orthonormal_basis(vectors, tol: float = DEFAULT_ORTHO_TOL) -> list[np.ndarray]:
    """Orthonormal spanning set of ``span(vectors)`` via modified Gram-Schmidt.

    Vectors whose residual after orthogonalization falls below ``tol`` times
    the largest input norm are dropped.  A second orthogonalization pass
    keeps pairwise inner products within ~1e-14 of the Kronecker delta.
    """
    vecs = [as_vector(v) for v in vectors]
    if not vecs:
        return []
    scale = max(float(np.linalg.norm(v)) for v in vecs)
    if scale == 0.0:
        return []
    basis: list[np.ndarray] = []
    for v in vecs:
        r = v.copy()
        for _ in range(2):  # re-orthogonalize for numerical safety
            for q in basis:
                r = r - np.vdot(q, r) * q
        norm = float(np.linalg.norm(r))
        if norm > tol * scale:
            basis.append(r / norm)
    return basis


def orthonormal_complement(vectors, dim: int, tol: float = DEFAULT_ORTHO_TOL) -> list[np.ndarray]:
    """Orthonormal basis of the orthogonal complement of ``span(vectors)`` in C^dim."""
    base = orthonormal_basis(vectors, tol=tol)
    complement: list[np.ndarray] = []
    for i in range(dim):
        e = np.zeros(dim, dtype=np.complex128)
        e[i] = 1.0
        r = e
        for _ in range(2):
            for q in base:
                r = r - np.vdot(q, r) * q
            for q in complement:
                r = r - np.vdot(q, r) * q
        norm = float(np.linalg.norm(r))
        if norm > tol:
            complement.append(r / norm)
    return complement


def _check_orthonormal(basis: list[np.ndarray], tol: float = 1e-10) -> None:
    g = gram(basis)
    if float(np.max(np.abs(g - np.eye(len(basis))))) > tol:
        raise PreconditionError("basis is not orthonormal within tolerance")


def operator_norm_on_span(m, basis) -> float:
    """Largest value of ``|m x|`` over unit vectors x in the span of an orthonormal basis."""
    a = as_matrix(m, square=True)
    vecs = [as_vector(v) for v in basis]
    if not vecs:
        return 0.0
    for v in vecs:
        if v.shape[0] != a.shape[1]:
            raise DimensionError("basis dimension does not match the matrix")
    _check_orthonormal(vecs)
    q = np.column_stack(vecs)
    return float(np.linalg.norm(a @ q, 2))


def restrict_to_span(m, basis) -> np.ndarray:
    """Matrix of ``m`` in the coordinates of an orthonormal basis of an invariant subspace."""
    a = as_matrix(m, square=True)
    vecs = [as_vector(v) for v in basis]
    if not vecs:
        return np.zeros((0, 0), dtype=np.complex128)
    _check_orthonormal(vecs)
    q = np.column_stack(vecs)
    return q.conj().T @ a @ q


def spectral_radius_on_span(m, basis) -> float:
    """Spectral radius of ``m`` restricted to the span of an orthonormal basis."""
    vecs = list(basis)
    if not vecs:
        return 0.0
    return spectral_radius(restrict_to_span(m, vecs))
