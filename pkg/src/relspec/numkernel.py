"""Dense linear algebra with explicit (weighted) inner products."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg as sla

TAU_STRUCT = 1e-10
KERNEL_RTOL = 1e-8
GROUP_RTOL = 1e-10


class StructuralError(ValueError):
    """Raised when an input violates a structural precondition (symmetry, shape, ...)."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


def as_matrix(a) -> np.ndarray:
    m = np.atleast_2d(np.asarray(a, dtype=complex))
    if m.ndim != 2 or 0 in m.shape:
        raise StructuralError(f"expected a non-empty 2d array, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise StructuralError("matrix has non-finite entries")
    return m


@dataclass(frozen=True, eq=False)
class InnerProduct:
    """<x, y> = x^H G y for a Hermitian positive definite Gram matrix G."""

    gram: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = as_matrix(self.gram)
        if g.shape[0] != g.shape[1]:
            raise StructuralError("gram matrix must be square")
        asym = np.linalg.norm(g - g.conj().T) / max(np.linalg.norm(g), 1e-300)
        if asym > TAU_STRUCT:
            raise StructuralError("gram matrix is not Hermitian", asym)
        g = 0.5 * (g + g.conj().T)
        try:
            L = np.linalg.cholesky(g)
        except np.linalg.LinAlgError as exc:
            raise StructuralError("gram matrix is not positive definite") from exc
        object.__setattr__(self, "gram", g)
        object.__setattr__(self, "_chol", L)

    @classmethod
    def euclidean(cls, n: int) -> "InnerProduct":
        return cls(np.eye(n))

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    def dot(self, x, y) -> complex:
        return complex(np.vdot(x, self.gram @ y))

    def norm(self, x) -> float:
        return float(np.sqrt(max(self.dot(x, x).real, 0.0)))

    # coordinates in which the inner product is Euclidean: y = L^H x
    def to_ortho(self, x: np.ndarray) -> np.ndarray:
        return self._chol.conj().T @ x

    def from_ortho(self, y: np.ndarray) -> np.ndarray:
        return sla.solve_triangular(self._chol.conj().T, y, lower=False)

    def similar(self, M: np.ndarray) -> np.ndarray:
        """L^H M L^{-H}: the matrix of M in orthonormal coordinates."""
        X = sla.solve_triangular(self._chol, np.asarray(M).conj().T, lower=True).conj().T
        return self._chol.conj().T @ X

    def unsimilar(self, B: np.ndarray) -> np.ndarray:
        """Inverse of similar()."""
        return self.from_ortho(B @ self._chol.conj().T)


@dataclass(frozen=True, eq=False)
class GradedSpace:
    inner: InnerProduct
    grading: np.ndarray

    def __post_init__(self):
        g = as_matrix(self.grading)
        n = self.inner.dim
        if g.shape != (n, n):
            raise StructuralError("grading has wrong shape")
        r = np.linalg.norm(g @ g - np.eye(n))
        if r > TAU_STRUCT * n:
            raise StructuralError("grading does not square to one", r)
        sa = opnorm(adjoint_wrt(g, self.inner, self.inner) - g, self.inner)
        if sa > TAU_STRUCT:
            raise StructuralError("grading is not self-adjoint", sa)
        object.__setattr__(self, "grading", g)

    @property
    def dim(self) -> int:
        return self.inner.dim

    def parts(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal bases of the +1 and -1 eigenspaces."""
        n = self.dim
        pp = 0.5 * (np.eye(n) + self.grading)
        pm = 0.5 * (np.eye(n) - self.grading)
        return orthonormal_basis(pp, self.inner), orthonormal_basis(pm, self.inner)


def adjoint_wrt(M, domain_inner: InnerProduct, codomain_inner: InnerProduct) -> np.ndarray:
    """M★ with <Mx, y>_cod = <x, M★ y>_dom, i.e. G_dom^{-1} M^H G_cod."""
    M = np.asarray(M, dtype=complex)
    if M.shape != (codomain_inner.dim, domain_inner.dim):
        raise StructuralError(f"shape {M.shape} incompatible with inner products")
    return sla.cho_solve((domain_inner._chol, True), M.conj().T @ codomain_inner.gram)


def opnorm(M, inner: InnerProduct | None = None, codomain: InnerProduct | None = None) -> float:
    """Operator norm of M between weighted spaces (Euclidean if inner is None)."""
    M = np.asarray(M, dtype=complex)
    if M.size == 0:
        return 0.0
    if inner is None:
        return float(np.linalg.norm(M, 2))
    codomain = codomain or inner
    B = codomain.to_ortho(M)
    B = sla.solve_triangular(inner._chol, B.conj().T, lower=True).conj().T
    return float(np.linalg.norm(B, 2))


def self_adjoint_residual(A, inner: InnerProduct) -> float:
    A = np.asarray(A, dtype=complex)
    scale = max(opnorm(A, inner), 1e-300)
    return opnorm(adjoint_wrt(A, inner, inner) - A, inner) / scale


def _grouped_eigh(B: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    B = 0.5 * (B + B.conj().T)
    w, V = np.linalg.eigh(B)
    scale = max(np.max(np.abs(w)), 1e-300)
    # snap near-degenerate clusters to their mean
    i = 0
    while i < len(w):
        j = i + 1
        while j < len(w) and w[j] - w[j - 1] <= GROUP_RTOL * scale:
            j += 1
        if j - i > 1:
            w[i:j] = w[i:j].mean()
        i = j
    return w, V


def hermitian_funcalc(A, f: Callable[[np.ndarray], np.ndarray], inner: InnerProduct | None = None) -> np.ndarray:
    """f(A) for A self-adjoint with respect to `inner`."""
    A = as_matrix(A)
    n = A.shape[0]
    inner = inner or InnerProduct.euclidean(n)
    r = self_adjoint_residual(A, inner) if np.any(A) else 0.0
    if r > TAU_STRUCT:
        raise StructuralError(f"input not self-adjoint (residual {r:.3e})", r)
    B = inner.similar(A)
    w, V = _grouped_eigh(B)
    fw = np.asarray(f(w), dtype=complex)
    out = (V * fw) @ V.conj().T
    return inner.unsimilar(out)


def pseudoinverse(A, cutoff: float | None = None, inner: InnerProduct | None = None) -> np.ndarray:
    """Inverse on the complement of the numerical kernel, zero on the kernel."""
    A = as_matrix(A)
    n = A.shape[0]
    inner = inner or InnerProduct.euclidean(n)
    B = inner.similar(A)
    w, V = _grouped_eigh(B)
    top = np.max(np.abs(w)) if len(w) else 0.0
    if cutoff is None:
        cutoff = KERNEL_RTOL * top
    elif cutoff == 0:
        cutoff = np.finfo(float).eps * n * top
    inv = np.zeros_like(w, dtype=complex)
    keep = np.abs(w) > cutoff
    inv[keep] = 1.0 / w[keep]
    return inner.unsimilar((V * inv) @ V.conj().T)


def orthonormal_basis(vectors, inner: InnerProduct | None = None, rtol: float = 1e-10) -> np.ndarray:
    """G-orthonormal basis of the column span (pivoted QR, deterministic)."""
    X = np.asarray(vectors, dtype=complex)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    inner = inner or InnerProduct.euclidean(n)
    if X.shape[1] == 0:
        return np.zeros((n, 0), dtype=complex)
    Y = inner.to_ortho(X)
    Q, R, _ = sla.qr(Y, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0:
        return np.zeros((n, 0), dtype=complex)
    r = int(np.sum(d > rtol * d[0]))
    return inner.from_ortho(Q[:, :r])


def orth_projector(basis, inner: InnerProduct | None = None) -> np.ndarray:
    X = np.asarray(basis, dtype=complex)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    inner = inner or InnerProduct.euclidean(n)
    Y = orthonormal_basis(X, inner)
    return Y @ Y.conj().T @ inner.gram


def null_space(M, inner: InnerProduct | None = None, rtol: float = KERNEL_RTOL) -> np.ndarray:
    """G-orthonormal basis of ker M (M acting on the weighted space)."""
    M = np.asarray(M, dtype=complex)
    n = M.shape[1]
    inner = inner or InnerProduct.euclidean(n)
    if M.shape[0] == 0:
        return inner.from_ortho(np.eye(n, dtype=complex))
    A = sla.solve_triangular(inner._chol, M.conj().T, lower=True).conj().T  # M L^{-H}
    _, s, Vh = np.linalg.svd(A)
    top = s[0] if s.size else 0.0
    rank = int(np.sum(s > rtol * top)) if top > 0 else 0
    Z = Vh[rank:].conj().T
    return inner.from_ortho(Z)


def singular_values(M, inner: InnerProduct | None = None, codomain: InnerProduct | None = None) -> np.ndarray:
    M = np.asarray(M, dtype=complex)
    if inner is not None:
        codomain = codomain or inner
        M = codomain.to_ortho(M)
        M = sla.solve_triangular(inner._chol, M.conj().T, lower=True).conj().T
    return np.linalg.svd(M, compute_uv=False)


def subspace_distance(P1: np.ndarray, P2: np.ndarray, inner: InnerProduct | None = None) -> float:
    return opnorm(P1 - P2, inner)


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.eye(1)
    for m in mats:
        out = np.kron(out, m)
    return out
