"""Clifford normals, the boundary inner product and the boundary Hilbert space."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .green_model import AlgebraElement, AlgebraModel, CheckReport, GreenOperatorModel, graded_commutator
from .numkernel import InnerProduct, StructuralError, adjoint_wrt, opnorm, orthonormal_basis

TOL = 1e-10
PAIRING_MIN = 1e-8


@dataclass(frozen=True, eq=False)
class CliffordNormal:
    n: np.ndarray
    ndom: np.ndarray | None = None  # G-orthonormal basis; None = whole space

    def domain(self, model: GreenOperatorModel) -> np.ndarray:
        if self.ndom is None:
            return model.inner.from_ortho(np.eye(model.N, dtype=complex))
        return self.ndom


@dataclass(frozen=True, eq=False)
class BoundarySpace:
    dim: int
    gram_n: np.ndarray
    nd: np.ndarray
    grading_b: np.ndarray
    rep: dict = field(default_factory=dict)
    graded: bool = True

    @property
    def inner(self) -> InnerProduct:
        return InnerProduct(self.gram_n)

    @property
    def definite(self) -> bool:
        return bool(np.linalg.eigvalsh(self.gram_n)[0] > 0)

    @property
    def metric(self) -> InnerProduct:
        """gram_n when positive, otherwise its absolute value (for faulted normals)."""
        if self.definite:
            return self.inner
        w, V = np.linalg.eigh(self.gram_n)
        return InnerProduct((V * np.abs(w)) @ V.conj().T)

    def parts(self) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal bases of the even and odd boundary subspaces."""
        ip = self.metric
        I = np.eye(self.dim)
        return (orthonormal_basis(0.5 * (I + self.grading_b), ip),
                orthonormal_basis(0.5 * (I - self.grading_b), ip))


def _rel(x: float, scale: float) -> float:
    return float(x / scale) if scale > 0 else float(x)


def boundary_normal(model: GreenOperatorModel, normal: CliffordNormal) -> np.ndarray:
    """n restricted to boundary coordinates, R n R^+."""
    return model.R @ normal.n @ np.linalg.pinv(model.R)


def check_normal(model: GreenOperatorModel, normal: CliffordNormal, algebra: AlgebraModel | None = None) -> list[CheckReport]:
    n = np.asarray(normal.n, dtype=complex)
    if n.shape != (model.N, model.N):
        raise StructuralError("normal has wrong shape")
    G, D, R, ip = model.G, model.D, model.R, model.inner
    Y = normal.domain(model)
    Y0 = model.kernel_R()
    Ye = orthonormal_basis(Y)  # coordinate-level statements use a Euclidean basis
    nn = max(opnorm(n, ip), 1e-300)
    Rn = max(np.linalg.norm(R, 2), 1e-300)
    Dn = max(opnorm(D, ip), 1e-300)
    b = model.b
    out = []

    # 1) n preserves ker R and ndom reaches every boundary coordinate
    pres = _rel(np.linalg.norm(R @ n @ orthonormal_basis(Y0), 2), Rn * nn)
    rank = int(np.linalg.matrix_rank(R @ Ye, tol=1e-10 * Rn)) if b else 0
    out.append(CheckReport.make("normal_1_domain", pres + (b - rank), TOL, 0.0,
                                preserve_residual=pres, boundary_rank=rank, b=b))
    # 2) anti-self-adjoint
    out.append(CheckReport.make("normal_2_anti_self_adjoint",
                                _rel(opnorm(adjoint_wrt(n, ip, ip) + n, ip), nn), TOL, 0.0))
    # 3) [D, n] symmetric on ndom
    C = D @ n - n @ D
    S = Y.conj().T @ G @ C @ Y
    out.append(CheckReport.make("normal_3_commutator_symmetric",
                                _rel(np.linalg.norm(S - S.conj().T, 2), Dn * nn), TOL, 0.0))
    # 4) [n, a] maps ndom into ker R
    worst, who = 0.0, None
    for e in (algebra or []):
        c = graded_commutator(n, e.matrix, e.degree, 1, model.graded)
        r = _rel(np.linalg.norm(R @ c @ Ye, 2), Rn * nn * max(opnorm(e.matrix, ip), 1e-300))
        if r >= worst:
            worst, who = r, e.name
    out.append(CheckReport.make("normal_4_algebra_commutators", worst, TOL, 0.0, worst_element=who))
    # 5) (n^2 + 1) maps ndom into ker R
    n2 = n @ n + np.eye(model.N)
    out.append(CheckReport.make("normal_5_square", _rel(np.linalg.norm(R @ n2 @ Ye, 2), Rn), TOL, 0.0))
    # 6) positivity of <xi, D n xi> - <D xi, n xi>
    Q = Y.conj().T @ (G @ D @ n - D.conj().T @ G @ n) @ Y
    H = 0.5 * (Q + Q.conj().T)
    w = np.linalg.eigvalsh(H)
    scale = max(np.max(np.abs(w)), 1e-300)
    out.append(CheckReport.make("normal_6_positive", -w[0], TOL * scale, 0.0, smallest_eigenvalue=float(w[0])))
    # 7) injectivity of the pairing map on boundary classes
    sigma, defined = pairing_injectivity(model, normal)
    out.append(CheckReport.at_least("normal_7_pairing_injective", sigma, PAIRING_MIN, well_defined_residual=defined))
    return out


def pairing_injectivity(model: GreenOperatorModel, normal: CliffordNormal) -> tuple[float, float]:
    """Smallest singular value of the map [w + n z] -> (xi -> w(w, n xi) + w(z, xi))."""
    b = model.b
    if b == 0:
        return np.inf, 0.0
    Om = model.omega()
    nd = boundary_normal(model, normal)
    Z = orthonormal_basis(model.R @ normal.domain(model))
    K = np.hstack([(Om @ nd @ Z).conj().T, (Om @ Z).conj().T])
    E = np.hstack([np.eye(b), nd])
    Ep = np.linalg.pinv(E)
    s = np.linalg.svd(K @ Ep, compute_uv=False)
    # the map is defined on the quotient only if ker E lies in ker K
    kerE = np.vstack([-nd, np.eye(b)])
    defined = float(np.linalg.norm(K @ kerE, 2) / max(np.linalg.norm(K, 2), 1e-300))
    return float(s[-1] / max(np.linalg.norm(Om, 2), 1e-300)), defined


def boundary_gram(model: GreenOperatorModel, normal: CliffordNormal, algebra: AlgebraModel | None = None,
                  strict: bool = True) -> BoundarySpace:
    nd = boundary_normal(model, normal)
    g = model.omega() @ nd
    herm = np.linalg.norm(g - g.conj().T, 2) / max(np.linalg.norm(g, 2), 1e-300)
    if herm > 1e-10:
        raise StructuralError(f"boundary form is not Hermitian ({herm:.2e}); normal condition 3 fails", herm)
    g = 0.5 * (g + g.conj().T)
    w = np.linalg.eigvalsh(g)
    if strict and w[0] <= TOL * max(abs(w[-1]), 1e-300):
        raise StructuralError(f"boundary form is not positive definite (min eig {w[0]:.2e}); normal condition 6 fails", w[0])
    if model.graded:
        grading = model.boundary_grading()
    else:
        grading = -1j * nd
    rep = {}
    if algebra is not None:
        for e in algebra:
            rep[e.name] = boundary_rep(model, normal, e)
    return BoundarySpace(model.b, g, nd, grading, rep, model.graded)


def boundary_rep(model: GreenOperatorModel, normal: CliffordNormal, a: AlgebraElement) -> np.ndarray:
    if a.ideal:
        return np.zeros((model.b, model.b), dtype=complex)
    return model.R @ a.matrix @ np.linalg.pinv(model.R)


def boundary_space_checks(model: GreenOperatorModel, normal: CliffordNormal, algebra: AlgebraModel | None = None) -> list[CheckReport]:
    """Unitarity of n_d, tameness of the pairing, *-homomorphism and commutant properties."""
    bs = boundary_gram(model, normal, algebra)
    ip = bs.inner
    b = bs.dim
    nd = bs.nd
    out = []
    g = bs.gram_n
    u = np.linalg.norm(nd.conj().T @ g @ nd - g, 2) / np.linalg.norm(g, 2)
    out.append(CheckReport.make("nd_unitary", u, TOL, 0.0))
    out.append(CheckReport.make("nd_square", np.linalg.norm(nd @ nd + np.eye(b), 2), TOL, 0.0))
    s = np.linalg.svd(g, compute_uv=False)
    out.append(CheckReport.at_least("pairing_tame", s[-1] / s[0], 1e-12, left_kernel=0, right_kernel=0))
    if algebra is not None and len(algebra):
        lips = algebra.lip_norms(model)
        worst_comm, worst_mult, worst_star, C = 0.0, 0.0, 0.0, 0.0
        els = algebra.non_ideal()
        for e in els:
            r = bs.rep[e.name]
            c = graded_commutator(nd, r, e.degree, 1, model.graded)
            worst_comm = max(worst_comm, opnorm(c, ip))
            C = max(C, opnorm(r, ip) / max(lips[e.name], 1e-300))
            rs = adjoint_wrt(r, ip, ip)
            es = adjoint_wrt(e.matrix, model.inner, model.inner)
            worst_star = max(worst_star, opnorm(rs - model.R @ es @ np.linalg.pinv(model.R), ip))
            for f in els:
                prod = model.R @ e.matrix @ f.matrix @ np.linalg.pinv(model.R)
                worst_mult = max(worst_mult, opnorm(prod - r @ bs.rep[f.name], ip))
        out.append(CheckReport.make("rep_commutes_with_nd", worst_comm, TOL, 0.0))
        out.append(CheckReport.make("rep_multiplicative", worst_mult, TOL, 0.0))
        out.append(CheckReport.make("rep_star_compatible", worst_star, TOL, 0.0))
        out.append(CheckReport.make("rep_bounded_by_lip", 0.0, 0.0, 0.0, constant=C))
    return out
