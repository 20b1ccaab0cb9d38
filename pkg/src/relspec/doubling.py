"""Gluing two copies of a model along the boundary into a self-adjoint operator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .extensions import ExtensionSubspace, classify
from .green_model import AlgebraElement, AlgebraModel, CheckReport, GreenOperatorModel
from .normal import CliffordNormal, boundary_normal
from .numkernel import (GradedSpace, InnerProduct, StructuralError, null_space, orth_projector,
                        orthonormal_basis)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class DoubledOperator:
    ambient: GradedSpace
    constraint: np.ndarray  # G-orthonormal basis of S in the ambient space
    action: np.ndarray  # D (+) D on the ambient space
    algebra: AlgebraModel
    parent: GreenOperatorModel
    normal: CliffordNormal

    @property
    def compression(self) -> np.ndarray:
        Y = self.constraint
        return Y.conj().T @ self.ambient.inner.gram @ self.action @ Y

    def spectrum(self) -> np.ndarray:
        C = self.compression
        return np.linalg.eigvalsh(0.5 * (C + C.conj().T))

    def projector(self) -> np.ndarray:
        Y = self.constraint
        return Y @ Y.conj().T @ self.ambient.inner.gram

    def ambient_operator(self) -> np.ndarray:
        """P_S (D + D) P_S as an ambient matrix: independent of the basis of S."""
        P = self.projector()
        return P @ self.action @ P

    def kernel(self, rtol: float = 1e-8) -> np.ndarray:
        C = self.compression
        Z = null_space(C, rtol=rtol)
        return self.constraint @ Z


def clifford_even(model: GreenOperatorModel, normal: CliffordNormal, algebra: AlgebraModel | None = None):
    """Even model from an odd one: tensor with a Clifford generator acting as sigma_x."""
    I2 = np.eye(2)
    space = GradedSpace(InnerProduct(np.kron(I2, model.G)), np.kron(SZ, np.eye(model.N)))
    m = GreenOperatorModel(space, np.kron(SX, model.D), np.kron(I2, model.R),
                           InnerProduct(np.kron(I2, model.bmetric.gram)), np.kron(SX, model.nu),
                           graded=True, labels=tuple(model.labels) * 2, name=f"{model.name}_cl1")
    n = CliffordNormal(np.kron(SX, normal.n))
    alg = None
    if algebra is not None:
        alg = AlgebraModel(tuple(AlgebraElement(e.name, np.kron(I2, e.matrix), e.ideal, e.degree, e.weight)
                                 for e in algebra))
    return m, n, alg


def doubled_model(model: GreenOperatorModel) -> GreenOperatorModel:
    """(H + H, D + D, R + R) with the doubled boundary form; grading gamma + (-gamma)."""
    Z = np.zeros_like(model.D)
    G = sla.block_diag(model.G, model.G)
    gam = sla.block_diag(model.gamma, -model.gamma)
    D = np.block([[model.D, Z], [Z, model.D]])
    R = sla.block_diag(model.R, model.R)
    return GreenOperatorModel(GradedSpace(InnerProduct(G), gam), D, R,
                              InnerProduct(sla.block_diag(model.bmetric.gram, model.bmetric.gram)),
                              sla.block_diag(model.nu, model.nu), graded=model.graded,
                              labels=tuple(model.labels) * 2, name=f"{model.name}_double")


def constraint_map(model: GreenOperatorModel, normal: CliffordNormal) -> np.ndarray:
    """(xi, eta) -> R(eta - n gamma xi)."""
    return np.hstack([-model.R @ normal.n @ model.gamma, model.R])


def double_algebra(model: GreenOperatorModel, algebra: AlgebraModel) -> AlgebraModel:
    """{(a, b) : a - b in the ideal}: diagonal copies plus one-sided ideal elements."""
    Z = np.zeros((model.N, model.N), dtype=complex)
    els = []
    for e in algebra:
        els.append(AlgebraElement(f"{e.name}|{e.name}", sla.block_diag(e.matrix, e.matrix), e.ideal, e.degree, e.weight))
        if e.ideal:
            els.append(AlgebraElement(f"{e.name}|0", np.block([[e.matrix, Z], [Z, Z]]), True, e.degree, e.weight))
            els.append(AlgebraElement(f"0|{e.name}", np.block([[Z, Z], [Z, e.matrix]]), True, e.degree, e.weight))
    return AlgebraModel(tuple(els))


def build_double(model: GreenOperatorModel, normal: CliffordNormal, algebra: AlgebraModel | None = None) -> DoubledOperator:
    if not model.graded:
        raise StructuralError("odd model: apply clifford_even before doubling")
    dm = doubled_model(model)
    C = constraint_map(model, normal)
    S = null_space(C, dm.inner, rtol=1e-12)
    nd = boundary_normal(model, normal)
    alg = double_algebra(model, algebra) if algebra is not None else AlgebraModel(())
    dbl = DoubledOperator(dm.space, S, dm.D, alg, model, normal)
    trace = ExtensionSubspace(orthonormal_basis(dm.R @ S, dm.bmetric))
    kind = classify(dm, trace)
    if kind != "lagrangian":
        g = model.omega() @ nd
        herm = np.linalg.norm(g - g.conj().T)
        unit = np.linalg.norm(nd @ nd + np.eye(model.b))
        cause = "condition 5 (n^2 = -1 at the boundary)" if unit > 1e-10 else (
            "condition 3 (symmetry of [D, n])" if herm > 1e-10 else "conditions 6/7 (boundary pairing)")
        raise StructuralError(f"constraint space is {kind}, not lagrangian: Clifford normal {cause} fails")
    return dbl


def double_checks(dbl: DoubledOperator) -> list[CheckReport]:
    model = dbl.parent
    G = dbl.ambient.inner.gram
    Y = dbl.constraint
    N2 = 2 * model.N
    out = []
    C = dbl.compression
    sym = np.linalg.norm(C - C.conj().T, 2) / max(np.linalg.norm(C, 2), 1e-300)
    out.append(CheckReport.make("double_symmetric", sym, 1e-12, 0.0))
    out.append(CheckReport.make("double_constraint_dim", abs(Y.shape[1] - (N2 - model.b)), 0, 0.0,
                                dim_S=Y.shape[1], ambient=N2, b=model.b))
    # doubled Green form vanishes on S
    A = dbl.action
    F = Y.conj().T @ (A.conj().T @ G - G @ A) @ Y
    out.append(CheckReport.make("double_form_vanishes", np.linalg.norm(F, 2) / max(np.linalg.norm(C, 2), 1e-300), 1e-12, 0.0))
    gam = Y.conj().T @ G @ dbl.ambient.grading @ Y
    out.append(CheckReport.make("double_grading_anticommutes",
                                np.linalg.norm(gam @ C + C @ gam, 2) / max(np.linalg.norm(C, 2), 1e-300), 1e-12, 0.0))
    P = dbl.projector()
    worst = 0.0
    for e in dbl.algebra:
        worst = max(worst, np.linalg.norm((np.eye(N2) - P) @ e.matrix @ P, 2) / max(np.linalg.norm(e.matrix, 2), 1e-300))
    out.append(CheckReport.make("double_algebra_preserves_domain", worst, 1e-10, 0.0))
    out.append(CheckReport.make("double_kernel", kernel_distance(dbl), 1e-10, 0.0))
    return out


def minimal_kernel(model: GreenOperatorModel, rtol: float = 1e-8) -> np.ndarray:
    """G-orthonormal basis of ker D on ker R."""
    Y0 = model.kernel_R()
    DY = model.D @ Y0
    if Y0.shape[1] == 0:
        return Y0
    scale = max(np.linalg.norm(model.inner.to_ortho(DY), 2), 1.0)
    _, s, Vh = np.linalg.svd(model.inner.to_ortho(DY))
    rank = int(np.sum(s > rtol * scale))
    return orthonormal_basis(Y0 @ Vh[rank:].conj().T, model.inner)


def kernel_distance(dbl: DoubledOperator) -> float:
    """|| P_ker(D~) - P_ker(Dmin) (+) P_ker(Dmin) || in the ambient metric."""
    model = dbl.parent
    K = minimal_kernel(model)
    Z = np.zeros((model.N, K.shape[1]), dtype=complex)
    KK = np.block([[K, Z], [Z, K]]) if K.shape[1] else np.zeros((2 * model.N, 0))
    ip = dbl.ambient.inner
    P1 = orth_projector(dbl.kernel(), ip) if dbl.kernel().shape[1] else np.zeros((2 * model.N,) * 2)
    P2 = orth_projector(KK, ip) if KK.shape[1] else np.zeros((2 * model.N,) * 2)
    return float(np.linalg.norm(ip.similar(P1 - P2), 2))


def flip(model: GreenOperatorModel) -> np.ndarray:
    N = model.N
    I = np.eye(N)
    Z = np.zeros((N, N))
    return np.block([[Z, I], [I, Z]]).astype(complex)


def undouble(dbl: DoubledOperator, Zop: np.ndarray, H1: np.ndarray) -> GreenOperatorModel:
    """Model on H1 with minimal domain H1 and S, for an odd involution Z splitting the ambient space."""
    ip = dbl.ambient.inner
    G = ip.gram
    n = G.shape[0]
    A = dbl.action
    if np.linalg.norm(Zop @ Zop - np.eye(n)) > 1e-12:
        raise StructuralError("Z is not an involution")
    if np.linalg.norm(Zop @ dbl.ambient.grading + dbl.ambient.grading @ Zop) > 1e-12:
        raise StructuralError("Z is not odd")
    if np.linalg.norm(Zop @ A - A @ Zop) > 1e-12 * max(np.linalg.norm(A), 1.0):
        raise StructuralError("Z does not commute with the doubled operator")
    Y1 = orthonormal_basis(H1, ip)
    ZY = Zop @ Y1
    cross = np.linalg.norm(Y1.conj().T @ G @ ZY)
    span = np.linalg.matrix_rank(np.hstack([Y1, ZY]), tol=1e-10)
    if cross > 1e-10 or span != n:
        raise StructuralError(f"H1 is not transverse to Z H1 (overlap {cross:.2e}, span {span}/{n})")
    P1 = Y1 @ Y1.conj().T @ G
    if np.linalg.norm((np.eye(n) - P1) @ A @ Y1) > 1e-10 * max(np.linalg.norm(A), 1.0):
        raise StructuralError("H1 is not invariant under the doubled operator")
    m = Y1.shape[1]
    D1 = Y1.conj().T @ G @ A @ Y1
    # boundary map of the restriction: kills exactly H1 and S
    C = constraint_map(dbl.parent, dbl.normal) @ Y1
    U, s, Vh = np.linalg.svd(C, full_matrices=False)
    r = int(np.sum(s > 1e-10 * max(s[0], 1e-300))) if s.size else 0
    R1 = Vh[:r]
    Gam = D1.conj().T - D1
    nu1 = R1 @ Gam @ R1.conj().T
    gam1 = Y1.conj().T @ G @ dbl.ambient.grading @ Y1
    if np.linalg.norm(gam1 @ gam1 - np.eye(m)) > 1e-10:
        gam1 = np.eye(m)
        graded = False
    else:
        graded = True
    return GreenOperatorModel(GradedSpace(InnerProduct.euclidean(m), gam1), D1, R1,
                              InnerProduct.euclidean(r), nu1, graded=graded, name=f"{dbl.parent.name}_undoubled")


def minimal_spectrum(model: GreenOperatorModel) -> np.ndarray:
    Y = model.kernel_R()
    C = Y.conj().T @ model.G @ model.D @ Y
    return np.linalg.eigvalsh(0.5 * (C + C.conj().T))


def functoriality_residual(dbl_small: DoubledOperator, dbl_big: DoubledOperator, m: int) -> float:
    """|| double(amplified) - amplified(double) || on ambient operators and projectors."""
    a = np.kron(dbl_small.ambient_operator(), np.eye(m)) - dbl_big.ambient_operator()
    p = np.kron(dbl_small.projector(), np.eye(m)) - dbl_big.projector()
    scale = max(np.linalg.norm(dbl_big.ambient_operator(), 2), 1.0)
    return float(np.linalg.norm(a, 2) / scale + np.linalg.norm(p, 2))
