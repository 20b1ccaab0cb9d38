"""The boundary operator D_n = [1/2 n [D, n]] and its odd reduction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .green_model import AlgebraModel, CheckReport, GreenOperatorModel, graded_commutator
from .normal import BoundarySpace, CliffordNormal, boundary_gram
from .numkernel import InnerProduct, StructuralError, adjoint_wrt, null_space, opnorm, orthonormal_basis

TOL = 1e-10


@dataclass(frozen=True, eq=False)
class BoundaryTriple:
    space: BoundarySpace
    Dn: np.ndarray
    h2n: np.ndarray  # G-orthonormal
    h2n0: np.ndarray
    reps: np.ndarray  # representative in h2n of each boundary basis vector
    independence: float = 0.0


def h2_spaces(model: GreenOperatorModel, normal: CliffordNormal) -> tuple[np.ndarray, np.ndarray]:
    """{xi in ndom : D xi, D n xi in ndom} and its intersection with ker R."""
    ip = model.inner
    Y = normal.domain(model)
    if Y.shape[1] == model.N:
        h2 = Y
    else:
        P = Y @ Y.conj().T @ model.G
        Q = np.eye(model.N) - P
        M = np.vstack([Q @ model.D @ Y, Q @ model.D @ normal.n @ Y])
        Z = null_space(M, rtol=TOL)
        h2 = orthonormal_basis(Y @ Z, ip)
    if model.b == 0:
        return h2, h2
    Z0 = null_space(model.R @ h2, InnerProduct(h2.conj().T @ model.G @ h2), rtol=1e-12)
    return h2, orthonormal_basis(h2 @ Z0, ip)


def _commutator(model: GreenOperatorModel, n: np.ndarray) -> np.ndarray:
    return model.D @ n - n @ model.D


def boundary_operator(model: GreenOperatorModel, normal: CliffordNormal, algebra: AlgebraModel | None = None,
                      seed: int = 0, strict: bool = True) -> BoundaryTriple:
    n = normal.n
    h2, h20 = h2_spaces(model, normal)
    K = _commutator(model, n)
    scale = max(np.linalg.norm(model.R, 2) * opnorm(K, model.inner), 1e-300)
    res = float(np.linalg.norm(model.R @ K @ orthonormal_basis(h20), 2) / scale) if h20.shape[1] else 0.0
    if res > TOL:
        raise StructuralError(f"[D, n] does not map H2_n0 into ker R (residual {res:.2e})", res)
    space = boundary_gram(model, normal, algebra, strict=strict)
    # minimal-norm representative in h2n of each boundary coordinate vector
    RH = model.R @ h2
    reps = h2 @ np.linalg.pinv(RH)
    X = 0.5 * n @ K
    Dn = model.R @ X @ reps
    indep = 0.0
    if h20.shape[1]:
        rng = np.random.default_rng(seed)
        kz = h20 @ (rng.standard_normal((h20.shape[1], model.b)) + 1j * rng.standard_normal((h20.shape[1], model.b)))
        Dn2 = model.R @ X @ (reps + kz)
        indep = float(np.linalg.norm(Dn2 - Dn, 2) / max(np.linalg.norm(Dn, 2), 1.0))
    return BoundaryTriple(space, Dn, h2, h20, reps, indep)


def check_equivalences(model: GreenOperatorModel, normal: CliffordNormal) -> list[CheckReport]:
    """Residuals of the four equivalent conditions on H2_n0 x H2_n."""
    n = normal.n
    G, D, ip = model.G, model.D, model.inner
    h2, h20 = h2_spaces(model, normal)
    K = _commutator(model, n)
    nD, nK = max(opnorm(D, ip), 1e-300), max(opnorm(K, ip), 1e-300)
    c1 = float(np.linalg.norm(model.R @ K @ orthonormal_basis(h20), 2) / (max(np.linalg.norm(model.R, 2), 1e-300) * nK))
    X2 = D @ K + K @ D
    X3 = D @ K - K @ D
    M2 = (X2 @ h20).conj().T @ G @ h2 - h20.conj().T @ G @ X2 @ h2
    M3 = (X3 @ h20).conj().T @ G @ h2 + h20.conj().T @ G @ X3 @ h2
    M4 = (D @ K @ h20).conj().T @ G @ h2 - h20.conj().T @ G @ K @ D @ h2
    s = nD * nK
    reps = [CheckReport.make("equivalence_1_commutator_into_min_domain", c1, TOL, 0.0),
            CheckReport.make("equivalence_2_anticommutator_symmetric", np.linalg.norm(M2, 2) / s, TOL, 0.0),
            CheckReport.make("equivalence_3_double_commutator_antisymmetric", np.linalg.norm(M3, 2) / s, TOL, 0.0),
            CheckReport.make("equivalence_4_mixed_products", np.linalg.norm(M4, 2) / s, TOL, 0.0)]
    return reps


def equivalence_verdict(reports: list[CheckReport]) -> str:
    ok = [r.passed for r in reports]
    if all(ok):
        return "all-pass"
    if not any(ok):
        return "all-fail"
    return "disagree"


def anticommutator_symmetry(model: GreenOperatorModel, normal: CliffordNormal) -> float:
    """Symmetry residual of {D, [D, n]} on H2_n."""
    h2, _ = h2_spaces(model, normal)
    G, D = model.G, model.D
    K = _commutator(model, normal.n)
    X = D @ K + K @ D
    M = (X @ h2).conj().T @ G @ h2 - h2.conj().T @ G @ X @ h2
    return float(np.linalg.norm(M, 2) / max(opnorm(D, model.inner) * opnorm(K, model.inner), 1e-300))


def check_assumption6(model: GreenOperatorModel, normal: CliffordNormal, algebra: AlgebraModel | None = None,
                      gram: np.ndarray | None = None) -> list[CheckReport]:
    try:
        bt = boundary_operator(model, normal, algebra)
    except StructuralError as exc:
        return [CheckReport.make("assumption6_boundary_operator", exc.residual or np.inf, TOL, 0.0, error=str(exc))]
    g = bt.space.gram_n if gram is None else np.asarray(gram, dtype=complex)
    bip = InnerProduct(g)
    Dn, nd = bt.Dn, bt.space.nd
    dnorm = max(opnorm(Dn, bip), 1.0)
    out = [CheckReport.make("assumption6_anticommutator_symmetric", anticommutator_symmetry(model, normal), TOL, 0.0)]
    if algebra is not None and len(algebra):
        lips = algebra.lip_norms(model)
        C, comm = 0.0, 0.0
        for e in algebra.non_ideal():
            r = bt.space.rep[e.name]
            C = max(C, opnorm(r, bip) / max(lips[e.name], 1e-300))
            comm = max(comm, opnorm(graded_commutator(Dn, r, e.degree, 1, model.graded), bip))
        out.append(CheckReport.make("assumption6_a_rep_bounded", 0.0, 0.0, 0.0, constant=C, max_commutator=comm))
    sq = np.linalg.norm(model.R @ (normal.n @ normal.n + np.eye(model.N)) @ orthonormal_basis(bt.h2n), 2)
    out.append(CheckReport.make("assumption6_b_square", sq, TOL, 0.0))
    out.append(CheckReport.make("assumption6_b_anticommutes", opnorm(Dn @ nd + nd @ Dn, bip) / dnorm, TOL, 0.0))
    sa = opnorm(adjoint_wrt(Dn, bip, bip) - Dn, bip) / dnorm
    out.append(CheckReport.make("assumption6_c_self_adjoint", sa, TOL, 0.0))
    out.append(CheckReport.make("assumption6_d_compact_resolvent", 0.0, 0.0, 0.0, status="modelled-true",
                                note="finite dimension"))
    out.append(CheckReport.make("boundary_operator_representative_independence", bt.independence, 1e-9, 0.0))
    return out


def odd_reduction(bt: BoundaryTriple) -> tuple[np.ndarray, np.ndarray, float]:
    """(even basis, D_partial = -n_minus Dn_plus, residual of the rebuilt pair against Dn)."""
    sp = bt.space
    if not sp.graded:
        raise StructuralError("odd scenario has no boundary grading to reduce")
    g = sp.metric.gram
    Dn, nd = bt.Dn, sp.nd
    ac = np.linalg.norm(Dn @ nd + nd @ Dn, 2) / max(np.linalg.norm(Dn, 2), 1.0)
    if ac > TOL:
        raise StructuralError(f"Dn does not anticommute with n_d ({ac:.2e})", ac)
    E, O = sp.parts()
    Dp = O.conj().T @ g @ Dn @ E
    nm = E.conj().T @ g @ nd @ O
    npl = O.conj().T @ g @ nd @ E
    Dd = -nm @ Dp
    X = np.block([[np.zeros_like(Dd), -1j * Dd], [1j * Dd, np.zeros_like(Dd)]])
    k = E.shape[1]
    u = np.block([[np.eye(k), np.zeros((k, k))], [np.zeros((O.shape[1], k)), -1j * npl]])
    B = np.hstack([E, O])
    target = B.conj().T @ g @ Dn @ B
    res = float(np.linalg.norm(u @ X @ u.conj().T - target, 2) / max(np.linalg.norm(target, 2), 1.0))
    return E, Dd, res
