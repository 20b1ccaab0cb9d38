"""Poisson operator, Calderon projector and comparison with the spectral projection of the boundary operator."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary_op import boundary_operator, odd_reduction
from .doubling import build_double, clifford_even
from .green_model import CheckReport, GreenOperatorModel
from .normal import CliffordNormal
from .numkernel import (InnerProduct, StructuralError, hermitian_funcalc, null_space, opnorm,
                        orthonormal_basis, pseudoinverse)

DELTA_FLOOR = 1e-12


def maximal_kernel(model: GreenOperatorModel, rtol: float = 1e-8) -> np.ndarray:
    """G-orthonormal basis of ker D intersected with the orthogonal complement of ker D_min."""
    K = null_space(model.D, model.inner, rtol=rtol)
    if K.shape[1] == 0:
        return K
    # remove the part lying in the minimal domain (K is G-orthonormal)
    inside = null_space(model.R @ K, rtol=1e-10)
    if inside.shape[1] == 0:
        return K
    return K @ null_space(inside.conj().T, rtol=1e-10)


@dataclass(frozen=True, eq=False)
class PoissonData:
    U: np.ndarray  # orthonormal basis of the kernel space
    W: np.ndarray  # test vectors r1 D~^{-1} e1 u_j
    gramian: np.ndarray  # w(R u_i, R w_j): identity in the continuum
    K: np.ndarray  # matrix of the Poisson operator (N x b)
    P: np.ndarray  # Calderon projector (b x b)

    @property
    def riesz_defect(self) -> float:
        return float(np.max(np.abs(self.gramian - np.eye(self.gramian.shape[0])))) if self.gramian.size else 0.0


def _double_solve(model: GreenOperatorModel, normal: CliffordNormal, U: np.ndarray) -> np.ndarray:
    """r1 D~^+ e1 applied to the columns of U."""
    dbl = build_double(model, normal)
    Y = dbl.constraint
    G2 = dbl.ambient.inner.gram
    C = dbl.compression
    N = model.N
    E1U = np.vstack([U, np.zeros_like(U)])
    z = Y.conj().T @ G2 @ E1U
    a = Y @ (pseudoinverse(C) @ z)
    return a[:N]


def poisson_data(model: GreenOperatorModel, normal: CliffordNormal) -> PoissonData:
    U = maximal_kernel(model)
    b = model.b
    if U.shape[1] == 0:
        return PoissonData(U, U, np.zeros((0, 0)), np.zeros((model.N, b), dtype=complex), np.zeros((b, b), dtype=complex))
    if model.graded:
        W = _double_solve(model, normal, U)
    else:
        em, en, _ = clifford_even(model, normal)
        Ue = np.vstack([U, np.zeros_like(U)])
        # sigma_x swaps the copies: D w = u is carried by the second component
        W = _double_solve(em, en, Ue)[model.N:2 * model.N]
    Om = model.omega()
    RU, RW = model.R @ U, model.R @ W
    # Petrov-Galerkin: w(R K f, R w_j) = w(f, R w_j) for all j
    A = RW.conj().T @ Om.conj().T @ RU
    size = np.linalg.norm(RW, 2) * np.linalg.norm(Om, 2) * np.linalg.norm(RU, 2)
    if np.linalg.cond(A) > 1e10 or np.linalg.norm(A, 2) <= 1e-10 * size:
        raise StructuralError("Poisson test system is singular")
    Kmat = U @ np.linalg.solve(A, RW.conj().T @ Om.conj().T)
    gramian = (RU.conj().T @ Om @ RW)
    return PoissonData(U, W, gramian, Kmat, model.R @ Kmat)


def poisson(model: GreenOperatorModel, normal: CliffordNormal, f) -> np.ndarray:
    return poisson_data(model, normal).K @ np.asarray(f, dtype=complex)


def calderon_projector(model: GreenOperatorModel, normal: CliffordNormal) -> np.ndarray:
    return poisson_data(model, normal).P


@dataclass(frozen=True, eq=False)
class MinusHalfSpace:
    dim: int
    gram_minus: np.ndarray
    embed: np.ndarray


def minus_half_space(gram_n: np.ndarray, Dn: np.ndarray | None = None) -> MinusHalfSpace:
    """Norm of the -1/2 boundary space: gram_n (1 + Dn* Dn)^{-1/2}, or gram_n^{-1}-type when Dn is absent."""
    b = gram_n.shape[0]
    ip = InnerProduct(gram_n)
    if Dn is None:
        gm = np.linalg.inv(gram_n)
    else:
        Ds = np.linalg.solve(gram_n, Dn.conj().T @ gram_n)
        T = hermitian_funcalc(Ds @ Dn, lambda x: (1.0 + np.maximum(x, 0.0)) ** -0.5, ip)
        gm = gram_n @ T
        gm = 0.5 * (gm + gm.conj().T)
    return MinusHalfSpace(b, gm, np.eye(b, dtype=complex))


def calderon_checks(model: GreenOperatorModel, normal: CliffordNormal, seed: int = 0) -> list[CheckReport]:
    pdat = poisson_data(model, normal)
    P = pdat.P
    out = [CheckReport.make("calderon_idempotent", np.linalg.norm(P @ P - P, 2), 1e-9, 0.0,
                            rank=int(np.linalg.matrix_rank(P, tol=1e-8)), riesz_defect=pdat.riesz_defect)]
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(model.b) + 1j * rng.standard_normal(model.b)
    Kf = pdat.K @ f
    out.append(CheckReport.make("poisson_in_kernel", model.inner.norm(model.D @ Kf) / max(np.linalg.norm(f), 1e-300),
                                1e-9, 0.0))
    if pdat.U.shape[1]:
        rep = pdat.K @ model.R @ pdat.U - pdat.U
        out.append(CheckReport.make("poisson_reproduces_kernel", np.linalg.norm(model.inner.to_ortho(rep), 2), 1e-9, 0.0))
        # range of P_C is the trace of the kernel
        Q1 = orthonormal_basis(P)
        Q2 = orthonormal_basis(model.R @ pdat.U)
        d = np.linalg.norm(Q1 @ Q1.conj().T - Q2 @ Q2.conj().T, 2) if Q1.shape[1] == Q2.shape[1] else np.inf
        out.append(CheckReport.make("calderon_range_is_cauchy_space", d, 1e-9, 0.0))
    return out


def nonnegative_projection(Dd: np.ndarray) -> np.ndarray:
    """Spectral projection of a Hermitian matrix onto [0, inf)."""
    if Dd.size == 0:
        return Dd
    return hermitian_funcalc(Dd, lambda x: (x >= 0).astype(float))


def mode_delta(model: GreenOperatorModel, normal: CliffordNormal) -> tuple[float, float]:
    """(|| P_>= - P_C^+ || in the -1/2 norm on the even part, condition number of that norm)."""
    if not model.graded:
        raise StructuralError("odd scenario: use clifford_even (odd-to-even reduction) first")
    bt = boundary_operator(model, normal, strict=False)
    E, Dd, _ = odd_reduction(bt)
    g = bt.space.metric.gram
    P = calderon_projector(model, normal)
    Pc = E.conj().T @ g @ P @ E
    Pge = nonnegative_projection(Dd)
    mh = minus_half_space(g, bt.Dn)
    gm = E.conj().T @ mh.gram_minus @ E
    d = opnorm(Pge - Pc, InnerProduct(gm))
    return d, float(np.linalg.cond(gm))


def decay_verdict(deltas: list[float], floor: float = DELTA_FLOOR) -> tuple[bool, dict]:
    """Nonincreasing beyond the first quartile and last <= first / 4 (values below floor count as 0)."""
    d = np.where(np.asarray(deltas) <= floor, 0.0, np.asarray(deltas))
    q = len(d) // 4
    tail = d[q:]
    mono = bool(np.all(np.diff(tail) <= 0))
    drop = bool(d[-1] <= d[0] / 4) if d[0] > 0 else bool(d[-1] == 0)
    return mono and drop, {"monotone": mono, "drop": drop}


def compare_pge_pc(scenario_modes) -> tuple[CheckReport, list[tuple]]:
    """Per-mode differences delta_k ordered by |k + 1/2| and the decay verdict."""
    rows = []
    for m in scenario_modes:
        d, cond = mode_delta(m.model, m.normal)
        rows.append((m.meta["k"], d, cond))
    rows.sort(key=lambda r: (abs(r[0] + 0.5), r[0]))
    ok, info = decay_verdict([r[1] for r in rows])
    rep = CheckReport.make("pge_vs_pc_decay", 0.0 if ok else 1.0, 0.0, 0.0,
                           max_delta=float(max(r[1] for r in rows)), **info)
    return rep, rows
