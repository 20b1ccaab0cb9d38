"""Exact linear algebra for conical points: deficiency space, extensions and normal structures.

Everything lives on W, the span of the cross-section eigenvectors with |lambda| < 1/2.
Coordinates are the canonical eigenbasis, in which Clifford multiplication by the
radial normal pairs f_{lambda, s} with f_{-lambda, -s} and the boundary form has
entries +-1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import ortho_group

from .extensions import ExtensionSubspace, annihilator as model_annihilator, classify
from .green_model import CheckReport, GreenOperatorModel
from .numkernel import GradedSpace, InnerProduct, StructuralError, null_space, orthonormal_basis

TOL = 1e-10
HALF_TOL = 1e-12


@dataclass(frozen=True)
class CrossSection:
    point: str
    spectrum: tuple  # ((lambda, multiplicity, parity), ...)


@dataclass(frozen=True, eq=False)
class ConeData:
    points: tuple
    modes: tuple  # (point index, lambda, parity, j) per basis vector of W
    omega: np.ndarray
    grading: np.ndarray
    graded: bool = True

    @property
    def dim(self) -> int:
        return len(self.modes)

    @property
    def block(self) -> np.ndarray:
        return np.array([m[0] for m in self.modes], dtype=int)

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.array([m[1] for m in self.modes], dtype=float)

    def block_projector(self, i: int) -> np.ndarray:
        return np.diag((self.block == i).astype(float))

    def kernel_projector(self) -> np.ndarray:
        return np.diag((np.abs(self.eigenvalues) < HALF_TOL).astype(float))

    @property
    def model(self) -> GreenOperatorModel | None:
        """W as a Green model with R = 1: D = Omega / 2 so that D^H - D = -Omega = nu."""
        w = self.dim
        if w == 0:
            return None
        space = GradedSpace(InnerProduct.euclidean(w), self.grading)
        return GreenOperatorModel(space, 0.5 * self.omega, np.eye(w), InnerProduct.euclidean(w), -self.omega,
                                  graded=self.graded, labels=tuple(int(b) for b in self.block), name="cone")


def _parse_point(p, idx: int) -> CrossSection:
    if isinstance(p, CrossSection):
        return p
    if isinstance(p, dict):
        name, eig = str(p.get("point", idx)), p["eigenvalues"]
    else:
        name, eig = str(idx), p
    spec = []
    for e in eig:
        lam, mult, par = (tuple(e) + (1,))[:3]
        lam = float(lam)
        if not np.isfinite(lam):
            raise StructuralError("cross-section eigenvalues must be real and finite")
        if int(mult) != mult or mult <= 0:
            raise StructuralError(f"multiplicity must be a positive integer, got {mult}")
        if par not in (1, -1):
            raise StructuralError(f"parity must be +1 or -1, got {par}")
        spec.append((lam, int(mult), int(par)))
    return CrossSection(name, tuple(spec))


def deficiency_space(spectra: Sequence, graded: bool = True, half: str = "refuse") -> ConeData:
    """W and the boundary form from per-point cross-section spectra.

    `spectra` holds one entry per cone point: either a list of (lambda, mult, parity)
    or a dict {"point": name, "eigenvalues": [...]}. Eigenvalues exactly at +-1/2 are
    refused unless `half` is "include" or "exclude".
    """
    if half not in ("refuse", "include", "exclude"):
        raise ValueError(f"unknown half-eigenvalue policy {half!r}")
    points = tuple(_parse_point(p, i) for i, p in enumerate(spectra))
    modes = []
    pairs = []
    for i, cs in enumerate(points):
        count: dict[tuple, int] = {}
        for lam, mult, par in cs.spectrum:
            if abs(abs(lam) - 0.5) <= HALF_TOL:
                if half == "refuse":
                    raise StructuralError(f"eigenvalue {lam} at point {cs.point} sits at +-1/2; "
                                          "pass half='include' or half='exclude' explicitly")
                if half == "exclude":
                    continue
            elif abs(lam) > 0.5:
                continue
            key = (round(lam, 12) + 0.0, par if graded else 1)
            count[key] = count.get(key, 0) + mult
        # Clifford multiplication by the normal maps (lambda, s) to (-lambda, -s)
        flip = -1 if graded else 1
        leading = []
        for (lam, par), m in sorted(count.items(), key=lambda kv: (-kv[0][0], -kv[0][1])):
            partner = (round(-lam, 12) + 0.0, flip * par)
            if count.get(partner, 0) != m:
                raise StructuralError(f"point {cs.point}: mode (lambda={lam}, parity={par}) has multiplicity {m} "
                                      f"but its normal partner has {count.get(partner, 0)}")
            if lam > 0 or (lam == 0 and graded and par == 1):
                leading.append(((lam, par), partner, m))
            elif lam == 0 and not graded:
                if m % 2:
                    raise StructuralError(f"point {cs.point}: ungraded kernel of odd dimension {m} cannot be paired")
                leading.append(((lam, par), None, m))
        for key, partner, m in leading:
            if partner is None:
                half_m = m // 2
                for j in range(half_m):
                    a = len(modes)
                    modes.append((i, key[0], key[1], j))
                    modes.append((i, key[0], key[1], j + half_m))
                    pairs.append((a, a + 1))
                continue
            for j in range(m):
                a = len(modes)
                modes.append((i, key[0], key[1], j))
                modes.append((i, partner[0], partner[1], j))
                pairs.append((a, a + 1))
    w = len(modes)
    Om = np.zeros((w, w), dtype=complex)
    for a, b in pairs:
        Om[a, b], Om[b, a] = 1.0, -1.0
    grading = np.diag([float(m[2]) for m in modes]) if w else np.zeros((0, 0))
    return ConeData(points, tuple(modes), Om, grading, graded)


def from_matrices(omega, grading, blocks=None, eigenvalues=None) -> ConeData:
    """A cone layer given directly by its form and grading (for hand-built examples)."""
    Om = np.asarray(omega, dtype=complex)
    g = np.asarray(grading, dtype=float)
    g = np.diag(g) if g.ndim == 1 else g
    w = Om.shape[0]
    if np.linalg.norm(Om + Om.conj().T) > TOL:
        raise StructuralError("omega must be anti-Hermitian")
    blocks = [0] * w if blocks is None else list(blocks)
    lams = [0.0] * w if eigenvalues is None else list(eigenvalues)
    modes = tuple((int(blocks[a]), float(lams[a]), int(round(g[a, a])), a) for a in range(w))
    pts = tuple(CrossSection(str(i), ()) for i in sorted(set(blocks)))
    return ConeData(pts, modes, Om, g, True)


def _basis(cone: ConeData, L) -> np.ndarray:
    if L is None:
        return np.zeros((cone.dim, 0), dtype=complex)
    if isinstance(L, ExtensionSubspace):
        return L.L
    X = np.asarray(L, dtype=complex)
    if X.size == 0:
        return np.zeros((cone.dim, 0), dtype=complex)
    return orthonormal_basis(X.reshape(cone.dim, -1))


def _subspace(X: np.ndarray) -> ExtensionSubspace:
    return ExtensionSubspace(orthonormal_basis(X) if X.shape[1] else X)


def annihilator(cone: ConeData, L) -> ExtensionSubspace:
    """L^perp = {x in W : w(x, y) = 0 for y in L}."""
    Lb = _basis(cone, L)
    w = cone.dim
    if Lb.shape[1] == 0:
        return ExtensionSubspace(np.eye(w, dtype=complex))
    return _subspace(null_space((cone.omega @ Lb).conj().T, rtol=1e-10))


def _proj(X: np.ndarray) -> np.ndarray:
    return X @ X.conj().T if X.shape[1] else np.zeros((X.shape[0], X.shape[0]), dtype=complex)


def subspace_properties(cone: ConeData, L) -> dict:
    """Residuals of isotropy, grading and block invariance (all zero for admissible L)."""
    Lb = _basis(cone, L)
    P = _proj(Lb)
    Q = np.eye(cone.dim) - P
    iso = float(np.max(np.abs(Lb.conj().T @ cone.omega @ Lb))) if Lb.shape[1] else 0.0
    gr = float(np.linalg.norm(Q @ cone.grading @ P, 2)) if cone.dim else 0.0
    blk = max((float(np.linalg.norm(Q @ cone.block_projector(i) @ P, 2)) for i in range(len(cone.points))),
              default=0.0) if cone.dim else 0.0
    return {"isotropy": iso, "grading": gr, "block": blk}


def _require_admissible(cone: ConeData, L) -> None:
    props = subspace_properties(cone, L)
    bad = {k: v for k, v in props.items() if v > TOL}
    if bad:
        raise StructuralError(f"L must be isotropic, graded and block-invariant: {bad}", max(bad.values()))


@dataclass(frozen=True, eq=False)
class Quotient:
    """Homogeneous orthonormal basis of L^perp (-) L, grouped by cone point."""
    basis: np.ndarray
    block: np.ndarray
    parity: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def quotient(cone: ConeData, L) -> Quotient:
    Lb = _basis(cone, L)
    Lp = annihilator(cone, Lb).L
    w = cone.dim
    cols, blocks, pars = [], [], []
    parities = (1, -1) if cone.graded else (1,)
    for i in range(len(cone.points)):
        Pi = cone.block_projector(i)
        for s in parities:
            Ps = 0.5 * (np.eye(w) + s * cone.grading) if cone.graded else np.eye(w)
            # (L^perp restricted to the block and parity) minus L
            Y = orthonormal_basis(Ps @ Pi @ Lp) if Lp.shape[1] else np.zeros((w, 0))
            if Y.shape[1] == 0:
                continue
            if Lb.shape[1]:
                Y = orthonormal_basis(Y - Lb @ (Lb.conj().T @ Y))
            if Y.shape[1] == 0:
                continue
            cols.append(Y)
            blocks += [i] * Y.shape[1]
            pars += [s] * Y.shape[1]
    B = np.hstack(cols) if cols else np.zeros((w, 0), dtype=complex)
    return Quotient(B, np.array(blocks, dtype=int), np.array(pars, dtype=int))


@dataclass(frozen=True, eq=False)
class NormalStructures:
    quotient: Quotient
    structures: list  # complex structures on the quotient, in quotient coordinates
    obstruction: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.structures)

    def lift(self, I: np.ndarray) -> np.ndarray:
        """I as an operator on W (zero on L and on the complement of L^perp)."""
        Q = self.quotient.basis
        return Q @ I @ Q.conj().T


def _psd_sqrt(H: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def _odd_structure(B: np.ndarray, S: np.ndarray) -> np.ndarray:
    """With w = [[0, B], [-B^H, 0]], the odd taming structure attached to S > 0."""
    p = B.shape[0]
    X = -np.linalg.solve(S, B)
    Y = np.linalg.solve(B, S)
    I = np.zeros((2 * p, 2 * p), dtype=complex)
    I[:p, p:] = X
    I[p:, :p] = Y
    return I


def _spectral_structure(Om: np.ndarray) -> np.ndarray:
    """i on the positive part of i*w and -i on the negative part."""
    H = 1j * Om
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    return (V * (1j * np.sign(w))) @ V.conj().T


def _n2(X: np.ndarray) -> float:
    return float(np.linalg.norm(X, 2)) if X.size else 0.0


def structure_checks(cone: ConeData, q: Quotient, I: np.ndarray) -> list[CheckReport]:
    """Odd, block-linear, I^2 = -1, compatible and taming (all relative to the quotient form)."""
    Qb = q.basis
    Om = Qb.conj().T @ cone.omega @ Qb
    d = q.dim
    E = np.eye(d)
    gam = np.diag(q.parity.astype(float))
    out = []
    if cone.graded:
        out.append(CheckReport.make("odd", _n2(I @ gam + gam @ I), TOL))
    same = (q.block[:, None] == q.block[None, :]).astype(float)
    out.append(CheckReport.make("block_linear", _n2(I * (1 - same)), TOL))
    out.append(CheckReport.make("square", _n2(I @ I + E), TOL))
    out.append(CheckReport.make("compatible", _n2(I.conj().T @ Om @ I - Om), TOL))
    H = Om @ I
    out.append(CheckReport.make("taming_hermitian", _n2(H - H.conj().T), TOL))
    if d:
        lo = float(np.linalg.eigvalsh(0.5 * (H + H.conj().T))[0])
        out.append(CheckReport.at_least("taming_positive", lo, TOL))
    else:
        out.append(CheckReport.make("taming_positive", 0.0, 0.0, vacuous=True))
    return out


def normal_structures(cone: ConeData, L=None, samples: int = 3, seed: int = 0) -> NormalStructures:
    """Odd block-linear complex structures on L^perp / L that are compatible with and tame w.

    The first structure is the pairing swap (polar part of the form); the others are
    drawn from S = O diag(e^t) O^T with O orthogonal, which parameterizes all of them.
    An empty list means a block has unequal even and odd dimensions.
    """
    _require_admissible(cone, L)
    q = quotient(cone, L)
    Qb = q.basis
    Om = Qb.conj().T @ cone.omega @ Qb
    rng = np.random.default_rng(seed)
    per_block = []
    obstruction = {}
    for i in range(len(cone.points)):
        idx = np.nonzero(q.block == i)[0]
        if idx.size == 0:
            continue
        Ob = Om[np.ix_(idx, idx)]
        if not cone.graded:
            per_block.append((idx, [_spectral_structure(Ob)] * (samples + 1)))
            continue
        ev = idx[q.parity[idx] == 1]
        od = idx[q.parity[idx] == -1]
        if ev.size != od.size:
            obstruction[cone.points[i].point] = {"even": int(ev.size), "odd": int(od.size)}
            continue
        order = np.r_[ev, od]
        B = Om[np.ix_(ev, od)]
        p = ev.size
        if np.linalg.svd(B, compute_uv=False)[-1] <= TOL:
            obstruction[cone.points[i].point] = {"degenerate_pairing": True}
            continue
        mats = [_odd_structure(B, _psd_sqrt(B @ B.conj().T))]
        for _ in range(samples):
            O = ortho_group.rvs(p, random_state=rng) if p > 1 else np.ones((1, 1))
            S = (O * np.exp(rng.uniform(-1.0, 1.0, p))) @ O.T
            mats.append(_odd_structure(B, S))
        # back to the quotient ordering of this block
        pos = {int(j): k for k, j in enumerate(order)}
        perm = np.array([pos[int(j)] for j in idx])
        per_block.append((idx, [M[np.ix_(perm, perm)] for M in mats]))
    if obstruction:
        return NormalStructures(q, [], obstruction)
    structures = []
    for s in range(samples + 1):
        I = np.zeros((q.dim, q.dim), dtype=complex)
        for idx, mats in per_block:
            I[np.ix_(idx, idx)] = mats[s]
        if all(r.passed for r in structure_checks(cone, q, I)):
            if not any(np.linalg.norm(I - J) <= TOL for J in structures):
                structures.append(I)
    return NormalStructures(q, structures, {})


def lagrangian_lift(cone: ConeData, L, I: np.ndarray, ns: NormalStructures | None = None) -> ExtensionSubspace:
    """A graded block-invariant Lagrangian with L inside it inside L^perp.

    In the graded case the quotient's even part is taken (it is Lagrangian because the
    form only pairs even with odd). Ungraded, the graph of I-conjugation between the
    +i and -i eigenspaces of I is used.
    """
    ns = ns or NormalStructures(quotient(cone, L), [I])
    q = ns.quotient
    Lb = _basis(cone, L)
    if q.dim == 0:
        return _subspace(Lb)
    if cone.graded:
        L0 = q.basis[:, q.parity == 1]
    else:
        cols = []
        for i in sorted(set(q.block.tolist())):
            idx = np.nonzero(q.block == i)[0]
            Ib = I[np.ix_(idx, idx)]
            Pp = 0.5 * (np.eye(idx.size) - 1j * Ib)  # onto the +i eigenspace
            Ep = orthonormal_basis(Pp)
            Em = orthonormal_basis(np.eye(idx.size) - Pp)
            Ob = (q.basis[:, idx].conj().T @ cone.omega @ q.basis[:, idx])
            # normalize both sides so that i*w is +-1 on them, then take the diagonal graph
            Hp = 1j * Ep.conj().T @ Ob @ Ep
            Hm = -1j * Em.conj().T @ Ob @ Em
            Fp = Ep @ np.linalg.inv(np.linalg.cholesky(0.5 * (Hp + Hp.conj().T))).conj().T
            Fm = Em @ np.linalg.inv(np.linalg.cholesky(0.5 * (Hm + Hm.conj().T))).conj().T
            cols.append(q.basis[:, idx] @ (Fp + Fm))
        L0 = np.hstack(cols)
    return _subspace(np.hstack([Lb, L0]))


def lift_checks(cone: ConeData, L, Lhat: ExtensionSubspace) -> list[CheckReport]:
    Lb = _basis(cone, L)
    Ph = _proj(Lhat.L)
    Pp = _proj(annihilator(cone, Lb).L)
    w = cone.dim
    out = [CheckReport.make("contains_L", np.linalg.norm((np.eye(w) - Ph) @ Lb, 2) if Lb.shape[1] else 0.0, TOL),
           CheckReport.make("inside_annihilator", np.linalg.norm((np.eye(w) - Pp) @ Ph, 2) if w else 0.0, TOL),
           CheckReport.make("self_annihilating",
                            np.linalg.norm(_proj(annihilator(cone, Lhat).L) - Ph, 2) if w else 0.0, TOL)]
    props = subspace_properties(cone, Lhat)
    out.append(CheckReport.make("graded", props["grading"], TOL))
    out.append(CheckReport.make("block_invariant", props["block"], TOL))
    m = cone.model
    kind = classify(m, Lhat) if m is not None else "lagrangian"
    out.append(CheckReport.make("classified_lagrangian", 0.0 if kind == "lagrangian" else 1.0, 0.0, kind=kind))
    return out


def annihilator_agreement(cone: ConeData, L) -> float:
    """Distance between this module's annihilator and the one of the embedded Green model."""
    m = cone.model
    if m is None:
        return 0.0
    Lb = _basis(cone, L)
    a = annihilator(cone, Lb)
    b = model_annihilator(m, ExtensionSubspace(Lb))
    return float(np.linalg.norm(_proj(a.L) - _proj(b.L), 2))


def geometric_normal_check(cone: ConeData, L=None) -> CheckReport:
    """Clifford multiplication by dr preserves Dom(D_{L^perp}) iff L^perp lies in the kernel modes."""
    Lp = annihilator(cone, _basis(cone, L)).L
    w = cone.dim
    if w == 0:
        return CheckReport.make("geometric_normal", 0.0, TOL, 0.0, dim_W=0)
    off = float(np.linalg.norm((np.eye(w) - cone.kernel_projector()) @ Lp, 2)) if Lp.shape[1] else 0.0
    bad = sorted({round(m[1], 12) for m in cone.modes if abs(m[1]) >= HALF_TOL})
    return CheckReport.make("geometric_normal", off, TOL, 0.0, dim_W=w, nonzero_eigenvalues=bad)


@dataclass(frozen=True)
class BoundaryClass:
    pair: tuple  # (dim+, dim-) of the quotient under iI
    blocks: dict
    residual: float

    @property
    def vanishes(self) -> bool:
        return self.pair[0] == self.pair[1] and all(p == m for p, m in self.blocks.values())


def _split(J: np.ndarray) -> tuple[int, int, float]:
    if J.size == 0:
        return 0, 0, 0.0
    ev = np.linalg.eigvals(J)
    res = float(np.max(np.abs(np.abs(ev.real) - 1.0)) + np.max(np.abs(ev.imag)))
    return int(np.sum(ev.real > 0)), int(np.sum(ev.real < 0)), res


def boundary_class(cone: ConeData, L, I: np.ndarray, ns: NormalStructures | None = None) -> BoundaryClass:
    """Dimensions of the +-1 eigenspaces of iI on L^perp / L, overall and per cone point."""
    q = ns.quotient if ns is not None else quotient(cone, L)
    if I.shape != (q.dim, q.dim):
        raise StructuralError("complex structure does not match the quotient")
    p, m, res = _split(1j * I)
    blocks = {}
    for i in sorted(set(q.block.tolist())):
        idx = np.nonzero(q.block == i)[0]
        bp, bm, r = _split(1j * I[np.ix_(idx, idx)])
        blocks[cone.points[i].point] = (bp, bm)
        res = max(res, r)
    return BoundaryClass((p, m), blocks, res)


def permute_points(cone: ConeData, perm: Sequence[int]) -> tuple[ConeData, np.ndarray]:
    """The same cone with points relabelled: new point k is old point perm[k]. Returns the basis permutation."""
    inv = {old: new for new, old in enumerate(perm)}
    order = sorted(range(cone.dim), key=lambda a: (inv[cone.modes[a][0]], a))
    Pm = np.eye(cone.dim)[:, order]
    modes = tuple((inv[cone.modes[a][0]],) + tuple(cone.modes[a][1:]) for a in order)
    pts = tuple(cone.points[o] for o in perm)
    return ConeData(pts, modes, Pm.T @ cone.omega @ Pm, Pm.T @ cone.grading @ Pm, cone.graded), Pm


def cone_report(cone: ConeData, L=None, seed: int = 0) -> list[CheckReport]:
    """The full conical suite for one isotropic L."""
    out = []
    w = cone.dim
    if w:
        out.append(CheckReport.make("omega_anti_hermitian", np.linalg.norm(cone.omega + cone.omega.conj().T, 2), TOL))
        s = np.linalg.svd(cone.omega, compute_uv=False)
        out.append(CheckReport.at_least("omega_nondegenerate", s[-1], 1e-8))
        lam = cone.eigenvalues
        cross = np.abs(cone.omega) * (np.abs(lam[:, None] + lam[None, :]) > HALF_TOL)
        out.append(CheckReport.make("omega_pairs_opposite", float(np.max(cross)), 0.0))
    out.append(CheckReport.make("annihilator_agreement", annihilator_agreement(cone, L), TOL))
    ns = normal_structures(cone, L, seed=seed)
    out.append(CheckReport.at_least("normal_structures_found", len(ns), 1, obstruction=ns.obstruction))
    for k, I in enumerate(ns.structures):
        for r in structure_checks(cone, ns.quotient, I):
            r.context["structure"] = k
            out.append(r)
        Lh = lagrangian_lift(cone, L, I, ns)
        out += lift_checks(cone, L, Lh)
        bc = boundary_class(cone, L, I, ns)
        out.append(CheckReport.make("boundary_class_vanishes", 0.0 if bc.vanishes else 1.0, 0.0,
                                    pair=list(bc.pair), structure=k))
    out.append(geometric_normal_check(cone, L))
    return out


def circle_spectrum(periodic: bool, cutoff: int = 3) -> list[tuple]:
    """Spin Dirac spectrum on the unit circle, both chiralities, |k| <= cutoff."""
    off = 0.0 if periodic else 0.5
    out = []
    for k in range(-cutoff, cutoff + 1):
        out.append((k + off, 1, 1))
        out.append((-(k + off), 1, -1))
    return out
