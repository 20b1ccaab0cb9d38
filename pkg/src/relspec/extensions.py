"""Closed extensions between the minimal and maximal operator, indexed by boundary subspaces."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from .green_model import CheckReport, GreenOperatorModel
from .numkernel import InnerProduct, null_space, orth_projector, orthonormal_basis

ISO_TOL = 1e-10
COND_MIN = 1e-8


@dataclass(frozen=True, eq=False)
class ExtensionSubspace:
    L: np.ndarray  # orthonormal basis (boundary metric), shape (b, k)
    labels: tuple = ()
    warning: str | None = None

    @property
    def dim(self) -> int:
        return self.L.shape[1]

    def projector(self, metric: InnerProduct | None = None) -> np.ndarray:
        return orth_projector(self.L, metric) if self.dim else np.zeros((self.L.shape[0],) * 2, dtype=complex)


def subspace(model: GreenOperatorModel, vectors, labels: tuple = ()) -> ExtensionSubspace:
    V = np.asarray(vectors, dtype=complex).reshape(model.b, -1) if np.size(vectors) else np.zeros((model.b, 0))
    return ExtensionSubspace(orthonormal_basis(V, model.bmetric), labels)


def _omega_conditioning(model: GreenOperatorModel) -> float:
    s = np.linalg.svd(model.omega(), compute_uv=False)
    return float(s[-1]) if s.size else np.inf


def annihilator(model: GreenOperatorModel, L: ExtensionSubspace) -> ExtensionSubspace:
    """L^perp = {x : w(x, y) = 0 for all y in L}."""
    b = model.b
    warn = None
    if _omega_conditioning(model) < COND_MIN:
        warn = "boundary form nearly degenerate"
    if L.dim == 0:
        return ExtensionSubspace(orthonormal_basis(np.eye(b), model.bmetric), L.labels, warn)
    M = (model.omega() @ L.L).conj().T  # rows: y^H Omega^H, x in kernel
    Z = null_space(M, InnerProduct.euclidean(b), rtol=1e-10)
    return ExtensionSubspace(orthonormal_basis(Z, model.bmetric), L.labels, warn)


def _contained(A: ExtensionSubspace, B: ExtensionSubspace, metric: InnerProduct) -> float:
    """||(1 - P_B) P_A||: zero iff A is a subspace of B."""
    b = A.L.shape[0]
    return float(np.linalg.norm((np.eye(b) - B.projector(metric)) @ A.projector(metric), 2))


def classify(model: GreenOperatorModel, L: ExtensionSubspace) -> str:
    Lp = annihilator(model, L)
    m = model.bmetric
    iso = _contained(L, Lp, m) <= ISO_TOL
    co = _contained(Lp, L, m) <= ISO_TOL
    if iso and co:
        return "lagrangian"
    if iso:
        return "isotropic"
    if co:
        return "coisotropic"
    return "generic"


def isotropy_witness(model: GreenOperatorModel, L: ExtensionSubspace) -> float:
    """Largest |w(x, y)| over unit basis pairs of L (zero iff L is isotropic)."""
    if L.dim == 0:
        return 0.0
    return float(np.max(np.abs(L.L.conj().T @ model.omega() @ L.L)))


@dataclass(frozen=True, eq=False)
class ExtensionOperator:
    domain: np.ndarray  # G-orthonormal basis of {xi : R xi in L}
    action: np.ndarray
    parent: GreenOperatorModel
    L: ExtensionSubspace

    @property
    def compression(self) -> np.ndarray:
        """Matrix of P_dom D restricted to the domain, in orthonormal coordinates."""
        Y = self.domain
        return Y.conj().T @ self.parent.G @ self.action

    def symmetry_residual(self) -> float:
        Y, G, D = self.domain, self.parent.G, self.parent.D
        M = (D @ Y).conj().T @ G @ Y - Y.conj().T @ G @ D @ Y
        return float(np.linalg.norm(M, 2) / max(np.linalg.norm(self.compression, 2), 1e-300))

    def spectrum(self) -> np.ndarray:
        C = self.compression
        if self.symmetry_residual() <= 1e-10:
            return np.linalg.eigvalsh(0.5 * (C + C.conj().T)).astype(complex)
        return np.sort_complex(np.linalg.eigvals(C))


def extension_domain(model: GreenOperatorModel, L: ExtensionSubspace) -> np.ndarray:
    b = model.b
    Q = np.eye(b) - L.projector(model.bmetric)
    if L.dim == b:
        return model.inner.from_ortho(np.eye(model.N, dtype=complex))
    return null_space(Q @ model.R, model.inner, rtol=1e-12)


def extension_operator(model: GreenOperatorModel, L: ExtensionSubspace) -> ExtensionOperator:
    Y = extension_domain(model, L)
    return ExtensionOperator(Y, model.D @ Y, model, L)


def adjoint_pairing_residual(model: GreenOperatorModel, L: ExtensionSubspace, M: ExtensionSubspace) -> float:
    """max |<D xi, eta> - <xi, D eta>| over orthonormal xi in Dom(D_L), eta in Dom(D_M), relative to ||D||."""
    Y1 = extension_domain(model, L)
    Y2 = extension_domain(model, M)
    G, D = model.G, model.D
    S = (D @ Y1).conj().T @ G @ Y2 - Y1.conj().T @ G @ D @ Y2
    scale = max(np.linalg.norm(model.inner.similar(D), 2), 1e-300)
    return float(np.max(np.abs(S)) / scale) if S.size else 0.0


def adjoint_duality_checks(model: GreenOperatorModel, L: ExtensionSubspace) -> list[CheckReport]:
    """D_L^* = D_{L^perp}: symmetric pairing on the annihilator, broken just outside it."""
    Lp = annihilator(model, L)
    out = [CheckReport.make("adjoint_pairing_on_annihilator", adjoint_pairing_residual(model, L, Lp), 1e-12, 0.0)]
    if Lp.dim < model.b:
        full = ExtensionSubspace(np.eye(model.b, dtype=complex))
        out.append(CheckReport.at_least("adjoint_pairing_off_annihilator",
                                        adjoint_pairing_residual(model, L, full), 1e-6))
    dd = annihilator(model, Lp)
    out.append(CheckReport.make("double_annihilator",
                                np.linalg.norm(dd.projector(model.bmetric) - L.projector(model.bmetric), 2), 1e-10, 0.0))
    return out


# -- Lagrangian search --------------------------------------------------------

def _blocks(model: GreenOperatorModel, labels) -> list[np.ndarray]:
    labels = list(labels) if labels else [0] * model.b
    return [np.array([i for i, l in enumerate(labels) if l == key]) for key in dict.fromkeys(labels)]


def _lagrangian_ungraded(Om: np.ndarray, rng) -> tuple[np.ndarray | None, tuple]:
    """Graph of a unitary between the positive and negative parts of i*Omega."""
    d = Om.shape[0]
    if d == 0:
        return np.zeros((0, 0), dtype=complex), (0, 0)
    H = 1j * Om
    w, V = np.linalg.eigh(0.5 * (H + H.conj().T))
    pos, neg = w > 0, w < 0
    p, q = int(pos.sum()), int(neg.sum())
    if p != q or p + q != d:
        return None, (p, q)
    Ep = V[:, pos] / np.sqrt(w[pos])
    Em = V[:, neg] / np.sqrt(-w[neg])
    U = unitary_group.rvs(p, random_state=rng) if p > 1 else np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))
    return orthonormal_basis(Ep + Em @ U), (p, q)


def lagrangian_search(model: GreenOperatorModel, labels: tuple = (), graded: bool = False,
                      seed: int = 0) -> tuple[ExtensionSubspace | None, dict]:
    """A block-invariant (and optionally graded) Lagrangian, or None with the obstruction."""
    rng = np.random.default_rng(seed)
    b = model.b
    Om = model.omega()
    gam = model.boundary_grading() if graded else None
    cols, obstruction = [], {}
    lab = list(labels) if labels else [0] * b
    for idx in _blocks(model, labels):
        key = lab[int(idx[0])]
        Ob = Om[np.ix_(idx, idx)]
        if not graded:
            Lb, sig = _lagrangian_ungraded(Ob, rng)
            if Lb is None:
                obstruction[key] = {"signature": sig}
                continue
        else:
            gb = gam[np.ix_(idx, idx)]
            Ev = orthonormal_basis(0.5 * (np.eye(len(idx)) + gb))
            Od = orthonormal_basis(0.5 * (np.eye(len(idx)) - gb))
            de, do = Ev.shape[1], Od.shape[1]
            cross = np.linalg.norm(Ev.conj().T @ Ob @ Ev) + np.linalg.norm(Od.conj().T @ Ob @ Od)
            if cross <= 1e-12 * max(np.linalg.norm(Ob), 1e-300):
                # form pairs even with odd
                if de != do:
                    obstruction[key] = {"even": de, "odd": do}
                    continue
                k = int(rng.integers(0, de + 1))
                Lp = Ev @ (unitary_group.rvs(de, random_state=rng)[:, :k] if de > 1 else np.eye(de)[:, :k])
                if k:
                    Lm = Od @ null_space(Lp.conj().T @ Ob @ Od, rtol=1e-10)
                else:
                    Lm = Od
                Lb = orthonormal_basis(np.hstack([Lp, Lm]))
            else:
                # form preserves the parity: search each part separately
                parts = []
                ok = True
                for B in (Ev, Od):
                    Lq, sig = _lagrangian_ungraded(B.conj().T @ Ob @ B, rng)
                    if Lq is None:
                        obstruction[key] = {"signature": sig}
                        ok = False
                        break
                    parts.append(B @ Lq)
                if not ok:
                    continue
                Lb = orthonormal_basis(np.hstack(parts))
        block = np.zeros((b, Lb.shape[1]), dtype=complex)
        block[idx] = Lb
        cols.append(block)
    if obstruction:
        return None, obstruction
    L = ExtensionSubspace(orthonormal_basis(np.hstack(cols) if cols else np.zeros((b, 0)), model.bmetric),
                          tuple(labels))
    return L, {}


def graded_residual(model: GreenOperatorModel, L: ExtensionSubspace) -> float:
    P = L.projector(model.bmetric)
    g = model.boundary_grading()
    return float(np.linalg.norm((np.eye(model.b) - P) @ g @ P, 2))


def quasi_periodic(alpha: float) -> np.ndarray:
    """L = {(z, e^{i alpha} z)} in endpoint coordinates (left, right)."""
    return np.array([[1.0], [np.exp(1j * alpha)]], dtype=complex)


def spectrum_error(computed: np.ndarray, exact: np.ndarray) -> float:
    """Largest distance from an analytic eigenvalue to the nearest computed one."""
    c = np.real(np.asarray(computed))
    return float(max(np.min(np.abs(c - e)) for e in exact))
