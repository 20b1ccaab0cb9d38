"""Bounded transform, phase, resolvent bounds, Busby compressions and the boundary index pairing."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .calderon import calderon_projector
from .boundary_op import boundary_operator, odd_reduction
from .extensions import ExtensionSubspace, extension_domain
from .green_model import AlgebraElement, AlgebraModel, CheckReport, GreenOperatorModel, graded_commutator
from .numkernel import InnerProduct, StructuralError, null_space

LAMBDA_GRID = (0.0, 1.0, 10.0, 1e2, 1e3)
INDEX_GAP = 1e3
CROSSING_TOL = 1e-8
SF_STEPS = 32
TOL = 1e-10


@dataclass(frozen=True, eq=False)
class FredholmData:
    F: np.ndarray  # in the coordinates of `inner`
    flavor: str  # bounded-transform | phase | doubled-H
    parent: object = None
    inner: InnerProduct | None = None
    info: dict = field(default_factory=dict)

    @property
    def norm(self) -> float:
        Fo = self.inner.similar(self.F) if self.inner is not None else self.F
        return float(np.linalg.norm(Fo, 2)) if Fo.size else 0.0


# -- helpers in orthonormal coordinates ----------------------------------------

def _sqrt_inv_shift(S: np.ndarray, shift: float) -> np.ndarray:
    """(shift + S)^{-1/2} for Hermitian positive semi-definite S."""
    w, V = np.linalg.eigh(0.5 * (S + S.conj().T))
    return (V * (shift + np.maximum(w, 0.0)) ** -0.5) @ V.conj().T


def _transform(T: np.ndarray, shift: float = 1.0) -> np.ndarray:
    """T (shift + T^H T)^{-1/2}."""
    return T @ _sqrt_inv_shift(T.conj().T @ T, shift)


def _domain_projector(inner: InnerProduct, Y: np.ndarray | None) -> np.ndarray:
    n = inner.dim
    if Y is None:
        return np.eye(n, dtype=complex)
    Z = inner.to_ortho(Y)
    return Z @ Z.conj().T


def _restricted(model: GreenOperatorModel, Y: np.ndarray | None) -> np.ndarray:
    """D restricted to span(Y) and extended by zero, in orthonormal coordinates."""
    ip = model.inner
    return ip.similar(model.D) @ _domain_projector(ip, Y)


# -- bounded transform ---------------------------------------------------------

def bounded_transform(Dmat, domain: np.ndarray | None = None, inner: InnerProduct | None = None,
                      algebra: AlgebraModel | None = None, graded: bool = True, parent=None) -> FredholmData:
    """F = D_dom (1 + D_dom* D_dom)^{-1/2}, D_dom = D on span(domain) extended by zero."""
    D = np.asarray(Dmat, dtype=complex)
    n = D.shape[0]
    inner = inner or InnerProduct.euclidean(n)
    Y = domain
    Yb = inner.from_ortho(np.eye(n, dtype=complex)) if Y is None else Y
    S = Yb.conj().T @ (inner.gram @ D - D.conj().T @ inner.gram) @ Yb
    scale = max(np.linalg.norm(inner.similar(D), 2), 1e-300)
    sym = float(np.linalg.norm(S, 2) / scale) if S.size else 0.0
    if sym > TOL:
        raise StructuralError(f"operator is not symmetric on the domain (residual {sym:.2e})", sym)
    T = inner.similar(D) @ _domain_projector(inner, Y)
    Fo = _transform(T)
    F = inner.unsimilar(Fo)
    info = {"norm": float(np.linalg.norm(Fo, 2)), "symmetry_residual": sym}
    if algebra is not None:
        comm, adj, sq = {}, {}, {}
        Fs = Fo.conj().T
        for e in algebra:
            a = inner.similar(e.matrix)
            comm[e.name] = float(np.linalg.norm(graded_commutator(Fo, a, e.degree, 1, graded), 2))
            if e.ideal:
                adj[e.name] = float(np.linalg.norm(a @ (Fo - Fs), 2))
                sq[e.name] = float(np.linalg.norm(a @ (np.eye(n) - Fo @ Fo), 2))
        info.update(commutators=comm, ideal_adjoint_defect=adj, ideal_square_defect=sq)
    return FredholmData(F, "bounded-transform", parent, inner, info)


def minimal_transform(model: GreenOperatorModel, algebra: AlgebraModel | None = None) -> FredholmData:
    return bounded_transform(model.D, model.kernel_R(), model.inner, algebra, model.graded, model)


def extension_transform(model: GreenOperatorModel, L: ExtensionSubspace,
                        algebra: AlgebraModel | None = None) -> FredholmData:
    return bounded_transform(model.D, extension_domain(model, L), model.inner, algebra, model.graded, model)


def adjoint_transform_checks(model: GreenOperatorModel, domain: np.ndarray | None = None) -> list[CheckReport]:
    """F_{D*} = (F_D)* and the straight-line path between them stays in the unit ball."""
    T = _restricted(model, domain if domain is not None else model.kernel_R())
    F = _transform(T)
    Fs = T.conj().T @ _sqrt_inv_shift(T @ T.conj().T, 1.0)
    out = [CheckReport.make("adjoint_transform_identity", np.linalg.norm(Fs - F.conj().T, 2), TOL, 0.0)]
    worst = max(np.linalg.norm(t * F + (1 - t) * Fs, 2) for t in (0.0, 0.25, 0.5, 0.75, 1.0))
    out.append(CheckReport.make("adjoint_homotopy_norm", worst, 1.0 + 1e-9, 0.0))
    return out


# -- integral formula for fractional powers --------------------------------------

def quadrature_rule(m: int, scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes lambda_i and weights for int_0^inf g(lambda) dlambda after lambda = scale tan^2 s, midpoint in s."""
    if m < 1:
        raise ValueError("need at least one node")
    if not scale > 0:
        raise ValueError("scale must be positive")
    h = 0.5 * np.pi / m
    s = (np.arange(m) + 0.5) * h
    lam = scale * np.tan(s) ** 2
    w = scale * 2.0 * np.tan(s) / np.cos(s) ** 2 * h
    return lam, w


def fractional_quadrature(T, m: int = 200, inner: InnerProduct | None = None,
                          scale: float | None = None) -> np.ndarray:
    """(1/pi) sum_i w_i lambda_i^{-1/2} (1 + lambda_i + T)^{-1}, approximating (1 + T)^{-1/2}.

    In s the integrand for an eigenvalue t is 2c / (c^2 cos^2 s + (1 + t) sin^2 s) up to
    the factor c = scale, whose poles sit about min(c, (1+t)/c)^(1/2) / (1+t)^(1/2) off
    the real axis; the default c = (1 + ||T||)^(1/2) balances both ends of the spectrum.
    """
    T = np.asarray(T, dtype=complex)
    n = T.shape[0]
    if inner is not None:
        T = inner.similar(T)
    ev = np.linalg.eigvalsh(0.5 * (T + T.conj().T))
    if ev.size and ev[0] < -1e-10 * max(abs(ev[-1]), 1.0):
        raise StructuralError("operator is not positive semi-definite", float(ev[0]))
    if scale is None:
        scale = float(np.sqrt(1.0 + max(ev[-1], 0.0))) if ev.size else 1.0
    lam, w = quadrature_rule(m, scale)
    I = np.eye(n)
    acc = np.zeros((n, n), dtype=complex)
    for li, wi in zip(lam, w):
        acc += wi * li ** -0.5 * np.linalg.solve((1.0 + li) * I + T, I)
    out = acc / np.pi
    return inner.unsimilar(out) if inner is not None else out


def quadrature_error(T, m: int, inner: InnerProduct | None = None, scale: float | None = None) -> float:
    T = np.asarray(T, dtype=complex)
    To = inner.similar(T) if inner is not None else T
    exact = _sqrt_inv_shift(To, 1.0)
    approx = fractional_quadrature(To, m, scale=scale)
    return float(np.linalg.norm(approx - exact, 2))


def quadrature_transform(model: GreenOperatorModel, domain: np.ndarray | None, m: int,
                         scale: float | None = None) -> np.ndarray:
    """F from the quadrature formula, in the model's coordinates."""
    T = _restricted(model, domain)
    return model.inner.unsimilar(T @ fractional_quadrature(T.conj().T @ T, m, scale=scale))


# -- resolvent bounds ---------------------------------------------------------------

def domain_bounds_check(model: GreenOperatorModel, lambdas=LAMBDA_GRID, domain: np.ndarray | None = None,
                        label: str = "minimal") -> list[CheckReport]:
    """Norm bounds for D(1+l+D*D)^{-1/2} and (1+l+D*D)^{-1/2}, and the adjoint identity."""
    T = _restricted(model, domain if domain is not None else model.kernel_R())
    S = T.conj().T @ T
    out = []
    for lam in lambdas:
        Q = _sqrt_inv_shift(S, 1.0 + lam)
        out.append(CheckReport.make(f"domain_bound_transform_{label}_l{lam:g}", np.linalg.norm(T @ Q, 2), 1.0, 1e-12,
                                    lam=float(lam)))
        out.append(CheckReport.make(f"domain_bound_resolvent_{label}_l{lam:g}", np.linalg.norm(Q, 2),
                                    (1.0 + lam) ** -0.5, 1e-12, lam=float(lam)))
    F = _transform(T)
    Fs = T.conj().T @ _sqrt_inv_shift(T @ T.conj().T, 1.0)
    out.append(CheckReport.make(f"domain_adjoint_identity_{label}", np.linalg.norm(F.conj().T - Fs, 2), TOL, 0.0))
    return out


def _lift_element(model: GreenOperatorModel, a) -> tuple[np.ndarray, int, str, bool]:
    if isinstance(a, AlgebraElement):
        return model.inner.similar(a.matrix), a.degree, a.name, a.ideal
    return model.inner.similar(np.asarray(a, dtype=complex)), 0, "a", False


def adjoint_bound_check(model: GreenOperatorModel, j: AlgebraElement, L: ExtensionSubspace,
                        lambdas=LAMBDA_GRID) -> list[CheckReport]:
    """|| j D R_min - R_L j D || <= 2 ||[D, j]|| / (1 + l), with the two-term identity checked exactly.

    In finite dimensions the extension is not literally contained in the adjoint
    of the minimal operator, so the identity carries two defect terms built from
    (D_L - D_min*) and (D_L* - D_min); both are evaluated and reported.
    """
    if not getattr(j, "ideal", False):
        raise StructuralError(f"element {getattr(j, 'name', '?')} is not in the ideal")
    from .extensions import isotropy_witness
    iso = isotropy_witness(model, L)
    if iso > 1e-10:
        raise StructuralError(f"extension subspace is not isotropic ({iso:.2e})", iso)
    ip = model.inner
    n = model.N
    I = np.eye(n)
    X = _restricted(model, model.kernel_R())
    Y = _restricted(model, extension_domain(model, L))
    A, B = X.conj().T, Y.conj().T
    jo, deg, name, _ = _lift_element(model, j)
    sgn = (-1) ** deg if model.graded else 1
    cD = graded_commutator(ip.similar(model.D), jo, deg, 1, model.graded)
    cX = graded_commutator(X, jo, deg, 1, model.graded)
    cA = graded_commutator(A, jo, deg, 1, model.graded)
    cnorm = float(np.linalg.norm(cD, 2))
    out = []
    worst_id = 0.0
    for lam in lambdas:
        R = np.linalg.inv((1 + lam) * I + A @ X)
        S = np.linalg.inv((1 + lam) * I + B @ Y)
        Sp = np.linalg.inv((1 + lam) * I + Y @ B)
        lhs = jo @ X @ R - S @ jo @ X
        rhs = B @ Sp @ cA @ X @ R + sgn * S @ cX @ A @ X @ R
        defect = B @ Sp @ (Y - A) @ jo @ X @ R + sgn * S @ (B - X) @ jo @ A @ X @ R
        resid = float(np.linalg.norm(lhs - rhs - defect, 2) / max(np.linalg.norm(lhs, 2), 1.0))
        worst_id = max(worst_id, resid)
        bound = 2.0 * cnorm / (1.0 + lam)
        out.append(CheckReport.make(f"adjoint_bound_l{lam:g}", np.linalg.norm(lhs, 2), bound, 1e-12, lam=float(lam),
                                    element=name, defect=float(np.linalg.norm(defect, 2)),
                                    ratio=float(np.linalg.norm(lhs, 2) / bound) if bound > 0 else 0.0))
    out.append(CheckReport.make("adjoint_bound_identity", worst_id, TOL, 0.0, element=name))
    return out


def commutator_identity_check(model: GreenOperatorModel, a, lam: float = 1.0) -> CheckReport:
    """[(1+l+D*D)^{-1}, a] = -D*(1+l+DD*)^{-1}[D,a] R - (-1)^deg R [D*,a] D R for the minimal operator."""
    ip = model.inner
    Y0 = model.kernel_R()
    am = a.matrix if isinstance(a, AlgebraElement) else np.asarray(a, dtype=complex)
    pres = float(np.linalg.norm(model.R @ am @ Y0, 2) / max(np.linalg.norm(am, 2), 1e-300)) if model.b else 0.0
    if pres > TOL:
        raise StructuralError(f"element does not preserve the minimal domain (residual {pres:.2e})", pres)
    ao, deg, name, _ = _lift_element(model, a)
    n = model.N
    I = np.eye(n)
    X = _restricted(model, Y0)
    A = X.conj().T
    sgn = (-1) ** deg if model.graded else 1
    R = np.linalg.inv((1 + lam) * I + A @ X)
    Rp = np.linalg.inv((1 + lam) * I + X @ A)
    lhs = R @ ao - ao @ R
    cX = graded_commutator(X, ao, deg, 1, model.graded)
    cA = graded_commutator(A, ao, deg, 1, model.graded)
    rhs = -A @ Rp @ cX @ R - sgn * R @ cA @ X @ R
    scale = max(np.linalg.norm(ao, 2) * (1 + np.linalg.norm(X, 2)) ** 2, 1.0)
    return CheckReport.make(f"commutator_identity_{name}_l{lam:g}", np.linalg.norm(lhs - rhs, 2) / scale, TOL, 0.0,
                            lhs_norm=float(np.linalg.norm(lhs, 2)))


def bounds_csv(reports: list[CheckReport]) -> str:
    """lambda, measured, bound, ratio for the reports that carry a lambda."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["name", "lambda", "measured", "bound", "ratio"])
    for r in reports:
        if "lam" in r.context:
            ratio = r.measured / r.bound if r.bound else float("nan")
            w.writerow([r.name, repr(r.context["lam"]), repr(r.measured), repr(r.bound), repr(ratio)])
    return buf.getvalue()


# -- phase -----------------------------------------------------------------------

def phase(model: GreenOperatorModel, L: ExtensionSubspace | None = None, algebra: AlgebraModel | None = None,
          rcut: float = 1e-10) -> FredholmData:
    """Partial isometry V with D_L = V |D_L| and its homotopy to the bounded transform."""
    Y = extension_domain(model, L) if L is not None else None
    T = _restricted(model, Y)
    U, s, Wh = np.linalg.svd(T)
    top = s[0] if s.size else 0.0
    r = int(np.sum(s > rcut * top)) if top > 0 else 0
    warn = bool(np.any((s > 1e-12 * top) & (s < 1e-8 * top))) if top > 0 else False
    V = U[:, :r] @ Wh[:r]
    n = model.N
    Pk = np.eye(n) - Wh[:r].conj().T @ Wh[:r]  # kernel of T
    Pks = np.eye(n) - U[:, :r] @ U[:, :r].conj().T  # kernel of T*
    F = _transform(T)
    info = {
        "rank": r,
        "warning": warn,
        "initial_residual": float(np.linalg.norm(V.conj().T @ V + Pk - np.eye(n), 2)),
        "final_residual": float(np.linalg.norm(V @ V.conj().T + Pks - np.eye(n), 2)),
        "homotopy_norm": float(max(np.linalg.norm(t * V + (1 - t) * F, 2) for t in np.linspace(0, 1, 5))),
    }
    if algebra is not None:
        info["compact_difference"] = {e.name: float(np.linalg.norm(model.inner.similar(e.matrix) @ (V - F), 2))
                                      for e in algebra}
    return FredholmData(model.inner.unsimilar(V), "phase", model, model.inner, info)


def phase_checks(fd: FredholmData) -> list[CheckReport]:
    i = fd.info
    return [CheckReport.make("phase_initial_projection", i["initial_residual"], TOL, 0.0, rank=i["rank"]),
            CheckReport.make("phase_final_projection", i["final_residual"], TOL, 0.0),
            CheckReport.make("phase_homotopy_norm", i["homotopy_norm"], 1.0 + 1e-9, 0.0, warning=i["warning"])]


# -- index of compressions -----------------------------------------------------------

@dataclass(frozen=True)
class IndexResult:
    index: int
    kernel: int
    cokernel: int
    gap: float
    discarded_kernel: int = 0
    discarded_cokernel: int = 0


def _localized_count(B: np.ndarray, edge: np.ndarray | None) -> tuple[int, int]:
    """(interior, edge) dimensions of the subspace spanned by the orthonormal columns of B."""
    d = B.shape[1]
    if d == 0 or edge is None:
        return d, 0
    inside = B[~edge]
    s = np.linalg.svd(inside, compute_uv=False) if inside.size else np.zeros(0)
    k = int(np.sum(s ** 2 > 0.5))
    return k, d - k


def compression_index(M: np.ndarray, edge_rows: np.ndarray | None = None, edge_cols: np.ndarray | None = None,
                      min_gap: float = INDEX_GAP, rtol: float | None = None) -> IndexResult:
    """dim ker - dim coker of M, counting only vectors not concentrated on the truncation edge.

    Singular values below rtol * s_max count as zero (default sqrt(eps)); the index is
    stable under perturbations smaller than that cut as long as the gap survives.
    """
    M = np.asarray(M, dtype=complex)
    m, n = M.shape
    if m == 0 or n == 0:
        return IndexResult(n - m, n, m, np.inf)
    U, s, Wh = np.linalg.svd(M)
    top = s[0] if s.size else 0.0
    eps = np.finfo(float).eps * max(m, n) * max(top, 1.0)
    cut = np.sqrt(np.finfo(float).eps) if rtol is None else rtol
    small = s < cut * max(top, 1e-300)
    r = int(np.sum(~small))
    retained = s[:r].min() if r else np.inf
    dropped = s[r:].max() if s[r:].size else 0.0
    gap = float(retained / max(dropped, eps)) if r else np.inf
    if gap < min_gap:
        raise StructuralError(f"rank decision ill-conditioned: singular-value gap {gap:.2e} < {min_gap:.0e}", gap)
    K = Wh[r:].conj().T
    C = U[:, r:]
    k_in, k_edge = _localized_count(K, edge_cols)
    c_in, c_edge = _localized_count(C, edge_rows)
    return IndexResult(k_in - c_in, k_in, c_in, gap, k_edge, c_edge)


def busby_index(P, u, edge: np.ndarray | None = None, min_gap: float = INDEX_GAP,
                rtol: float | None = None) -> IndexResult:
    """Index of P u P + (1 - P), i.e. of P u P restricted to the range of the idempotent P."""
    P = np.asarray(P, dtype=complex)
    u = np.asarray(u, dtype=complex)
    n = P.shape[0]
    if n == 0:
        return IndexResult(0, 0, 0, np.inf)
    U, s, _ = np.linalg.svd(P)
    r = int(np.sum(s > 1e-8 * max(s[0], 1e-300))) if s.size else 0
    if r == 0:
        return IndexResult(0, 0, 0, np.inf)
    Q = U[:, :r]  # basis of ran P
    # left inverse of Q that vanishes on ker P: coordinates of P x in the basis Q
    Lq = np.linalg.pinv(Q) @ P
    M = Lq @ u @ Q
    e = None if edge is None else np.asarray(edge, bool)
    if e is not None:
        w = np.abs(Q) ** 2
        e = (w[e].sum(axis=0) > 0.5)
    return compression_index(M, e, e, min_gap, rtol)


# -- doubling up a relative Fredholm module ---------------------------------------

@dataclass(frozen=True, eq=False)
class DoubledUp:
    H: np.ndarray
    T: np.ndarray
    ker_T: np.ndarray  # orthonormal basis (orthonormal coordinates of the even part)
    ker_Ts: np.ndarray
    residuals: dict


def _even_odd(model: GreenOperatorModel) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal bases (in orthonormal coordinates) of the +1 and -1 grading eigenspaces."""
    g = model.inner.similar(model.gamma)
    w, V = np.linalg.eigh(0.5 * (g + g.conj().T))
    return V[:, w > 0], V[:, w < 0]


def double_up(F: np.ndarray, Ep: np.ndarray, Em: np.ndarray, kernel_rtol: float = 1e-8) -> DoubledUp:
    """Self-adjoint H obtained by doubling up F (orthonormal coordinates) with grading parts Ep, Em."""
    T = Em.conj().T @ F @ Ep
    nt = float(np.linalg.norm(T, 2)) if T.size else 0.0
    if nt > 1 + 1e-12:
        raise StructuralError(f"even-to-odd corner has norm {nt:.6f} > 1", nt)
    p, q = T.shape[1], T.shape[0]
    Ft = np.block([[np.zeros((p, p)), T.conj().T], [T, np.zeros((q, q))]])
    w, V = np.linalg.eigh(Ft)
    top = max(np.max(np.abs(w)), 1e-300) if w.size else 1.0
    kept = np.abs(w) > kernel_rtol * top
    Pk = V[:, ~kept] @ V[:, ~kept].conj().T
    root = (V * np.sqrt(np.clip(1.0 - w ** 2, 0.0, None))) @ V.conj().T @ (np.eye(p + q) - Pk)
    H = np.block([[Ft, root], [root, -Ft]])
    H2 = H @ H
    target = np.block([[np.eye(p + q) - Pk, np.zeros_like(Pk)], [np.zeros_like(Pk), np.eye(p + q) - Pk]])
    res = {"self_adjoint": float(np.linalg.norm(H - H.conj().T, 2)),
           "square_is_projector": float(np.linalg.norm(H2 @ H2 - H2, 2)),
           "square_formula": float(np.linalg.norm(H2 - target, 2)),
           "corner_norm": nt}
    kT = null_space(T, rtol=kernel_rtol) if p else np.zeros((0, 0))
    kTs = null_space(T.conj().T, rtol=kernel_rtol) if q else np.zeros((0, 0))
    return DoubledUp(H, T, kT, kTs, res)


def double_up_checks(du: DoubledUp) -> list[CheckReport]:
    r = du.residuals
    return [CheckReport.make("doubled_H_self_adjoint", r["self_adjoint"], TOL, 0.0),
            CheckReport.make("doubled_H_square_projector", r["square_is_projector"], TOL, 0.0),
            CheckReport.make("doubled_H_square_formula", r["square_formula"], TOL, 0.0),
            CheckReport.make("doubled_corner_contraction", r["corner_norm"], 1.0, 1e-12)]


# -- disc index routes ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModeIndexData:
    k: int
    pc_even: np.ndarray  # P_C compressed to the even boundary part
    even_basis: np.ndarray  # even boundary basis (boundary coordinates)
    Dd: np.ndarray  # odd reduction of the boundary operator
    node_x: np.ndarray
    node_comp: np.ndarray
    beta0: np.ndarray  # ker T in orthonormal node coordinates (full space)
    beta1: np.ndarray  # ker T* intersected with ker R
    beta1_discarded: int
    double_residuals: dict


def mode_index_data(scenario) -> ModeIndexData:
    m, nrm = scenario.model, scenario.normal
    k = scenario.meta["k"]
    bt = boundary_operator(m, nrm)
    E, Dd, _ = odd_reduction(bt)
    g = bt.space.metric.gram
    P = calderon_projector(m, nrm)
    pc = E.conj().T @ g @ P @ E
    # relative module through the transform of the maximal operator (homotopic to the minimal one)
    ip = m.inner
    Fo = _transform(ip.similar(m.D))
    Ep, Em = _even_odd(m)
    du = double_up(Fo, Ep, Em)
    b0 = Ep @ du.ker_T
    ks = Em @ du.ker_Ts
    if ks.shape[1]:
        # drop the boundary-rank part that the finite Hilbert adjoint adds to the minimal operator
        Rh = m.R @ ip.from_ortho(np.eye(m.N))
        Z = null_space(Rh @ ks, rtol=1e-8)
        b1 = ks @ Z if Z.shape[1] else np.zeros((m.N, 0))
        if b1.shape[1]:
            b1 = np.linalg.qr(b1)[0]
    else:
        b1 = ks
    return ModeIndexData(k, pc, E, Dd, scenario.meta["node_x"], scenario.meta["node_comp"], b0, b1,
                         ks.shape[1] - b1.shape[1], du.residuals)


@dataclass(frozen=True, eq=False)
class DiscIndexData:
    modes: tuple

    @property
    def ks(self) -> list[int]:
        return [d.k for d in self.modes]


def disc_index_data(disc) -> DiscIndexData:
    return DiscIndexData(tuple(mode_index_data(s) for s in disc.modes))


def _edge_modes(ks: list[int], width: int | None = None) -> set:
    lo, hi = min(ks), max(ks)
    w = width if width is not None else max(len(ks) // 4, 4)
    return {k for k in ks if k > hi - w or k < lo + w}


def _boundary_shift(data: DiscIndexData, m: int) -> tuple[np.ndarray, np.ndarray]:
    """Winding e^{i m theta} on the even boundary space (truncated), and the mode of each coordinate."""
    dims = [d.even_basis.shape[1] for d in data.modes]
    offs = np.r_[0, np.cumsum(dims)]
    where = {d.k: i for i, d in enumerate(data.modes)}
    n = offs[-1]
    U = np.zeros((n, n), dtype=complex)
    for i, d in enumerate(data.modes):
        j = where.get(d.k + m)
        if j is None:
            continue
        tgt = data.modes[j]
        # boundary coordinates carry over unchanged; express in the even bases
        U[offs[j]:offs[j + 1], offs[i]:offs[i + 1]] = np.linalg.pinv(tgt.even_basis) @ d.even_basis
    labels = np.concatenate([[d.k] * dd for d, dd in zip(data.modes, dims)])
    return U, labels


def _block_diag(blocks) -> np.ndarray:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n), dtype=complex)
    o = 0
    for b in blocks:
        s = b.shape[0]
        out[o:o + s, o:o + s] = b
        o += s
    return out


def calderon_index(data: DiscIndexData, m: int) -> IndexResult:
    U, labels = _boundary_shift(data, m)
    P = _block_diag([d.pc_even for d in data.modes])
    edge = np.isin(labels, list(_edge_modes(data.ks)))
    return busby_index(P, U, edge)


def _node_transfer(src: ModeIndexData, tgt: ModeIndexData, lift=None) -> np.ndarray:
    """Multiplication by the lift of e^{i m theta}: carries node values between angular modes."""
    out = np.zeros((tgt.node_x.size, src.node_x.size))
    for i, (x, c) in enumerate(zip(src.node_x, src.node_comp)):
        hit = np.nonzero((tgt.node_comp == c) & np.isclose(tgt.node_x, x, atol=1e-12))[0]
        if hit.size:
            out[hit[0], i] = 1.0 if lift is None else lift(x)
    return out


def kernel_compression(data: DiscIndexData, m: int, which: str = "beta0", lift=None) -> tuple[np.ndarray, np.ndarray]:
    """Compression of the winding lift to the assembled kernel spaces, with the mode of each coordinate."""
    bases = [getattr(d, which) for d in data.modes]
    dims = [b.shape[1] for b in bases]
    offs = np.r_[0, np.cumsum(dims)]
    where = {d.k: i for i, d in enumerate(data.modes)}
    n = offs[-1]
    M = np.zeros((n, n), dtype=complex)
    for i, d in enumerate(data.modes):
        j = where.get(d.k + m)
        if j is None or dims[i] == 0 or dims[j] == 0:
            continue
        Tm = _node_transfer(d, data.modes[j], lift)
        # orthonormal node coordinates share the quadrature weights at matching radii
        M[offs[j]:offs[j + 1], offs[i]:offs[i + 1]] = bases[j].conj().T @ Tm @ bases[i]
    labels = np.concatenate([[d.k] * dd for d, dd in zip(data.modes, dims)]) if n else np.zeros(0)
    return M, labels


def busby_route_index(data: DiscIndexData, m: int) -> tuple[IndexResult, IndexResult]:
    edge_modes = list(_edge_modes(data.ks))
    out = []
    for which in ("beta0", "beta1"):
        M, labels = kernel_compression(data, m, which)
        e = np.isin(labels, edge_modes)
        out.append(compression_index(M, e, e))
    return out[0], out[1]


def spectral_flow(A0: np.ndarray, A1: np.ndarray, steps: int = SF_STEPS, tol: float = CROSSING_TOL,
                  edge: np.ndarray | None = None) -> tuple[int, list]:
    """Net count of eigenvalues crossing zero upwards along the straight path A0 -> A1."""
    crossings = []

    def negatives(A):
        w, V = np.linalg.eigh(0.5 * (A + A.conj().T))
        neg = w < -tol
        if edge is None:
            return int(neg.sum()), w
        inside = np.sum(np.abs(V[~edge]) ** 2, axis=0) > 0.5
        return int(np.sum(neg & inside)), w

    prev, _ = negatives(A0)
    start = prev
    for i in range(1, steps + 1):
        t = i / steps
        cur, _ = negatives((1 - t) * A0 + t * A1)
        if cur != prev:
            crossings.append((i, prev - cur))
        prev = cur
    return start - prev, crossings


def boundary_pairing_index(data: DiscIndexData, m: int) -> tuple[int, list]:
    U, labels = _boundary_shift(data, m)
    Dd = _block_diag([d.Dd for d in data.modes])
    edge = np.isin(labels, list(_edge_modes(data.ks)))
    return spectral_flow(Dd, U @ Dd @ U.conj().T, edge=edge)


def index_routes(data: DiscIndexData, m: int) -> dict:
    """The winding-m index from the Calderon compression, the Busby extensions and the spectral flow."""
    pc = calderon_index(data, m)
    b0, b1 = busby_route_index(data, m)
    sf, crossings = boundary_pairing_index(data, m)
    return {"winding": m, "calderon": pc.index, "busby": b0.index - b1.index, "spectral_flow": sf,
            "gap": float(min(pc.gap, b0.gap, b1.gap)), "crossings": crossings,
            "beta1_discarded": int(sum(d.beta1_discarded for d in data.modes))}
