"""Scenario builders: interval and disc Dirac models, dimension drop, theta deformation."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
import math

import numpy as np

from .green_model import AlgebraElement, AlgebraModel, GreenOperatorModel
from .normal import CliffordNormal
from .numkernel import GradedSpace, InnerProduct, StructuralError, null_space
from .sbp import boundary_taper, derivative, smooth_step

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)

FAULTS = ("none", "scale", "hermitian", "zero", "tangential", "scramble", "gram")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "interval"
    N: int = 64
    modes: int = 4
    order: int = 2
    matrix_size: int = 2
    B_subalgebra: str = "diagonal"
    theta: tuple = ((0.0, math.pi / 3), (-math.pi / 3, 0.0))
    weights: tuple = ((0, 0), (1, 0))
    r_inner: float = 0.2
    seed: int = 0
    fault: str = "none"
    cone_points: tuple = ()  # per point: ((lambda, multiplicity, parity), ...); empty = built-in example
    cone_half: str = "refuse"

    def __post_init__(self):
        if self.N < 8:
            raise ValueError("N must be at least 8")
        if self.modes < 1:
            raise ValueError("modes must be at least 1")
        if self.order not in (2, 4):
            raise ValueError(f"unsupported SBP order {self.order}")
        th = np.asarray(self.theta, dtype=float)
        if th.shape != (2, 2) or np.max(np.abs(th + th.T)) > 0:
            raise ValueError("theta must be an antisymmetric 2x2 real matrix")
        if not 0.0 < self.r_inner < 1.0:
            raise ValueError("r_inner must lie in (0, 1)")
        if self.fault not in FAULTS:
            raise ValueError(f"unknown fault {self.fault!r}")
        if self.B_subalgebra not in ("diagonal", "full"):
            raise ValueError("B_subalgebra must be 'diagonal' or 'full'")
        if self.cone_half not in ("refuse", "include", "exclude"):
            raise ValueError("cone_half must be 'refuse', 'include' or 'exclude'")

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(d) - known
        if bad:
            raise ValueError(f"unknown config keys: {sorted(bad)}")
        d = dict(d)
        for key in ("theta", "weights"):
            if key in d:
                d[key] = tuple(tuple(row) for row in d[key])
        if "cone_points" in d:
            d["cone_points"] = tuple(tuple(tuple(e) for e in pt) for pt in d["cone_points"])
        return cls(**d)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["theta"] = [list(r) for r in self.theta]
        d["weights"] = [list(r) for r in self.weights]
        d["cone_points"] = [[list(e) for e in pt] for pt in self.cone_points]
        return d


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    config: ScenarioConfig
    model: GreenOperatorModel
    normal: CliffordNormal
    algebra: AlgebraModel
    grid: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def _bump(x: np.ndarray, a: float, b: float) -> np.ndarray:
    w = 0.5 * (b - a)
    return smooth_step((x - a) / w) * smooth_step((b - x) / w)


def _elements(fs: dict, lift, ideal: set, degree: int = 0) -> AlgebraModel:
    return AlgebraModel(tuple(AlgebraElement(k, lift(np.diag(v).astype(complex)), k in ideal, degree)
                              for k, v in fs.items()))


def _interval_functions(x: np.ndarray) -> dict:
    return {"one": np.ones_like(x), "x": x.copy(),
            "bump_a": _bump(x, 0.25, 0.5), "bump_b": _bump(x, 0.5, 0.75)}


# -- interval ---------------------------------------------------------------

def interval_scalar(cfg: ScenarioConfig) -> Scenario:
    """Ungraded model of -i d/dx on [0, 1]; b = 2 (the two endpoint values)."""
    N, h = cfg.N, 1.0 / (cfg.N - 1)
    x = np.linspace(0.0, 1.0, N)
    P, Dx = derivative(N, h, cfg.order)
    D = -1j * Dx
    R = np.zeros((2, N), dtype=complex)
    R[0, 0] = R[1, -1] = 1.0
    space = GradedSpace(InnerProduct(np.diag(P)), np.eye(N))
    model = GreenOperatorModel(space, D, R, InnerProduct.euclidean(2), np.diag([-1j, 1j]),
                               graded=False, labels=(0, 1), name="interval_scalar")
    chi = boundary_taper(N, cfg.order)
    V = chi - chi[::-1]
    normal = CliffordNormal(np.diag(-1j * V))
    alg = _elements(_interval_functions(x), lambda m: m, {"bump_a", "bump_b"})
    return Scenario("interval_scalar", cfg, model, normal, alg, x, {"h": h, "taper": V})


def interval_dirac(cfg: ScenarioConfig) -> Scenario:
    """Graded 2-component model on [0, 1], D = sigma_x (x) (-i d/dx); b = 4."""
    sc = interval_scalar(cfg)
    m = sc.model
    N = m.N
    G = np.kron(I2, m.G)
    D = np.kron(SX, m.D)
    R = np.kron(I2, m.R)
    space = GradedSpace(InnerProduct(G), np.kron(SZ, np.eye(N)))
    model = GreenOperatorModel(space, D, R, InnerProduct.euclidean(4), np.kron(SX, m.nu),
                               graded=True, labels=(0, 1, 0, 1), name="interval")
    V = sc.meta["taper"]
    n = np.kron(-1j * SX, np.diag(V))
    alg = _elements(_interval_functions(sc.grid), lambda a: np.kron(I2, a), {"bump_a", "bump_b"})
    scen = Scenario("interval", cfg, model, CliffordNormal(n), alg, sc.grid,
                    {"h": sc.meta["h"], "taper": V, "scalar": sc,
                     "node_x": np.tile(sc.grid, 2), "swap": np.kron(SX, np.eye(N))})
    return apply_fault(scen)


def twisted_derivative_eigenvalues(alpha: float, window: float) -> np.ndarray:
    """Eigenvalues of -i d/dx on [0,1] with f(1) = e^{i alpha} f(0) inside [-window, window]."""
    kmax = int(window / (2 * np.pi)) + 2
    ev = alpha + 2 * np.pi * np.arange(-kmax, kmax + 1)
    return np.sort(ev[np.abs(ev) <= window])


def doubled_interval_eigenvalues(window: float) -> np.ndarray:
    """Spectrum of the doubled interval: pi(k + 1/2), each with multiplicity two."""
    kmax = int(window / np.pi) + 2
    ev = np.pi * (np.arange(-kmax, kmax + 1) + 0.5)
    ev = ev[np.abs(ev) <= window]
    return np.sort(np.concatenate([ev, ev]))


# -- disc ---------------------------------------------------------------------

def _radial_blocks(N: int, h: float, order: int, r: np.ndarray, c: float):
    """Blocks A, B of the mode operator; the regular component keeps all N nodes.

    The singular component drops the innermost node, which closes the inner end:
    the regular block is N-1 by N with the regular solution as its kernel, the
    other block is its adjoint up to the outer-node term, and Green's identity
    only sees the outer node.
    """
    P, Dr = derivative(N, h, order)
    # d/dr - s/r discretized as w Dr w^-1 with w = r^s: the SBP boundary matrix
    # is unchanged (the weights cancel on the diagonal) and the sawtooth mode of
    # the central stencil no longer grows inward like r^-2s as with plain Dr - s/r.
    # The weight is frozen over the outer closure stencil so the outer rows of the
    # two blocks stay antisymmetric, as the normal compatibility condition needs.
    s0 = N - 1 - int(np.max(np.nonzero(Dr[-1][::-1])[0]))
    lr = np.log(np.minimum(r, r[s0]))
    # where the weight is frozen the s/r term is put back as a diagonal
    frozen = np.diag(np.where(r > r[s0], 1.0 / r, 0.0))
    conj = lambda s: Dr * np.exp(s * (lr[:, None] - lr[None, :])) - s * frozen
    J = np.eye(N)[:, 1:]  # inclusion of the N - 1 outer nodes
    if c > 0:
        A = -1j * J.T @ conj(c)  # on the regular (upper) component
        B = -1j * conj(-c) @ J
        Pa, Pb = P, P[1:]
    else:
        A = -1j * conj(c) @ J
        B = -1j * J.T @ conj(-c)
        Pa, Pb = P[1:], P
    return Pa, Pb, A, B


def disc_mode(cfg: ScenarioConfig, k: int) -> Scenario:
    """Radial model of angular mode k (spin offset 1/2) on [r_inner, 1]."""
    N = cfg.N
    r0 = cfg.r_inner
    h = (1.0 - r0) / (N - 1)
    r = np.linspace(r0, 1.0, N)
    c = k + 0.5
    Pa, Pb, A, B = _radial_blocks(N, h, cfg.order, r, c)
    na, nb = Pa.size, Pb.size
    ra, rb = r[N - na:], r[N - nb:]
    D = np.block([[np.zeros((na, na)), B], [A, np.zeros((nb, nb))]])
    G = np.diag(np.concatenate([Pa, Pb]))
    R = np.zeros((2, na + nb), dtype=complex)
    R[0, na - 1] = R[1, na + nb - 1] = 1.0
    space = GradedSpace(InnerProduct(G), np.diag(np.concatenate([np.ones(na), -np.ones(nb)])))
    model = GreenOperatorModel(space, D, R, InnerProduct.euclidean(2), 1j * SX,
                               graded=True, labels=(k, k), name=f"disc_mode_{k}")
    # node pairing a_j <-> b_j over the common outer nodes
    swap = np.zeros((na + nb, na + nb), dtype=complex)
    m = min(na, nb)
    swap[na - m:na, na + nb - m:] = np.eye(m)
    swap[na + nb - m:, na - m:na] = np.eye(m)
    chi = boundary_taper(N, cfg.order)[::-1]
    chi_all = np.concatenate([chi[N - na:], chi[N - nb:]])
    n = 1j * swap @ np.diag(chi_all)
    rr = np.concatenate([ra, rb])
    fs = {"one": np.ones_like(rr), "r": rr, "bump_a": _bump(rr, 0.35, 0.6), "bump_b": _bump(rr, 0.55, 0.8)}
    alg = _elements(fs, lambda a: a, {"bump_a", "bump_b"})
    regular = null_space(A if c > 0 else B, rtol=1e-10)[:, 0]
    regular = regular / regular[-1]
    full = np.zeros(na + nb, dtype=complex)
    if c > 0:
        full[:na] = regular
    else:
        full[na:] = regular
    return Scenario(f"disc_mode_{k}", cfg, model, CliffordNormal(n), alg, r,
                    {"k": k, "c": c, "h": h, "taper": chi, "regular": full,
                     "node_x": (rr - r0) / (1.0 - r0), "node_comp": np.r_[np.zeros(na, int), np.ones(nb, int)],
                     "swap": swap})


@dataclass(frozen=True, eq=False)
class DiscScenario:
    name: str
    config: ScenarioConfig
    modes: tuple  # Scenario per angular mode, k = -K..K

    @property
    def ks(self) -> list[int]:
        return [m.meta["k"] for m in self.modes]

    def mode(self, k: int) -> Scenario:
        for m in self.modes:
            if m.meta["k"] == k:
                return m
        raise KeyError(k)

    @property
    def boundary_labels(self) -> list[int]:
        return [k for k in self.ks for _ in range(2)]


def disc_dirac(cfg: ScenarioConfig, ks=None) -> DiscScenario:
    K = cfg.modes
    ks = list(range(-K, K + 1)) if ks is None else list(ks)
    modes = tuple(disc_mode(cfg, k) for k in ks)
    if cfg.fault == "scramble":
        # flip the normal on the mode of largest |k + 1/2|
        kmax = max(ks, key=lambda k: (abs(k + 0.5), k))
        modes = tuple(replace(m, normal=CliffordNormal(-m.normal.n)) if m.meta["k"] == kmax else m for m in modes)
    elif cfg.fault != "none":
        modes = tuple(apply_fault(m) for m in modes)
    return DiscScenario("disc", cfg, modes)


def disc_harmonic_oracle(c: float, r: np.ndarray) -> np.ndarray:
    """Regular continuum kernel profile on the half-density radial line."""
    return r ** abs(c)


# -- faults -------------------------------------------------------------------

def apply_fault(s: Scenario) -> Scenario:
    f = s.config.fault
    if f in ("none", "scramble", "gram"):
        return s
    n = s.normal.n
    m = s.model
    if f == "scale":
        n = 1.5 * n
    elif f == "zero":
        n = np.zeros_like(n)
    elif f == "hermitian":
        # self-adjoint odd perturbation supported away from the boundary
        x = s.meta["node_x"]
        n = n + 1e-3 * s.meta["swap"] @ np.diag(_bump(x, 0.3, 0.7))
    elif f == "tangential":
        # profile no longer constant across the boundary stencil; n^2 = -1 still holds on the boundary
        t = s.meta["node_x"]
        n = n @ np.diag(1.0 + 2.0 * t * (1.0 - t))
    return replace(s, normal=CliffordNormal(n), meta={**s.meta, "fault": f})


# -- dimension drop -----------------------------------------------------------

def _matrix_units(m: int, kind: str) -> list[tuple[int, int]]:
    if kind == "diagonal":
        return [(i, i) for i in range(m)]
    return [(i, j) for i in range(m) for j in range(m)]


def subalgebra_closure_residual(basis: list[np.ndarray]) -> float:
    """How far span(basis) is from being closed under products and adjoints."""
    A = np.stack([b.ravel() for b in basis], axis=1)
    worst = 0.0
    cands = [b.conj().T for b in basis] + [a @ b for a in basis for b in basis]
    for c in cands:
        coef, *_ = np.linalg.lstsq(A, c.ravel(), rcond=None)
        worst = max(worst, float(np.linalg.norm(A @ coef - c.ravel()) / max(np.linalg.norm(c), 1.0)))
    return worst


def dimension_drop(cfg: ScenarioConfig, B_basis: list[np.ndarray] | None = None) -> Scenario:
    """Interval spinor model tensored with C^m; boundary values constrained to a *-subalgebra B."""
    mm = cfg.matrix_size
    if B_basis is None:
        units = _matrix_units(mm, cfg.B_subalgebra)
        B_basis = []
        for (i, j) in units:
            E = np.zeros((mm, mm), dtype=complex)
            E[i, j] = 1.0
            B_basis.append(E)
    res = subalgebra_closure_residual(B_basis)
    if res > 1e-10:
        raise StructuralError(f"B is not a *-subalgebra (closure residual {res:.2e})", res)
    base = interval_dirac(replace(cfg, fault="none"))
    full = amplify(base, mm)
    x = base.grid
    N = len(x)
    Bspan = np.stack([b.ravel() for b in B_basis], axis=1)
    els = []
    fs = _interval_functions(x)
    for i in range(mm):
        for j in range(mm):
            E = np.zeros((mm, mm), dtype=complex)
            E[i, j] = 1.0
            coef, *_ = np.linalg.lstsq(Bspan, E.ravel(), rcond=None)
            in_B = np.linalg.norm(Bspan @ coef - E.ravel()) < 1e-12
            for fname, f in fs.items():
                ideal = fname.startswith("bump")
                if not in_B and not ideal:
                    continue
                mat = np.kron(np.kron(I2, np.diag(f)), E)
                els.append(AlgebraElement(f"{fname}_E{i}{j}", mat.astype(complex), ideal, 0))
    alg = AlgebraModel(tuple(els))
    scen = replace(full, name="dimension_drop", algebra=alg,
                   meta={**full.meta, "B_basis": B_basis, "full": full, "base": base, "pullback": "inclusion"})
    return scen


def amplify(s: Scenario, m: int) -> Scenario:
    """Tensor a scenario with the full matrix algebra M_m acting on C^m."""
    mod = s.model
    Im = np.eye(m)
    space = GradedSpace(InnerProduct(np.kron(mod.G, Im)), np.kron(mod.gamma, Im))
    model = GreenOperatorModel(space, np.kron(mod.D, Im), np.kron(mod.R, Im),
                               InnerProduct(np.kron(mod.bmetric.gram, Im)), np.kron(mod.nu, Im),
                               graded=mod.graded, labels=tuple(l for l in mod.labels for _ in range(m)),
                               name=f"{mod.name}_x{m}")
    n = CliffordNormal(np.kron(s.normal.n, Im))
    els = []
    for e in s.algebra:
        for i in range(m):
            for j in range(m):
                E = np.zeros((m, m))
                E[i, j] = 1.0
                els.append(AlgebraElement(f"{e.name}_E{i}{j}", np.kron(e.matrix, E), e.ideal, e.degree))
    return Scenario(f"{s.name}_x{m}", s.config, model, n, AlgebraModel(tuple(els)), s.grid, dict(s.meta))


# -- theta deformation --------------------------------------------------------

def weighted_scenario(cfg: ScenarioConfig) -> Scenario:
    """Interval spinor model tensored with internal weight states; elements f (x) E_kl carry weight w_k - w_l."""
    W = np.asarray(cfg.weights, dtype=int)
    m = W.shape[0]
    base = interval_dirac(replace(cfg, fault="none"))
    amp = amplify(base, m)
    els = []
    for e in amp.algebra:
        i, j = int(e.name[-2]), int(e.name[-1])
        els.append(AlgebraElement(e.name, e.matrix, e.ideal, e.degree, tuple(int(t) for t in W[i] - W[j])))
    weight_op = [np.kron(np.eye(amp.model.N // m), np.diag(W[:, a]).astype(complex)) for a in range(W.shape[1])]
    return replace(amp, name="weighted", algebra=AlgebraModel(tuple(els)),
                   meta={**amp.meta, "weights": W, "weight_ops": weight_op})


def theta_deform(s: Scenario, theta) -> Scenario:
    """Twist every weight-p element a into a U_theta(p), U_theta(p) = exp(i theta(p, weight))."""
    th = np.asarray(theta, dtype=float)
    if th.shape != (2, 2) or np.max(np.abs(th + th.T)) > 1e-15:
        raise ValueError("theta must be antisymmetric")
    ops = s.meta.get("weight_ops")
    if ops is None:
        raise StructuralError("scenario carries no weight decomposition")
    D = s.model.D
    for W in ops:
        r = np.linalg.norm(D @ W - W @ D) + np.linalg.norm(s.normal.n @ W - W @ s.normal.n)
        if r > 1e-12:
            raise StructuralError(f"operator does not commute with the weight decomposition ({r:.2e})", r)
    wdiag = np.stack([np.real(np.diag(W)) for W in ops], axis=1)
    els = []
    for e in s.algebra:
        p = np.asarray(e.weight, dtype=float)
        phase = np.exp(1j * (wdiag @ (th.T @ p)))  # theta(p, w) = p^T theta w
        els.append(replace(e, matrix=e.matrix * phase[None, :]))
    return replace(s, name=f"{s.name}_theta", algebra=AlgebraModel(tuple(els)), meta={**s.meta, "theta": th})
