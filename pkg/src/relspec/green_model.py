"""Finite models of a symmetric operator with an exact discrete Green identity."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable

import numpy as np

from .numkernel import (GradedSpace, InnerProduct, StructuralError, adjoint_wrt, as_matrix,
                        null_space, opnorm, orthonormal_basis)

GREEN_TOL = 1e-12


@dataclass
class CheckReport:
    name: str
    passed: bool
    measured: float
    bound: float
    tolerance: float
    context: dict = field(default_factory=dict)

    @classmethod
    def make(cls, name: str, measured: float, bound: float, tolerance: float = 0.0, **context) -> "CheckReport":
        measured = float(measured)
        ok = bool(np.isfinite(measured) and measured <= bound + tolerance)
        return cls(name, ok, measured, float(bound), float(tolerance), dict(context))

    @classmethod
    def at_least(cls, name: str, value: float, minimum: float, **context) -> "CheckReport":
        # lower bounds are stored negated so that passed <=> measured <= bound
        return cls.make(name, -float(value), -float(minimum), 0.0, sense="lower", value=float(value), **context)

    @property
    def warning(self) -> bool:
        return bool(self.context.get("warning", False))

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "measured": self.measured,
                "bound": self.bound, "tolerance": self.tolerance, "context": self.context}


@dataclass(frozen=True, eq=False)
class GreenOperatorModel:
    space: GradedSpace
    D: np.ndarray
    R: np.ndarray
    bmetric: InnerProduct
    nu: np.ndarray
    graded: bool = True
    labels: tuple = ()
    name: str = "model"

    def __post_init__(self):
        D = as_matrix(self.D)
        n = self.space.dim
        if D.shape != (n, n):
            raise StructuralError("D has wrong shape")
        R = np.asarray(self.R, dtype=complex).reshape(-1, n)
        b = R.shape[0]
        if self.bmetric.dim != b:
            raise StructuralError("bmetric does not match the number of boundary coordinates")
        nu = np.asarray(self.nu, dtype=complex).reshape(b, b)
        object.__setattr__(self, "D", D)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "nu", nu)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(b)))

    @property
    def N(self) -> int:
        return self.space.dim

    @property
    def b(self) -> int:
        return self.R.shape[0]

    @property
    def inner(self) -> InnerProduct:
        return self.space.inner

    @property
    def G(self) -> np.ndarray:
        return self.space.inner.gram

    @property
    def gamma(self) -> np.ndarray:
        return self.space.grading

    def omega(self) -> np.ndarray:
        """Matrix of w(x, y) = <x, Dy> - <Dx, y> in boundary coordinates: w = c^H Omega d."""
        return -self.bmetric.gram @ self.nu

    def green_defect(self) -> np.ndarray:
        G, D, R = self.G, self.D, self.R
        return D.conj().T @ G - G @ D - R.conj().T @ self.bmetric.gram @ self.nu @ R

    def green_residual(self) -> float:
        G, D = self.G, self.D
        scale = np.linalg.norm(G, 2) * np.linalg.norm(D, 2) + 1e-300
        return float(np.linalg.norm(self.green_defect(), 2) / scale)

    def boundary_grading(self) -> np.ndarray:
        """gamma pushed to boundary coordinates (R gamma R^+)."""
        return self.R @ self.gamma @ np.linalg.pinv(self.R)

    def boundary_pushforward(self, a: np.ndarray) -> np.ndarray:
        return self.R @ a @ np.linalg.pinv(self.R)

    def kernel_R(self) -> np.ndarray:
        if self.b == 0:
            return self.inner.from_ortho(np.eye(self.N, dtype=complex))
        return null_space(self.R, self.inner, rtol=1e-12)

    def lift(self, c: np.ndarray) -> np.ndarray:
        """Minimal-norm (w.r.t. G) preimage of boundary data c."""
        G = self.G
        Rs = np.linalg.solve(G, self.R.conj().T)  # G^{-1} R^H
        return Rs @ np.linalg.solve(self.R @ Rs, c)

    def with_(self, **kw) -> "GreenOperatorModel":
        args = dict(space=self.space, D=self.D, R=self.R, bmetric=self.bmetric, nu=self.nu,
                    graded=self.graded, labels=self.labels, name=self.name)
        args.update(kw)
        return GreenOperatorModel(**args)


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    name: str
    matrix: np.ndarray
    ideal: bool = False
    degree: int = 0
    weight: tuple = ()


@dataclass(frozen=True, eq=False)
class AlgebraModel:
    elements: tuple

    def __iter__(self):
        return iter(self.elements)

    def __len__(self):
        return len(self.elements)

    def get(self, name: str) -> AlgebraElement:
        for e in self.elements:
            if e.name == name:
                return e
        raise KeyError(name)

    def names(self) -> list[str]:
        return [e.name for e in self.elements]

    def non_ideal(self) -> list[AlgebraElement]:
        return [e for e in self.elements if not e.ideal]

    def ideal(self) -> list[AlgebraElement]:
        return [e for e in self.elements if e.ideal]

    def lip_norms(self, model: GreenOperatorModel) -> dict[str, float]:
        return {e.name: opnorm(e.matrix, model.inner) + opnorm(graded_commutator(model.D, e.matrix, e.degree), model.inner)
                for e in self.elements}


def graded_commutator(x: np.ndarray, a: np.ndarray, deg_a: int, deg_x: int = 1, graded: bool = True) -> np.ndarray:
    """[x, a]_± = x a - (-1)^{deg x deg a} a x (plain commutator when ungraded)."""
    sign = (-1) ** (deg_x * deg_a) if graded else 1
    return x @ a - sign * (a @ x)


def boundary_form(model: GreenOperatorModel, xi, eta) -> complex:
    xi = np.asarray(xi, dtype=complex)
    eta = np.asarray(eta, dtype=complex)
    return model.inner.dot(xi, model.D @ eta) - model.inner.dot(model.D @ xi, eta)


def minimal_operator(model: GreenOperatorModel) -> tuple[np.ndarray, np.ndarray]:
    Y = model.kernel_R()
    return Y, model.D @ Y


def validate_model(model: GreenOperatorModel, algebra: AlgebraModel | None = None) -> list[CheckReport]:
    out = []
    out.append(CheckReport.make("green_identity", model.green_residual(), GREEN_TOL, 0.0, N=model.N, b=model.b))
    b = model.b
    rank = int(np.linalg.matrix_rank(model.R, tol=1e-10 * max(np.linalg.norm(model.R, 2), 1e-300))) if b else 0
    out.append(CheckReport.make("trace_surjective", b - rank, 0, 0.0, rank=rank, b=b))
    gam = model.gamma
    if model.graded:
        r = opnorm(model.D @ gam + gam @ model.D, model.inner) / max(opnorm(model.D, model.inner), 1e-300)
        out.append(CheckReport.make("D_odd", r, GREEN_TOL, 0.0))
    if b:
        M = model.bmetric
        nu_star = adjoint_wrt(model.nu, M, M)
        out.append(CheckReport.make("nu_anti_self_adjoint", opnorm(nu_star + model.nu, M), GREEN_TOL, 0.0))
        out.append(CheckReport.make("nu_square", opnorm(model.nu @ model.nu + np.eye(b), M), GREEN_TOL, 0.0))
        s = np.linalg.svd(model.omega(), compute_uv=False)
        out.append(CheckReport.at_least("boundary_form_nondegenerate", s[-1], 1e-8))
    if algebra is not None and len(algebra):
        Y0 = model.kernel_R()
        scale = max(np.linalg.norm(model.R, 2), 1e-300)
        pres = max(np.linalg.norm(model.R @ e.matrix @ Y0, 2) / (scale * max(np.linalg.norm(e.matrix, 2), 1e-300))
                   for e in algebra)
        out.append(CheckReport.make("algebra_preserves_minimal_domain", pres, 1e-10, 0.0))
        ideal = [e for e in algebra if e.ideal]
        r = max((np.linalg.norm(model.R @ e.matrix, 2) / scale for e in ideal), default=0.0)
        out.append(CheckReport.make("ideal_maps_into_minimal_domain", r, 1e-10, 0.0, count=len(ideal)))
        out.append(CheckReport.make("algebra_star_closed", star_closure_residual(algebra, model.inner), 1e-10, 0.0))
    return out


def star_closure_residual(algebra: AlgebraModel, inner: InnerProduct) -> float:
    mats = [e.matrix for e in algebra]
    A = np.stack([m.ravel() for m in mats], axis=1)
    worst = 0.0
    for m in mats:
        s = adjoint_wrt(m, inner, inner).ravel()
        coef, *_ = np.linalg.lstsq(A, s, rcond=None)
        worst = max(worst, float(np.linalg.norm(A @ coef - s) / max(np.linalg.norm(s), 1e-300)))
    return worst


def all_passed(reports: Iterable[CheckReport]) -> bool:
    return all(r.passed for r in reports if not r.warning)


def report_map(reports: Iterable[CheckReport]) -> dict[str, CheckReport]:
    return {r.name: r for r in reports}
