"""Check suites per registered scenario: a flat list of CheckReports plus CSV tables."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import conical
from .boundary_op import (boundary_operator, check_assumption6, check_equivalences, equivalence_verdict,
                          odd_reduction)
from .calderon import calderon_checks, compare_pge_pc
from .doubling import build_double, double_checks, functoriality_residual, kernel_distance
from .extensions import (adjoint_duality_checks, classify, extension_operator, lagrangian_search,
                         quasi_periodic, spectrum_error, subspace)
from .green_model import CheckReport, all_passed, validate_model
from .khomology import (LAMBDA_GRID, adjoint_bound_check, adjoint_transform_checks, bounds_csv,
                        commutator_identity_check, disc_index_data, domain_bounds_check, index_routes,
                        minimal_transform, phase, phase_checks, quadrature_transform)
from .models import (ScenarioConfig, amplify, dimension_drop, disc_dirac, doubled_interval_eigenvalues,
                     interval_dirac, interval_scalar, theta_deform, twisted_derivative_eigenvalues,
                     weighted_scenario)
from .normal import boundary_gram, boundary_space_checks, check_normal
from .numkernel import StructuralError, opnorm

QUAD_NODES = (25, 50, 100, 200)
QUAD_TOL = 1e-6
QUAD_FLOOR = 1e-12
ALPHAS = tuple(2 * np.pi * (j + 0.5) / 8 - np.pi for j in range(8))
SPECTRAL_WINDOW = 20.0
CONVERGENCE_N = (32, 64, 128, 256)
WINDINGS = (-3, -2, -1, 0, 1, 2, 3)


@dataclass
class SuiteResult:
    scenario: str
    reports: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # name -> (header, rows)

    def guard(self, stage: str, fn, *args, prefix: str = "", **kw):
        """Run fn and add its reports; a structural error becomes one failed report for the stage."""
        try:
            out = fn(*args, **kw)
        except (StructuralError, np.linalg.LinAlgError) as exc:
            res = getattr(exc, "residual", None)
            self.add([CheckReport.make(f"{stage}_structural", res if res else float("inf"), 0.0, 0.0,
                                       error=str(exc))], prefix)
            return None
        if out is not None:
            self.add(out, prefix)
        return out

    def add(self, reports, prefix: str = "") -> None:
        for r in reports:
            if prefix:
                r = replace(r, name=f"{prefix}{r.name}")
            self.reports.append(r)

    @property
    def passed(self) -> bool:
        return all_passed(self.reports)


# -- shared pieces ---------------------------------------------------------------

def quadrature_reports(model, nodes=QUAD_NODES, tol: float = QUAD_TOL, label: str = "") -> tuple[list, list]:
    """Bounded transform by eigendecomposition vs the resolvent-integral quadrature."""
    F = minimal_transform(model).F
    Y = model.kernel_R()
    errs = [opnorm(quadrature_transform(model, Y, m) - F, model.inner) for m in nodes]
    mono = all(b <= a or b <= QUAD_FLOOR for a, b in zip(errs, errs[1:]))
    reps = [CheckReport.make(f"quadrature_agreement{label}", errs[-1], tol, 0.0, nodes=nodes[-1]),
            CheckReport.make(f"quadrature_monotone{label}", 0.0 if mono else 1.0, 0.0, errors=[float(e) for e in errs])]
    return reps, [(m, e) for m, e in zip(nodes, errs)]


def csv_table(text: str) -> tuple[list, list]:
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], [tuple(r) for r in rows[1:]]


def mismatched_gram(model, normal) -> np.ndarray:
    """Boundary Gram with one coordinate rescaled: a metric the boundary operator is not symmetric for."""
    g = boundary_gram(model, normal, strict=False).gram_n.copy()
    g[0, :] *= 2.0
    g[:, 0] *= 2.0
    return g


def _normal_suite(res: SuiteResult, s, prefix: str = "") -> None:
    res.guard("validate", validate_model, s.model, s.algebra, prefix=prefix)
    res.guard("normal", check_normal, s.model, s.normal, s.algebra, prefix=prefix)
    res.guard("boundary_space", boundary_space_checks, s.model, s.normal, s.algebra, prefix=prefix)
    eq = res.guard("equivalences", check_equivalences, s.model, s.normal, prefix=prefix)
    if eq is not None:
        v = equivalence_verdict(eq)
        res.add([CheckReport.make("equivalences_agree", 0.0 if v == "all-pass" else 1.0, 0.0, verdict=v)], prefix)
    gram = mismatched_gram(s.model, s.normal) if s.config.fault == "gram" else None
    res.guard("assumption6", check_assumption6, s.model, s.normal, s.algebra, gram=gram, prefix=prefix)


def _bounds_suite(res: SuiteResult, s, L, lambdas=LAMBDA_GRID, prefix: str = "") -> list:
    out = []
    out += domain_bounds_check(s.model, lambdas)
    if L is not None:
        from .extensions import extension_domain
        out += domain_bounds_check(s.model, lambdas, extension_domain(s.model, L), label="extension")
        for e in s.algebra.ideal()[:1]:
            out += adjoint_bound_check(s.model, e, L, lambdas)
    res.add(out, prefix)
    for e in s.algebra.non_ideal():
        try:
            res.add([commutator_identity_check(s.model, e, 1.0)], prefix)
            break
        except Exception:
            continue
    res.add(adjoint_transform_checks(s.model), prefix)
    return out


# -- interval ----------------------------------------------------------------------

def twisted_error(cfg: ScenarioConfig) -> tuple[float, list]:
    """Max over the sampled alphas of the twisted-extension spectral error at cfg.N, and the classifications."""
    s = interval_scalar(replace(cfg, fault="none"))
    worst, kinds = 0.0, []
    for a in ALPHAS:
        L = subspace(s.model, quasi_periodic(a))
        kinds.append(classify(s.model, L))
        sp = extension_operator(s.model, L).spectrum()
        worst = max(worst, spectrum_error(sp, twisted_derivative_eigenvalues(a, SPECTRAL_WINDOW)))
    return worst, kinds


def double_error(cfg: ScenarioConfig) -> float:
    s = interval_dirac(replace(cfg, fault="none"))
    sp = build_double(s.model, s.normal).spectrum()
    return spectrum_error(sp, doubled_interval_eigenvalues(SPECTRAL_WINDOW / 2))


def fitted_slope(rows) -> float:
    return float(np.polyfit(np.log([r[0] for r in rows]), np.log([r[1] for r in rows]), 1)[0])


def twisted_spectrum_errors(cfg: ScenarioConfig, Ns=CONVERGENCE_N) -> tuple[list, list, float]:
    rows, kinds = [], []
    for N in Ns:
        e, k = twisted_error(replace(cfg, N=N))
        rows.append((N, e))
        kinds += k
    return rows, kinds, fitted_slope(rows)


def double_spectrum_errors(cfg: ScenarioConfig, Ns=CONVERGENCE_N) -> tuple[list, float]:
    rows = [(N, double_error(replace(cfg, N=N))) for N in Ns]
    return rows, fitted_slope(rows)


def interval_suite(cfg: ScenarioConfig, convergence: bool = True) -> SuiteResult:
    res = SuiteResult("interval")
    s = interval_dirac(cfg)
    _normal_suite(res, s)
    if cfg.fault != "none":
        # an injected fault is judged by the normal-structure checks alone
        return res
    res.add(calderon_checks(s.model, s.normal, cfg.seed))
    L, obstruction = lagrangian_search(s.model, s.model.labels, graded=True, seed=cfg.seed)
    res.add([CheckReport.make("graded_lagrangian_found", 0.0 if L is not None else 1.0, 0.0, obstruction=obstruction)])
    if L is not None:
        res.add([CheckReport.make("lagrangian_classified", 0.0 if classify(s.model, L) == "lagrangian" else 1.0, 0.0)])
        res.add(adjoint_duality_checks(s.model, L))
        res.add(phase_checks(phase(s.model, L)))
    res.add(phase_checks(phase(s.model)), "minimal_")
    bnd = _bounds_suite(res, s, L)
    res.tables["bounds"] = csv_table(bounds_csv(bnd))
    q, rows = quadrature_reports(s.model)
    res.add(q)
    res.tables["quadrature"] = (["nodes", "error"], rows)
    try:
        dbl = build_double(s.model, s.normal, s.algebra)
        res.add(double_checks(dbl))
        res.add([CheckReport.make("double_kernel", kernel_distance(dbl), 1e-10, 0.0)])
    except Exception as exc:
        res.add([CheckReport.make("double_constraint_lagrangian", float("inf"), 0.0, 0.0, error=str(exc))])
    if convergence and cfg.fault == "none":
        rows, kinds, slope = twisted_spectrum_errors(cfg)
        res.add([CheckReport.make("twisted_family_lagrangian", sum(k != "lagrangian" for k in kinds), 0, 0.0,
                                  samples=len(kinds)),
                 CheckReport.make("twisted_spectrum_slope", abs(-slope - cfg.order), 0.3, 0.0, slope=slope)])
        res.tables["twisted_convergence"] = (["N", "error"], rows)
        drows, dslope = double_spectrum_errors(cfg)
        res.add([CheckReport.make("double_spectrum_slope", abs(-dslope - cfg.order), 0.3, 0.0, slope=dslope)])
        res.tables["double_convergence"] = (["N", "error"], drows)
    return res


def interval_scalar_suite(cfg: ScenarioConfig) -> SuiteResult:
    res = SuiteResult("interval_scalar")
    s = interval_scalar(cfg)
    res.add(validate_model(s.model, s.algebra))
    res.add(check_normal(s.model, s.normal, s.algebra))
    rows = []
    for a in ALPHAS:
        L = subspace(s.model, quasi_periodic(a))
        kind = classify(s.model, L)
        err = spectrum_error(extension_operator(s.model, L).spectrum(), twisted_derivative_eigenvalues(a, SPECTRAL_WINDOW))
        rows.append((a, kind, err))
        res.add([CheckReport.make(f"twisted_lagrangian_a{a:+.3f}", 0.0 if kind == "lagrangian" else 1.0, 0.0),
                 *adjoint_duality_checks(s.model, L)])
    res.tables["twisted_spectra"] = (["alpha", "class", "error"], rows)
    q, qrows = quadrature_reports(s.model)
    res.add(q)
    res.tables["quadrature"] = (["nodes", "error"], qrows)
    return res


# -- disc --------------------------------------------------------------------------

def disc_suite(cfg: ScenarioConfig, index: bool = True) -> SuiteResult:
    res = SuiteResult("disc")
    disc = disc_dirac(cfg)
    drows = []
    for m in disc.modes:
        k = m.meta["k"]
        pre = f"k{k:+d}_"
        _normal_suite(res, m, pre)
        if cfg.fault != "none":
            continue
        res.add(calderon_checks(m.model, m.normal, cfg.seed), pre)
        bt = boundary_operator(m.model, m.normal, strict=False)
        _, Dd, _ = odd_reduction(bt)
        ev = np.linalg.eigvalsh(0.5 * (Dd + Dd.conj().T))
        err = float(np.max(np.abs(ev - m.meta["c"]))) if ev.size else float("inf")
        drows.append((k, m.meta["c"], float(ev[0]) if ev.size else float("nan"), err))
        # O(h) with a generous constant
        res.add([CheckReport.make("boundary_spectrum_error", err, 10.0 * m.meta["h"] * (1 + abs(m.meta["c"])), 0.0,
                                  c=m.meta["c"])], pre)
        dbl = build_double(m.model, m.normal, m.algebra)
        res.add(double_checks(dbl), pre)
        res.add([CheckReport.make("double_kernel", kernel_distance(dbl), 1e-10, 0.0)], pre)
        if abs(k) <= 1:
            L, _ = lagrangian_search(m.model, m.model.labels, graded=True, seed=cfg.seed)
            bnd = _bounds_suite(res, m, L, prefix=pre)
            res.tables[f"bounds_k{k:+d}"] = csv_table(bounds_csv(bnd))
            q, qrows = quadrature_reports(m.model, label="")
            res.add(q, pre)
            res.tables[f"quadrature_k{k:+d}"] = (["nodes", "error"], qrows)
    res.tables["boundary_spectrum"] = (["k", "c", "computed", "error"], drows)
    try:
        rep, rows = compare_pge_pc(disc.modes)
        res.add([rep])
        res.tables["pge_vs_pc"] = (["k", "delta", "condition"], rows)
    except StructuralError as exc:
        res.add([CheckReport.make("pge_vs_pc_structural", float("inf"), 0.0, 0.0, error=str(exc))])
    if index and cfg.fault == "none":
        M = max(2 * cfg.modes, 16)
        data = disc_index_data(disc_dirac(cfg, range(-M, M)))
        irows = []
        for w in WINDINGS:
            r = index_routes(data, w)
            agree = r["calderon"] == r["busby"] == r["spectral_flow"] == -w
            irows.append((w, r["calderon"], r["busby"], r["spectral_flow"], r["gap"]))
            res.add([CheckReport.make(f"index_winding{w:+d}", 0.0 if agree else 1.0, 0.0,
                                      calderon=r["calderon"], busby=r["busby"], spectral_flow=r["spectral_flow"]),
                     CheckReport.at_least(f"index_gap_winding{w:+d}", r["gap"], 1e3)])
        res.tables["index"] = (["winding", "calderon", "busby", "spectral_flow", "gap"], irows)
    return res


# -- dimension drop -----------------------------------------------------------------

def dimension_drop_suite(cfg: ScenarioConfig) -> SuiteResult:
    res = SuiteResult("dimension_drop")
    s = dimension_drop(cfg)
    _normal_suite(res, s)
    base = s.meta["base"]
    mm = cfg.matrix_size
    d_small = build_double(base.model, base.normal)
    d_big = build_double(s.model, s.normal)
    res.add(double_checks(d_big))
    res.add([CheckReport.make("double_functoriality", functoriality_residual(d_small, d_big, mm), 1e-10, 0.0)])
    # boundary images of the non-ideal elements lie in B (x) boundary coordinates
    B = np.stack([b.ravel() for b in s.meta["B_basis"]], axis=1)
    worst = 0.0
    b0 = base.model.b
    for e in s.algebra.non_ideal():
        rep = s.model.R @ e.matrix @ np.linalg.pinv(s.model.R)
        for i in range(b0):
            blk = rep[i * mm:(i + 1) * mm, i * mm:(i + 1) * mm].ravel()
            coef, *_ = np.linalg.lstsq(B, blk, rcond=None)
            worst = max(worst, float(np.linalg.norm(B @ coef - blk)))
    res.add([CheckReport.make("boundary_image_in_B", worst, 1e-10, 0.0)])
    q, rows = quadrature_reports(s.model)
    res.add(q)
    res.tables["quadrature"] = (["nodes", "error"], rows)
    return res


# -- theta deformation ------------------------------------------------------------------

def covariant_reports(s) -> list[CheckReport]:
    """Every check that sees the algebra, for the deformation comparison."""
    out = []
    out += validate_model(s.model, s.algebra)
    out += check_normal(s.model, s.normal, s.algebra)
    out += boundary_space_checks(s.model, s.normal, s.algebra)
    out += check_equivalences(s.model, s.normal)
    out += check_assumption6(s.model, s.normal, s.algebra)
    out += calderon_checks(s.model, s.normal, s.config.seed)
    L, _ = lagrangian_search(s.model, s.model.labels, graded=True, seed=s.config.seed)
    if L is not None:
        for e in s.algebra.ideal()[:2]:
            out += adjoint_bound_check(s.model, e, L, (0.0, 1.0, 10.0))
    return out


def report_difference(a: list[CheckReport], b: list[CheckReport]) -> tuple[float, list]:
    """Largest |measured| difference between two report lists, and structural mismatches."""
    if len(a) != len(b):
        return float("inf"), [("count", len(a), len(b))]
    worst, bad = 0.0, []
    for x, y in zip(a, b):
        if x.name != y.name or x.passed != y.passed or x.bound != y.bound:
            bad.append((x.name, y.name))
        d = abs(x.measured - y.measured)
        if np.isfinite(x.measured) or np.isfinite(y.measured):
            worst = max(worst, d if np.isfinite(d) else float("inf"))
    return worst, bad


def theta_suite(cfg: ScenarioConfig) -> SuiteResult:
    res = SuiteResult("weighted")
    s = weighted_scenario(cfg)
    t = theta_deform(s, cfg.theta)
    before = covariant_reports(s)
    after = covariant_reports(t)
    res.add(after)
    diff, bad = report_difference(before, after)
    res.add([CheckReport.make("theta_covariance", diff, 1e-12, 0.0, mismatched=bad, count=len(after))])
    res.tables["theta_reports"] = (["name", "before", "after"],
                                   [(x.name, x.measured, y.measured) for x, y in zip(before, after)])
    return res


# -- cone -------------------------------------------------------------------------------

DEFAULT_CONE = (((0.25, 1, 1), (-0.25, 1, -1), (0.0, 1, 1), (0.0, 1, -1), (1.5, 1, 1), (-1.5, 1, -1)),)


def cone_suite(cfg: ScenarioConfig) -> SuiteResult:
    res = SuiteResult("cone")
    pts = cfg.cone_points or DEFAULT_CONE
    cone = conical.deficiency_space(pts, half=cfg.cone_half)
    # the geometric normal is informational here: eigenvalues inside (-1/2, 1/2) away from 0 make it fail
    res.add(soft(conical.cone_report(cone, None, cfg.seed), {"geometric_normal"}))
    model = cone.model
    if model is not None:
        res.add(validate_model(model), "embedded_")
    ns = conical.normal_structures(cone, None, seed=cfg.seed)
    res.tables["boundary_class"] = (["structure", "dim_plus", "dim_minus"],
                                    [(k, *conical.boundary_class(cone, None, I, ns).pair)
                                     for k, I in enumerate(ns.structures)])
    res.tables["deficiency_modes"] = (["point", "lambda", "parity", "j"], [tuple(m) for m in cone.modes])
    return res


# -- registry -------------------------------------------------------------------------

SUITES: dict[str, Callable[[ScenarioConfig], SuiteResult]] = {
    "interval": interval_suite,
    "interval_scalar": interval_scalar_suite,
    "disc": disc_suite,
    "dimension_drop": dimension_drop_suite,
    "weighted": theta_suite,
    "cone": cone_suite,
}

DESCRIPTIONS = {
    "interval": "graded spinor model of -i d/dx on [0, 1] (b = 4)",
    "interval_scalar": "ungraded -i d/dx on [0, 1] with the twisted Lagrangian family (b = 2)",
    "disc": "unit disc Dirac operator, angular modes |k| <= modes, with the winding index routes",
    "dimension_drop": "interval spinor model with boundary values in a *-subalgebra of M_m",
    "weighted": "two-weight interval model and its theta deformation (report covariance)",
    "cone": "conical points given by cross-section spectra: W, omega, normal structures",
}


def run_suite(name: str, cfg: ScenarioConfig, **options) -> SuiteResult:
    """options go to the suite builder (convergence=False for interval, index=False for disc)."""
    if name not in SUITES:
        raise KeyError(f"unknown scenario {name!r}; registered: {sorted(SUITES)}")
    return SUITES[name](cfg, **options)


def soft(reports: list[CheckReport], names: set) -> list[CheckReport]:
    """Mark the named reports as warnings (informational, excluded from the verdict)."""
    out = []
    for r in reports:
        if r.name in names:
            r = replace(r, context={**r.context, "warning": True})
        out.append(r)
    return out
