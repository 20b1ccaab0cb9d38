"""One test per acceptance criterion; each prints a PASS/FAIL line."""
import json
import time

import numpy as np
import pytest

from relspec import conical
from relspec.boundary_op import boundary_operator, check_equivalences, equivalence_verdict, odd_reduction
from relspec.calderon import compare_pge_pc
from relspec.cli import main
from relspec.doubling import build_double, double_checks, kernel_distance
from relspec.extensions import classify, extension_operator, lagrangian_search, quasi_periodic, subspace, spectrum_error
from relspec.khomology import LAMBDA_GRID, adjoint_bound_check, disc_index_data, domain_bounds_check, index_routes
from relspec.models import (ScenarioConfig, apply_fault, dimension_drop, disc_dirac, disc_mode, interval_dirac,
                            interval_scalar, twisted_derivative_eigenvalues, weighted_scenario, theta_deform)
from relspec.normal import check_normal
from relspec.suites import (ALPHAS, SPECTRAL_WINDOW, double_spectrum_errors, quadrature_reports, report_difference,
                            covariant_reports)


def _cfg(**kw):
    return ScenarioConfig(**kw)


DEFAULT_CONE = [[(0.25, 1, 1), (-0.25, 1, -1), (0.0, 1, 1), (0.0, 1, -1), (1.5, 1, 1), (-1.5, 1, -1)]]

BUILDERS = {
    "interval": lambda cfg: [interval_dirac(cfg).model],
    "interval_scalar": lambda cfg: [interval_scalar(cfg).model],
    "dimension_drop": lambda cfg: [dimension_drop(cfg).model],
    "weighted": lambda cfg: [weighted_scenario(cfg).model],
    "disc": lambda cfg: [m.model for m in disc_dirac(cfg).modes],
    "cone": lambda cfg: [conical.deficiency_space(DEFAULT_CONE).model],
}


def _all_models(N):
    """Every shipped scenario's Green models at grid size N."""
    cfg = _cfg(N=N, modes=2)
    return {name: build(cfg) for name, build in BUILDERS.items()}


def test_green_identity_exact(verdict):
    worst, slow = 0.0, []
    for N in (16, 64, 256):
        for name, build in BUILDERS.items():
            t0 = time.perf_counter()
            for model in build(_cfg(N=N, modes=2)):
                worst = max(worst, model.green_residual())
            if time.perf_counter() - t0 > 5.0:
                slow.append((name, N))
    verdict(1, "Green identity exact on every scenario", worst <= 1e-12 and not slow,
            f"max relative residual {worst:.1e}, slow {slow}")


@pytest.mark.parametrize("order", [2, 4])
def test_twisted_extensions(verdict, order):
    errs, kinds = [], []
    Ns = (32, 64, 128, 256)
    for N in Ns:
        s = interval_scalar(_cfg(N=N, order=order))
        worst = 0.0
        for a in ALPHAS:
            L = subspace(s.model, quasi_periodic(a))
            kinds.append(classify(s.model, L))
            sp = extension_operator(s.model, L).spectrum()
            worst = max(worst, spectrum_error(sp, twisted_derivative_eigenvalues(a, SPECTRAL_WINDOW)))
        errs.append(worst)
    slope = np.polyfit(np.log(Ns), np.log(errs), 1)[0]
    ok = all(k == "lagrangian" for k in kinds) and abs(-slope - order) <= 0.3
    verdict(2, f"twisted family lagrangian, spectra converge (order {order})", ok, f"slope {slope:.2f}")


def test_appendix_bounds(verdict):
    reps = []
    s = interval_dirac(_cfg())
    L, _ = lagrangian_search(s.model, s.model.labels, graded=True)
    reps += domain_bounds_check(s.model, LAMBDA_GRID)
    for e in s.algebra.ideal():
        reps += adjoint_bound_check(s.model, e, L, LAMBDA_GRID)
    for m in disc_dirac(_cfg(modes=2)).modes:
        Lm, _ = lagrangian_search(m.model, m.model.labels, graded=True)
        reps += domain_bounds_check(m.model, LAMBDA_GRID)
        for e in m.algebra.ideal():
            reps += adjoint_bound_check(m.model, e, Lm, LAMBDA_GRID)
    lams = {r.context["lam"] for r in reps if "lam" in r.context}
    bad = [r.name for r in reps if not r.passed]
    ok = not bad and lams >= set(LAMBDA_GRID)
    verdict(3, "adjoint and domain bounds hold on the lambda grid", ok, f"{len(reps)} reports, failed {bad[:3]}")


def test_quadrature_agreement(verdict):
    worst, mono = 0.0, True
    for name, models in _all_models(64).items():
        for model in models:
            reps, _ = quadrature_reports(model)
            worst = max(worst, reps[0].measured)
            mono &= reps[1].passed
    verdict(4, "quadrature matches the eigendecomposition at m = 200", worst <= 1e-6 and mono,
            f"max error {worst:.1e}, monotone {mono}")


@pytest.mark.parametrize("order", [2, 4])
def test_double(verdict, order):
    scen = [interval_dirac(_cfg(order=order))] + list(disc_dirac(_cfg(order=order, modes=2)).modes)
    bad, kd = [], 0.0
    for s in scen:
        dbl = build_double(s.model, s.normal, s.algebra)
        bad += [r.name for r in double_checks(dbl) if not r.passed]
        kd = max(kd, kernel_distance(dbl))
    rows, slope = double_spectrum_errors(_cfg(order=order))
    ok = not bad and kd <= 1e-10 and abs(-slope - order) <= 0.3
    verdict(5, f"double self-adjoint, kernel split, spectrum converges (order {order})", ok,
            f"kernel distance {kd:.1e}, slope {slope:.2f}, failed {bad[:3]}")


# the condition each fault targets, and the set it forces to fail along with it
FAULT_SETS = {"scale": ({5}, {5}), "hermitian": ({2}, {2, 3}), "zero": ({7}, {5, 7})}


def _failing_conditions(reports):
    return {int(r.name.split("_")[1]) for r in reports if r.name.startswith("normal_") and not r.passed}


def test_clifford_normal_suite(verdict):
    cfg = _cfg(modes=2)
    clean = [interval_dirac(cfg), dimension_drop(cfg)] + list(disc_dirac(cfg).modes)
    clean_bad = [r.name for s in clean for r in check_normal(s.model, s.normal, s.algebra) if not r.passed]
    caught = {}
    for fault, (intended, forced) in FAULT_SETS.items():
        for s in (interval_dirac(_cfg(fault=fault)), disc_mode(_cfg(fault=fault), 1)):
            fs = apply_fault(s) if s.meta.get("fault") != fault else s
            failing = _failing_conditions(check_normal(fs.model, fs.normal, fs.algebra))
            caught[(fault, s.name)] = intended <= failing and failing == forced
    ok = not clean_bad and all(caught.values())
    verdict(6, "normal conditions pass clean, faults caught by their condition", ok,
            f"clean failures {clean_bad[:3]}, faults {sorted(k for k, v in caught.items() if not v)}")


def test_boundary_operator(verdict):
    errs = []
    for N in (32, 64, 128):
        for k in (-3, -1, 0, 2):
            m = disc_mode(_cfg(N=N), k)
            _, Dd, _ = odd_reduction(boundary_operator(m.model, m.normal, strict=False))
            ev = np.linalg.eigvalsh(0.5 * (Dd + Dd.conj().T))
            errs.append(float(np.max(np.abs(ev - (k + 0.5)))) / m.meta["h"])
    clean = [interval_dirac(_cfg()), dimension_drop(_cfg()), weighted_scenario(_cfg())] + \
        list(disc_dirac(_cfg(modes=2)).modes)
    verdicts = [equivalence_verdict(check_equivalences(s.model, s.normal)) for s in clean]
    faulty = [apply_fault(interval_dirac(_cfg(fault="tangential"))), apply_fault(disc_mode(_cfg(fault="tangential"), 1))]
    fverdicts = [equivalence_verdict(check_equivalences(s.model, s.normal)) for s in faulty]
    ok = max(errs) <= 10.0 and all(v == "all-pass" for v in verdicts) and all(v == "all-fail" for v in fverdicts)
    verdict(7, "boundary spectrum O(h) and the four equivalent conditions agree", ok,
            f"max error / h {max(errs):.1e}, clean {set(verdicts)}, tangential {set(fverdicts)}")


def test_index_theorem(verdict):
    t0 = time.perf_counter()
    data = disc_index_data(disc_dirac(_cfg(), range(-32, 32)))
    results = {w: index_routes(data, w) for w in range(-3, 4)}
    elapsed = time.perf_counter() - t0
    ok = elapsed < 60.0
    for w, r in results.items():
        ok &= r["calderon"] == r["busby"] == r["spectral_flow"] == -w and r["gap"] >= 1e3
    detail = ", ".join(f"{w:+d}:{r['calderon']}/{r['busby']}/{r['spectral_flow']}" for w, r in results.items())
    verdict(8, "winding index from three routes equals minus the winding", ok, f"{elapsed:.1f} s; {detail}")


def test_pge_vs_calderon(verdict):
    rep, rows = compare_pge_pc(disc_dirac(_cfg(modes=16)).modes)
    scrambled, _ = compare_pge_pc(disc_dirac(_cfg(modes=16, fault="scramble")).modes)
    verdict(9, "per-mode projector differences decay at K = 16", rep.passed and not scrambled.passed,
            f"max delta {rep.context['max_delta']:.2e}, scrambled detected {not scrambled.passed}")


def test_conical_suite(verdict):
    t0 = time.perf_counter()
    with pytest.raises(conical.StructuralError):
        conical.deficiency_space([conical.circle_spectrum(periodic=False)])
    anti = conical.deficiency_space([conical.circle_spectrum(periodic=False)], half="exclude")
    geo = conical.geometric_normal_check(anti)
    cone = conical.deficiency_space(DEFAULT_CONE)
    ns = conical.normal_structures(cone)
    reps, pairs = [], []
    for I in ns.structures:
        reps += conical.structure_checks(cone, ns.quotient, I)
        reps += conical.lift_checks(cone, None, conical.lagrangian_lift(cone, None, I, ns))
        bc = conical.boundary_class(cone, None, I, ns)
        pairs.append(bc.pair)
        reps.append(conical.CheckReport.make("class_residual", bc.residual, 1e-10))
    elapsed = time.perf_counter() - t0
    ok = (anti.dim == 0 and geo.passed and cone.dim == 4 and len(ns) >= 1 and all(r.passed for r in reps)
          and all(p == m for p, m in pairs) and elapsed < 1.0)
    verdict(10, "cone: W = 0 antiperiodic, dim W = 4 tamed, lifted, class balanced", ok,
            f"dim W {cone.dim}, structures {len(ns)}, classes {pairs}, {elapsed:.2f} s")


def test_theta_covariance(verdict):
    s = weighted_scenario(_cfg())
    t = theta_deform(s, s.config.theta)
    diff, bad = report_difference(covariant_reports(s), covariant_reports(t))
    verdict(11, "reports invariant under the theta deformation", diff <= 1e-12 and not bad,
            f"max difference {diff:.1e}")


def test_determinism(verdict, tmp_path, capsys):
    same = True
    for scen in ("interval", "cone"):
        texts = []
        for run in ("a", "b"):
            out = tmp_path / f"{scen}_{run}"
            assert main(["run", scen, "--out", str(out)]) == 0
            m = json.loads((out / "manifest.json").read_text())
            m.pop("timestamp")
            raw = (out / "manifest.json").read_text().splitlines()
            texts.append(([ln for ln in raw if '"timestamp"' not in ln],
                          {p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))}))
        same &= texts[0] == texts[1]
    capsys.readouterr()
    verdict(12, "identical configs give identical manifests", same)
