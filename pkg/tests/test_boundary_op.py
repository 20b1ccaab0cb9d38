import numpy as np
import pytest

from relspec.boundary_op import (anticommutator_symmetry, boundary_operator, check_assumption6, check_equivalences,
                                 equivalence_verdict, odd_reduction)
from relspec.green_model import report_map
from relspec.models import ScenarioConfig, apply_fault, dimension_drop, disc_mode, interval_dirac, interval_scalar
from relspec.normal import CliffordNormal
from relspec.numkernel import StructuralError
from relspec.suites import mismatched_gram


def test_interval_boundary_operator_vanishes():
    s = interval_dirac(ScenarioConfig(N=32))
    bt = boundary_operator(s.model, s.normal, s.algebra)
    assert bt.Dn.shape == (4, 4)
    assert np.linalg.norm(bt.Dn) < 1e-10


@pytest.mark.parametrize("k", [-2, -1, 0, 1, 3])
def test_disc_boundary_operator_is_half_shifted_mode(k):
    m = disc_mode(ScenarioConfig(N=48), k)
    _, Dd, res = odd_reduction(boundary_operator(m.model, m.normal))
    assert res < 1e-10
    ev = np.linalg.eigvalsh(0.5 * (Dd + Dd.conj().T))
    assert np.max(np.abs(ev - (k + 0.5))) <= 10 * m.meta["h"]


@pytest.mark.parametrize("build", [interval_dirac, dimension_drop, lambda c: disc_mode(c, 0)])
def test_equivalent_conditions_agree_when_clean(build):
    s = build(ScenarioConfig(N=24))
    assert equivalence_verdict(check_equivalences(s.model, s.normal)) == "all-pass"


def test_tangential_profile_fails_every_equivalent_condition():
    s = apply_fault(interval_dirac(ScenarioConfig(N=24, fault="tangential")))
    reps = check_equivalences(s.model, s.normal)
    assert equivalence_verdict(reps) == "all-fail"


def test_verdict_disagree_label():
    s = interval_dirac(ScenarioConfig(N=16))
    reps = check_equivalences(s.model, s.normal)
    broken = [reps[0]] + [type(r)(r.name, False, r.measured, r.bound, r.tolerance, r.context) for r in reps[1:]]
    assert equivalence_verdict(broken) == "disagree"


def test_assumption6_on_disc_mode():
    m = disc_mode(ScenarioConfig(N=32), 1)
    rm = report_map(check_assumption6(m.model, m.normal, m.algebra))
    assert all(r.passed for r in rm.values()), [k for k, r in rm.items() if not r.passed]
    assert rm["boundary_operator_representative_independence"].measured < 1e-9


def test_assumption6_detects_mismatched_boundary_metric():
    m = disc_mode(ScenarioConfig(N=32), 1)
    bt = boundary_operator(m.model, m.normal)
    rm = report_map(check_assumption6(m.model, m.normal, gram=mismatched_gram(m.model, m.normal)))
    assert not rm["assumption6_c_self_adjoint"].passed
    assert rm["assumption6_b_anticommutes"].passed
    assert np.linalg.norm(bt.Dn) > 0


def test_anticommutator_symmetry_clean_interval():
    s = interval_dirac(ScenarioConfig(N=32))
    assert anticommutator_symmetry(s.model, s.normal) < 1e-10


def test_odd_reduction_needs_a_grading():
    s = interval_scalar(ScenarioConfig(N=24))
    bt = boundary_operator(s.model, s.normal, strict=False)
    with pytest.raises(StructuralError):
        odd_reduction(bt)


def test_reduction_refuses_non_anticommuting_normal():
    m = disc_mode(ScenarioConfig(N=24), 0)
    bt = boundary_operator(m.model, m.normal)
    bad = type(bt)(bt.space, bt.Dn + np.eye(bt.Dn.shape[0]), bt.h2n, bt.h2n0, bt.reps)
    with pytest.raises(StructuralError):
        odd_reduction(bad)
