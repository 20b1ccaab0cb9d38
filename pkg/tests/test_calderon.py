import numpy as np
import pytest

from relspec.calderon import (calderon_checks, calderon_projector, compare_pge_pc, decay_verdict, maximal_kernel,
                              minus_half_space, mode_delta, nonnegative_projection, poisson, poisson_data)
from relspec.green_model import report_map
from relspec.models import ScenarioConfig, disc_dirac, disc_mode, interval_dirac, interval_scalar
from relspec.numkernel import StructuralError


def test_scalar_interval_projector_onto_constants():
    s = interval_scalar(ScenarioConfig(N=32))
    P = calderon_projector(s.model, s.normal)
    assert np.linalg.matrix_rank(P, tol=1e-8) == 1
    assert np.linalg.norm(P @ P - P) < 1e-9
    # the kernel of -i d/dx is the constants, whose boundary trace is (1, 1)
    assert np.allclose(P @ np.ones(2), np.ones(2), atol=1e-9)
    # and it is the orthogonal projection onto them
    assert np.allclose(P, 0.5 * np.ones((2, 2)), atol=1e-9)
    assert poisson_data(s.model, s.normal).riesz_defect < 1e-8


@pytest.mark.parametrize("build", [interval_scalar, interval_dirac, lambda c: disc_mode(c, -1),
                                   lambda c: disc_mode(c, 2)])
def test_calderon_checks_pass(build):
    s = build(ScenarioConfig(N=32))
    rm = report_map(calderon_checks(s.model, s.normal))
    assert all(r.passed for r in rm.values()), [k for k, r in rm.items() if not r.passed]


def test_poisson_of_zero_is_zero():
    s = interval_dirac(ScenarioConfig(N=24))
    assert np.all(poisson(s.model, s.normal, np.zeros(s.model.b)) == 0)


def test_poisson_is_linear_and_lands_in_kernel():
    s = disc_mode(ScenarioConfig(N=32), 1)
    rng = np.random.default_rng(5)
    f, g = rng.standard_normal((2, s.model.b))
    Kf, Kg = poisson(s.model, s.normal, f), poisson(s.model, s.normal, g)
    assert np.allclose(poisson(s.model, s.normal, 2 * f - g), 2 * Kf - Kg, atol=1e-10)
    assert np.linalg.norm(s.model.D @ Kf) < 1e-9 * np.linalg.norm(f)


def test_maximal_kernel_avoids_minimal_domain():
    s = interval_dirac(ScenarioConfig(N=24))
    U = maximal_kernel(s.model)
    assert U.shape[1] == 2
    assert np.linalg.matrix_rank(s.model.R @ U) == 2


def test_disc_projector_equals_nonnegative_projection():
    for k in (-2, 0, 3):
        m = disc_mode(ScenarioConfig(N=32), k)
        d, cond = mode_delta(m.model, m.normal)
        assert d < 1e-10 and cond >= 1.0


def test_mode_delta_needs_even_model():
    s = interval_scalar(ScenarioConfig(N=24))
    with pytest.raises(StructuralError):
        mode_delta(s.model, s.normal)


def test_scrambled_normal_does_not_decay():
    rep, rows = compare_pge_pc(disc_dirac(ScenarioConfig(N=32, modes=4, fault="scramble")).modes)
    assert not rep.passed
    assert rep.context["max_delta"] > 0.1
    assert [abs(r[0] + 0.5) for r in rows] == sorted(abs(r[0] + 0.5) for r in rows)


def test_decay_verdict_cases():
    assert decay_verdict([1.0, 0.5, 0.2, 0.1])[0]
    assert not decay_verdict([1.0, 1.0, 1.0, 1.0])[0]
    assert not decay_verdict([1.0, 0.1, 0.5, 0.6])[0]
    assert decay_verdict([1e-15, 0.0, 1e-14])[0]


def test_nonnegative_projection_and_minus_half_norm():
    P = nonnegative_projection(np.diag([-1.5, 0.5, 2.5]))
    assert np.allclose(P, np.diag([0, 1, 1]))
    g = np.diag([1.0, 2.0])
    assert np.allclose(minus_half_space(g).gram_minus, np.diag([1.0, 0.5]))
    # (1 + 3^2)^(-1/2) on a scalar
    mh = minus_half_space(np.eye(1), np.array([[3.0]]))
    assert abs(mh.gram_minus[0, 0] - 1 / np.sqrt(10)) < 1e-15


def test_riesz_defect_small_on_interval():
    s = interval_dirac(ScenarioConfig(N=64))
    assert poisson_data(s.model, s.normal).riesz_defect < 1e-8
