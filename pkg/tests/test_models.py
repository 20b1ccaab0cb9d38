import numpy as np
import pytest

from relspec.doubling import minimal_kernel
from relspec.green_model import validate_model
from relspec.models import (FAULTS, ScenarioConfig, dimension_drop, disc_dirac, disc_mode, interval_dirac,
                            interval_scalar, subalgebra_closure_residual, theta_deform, twisted_derivative_eigenvalues,
                            weighted_scenario)
from relspec.normal import boundary_rep, check_normal
from relspec.numkernel import StructuralError


@pytest.mark.parametrize("N", [16, 64, 256])
def test_interval_validates(N):
    s = interval_dirac(ScenarioConfig(N=N))
    assert all(r.passed for r in validate_model(s.model, s.algebra))


@pytest.mark.parametrize("order", [2, 4])
def test_interval_minimal_kernel_trivial(order):
    s = interval_dirac(ScenarioConfig(N=64, order=order))
    assert minimal_kernel(s.model).shape[1] == 0


def test_disc_mode_validates():
    s = disc_mode(ScenarioConfig(), 0)
    assert all(r.passed for r in validate_model(s.model, s.algebra))
    assert all(r.passed for r in check_normal(s.model, s.normal, s.algebra))


@pytest.mark.parametrize("name", ["interval", "interval_scalar", "dimension_drop", "weighted"])
def test_default_scenarios_pass_normal(name):
    build = {"interval": interval_dirac, "interval_scalar": interval_scalar, "dimension_drop": dimension_drop,
             "weighted": weighted_scenario}[name]
    s = build(ScenarioConfig())
    reps = validate_model(s.model, s.algebra) + check_normal(s.model, s.normal, s.algebra)
    assert all(r.passed for r in reps), [r.name for r in reps if not r.passed]


def test_twisted_oracle_values():
    ev = twisted_derivative_eigenvalues(0.5, 10.0)
    assert np.allclose(ev, [0.5 - 2 * np.pi, 0.5, 0.5 + 2 * np.pi])


def test_dimension_drop_boundary_image_diagonal():
    s = dimension_drop(ScenarioConfig(matrix_size=2, B_subalgebra="diagonal"))
    m = 2
    for e in s.algebra.non_ideal():
        rep = boundary_rep(s.model, s.normal, e)
        # every (component, endpoint) block of m x m is diagonal
        for i in range(s.model.b // m):
            blk = rep[i * m:(i + 1) * m, i * m:(i + 1) * m]
            assert np.allclose(blk - np.diag(np.diag(blk)), 0, atol=1e-12)


def test_dimension_drop_full_is_amplification():
    s = dimension_drop(ScenarioConfig(B_subalgebra="full"))
    full = s.meta["full"]
    assert len(s.algebra) == len(full.algebra)


def test_dimension_drop_rejects_non_algebra():
    E = np.array([[0, 1], [0, 0]], dtype=complex)
    with pytest.raises(StructuralError):
        dimension_drop(ScenarioConfig(), [E])
    assert subalgebra_closure_residual([np.eye(2)]) < 1e-15


def test_theta_zero_is_identity():
    s = weighted_scenario(ScenarioConfig())
    t = theta_deform(s, np.zeros((2, 2)))
    for a, b in zip(s.algebra, t.algebra):
        assert np.array_equal(a.matrix, b.matrix)


def test_theta_rejects_non_equivariant_operator():
    s = weighted_scenario(ScenarioConfig())
    W = s.meta["weight_ops"][0]
    rng = np.random.default_rng(0)
    bad = s.model.with_(D=s.model.D + 1e-3 * rng.standard_normal(s.model.D.shape))
    from dataclasses import replace
    with pytest.raises(StructuralError):
        theta_deform(replace(s, model=bad), s.config.theta)
    assert W.shape == s.model.D.shape


def test_config_validation_and_round_trip():
    for bad in ({"N": 4}, {"order": 3}, {"fault": "nope"}, {"r_inner": 1.5}, {"theta": [[0, 1], [1, 0]]},
                {"unknown": 1}, {"cone_half": "maybe"}):
        with pytest.raises((ValueError, TypeError)):
            ScenarioConfig.from_dict(bad)
    cfg = ScenarioConfig(N=20, cone_points=(((0.0, 1, 1), (0.0, 1, -1)),))
    assert ScenarioConfig.from_dict(cfg.as_dict()) == cfg
    assert "tangential" in FAULTS


def test_disc_modes_labelled():
    d = disc_dirac(ScenarioConfig(modes=3))
    assert d.ks == list(range(-3, 4))
    assert d.mode(2).meta["c"] == 2.5
