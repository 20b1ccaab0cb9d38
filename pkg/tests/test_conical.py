import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relspec import conical
from relspec.conical import (StructuralError, annihilator, annihilator_agreement, boundary_class, circle_spectrum,
                             cone_report, deficiency_space, from_matrices, geometric_normal_check, lagrangian_lift,
                             lift_checks, normal_structures, permute_points, structure_checks)

PAIR = [(0.25, 1, 1), (-0.25, 1, -1)]
KERNEL = [(0.0, 1, 1), (0.0, 1, -1)]


def test_antiperiodic_circle_has_no_deficiency():
    with pytest.raises(StructuralError):
        deficiency_space([circle_spectrum(periodic=False)])
    cone = deficiency_space([circle_spectrum(periodic=False)], half="exclude")
    assert cone.dim == 0 and cone.model is None
    assert geometric_normal_check(cone).passed
    ns = normal_structures(cone)
    assert len(ns) == 1 and ns.quotient.dim == 0
    assert boundary_class(cone, None, ns.structures[0], ns).pair == (0, 0)


def test_included_half_modes_enter_w():
    cone = deficiency_space([[(0.5, 1, 1), (-0.5, 1, -1)]], half="include")
    assert cone.dim == 2
    with pytest.raises(ValueError):
        deficiency_space([KERNEL], half="maybe")


def test_periodic_circle_kernel():
    cone = deficiency_space([circle_spectrum(periodic=True)])
    assert cone.dim == 2
    assert np.allclose(cone.eigenvalues, 0.0)


def test_w_counts_multiplicities_below_half():
    cone = deficiency_space([[(0.1, 2, 1), (-0.1, 2, -1), (0.7, 3, 1), (-0.7, 3, -1), (0.0, 1, 1), (0.0, 1, -1)]])
    assert cone.dim == 6


def test_two_points_give_block_diagonal_form():
    cone = deficiency_space([PAIR, KERNEL + PAIR])
    b = cone.block
    assert np.all(cone.omega[b[:, None] != b[None, :]] == 0)
    assert np.allclose(cone.omega, -cone.omega.conj().T)
    assert np.linalg.svd(cone.omega, compute_uv=False)[-1] > 0.5


def test_unpaired_mode_is_refused():
    with pytest.raises(StructuralError):
        deficiency_space([[(0.25, 1, 1)]])
    with pytest.raises(StructuralError):
        deficiency_space([[(0.25, 0, 1)]])


def test_swap_structure_on_a_pair():
    cone = deficiency_space([PAIR])
    ns = normal_structures(cone)
    assert len(ns) >= 1
    I = ns.structures[0]
    assert all(r.passed for r in structure_checks(cone, ns.quotient, I))
    # the swap maps each mode onto its partner and squares to -1
    assert np.allclose(np.abs(I), [[0, 1], [1, 0]], atol=1e-12)
    assert boundary_class(cone, None, I, ns).pair == (1, 1)


def test_parity_mismatch_obstructs():
    cone = from_matrices([[0, 1], [-1, 0]], [1, 1])
    ns = normal_structures(cone)
    assert len(ns) == 0
    assert ns.obstruction["0"] == {"even": 2, "odd": 0}
    rep = [r for r in cone_report(cone) if r.name == "normal_structures_found"][0]
    assert not rep.passed


def test_geometric_normal_criterion():
    assert not geometric_normal_check(deficiency_space([[(0.3, 1, 1), (-0.3, 1, -1)]])).passed
    assert geometric_normal_check(deficiency_space([KERNEL])).passed


@pytest.mark.parametrize("spectra", [[PAIR], [KERNEL], [PAIR, KERNEL], [KERNEL + PAIR + [(0.1, 2, 1), (-0.1, 2, -1)]]])
def test_lift_is_lagrangian_and_class_balanced(spectra):
    cone = deficiency_space(spectra)
    ns = normal_structures(cone)
    assert len(ns) >= 1
    for I in ns.structures:
        Lh = lagrangian_lift(cone, None, I, ns)
        assert all(r.passed for r in lift_checks(cone, None, Lh))
        assert Lh.dim == cone.dim // 2
        bc = boundary_class(cone, None, I, ns)
        assert bc.vanishes and bc.residual < 1e-10


def test_lagrangian_input_lifts_to_itself():
    cone = deficiency_space([PAIR])
    L = np.array([[1.0], [0.0]])
    ns = normal_structures(cone, L)
    assert ns.quotient.dim == 0
    Lh = lagrangian_lift(cone, L, ns.structures[0], ns)
    P = Lh.L @ Lh.L.conj().T
    assert np.allclose(P, np.diag([1.0, 0.0]))


def test_non_isotropic_subspace_is_refused():
    cone = deficiency_space([PAIR])
    with pytest.raises(StructuralError):
        normal_structures(cone, np.eye(2))


def test_annihilator_agrees_with_green_model():
    cone = deficiency_space([PAIR, KERNEL])
    rng = np.random.default_rng(0)
    for L in (None, np.eye(4)[:, [0]], np.eye(4)[:, [0, 2]]):
        assert annihilator_agreement(cone, L) < 1e-10
    X = rng.standard_normal((4, 1))
    A = annihilator(cone, X)
    assert A.dim == 3


def test_ungraded_structures():
    cone = deficiency_space([[(0.0, 2, 1), (0.2, 1, 1), (-0.2, 1, 1)]], graded=False)
    ns = normal_structures(cone)
    assert len(ns) >= 1
    for I in ns.structures:
        assert all(r.passed for r in structure_checks(cone, ns.quotient, I))
        assert all(r.passed for r in lift_checks(cone, None, lagrangian_lift(cone, None, I, ns)))


@settings(max_examples=20, deadline=None)
@given(st.lists(st.sampled_from([PAIR, KERNEL, PAIR + KERNEL]), min_size=2, max_size=4), st.randoms())
def test_permuting_points_commutes_with_everything(spectra, rnd):
    cone = deficiency_space(spectra)
    perm = list(range(len(spectra)))
    rnd.shuffle(perm)
    pc, Pm = permute_points(cone, perm)
    assert np.allclose(pc.omega, Pm.T @ cone.omega @ Pm)
    direct = deficiency_space([spectra[o] for o in perm])
    assert direct.dim == pc.dim
    ns, nsp = normal_structures(cone), normal_structures(pc)
    assert len(ns) == len(nsp) >= 1
    bc, bcp = boundary_class(cone, None, ns.structures[0], ns), boundary_class(pc, None, nsp.structures[0], nsp)
    assert bc.pair == bcp.pair
    assert sorted(bc.blocks.values()) == sorted(bcp.blocks.values())
    assert [r.passed for r in cone_report(cone)] == [r.passed for r in cone_report(pc)]


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=1, max_value=3), st.integers(min_value=0, max_value=3), st.integers(0, 1000))
def test_every_structure_tames(m_pair, m_kernel, seed):
    spec = [(0.2, m_pair, 1), (-0.2, m_pair, -1)]
    if m_kernel:
        spec += [(0.0, m_kernel, 1), (0.0, m_kernel, -1)]
    cone = deficiency_space([spec])
    ns = normal_structures(cone, seed=seed)
    Q = ns.quotient.basis
    Om = Q.conj().T @ cone.omega @ Q
    for I in ns.structures:
        H = Om @ I
        assert np.linalg.eigvalsh(0.5 * (H + H.conj().T))[0] > 1e-10


def test_dict_spectrum_input():
    cone = deficiency_space([{"point": "tip", "eigenvalues": [[0.25, 1, 1], [-0.25, 1, -1]]}])
    assert cone.points[0].point == "tip" and cone.dim == 2
    with pytest.raises(StructuralError):
        deficiency_space([[(float("nan"), 1, 1)]])
    with pytest.raises(StructuralError):
        deficiency_space([[(0.1, 1, 2)]])
