import numpy as np
import pytest

from relspec.sbp import boundary_taper, derivative, sbp_operator


@pytest.mark.parametrize("order,n", [(2, 5), (2, 40), (4, 8), (4, 40)])
def test_summation_by_parts_exact(order, n):
    p, Q = sbp_operator(n, order)
    B = np.zeros((n, n))
    B[0, 0], B[-1, -1] = -1.0, 1.0
    # exact in floating point, not just to tolerance
    assert np.array_equal(Q + Q.T, B)
    assert np.all(p > 0)


@pytest.mark.parametrize("order", [2, 4])
def test_polynomial_exactness(order):
    n, h = 41, 0.025
    x = np.arange(n) * h
    _, Dx = derivative(n, h, order)
    # interior accuracy order, boundary accuracy order / 2
    for k in range(order // 2 + 1):
        assert np.max(np.abs(Dx @ x**k - (k * x ** (k - 1) if k else 0 * x))) < 1e-10


@pytest.mark.parametrize("order", [2, 4])
def test_interior_convergence_rate(order):
    errs = []
    for n in (41, 81, 161):
        x = np.linspace(0, 1, n)
        _, Dx = derivative(n, x[1], order)
        e = np.abs(Dx @ np.sin(2 * x) - 2 * np.cos(2 * x))
        errs.append(np.max(e[n // 4: 3 * n // 4]))
    rate = np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])
    assert min(rate) > order - 0.3


def test_weights_integrate_constants():
    for order in (2, 4):
        P, _ = derivative(33, 1 / 32, order)
        assert abs(P.sum() - 1.0) < 1e-14


def test_rejects_bad_sizes():
    with pytest.raises(ValueError):
        sbp_operator(6, 4)
    with pytest.raises(ValueError):
        sbp_operator(10, 6)


def test_taper_profile():
    chi = boundary_taper(101, 2)
    assert np.all(chi[:11] == 1.0)
    assert np.all(chi[31:] == 0.0)
    assert np.all(np.diff(chi) <= 0)
