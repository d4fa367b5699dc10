import numpy as np
import pytest

from backend.errors import ConvergenceError, DomainError
from backend.quadrature import (
    NormResult,
    QuadratureSpec,
    gauss_jacobi,
    gauss_legendre,
    graded_edges,
    log_scale_quad,
    singular_double_integral,
    singular_quad_1d,
)


def test_gauss_legendre_is_exact_on_polynomials():
    x, w = gauss_legendre(5, 1.0, 3.0)
    assert w @ x ** 9 == pytest.approx((3.0 ** 10 - 1.0) / 10.0, rel=1e-13)


def test_gauss_jacobi_weights_carry_the_power():
    x, w = gauss_jacobi(8, 0.0, 2.0, left_exp=-0.5)
    assert w.sum() == pytest.approx(2.0 * np.sqrt(2.0), rel=1e-13)
    x, w = gauss_jacobi(8, 0.0, 1.0, left_exp=0.5, right_exp=1.0)
    # Beta(3/2, 2)
    assert w.sum() == pytest.approx(4.0 / 15.0, rel=1e-13)


def test_gauss_jacobi_rejects_non_integrable_powers():
    with pytest.raises(DomainError, match="exceed -1"):
        gauss_jacobi(4, 0.0, 1.0, left_exp=-1.0)


def test_graded_edges_refine_toward_both_ends():
    edges = graded_edges(0.0, 1.0, 4)
    assert edges[0] == 0.0 and edges[-1] == 1.0
    assert edges[1] == pytest.approx(2.0 ** -5)
    assert edges[-2] == pytest.approx(1.0 - 2.0 ** -5)
    assert np.all(np.diff(edges) > 0)


def test_singular_quad_1d_endpoint_powers():
    res = singular_quad_1d(lambda u: u ** -0.5 * (1.0 - u) ** -0.25, 0.0, 1.0,
                           left_exp=-0.5, right_exp=-0.25)
    # Beta(1/2, 3/4)
    from scipy.special import beta
    assert res.converged
    assert res.value == pytest.approx(beta(0.5, 0.75), rel=1e-10)


def test_singular_quad_1d_breakpoint_kink():
    res = singular_quad_1d(lambda u: np.abs(u - 0.3), 0.0, 1.0, breakpoints=(0.3,))
    assert res.value == pytest.approx(0.5 * (0.3 ** 2 + 0.7 ** 2), rel=1e-12)


def test_adaptive_rule_matches_gauss_legendre():
    quad = QuadratureSpec(base_rule="adaptive", rel_tolerance=1e-10)
    res = singular_quad_1d(lambda u: u ** -0.5 * np.cos(u), 0.0, 1.0, quad, left_exp=-0.5)
    ref = singular_quad_1d(lambda u: u ** -0.5 * np.cos(u), 0.0, 1.0, left_exp=-0.5)
    assert res.value == pytest.approx(ref.value, rel=1e-9)


def test_singular_double_integral_of_the_weight_alone():
    res = singular_double_integral(lambda u, v: np.ones_like(u), 1.0, -0.5)
    assert res.converged
    assert res.value == pytest.approx(8.0 / 3.0, rel=1e-9)


def test_singular_double_integral_with_corner_power():
    # int int |u - v|^{-1/2} (u + v)^{-1/2} over [0, L]^2 scales like L^{1}
    F = lambda u, v: (u + v) ** -0.5
    one = singular_double_integral(F, 1.0, -0.5, corner_exp=0.5)
    two = singular_double_integral(F, 2.0, -0.5, corner_exp=0.5)
    assert two.value / one.value == pytest.approx(2.0, rel=1e-8)


def test_singular_double_integral_rejects_bad_corner():
    with pytest.raises(DomainError, match="corner"):
        singular_double_integral(lambda u, v: u, 1.0, -0.5, corner_exp=2.0)


def test_log_scale_quad_half_line():
    assert log_scale_quad(lambda w: np.exp(-w), 1.0) == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("kwargs, msg", [
    ({"base_rule": "simpson"}, "unknown base rule"),
    ({"panels_per_axis": 1}, "panels_per_axis"),
    ({"rel_tolerance": 0.0}, "rel_tolerance"),
    ({"order": 1}, "order"),
])
def test_quadrature_spec_validation(kwargs, msg):
    with pytest.raises(DomainError, match=msg):
        QuadratureSpec(**kwargs)


def test_norm_result_scaling_and_strictness():
    res = NormResult(2.0, 0.1, False, 6)
    scaled = res.scaled(-3.0)
    assert scaled.value == 6.0 and scaled.error_estimate == pytest.approx(0.3)
    with pytest.raises(ConvergenceError, match="did not converge"):
        res.require_converged("test integral")
    assert NormResult(1.0, 0.0, True, 1).require_converged().value == 1.0
