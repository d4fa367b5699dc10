import numpy as np
import pytest
from scipy.special import gamma, hyp2f1

from backend.errors import DomainError
from backend.fractional_time import (
    SampledFunction,
    derive_hurst_params,
    fbm_covariance,
    fbm_covariance_matrix,
    fractional_integral_right,
    hurst_inner_product,
    kernel_K_H,
    kernel_reproduction,
    lemma_A1_pairing,
    single_pairing_identity,
    q_alpha,
    restricted_fourier,
    transfer_inner_product,
    transfer_operator,
)


# ----------------------
# CONSTANTS
# ----------------------
def test_hurst_constants(hp75):
    assert hp75.alpha_H == pytest.approx(0.375)
    assert hp75.kappa == pytest.approx(0.25)
    assert hp75.c_H > 0 and hp75.c_star_H > 0


@pytest.mark.parametrize("H", [0.55, 0.7, 0.9, 0.99])
def test_c_H_is_the_pairing_constant_at_2H_minus_1(H):
    assert derive_hurst_params(H).c_H == pytest.approx(q_alpha(2.0 * H - 1.0), rel=1e-13)


@pytest.mark.parametrize("H", [0.5, 1.0, 0.3, 1.2])
def test_hurst_outside_range_is_rejected(H):
    with pytest.raises(DomainError, match="Hurst index"):
        derive_hurst_params(H)


def test_q_alpha_at_one_half():
    # 1 / (2 Gamma(1/2) sin(pi/4))
    assert q_alpha(0.5) == pytest.approx(1.0 / np.sqrt(2.0 * np.pi), rel=1e-13)


# ----------------------
# COVARIANCE AND KERNEL
# ----------------------
def test_fbm_covariance(hp75):
    assert fbm_covariance(hp75, 1.0, 1.0) == pytest.approx(1.0)
    assert fbm_covariance(hp75, 0.0, 0.7) == 0.0
    expected = 0.5 * (1.0 + 0.5 ** 1.5 - 0.5 ** 1.5)
    assert fbm_covariance(hp75, 1.0, 0.5) == pytest.approx(expected)
    m = fbm_covariance_matrix(hp75, [0.25, 0.5, 1.0])
    np.testing.assert_allclose(m, m.T)
    assert np.all(np.linalg.eigvalsh(m) > 0)
    with pytest.raises(DomainError):
        fbm_covariance(hp75, -1.0, 0.5)


@pytest.mark.parametrize("H", [0.6, 0.75, 0.9])
def test_kernel_methods_agree(H):
    hp = derive_hurst_params(H)
    a = kernel_K_H(hp, 1.0, 0.3)
    b = kernel_K_H(hp, 1.0, 0.3, method="adaptive")
    assert a.value == pytest.approx(b.value, rel=1e-9)


def test_kernel_domain(hp75):
    with pytest.raises(DomainError, match="0 < s < t"):
        kernel_K_H(hp75, 0.5, 0.5)


@pytest.mark.parametrize("H", [0.6, 0.75, 0.9])
@pytest.mark.parametrize("t, s", [(1.0, 0.5), (1.0, 1.0), (0.5, 0.25)])
def test_kernel_reproduces_fbm_covariance(H, t, s):
    hp = derive_hurst_params(H)
    assert kernel_reproduction(hp, t, s).value == pytest.approx(fbm_covariance(hp, t, s), rel=1e-6)


# ----------------------
# SAMPLED FUNCTIONS AND TRANSFER OPERATOR
# ----------------------
def test_sampled_function_is_zero_outside_its_span():
    f = SampledFunction((0.2, 0.6), (1.0, 3.0), horizon=1.0)
    assert f(0.4) == pytest.approx(2.0)
    assert f(0.1) == 0.0 and f(0.9) == 0.0
    (p, q, c0, c1), = f.pieces()
    assert (p, q) == (0.2, 0.6)
    assert c0 == pytest.approx(0.0, abs=1e-12) and c1 == pytest.approx(5.0)


def test_sampled_function_validation():
    with pytest.raises(DomainError, match="strictly increasing"):
        SampledFunction((0.0, 0.5, 0.5), (1.0, 1.0, 1.0))
    with pytest.raises(DomainError, match="inside"):
        SampledFunction((0.0, 2.0), (1.0, 1.0), horizon=1.0)


def test_fractional_integral_of_a_constant():
    one = SampledFunction.indicator(0.0, 1.0)
    for alpha in (0.2, 0.5, 0.8):
        expected = 0.7 ** alpha / gamma(alpha + 1.0)
        assert fractional_integral_right(one, alpha, 0.3) == pytest.approx(expected, rel=1e-12)


def test_transfer_operator_of_an_indicator_is_the_kernel(hp75):
    phi = SampledFunction.indicator(0.0, 1.0, 1.0)
    assert transfer_operator(phi, hp75, 0.4) == pytest.approx(kernel_K_H(hp75, 1.0, 0.4).value,
                                                              rel=1e-10)


@pytest.mark.parametrize("t", [0.5, 1.0])
def test_transfer_isometry_on_indicators(hp75, t):
    phi = SampledFunction.indicator(0.0, t, 1.0)
    assert transfer_inner_product(phi, phi, hp75).value == pytest.approx(t ** 1.5, rel=1e-5)


# ----------------------
# FOURIER
# ----------------------
def test_restricted_fourier_of_an_indicator():
    one = SampledFunction.indicator(0.0, 1.0)
    assert restricted_fourier(one, 0.0, 1.0, 0.0) == pytest.approx(1.0)
    expected = (1.0 - np.exp(-2j)) / 2j
    assert restricted_fourier(one, 0.0, 1.0, 2.0) == pytest.approx(expected, rel=1e-12)
    values = restricted_fourier(one, 0.0, 1.0, np.array([0.0, 2.0]))
    assert values.shape == (2,)


def test_restricted_fourier_of_a_ramp():
    ramp = SampledFunction((0.0, 1.0), (0.0, 1.0))
    tau = 3.0
    expected = (1j * tau * np.exp(-1j * tau) + np.exp(-1j * tau) - 1.0) / tau ** 2
    assert restricted_fourier(ramp, 0.0, 1.0, tau) == pytest.approx(expected, rel=1e-10)


def test_pairing_identity_at_one_half():
    one = SampledFunction.indicator(0.0, 1.0)
    res = lemma_A1_pairing(one, one, 0.0, 1.0, 0.5)
    assert res.lhs == pytest.approx(8.0 / 3.0, rel=1e-6)
    assert res.relative_gap <= 1e-4


@pytest.mark.parametrize("alpha", [0.3, 0.8])
def test_pairing_identity_on_a_ramp(alpha):
    one = SampledFunction.indicator(0.0, 1.0)
    ramp = SampledFunction((0.0, 1.0), (0.0, 1.0))
    assert lemma_A1_pairing(one, ramp, 0.0, 1.0, alpha).relative_gap <= 1e-4


def test_single_function_identity():
    one = SampledFunction.indicator(0.0, 1.0)
    res = single_pairing_identity(one, 0.0, 1.0, 0.5)
    assert res.lhs == pytest.approx(2.0, rel=1e-12)
    assert res.rhs == pytest.approx(2.0, rel=1e-3)


def test_hurst_inner_product_time_and_spectral_routes(hp75):
    one = SampledFunction.indicator(0.0, 1.0)
    assert hurst_inner_product(one, one, hp75, 1.0).value == pytest.approx(1.0, rel=1e-7)
    assert hurst_inner_product(one, one, hp75, 1.0, method="spectral").value == pytest.approx(
        1.0, rel=1e-4)
    with pytest.raises(DomainError):
        hurst_inner_product(one, one, hp75, 1.0, method="other")


# ----------------------
# REFERENCE VALUES
# ----------------------
def test_constants_at_H_07():
    hp = derive_hurst_params(0.7)
    c_H = gamma(0.2) / (2.0 ** 0.6 * np.sqrt(np.pi) * gamma(0.3))
    c_star = np.sqrt(0.7 * 0.4 * gamma(0.8) / (gamma(0.6) * gamma(0.2)))
    assert hp.alpha_H == pytest.approx(0.28, rel=1e-15)
    assert hp.c_H == pytest.approx(c_H, rel=1e-12)
    assert hp.c_star_H == pytest.approx(c_star, rel=1e-12)


@pytest.mark.parametrize("alpha, t", [(0.25, 0.5), (0.5, 0.2), (0.8, 0.0)])
def test_fractional_integral_of_the_identity(alpha, t):
    # int_t^1 (u - t)^{alpha-1} u du = (1-t)^{alpha+1}/(alpha+1) + t (1-t)^alpha / alpha
    ramp = SampledFunction((0.0, 1.0), (0.0, 1.0))
    expected = ((1.0 - t) ** (alpha + 1.0) / (alpha + 1.0) + t * (1.0 - t) ** alpha / alpha) / gamma(alpha)
    assert fractional_integral_right(ramp, alpha, t) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("H, t, s", [(0.6, 1.0, 0.25), (0.75, 1.0, 0.5), (0.9, 0.5, 0.1)])
def test_kernel_matches_its_hypergeometric_form(H, t, s):
    hp = derive_hurst_params(H)
    k = H - 0.5
    # u = s + (t - s) v turns the integral into a Gauss hypergeometric function
    expected = hp.c_star_H * (t - s) ** k / k * hyp2f1(-k, k, k + 1.0, -(t - s) / s)
    sub = kernel_K_H(hp, t, s)
    ada = kernel_K_H(hp, t, s, method="adaptive")
    assert sub.value == pytest.approx(expected, rel=1e-8)
    assert ada.value == pytest.approx(sub.value, rel=1e-8)


def test_kernel_vanishes_as_t_approaches_s(hp75):
    values = [kernel_K_H(hp75, 0.5 + h, 0.5).value for h in (1e-2, 1e-4, 1e-6)]
    assert values[0] > values[1] > values[2] > 0.0
    # leading order c*_H h^{H-1/2} / (H - 1/2)
    assert values[2] == pytest.approx(hp75.c_star_H * 1e-6 ** 0.25 / 0.25, rel=1e-4)


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
@pytest.mark.parametrize("H", [0.6, 0.75, 0.9])
def test_fbm_covariance_is_psd_on_random_points(seed, H):
    times = np.random.default_rng(seed).uniform(0.0, 2.0, size=6)
    m = fbm_covariance_matrix(derive_hurst_params(H), times)
    np.testing.assert_array_equal(m, m.T)
    assert np.linalg.eigvalsh(m).min() >= -1e-10


@pytest.mark.parametrize("phi", [
    SampledFunction.indicator(0.0, 1.0),
    SampledFunction((0.0, 0.3, 1.0), (1.0, -2.0, 0.5)),
    SampledFunction.from_callable(np.sin, np.linspace(0.0, 1.0, 11)),
])
@pytest.mark.parametrize("tau", [0.5, 3.0, 40.0])
def test_restricted_fourier_is_conjugate_symmetric(phi, tau):
    plus = restricted_fourier(phi, 0.0, 1.0, tau)
    minus = restricted_fourier(phi, 0.0, 1.0, -tau)
    assert minus == pytest.approx(np.conj(plus), rel=1e-12, abs=1e-15)
