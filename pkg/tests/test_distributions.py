import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy import integrate

from innovtest.distributions import (
    FAMILIES,
    DoubleExponential,
    StandardNormal,
    family_from_key,
)


@pytest.fixture(params=["normal", "dexp"])
def family(request):
    return family_from_key(request.param)


def test_closed_form_values():
    norm = StandardNormal()
    dexp = DoubleExponential()
    assert_allclose(norm.pdf(0.0), 1.0 / np.sqrt(2 * np.pi), rtol=1e-12)
    assert_allclose(dexp.pdf(0.0), 0.5, rtol=0)
    assert_allclose(dexp.cdf(0.0), 0.5, rtol=0)
    assert_allclose(norm.psi0(2.0), -2.0, rtol=0)
    assert dexp.psi0(3.0) == -1.0
    assert dexp.psi0(-3.0) == 1.0
    assert dexp.psi0(0.0) == 0.0
    assert_allclose(norm.phi0(1.0), 0.0, atol=1e-15)
    assert_allclose(norm.phi0(0.0), 0.5, rtol=0)
    assert_allclose(dexp.phi0(2.0), -0.5, rtol=0)


def test_density_integrates_to_one(family):
    total, _ = integrate.quad(family.pdf, -np.inf, np.inf, epsabs=1e-12)
    assert abs(total - 1.0) < 1e-8


def test_fisher_constants_against_quadrature_oracle(family):
    # independent integrands written out explicitly
    if family.key == "normal":
        b1_oracle, _ = integrate.quad(
            lambda x: x * x * np.exp(-x * x / 2) / np.sqrt(2 * np.pi), -np.inf, np.inf
        )
        b2_oracle, _ = integrate.quad(
            lambda x: ((1 - x * x) / 2) ** 2 * np.exp(-x * x / 2) / np.sqrt(2 * np.pi),
            -np.inf, np.inf,
        )
        expected = (1.0, 0.5)
    else:
        b1_oracle, _ = integrate.quad(lambda x: 0.5 * np.exp(-abs(x)), -np.inf, np.inf)
        b2_oracle, _ = integrate.quad(
            lambda x: ((1 - abs(x)) / 2) ** 2 * 0.5 * np.exp(-abs(x)), -np.inf, np.inf
        )
        expected = (1.0, 0.25)
    b1, b2 = family.fisher_constants()
    assert abs(b1 - b1_oracle) < 1e-8
    assert abs(b2 - b2_oracle) < 1e-8
    assert_allclose((b1, b2), expected, atol=1e-8)
    assert b1 > 0 and b2 > 0 and b1 * b2 > 0


def test_fisher_constants_cached(family):
    assert family.fisher_constants() is family.fisher_constants()


def test_score_orthogonality(family):
    val, _ = integrate.quad(
        lambda x: family.psi0(x) * family.phi0(x) * family.pdf(x), -np.inf, np.inf
    )
    assert abs(val) < 1e-8


def test_x_times_density_bounded(family):
    lo, hi = family.grid_range
    xs = np.linspace(lo, hi, 20_001)
    assert np.max(np.abs(xs) * family.pdf(xs)) < 1.0


def test_quantile_cdf_roundtrip(family):
    lo, hi = family.grid_range
    xs = np.linspace(lo * 0.999, hi * 0.999, 100)
    assert_allclose(family.quantile(family.cdf(xs)), xs, atol=1e-9)
    ps = np.linspace(0.001, 0.999, 97)
    assert np.max(np.abs(family.cdf(family.quantile(ps)) - ps)) < 1e-10


@pytest.mark.parametrize("p", [0.0, 1.0, -0.2, 1.7])
def test_quantile_domain_error(family, p):
    with pytest.raises(ValueError):
        family.quantile(p)


def test_cdf_nondecreasing_and_pdf_nonnegative(family):
    xs = np.linspace(-20, 20, 5001)
    F = family.cdf(xs)
    assert np.all(np.diff(F) >= 0)
    assert np.all(family.pdf(xs) >= 0)
    assert np.all((F >= 0) & (F <= 1))


def test_sampling_moments():
    rng = np.random.default_rng(101)
    x = StandardNormal().sample(rng, 10**6)
    assert abs(x.mean()) < 0.004
    assert abs(x.var() - 1.0) < 0.005
    y = DoubleExponential().sample(np.random.default_rng(102), 10**6)
    assert abs(y.mean()) < 0.005
    assert abs(y.var() - 2.0) < 0.014  # 3 SE with Var(X^2) = 20


def test_sampling_deterministic(family):
    a = family.sample(np.random.default_rng(7), 1000)
    b = family.sample(np.random.default_rng(7), 1000)
    assert np.array_equal(a, b)


def test_fisher_constants_vs_monte_carlo(family):
    rng = np.random.default_rng(55)
    x = family.sample(rng, 10**6)
    b1, b2 = family.fisher_constants()
    psi2 = family.psi0(x) ** 2
    phi2 = family.phi0(x) ** 2
    for sample, target in ((psi2, b1), (phi2, b2)):
        se = sample.std() / np.sqrt(sample.size)
        # psi0^2 is constant for the Laplace family, hence se == 0 there
        assert abs(sample.mean() - target) <= max(3 * se, 1e-12)


def test_family_from_key_errors():
    with pytest.raises(ValueError, match="unknown null family"):
        family_from_key("cauchy")
    fam = StandardNormal()
    assert family_from_key(fam) is fam
    assert set(FAMILIES) == {"normal", "dexp"}


@settings(deadline=None)
@given(st.floats(-50, 50), st.sampled_from(["normal", "dexp"]))
def test_phi0_identity(x, key):
    fam = family_from_key(key)
    assert fam.phi0(x) == (1.0 + x * fam.psi0(x)) / 2.0


@settings(deadline=None)
@given(st.floats(0.001, 0.999), st.sampled_from(["normal", "dexp"]))
def test_quantile_is_cdf_inverse(p, key):
    fam = family_from_key(key)
    assert abs(fam.cdf(fam.quantile(p)) - p) < 1e-9
