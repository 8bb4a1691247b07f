import numpy as np
import pytest
from numpy.testing import assert_allclose

from innovtest.errors import InputError
from innovtest.models import (
    ArGarchParams,
    ArmaGarchParams,
    GarchParams,
    filter_series,
    gradients,
    innovation_sampler,
    params_from_dict,
    simulate,
    w_blocks,
)


def test_recursion_collapses_without_arch_terms():
    p = GarchParams(0.025, [0.0], [0.0])
    y, h, eta = simulate(p, 500, burn_in=0, rng=np.random.default_rng(0), return_internals=True)
    assert np.all(h == 0.025)
    assert_allclose(y, np.sqrt(0.025) * eta, rtol=0)
    path = filter_series(y, p)
    assert np.all(path.h == 0.025)


def test_unconditional_variance():
    p = GarchParams(0.025, [0.25], [0.5])
    y = simulate(p, 10**6, rng=np.random.default_rng(3))
    assert abs(y.var() - 0.1) < 0.003


def test_ar1_autocorrelation():
    p = ArGarchParams(0.5, 0.025, 0.25, 0.5)
    y = simulate(p, 10**6, rng=np.random.default_rng(4))
    yc = y - y.mean()
    acf1 = (yc[1:] @ yc[:-1]) / (yc @ yc)
    assert abs(acf1 - 0.5) < 0.01


@pytest.mark.parametrize(
    "params",
    [
        GarchParams(0.025, [0.25], [0.5]),
        ArGarchParams(0.5, 0.025, 0.25, 0.5),
        ArmaGarchParams(0.5, -0.3, 0.025, 0.25, 0.5),
    ],
)
def test_filter_simulate_roundtrip(params):
    y, h, eta = simulate(params, 800, burn_in=0, rng=np.random.default_rng(5), return_internals=True)
    path = filter_series(y, params)
    if isinstance(params, GarchParams):
        # eps == y identically, so the variance recursion is bit-identical
        assert np.array_equal(path.h, h)
        assert_allclose(path.eta, eta, rtol=1e-13, atol=0)
    else:
        # recovering eps through the ARMA recursion rounds differently
        assert_allclose(path.h, h, rtol=1e-10, atol=0)
        assert_allclose(path.eta, eta, rtol=1e-9, atol=1e-12)


def test_arch_only_filter_is_one_term():
    p = GarchParams(0.04, [0.3], [0.0])
    y = simulate(p, 300, rng=np.random.default_rng(6))
    path = filter_series(y, p)
    expected = np.empty_like(y)
    expected[0] = 0.04  # presample squared observation is zero
    expected[1:] = 0.04 + 0.3 * y[:-1] ** 2
    assert_allclose(path.h, expected, rtol=0, atol=0)


def test_filter_matches_lag_operator_expansion():
    # (1 - sum beta_j B^j)^{-1} (alpha0 + sum alpha_k B^k y^2) with zero
    # presample observations, truncated far beyond float precision
    rng = np.random.default_rng(7)
    p = GarchParams(0.05, [0.15, 0.1], [0.3, 0.2])
    y = simulate(p, 50, rng=rng)
    # fixed point of the no-data recursion, so the filter matches the
    # operator expansion at every index
    h_init = p.alpha0 / (1.0 - p.beta.sum())
    path = filter_series(y, p, presample_h=h_init)

    L = 10_000
    c = np.zeros(L + 1)
    c[0] = 1.0
    for m in range(1, L + 1):
        for j, bj in enumerate(p.beta, start=1):
            if m - j >= 0:
                c[m] += bj * c[m - j]
    y2 = y**2
    n = y.size
    expected = np.zeros(n)
    for i in range(n):
        acc = p.alpha0 * c.sum()
        for m in range(L + 1):
            for k, ak in enumerate(p.alpha, start=1):
                idx = i - m - k
                if idx >= 0:
                    acc += c[m] * ak * y2[idx]
        expected[i] = acc
    assert np.max(np.abs(path.h - expected)) < 1e-10


def _fd_gradients(y, params, h_init, step=1e-6):
    """Central finite differences of the frozen-presample filter."""
    vec = params.to_array()
    q = params.q
    deps = np.zeros((y.size, q))
    dh = np.zeros((y.size, vec.size))
    for k in range(vec.size):
        delta = step * (1.0 + abs(vec[k]))
        up, dn = vec.copy(), vec.copy()
        up[k] += delta
        dn[k] -= delta
        pu = filter_series(y, params.replace_array(up), presample_h=h_init)
        pd = filter_series(y, params.replace_array(dn), presample_h=h_init)
        dh[:, k] = (pu.h - pd.h) / (2 * delta)
        if k < q:
            deps[:, k] = (pu.eps - pd.eps) / (2 * delta)
    return deps, dh


def _max_rel_err(a, b):
    return np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))


@pytest.mark.parametrize("kind", ["garch", "garch22", "ar-garch", "arma-garch"])
def test_gradients_match_finite_differences(kind):
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(5):
        al = rng.uniform(0.05, 0.3)
        be = rng.uniform(0.2, 0.6)
        a0 = rng.uniform(0.01, 0.2)
        a = rng.uniform(-0.7, 0.7)
        b = rng.uniform(-0.6, 0.6)
        if kind == "garch":
            params = GarchParams(a0, [al], [be])
        elif kind == "garch22":
            params = GarchParams(a0, [al / 2, al / 2], [be / 2, be / 2])
        elif kind == "ar-garch":
            params = ArGarchParams(a, a0, al, be)
        else:
            if abs(a + b) < 0.05:
                b += 0.1
            params = ArmaGarchParams(a, b, a0, al, be)
        y = simulate(params, 200, rng=rng)
        h_init = params.unconditional_variance()
        path = gradients(y, params, presample_h=h_init)
        deps_fd, dh_fd = _fd_gradients(y, params, h_init)
        worst = max(worst, _max_rel_err(dh_fd, path.dh))
        if params.q:
            worst = max(worst, _max_rel_err(-deps_fd, path.dmu))
    assert worst < 1e-5


def test_alpha0_gradient_limit():
    # d h_i / d alpha0 -> (1 - beta)^{-1} = 2 at beta = 0.5
    p = GarchParams(0.025, [0.25], [0.5])
    y = simulate(p, 400, rng=np.random.default_rng(12))
    path = gradients(y, p)
    assert np.all(path.dh[150:, 0] == 2.0)


def test_alpha_gradient_without_garch_term():
    p = GarchParams(0.04, [0.3], [0.0])
    y = simulate(p, 200, rng=np.random.default_rng(13))
    path = gradients(y, p)
    expected = np.concatenate([[0.0], y[:-1] ** 2])
    assert_allclose(path.dh[:, 1], expected, rtol=0, atol=0)


def test_w_block_shapes_and_values():
    p = GarchParams(0.025, [0.25], [0.5])
    y = simulate(p, 300, rng=np.random.default_rng(14))
    path = gradients(y, p)
    W11, W12, W22 = w_blocks(path)
    assert W11.shape == (300, 0) and W12.shape == (300, 0)
    assert W22.shape == (300, 3)

    pa = ArmaGarchParams(0.5, -0.3, 0.025, 0.25, 0.5)
    ya = simulate(pa, 300, rng=np.random.default_rng(15))
    patha = gradients(ya, pa)
    W11, W12, W22 = w_blocks(patha)
    assert W11.shape == (300, 2) and W12.shape == (300, 2) and W22.shape == (300, 3)
    assert np.all(np.isfinite(W11)) and np.all(np.isfinite(W12)) and np.all(np.isfinite(W22))
    # alpha0 component of W22 is positive and approaches 1/(h (1 - beta))
    assert np.all(W22[:, 0] > 0)
    assert_allclose(W22[50:, 0], 1.0 / (patha.h[50:] * 0.5), rtol=1e-10)

    par = ArGarchParams(0.5, 0.025, 0.25, 0.5)
    pathr = gradients(simulate(par, 200, rng=np.random.default_rng(16)), par)
    assert pathr.W11.shape == (200, 1) and pathr.W22.shape == (200, 3)


def test_w_blocks_requires_gradients():
    p = GarchParams(0.025, [0.25], [0.5])
    path = filter_series(simulate(p, 120, rng=np.random.default_rng(17)), p)
    with pytest.raises(ValueError, match="gradients"):
        w_blocks(path)


@pytest.mark.parametrize(
    "params",
    [GarchParams(0.025, [0.25], [0.5]), ArmaGarchParams(0.4, 0.2, 0.025, 0.25, 0.5)],
)
def test_filter_is_history_causal(params):
    rng = np.random.default_rng(18)
    y = simulate(params, 150, rng=rng)
    base = filter_series(y, params)
    j = 70
    y2 = y.copy()
    y2[j] += 0.5
    pert = filter_series(y2, params)
    assert np.array_equal(base.h[:j], pert.h[:j])
    assert np.array_equal(base.eps[:j], pert.eps[:j])
    assert not np.array_equal(base.h[j + 1 :], pert.h[j + 1 :])


def test_stationary_variance_stable_across_seeds():
    p = GarchParams(0.05, [0.3], [0.6])
    vs = [simulate(p, 10**5, rng=np.random.default_rng(s)).var() for s in (21, 22, 23)]
    vs = np.array(vs)
    assert np.all(np.isfinite(vs))
    assert np.max(np.abs(vs - vs.mean())) / vs.mean() < 0.10


def test_w_block_moments_stable_across_seeds():
    p = ArmaGarchParams(0.5, -0.3, 0.025, 0.25, 0.5)
    stats = []
    for s in (31, 32):
        y = simulate(p, 10**5, rng=np.random.default_rng(s))
        path = gradients(y, p)
        stats.append([
            np.mean(np.sum(path.W11**2, axis=1)),
            np.mean(np.sum(path.W12**2, axis=1)),
            np.mean(np.sum(path.W22**2, axis=1)),
        ])
    a, b = np.array(stats)
    assert np.all(np.isfinite(a)) and np.all(np.isfinite(b))
    assert np.all(np.abs(a - b) / a < 0.15)


def test_innovation_laws_standardized():
    rng = np.random.default_rng(41)
    n = 400_000
    for law, var, tol in [
        ("normal", 1.0, 0.01),
        ("a1", 1.0, 0.02),
        ("a2", 1.0, 0.05),
        ("a3", 1.0, 0.15),
        ("a4", 2.0, 0.05),
        ("a5", 1.0, 0.01),
        ("dexp", 2.0, 0.05),
    ]:
        x = innovation_sampler(law)(rng, n)
        assert abs(x.mean()) < 0.02, law
        assert abs(x.var() - var) < tol, law
    x = innovation_sampler("a4", rescale=True)(rng, n)
    assert abs(x.var() - 1.0) < 0.03


def test_innovation_sampler_errors_and_passthrough():
    with pytest.raises(ValueError, match="unknown innovation law"):
        innovation_sampler("a9")
    f = lambda rng, n: np.zeros(n)
    assert innovation_sampler(f) is f


def test_parameter_validation():
    with pytest.raises(ValueError, match="alpha0"):
        GarchParams(-0.1, [0.2], [0.3]).validate()
    with pytest.raises(ValueError, match="stationarity"):
        GarchParams(0.1, [0.6], [0.5]).validate()
    with pytest.raises(ValueError, match="nonnegative"):
        GarchParams(0.1, [-0.2], [0.3]).validate()
    with pytest.raises(ValueError, match="< 1"):
        ArmaGarchParams(1.2, 0.0, 0.1, 0.2, 0.3).validate()
    with pytest.raises(ValueError, match="identifiability"):
        ArmaGarchParams(0.4, -0.4, 0.1, 0.2, 0.3).validate()
    ArGarchParams(0.5, 0.025, 0.25, 0.5).validate()


def test_simulate_and_filter_input_errors():
    p = GarchParams(0.025, [0.25], [0.5])
    with pytest.raises(ValueError, match="stationarity"):
        simulate(GarchParams(0.025, [0.7], [0.5]), 100, rng=np.random.default_rng(0))
    with pytest.raises(ValueError, match="burn_in"):
        simulate(p, 100, burn_in=-1, rng=np.random.default_rng(0))
    with pytest.raises(InputError, match="non-finite"):
        filter_series(np.array([1.0, np.nan, 2.0]), p)
    with pytest.raises(InputError, match="too short"):
        filter_series(np.array([1.0]), p)
    with pytest.raises(InputError, match="one-dimensional"):
        filter_series(np.ones((5, 2)), p)


def test_params_from_dict():
    p = params_from_dict("garch", {"alpha0": 0.05, "alpha": [0.1, 0.1], "beta": 0.5})
    assert isinstance(p, GarchParams) and p.alpha.size == 2
    p = params_from_dict("ar-garch", {"a": 0.5, "alpha0": 0.025, "alpha": 0.25, "beta": 0.5})
    assert isinstance(p, ArGarchParams)
    p = params_from_dict("arma-garch", {"a": 0.5, "alpha0": 0.025, "alpha": 0.25, "beta": 0.5})
    assert isinstance(p, ArmaGarchParams) and p.b == 0.0
    with pytest.raises(InputError, match="missing parameter"):
        params_from_dict("ar-garch", {"alpha0": 0.025})
    with pytest.raises(InputError, match="unknown model"):
        params_from_dict("figarch", {})


def test_parameter_array_roundtrip():
    for p in (
        GarchParams(0.05, [0.1, 0.2], [0.3]),
        ArGarchParams(0.5, 0.025, 0.25, 0.5),
        ArmaGarchParams(0.5, -0.3, 0.025, 0.25, 0.5),
    ):
        vec = p.to_array()
        assert np.array_equal(p.replace_array(vec).to_array(), vec)
        assert len(p.names()) == vec.size
        assert p.q + p.r == vec.size
