import math

import numpy as np
import pytest
from scipy import stats

from gose import (ObjectiveOracle, ScsgConfig, SmoothnessSpec, ToleranceConfig,
                  as_counting, derive_scsg_params, estimate_variance_bound,
                  gd_to_stationarity, get_problem, guarded_agd,
                  sample_geometric, scsg_epoch, with_gradient_noise)
from gose.core import ConfigError, InvalidP, MissingVarianceBound
from gose.problems import as_finite_sum
from gose.solvers import run_solver
from conftest import planted_symmetric


# ---------------------------------------------------------------------------
# geometric sampler


def test_geometric_mean_matches_B_over_b():
    rng = np.random.default_rng(42)
    p = 100.0 / 101.0  # B=100, b=1, true mean B/b = 100
    draws = np.array([sample_geometric(p, rng) for _ in range(100_000)])
    assert 95.0 <= draws.mean() <= 105.0


def test_geometric_tiny_p_returns_zero():
    rng = np.random.default_rng(0)
    assert all(sample_geometric(1e-9, rng) == 0 for _ in range(100))


def test_geometric_pmf_chi_square():
    # Pr(T=k) = (1/2)**(k+1) at p = 1/2; chi-square over 1e5 draws at 0.01
    rng = np.random.default_rng(7)
    draws = np.array([sample_geometric(0.5, rng) for _ in range(100_000)])
    kmax = 12
    observed = np.array([(draws == k).sum() for k in range(kmax)]
                        + [(draws >= kmax).sum()])
    pmf = np.array([0.5 ** (k + 1) for k in range(kmax)] + [0.5 ** kmax])
    chi2, pval = stats.chisquare(observed, pmf * len(draws))
    assert pval >= 0.01


@pytest.mark.parametrize("p", [0.0, 1.0, -0.5, 1.5])
def test_geometric_invalid_p(p):
    with pytest.raises(InvalidP):
        sample_geometric(p, np.random.default_rng(0))


# ---------------------------------------------------------------------------
# parameter derivation


def test_derive_finite_sum_rules():
    tol = ToleranceConfig(eps=0.01, eps_h=0.5)
    smooth = SmoothnessSpec(L=4.0, rho=1.0)
    cfg = derive_scsg_params(tol, smooth, "finite_sum", n=1000)
    assert cfg.B == 1000
    assert cfg.b == 1
    assert cfg.eta == pytest.approx(1.0 / 400.0)  # 1/(4 * 1000**(2/3))
    assert cfg.p == pytest.approx(1000.0 / 1001.0)


def test_derive_stochastic_B_example():
    # B = ceil(96 * 1 * ln(10) / 0.01) = 22105
    tol = ToleranceConfig(eps=0.1, eps_h=0.5, delta=0.1)
    smooth = SmoothnessSpec(L=1.0, rho=1.0, h_star=1.0)
    cfg = derive_scsg_params(tol, smooth, "stochastic", B_mult=96.0)
    assert cfg.B == math.ceil(96.0 * math.log(10.0) / 0.01)
    assert cfg.B == 22105
    assert cfg.eta == pytest.approx(cfg.b ** (2 / 3) / (6.0 * cfg.B ** (2 / 3)))


def test_derive_stochastic_degenerate_clamp():
    # eps_h small relative to eps**(2/3) forces the minibatch rule past B
    tol = ToleranceConfig(eps=0.2, eps_h=0.05, delta=0.1)
    smooth = SmoothnessSpec(L=0.1, rho=2.0, h_star=1.0)
    cfg = derive_scsg_params(tol, smooth, "stochastic")
    assert cfg.degenerate_sgd
    assert cfg.b == cfg.B


def test_derive_requires_variance_bound():
    tol = ToleranceConfig(eps=0.01, eps_h=0.5)
    with pytest.raises(MissingVarianceBound):
        derive_scsg_params(tol, SmoothnessSpec(L=1.0, rho=1.0), "stochastic")


def test_derive_invariants_hold(rng):
    for _ in range(20):
        tol = ToleranceConfig(eps=float(rng.uniform(0.005, 0.1)),
                              eps_h=float(rng.uniform(0.1, 0.9)),
                              delta=float(rng.uniform(0.01, 0.3)))
        smooth = SmoothnessSpec(L=float(rng.uniform(0.5, 10)),
                                rho=float(rng.uniform(0.001, 3)),
                                h_star=float(rng.uniform(0.001, 2)))
        cfg = derive_scsg_params(tol, smooth, "stochastic")
        assert 1 <= cfg.b <= cfg.B
        assert cfg.eta > 0
        assert 0 < cfg.p < 1


def test_scsg_config_validation():
    with pytest.raises(ConfigError):
        ScsgConfig(B=1, b=2, eta=0.1, p=0.5, mode="stochastic")
    with pytest.raises(Exception):
        ScsgConfig(B=2, b=1, eta=-0.1, p=0.5, mode="stochastic")


def test_estimate_variance_bound_near_two_sigma_squared(rng):
    sphere = get_problem("sphere", d=8)
    noisy = with_gradient_noise(sphere, sigma=0.2)
    est = estimate_variance_bound(noisy.oracle, np.ones(8), rng, samples=512)
    # draws have E||noise||^2 = sigma^2 = 0.04, so the estimate targets 0.08
    assert 0.05 <= est <= 0.12


# ---------------------------------------------------------------------------
# scsg_epoch


def _seed_with_T(p, want):
    for seed in range(1000):
        if sample_geometric(p, np.random.default_rng(seed)) == want:
            return seed
    raise AssertionError("no seed found")


def test_epoch_T_zero_returns_x0_exactly():
    sphere = get_problem("sphere", d=3)
    fs = as_finite_sum(sphere, 1)
    cfg = ScsgConfig(B=1, b=1, eta=0.1, p=0.5, mode="finite_sum")
    seed = _seed_with_T(0.5, 0)
    x0 = np.array([1.0, -2.0, 0.5])
    y = scsg_epoch(fs.oracle, x0, cfg, fs.oracle.gradient(x0),
                   np.random.default_rng(seed))
    np.testing.assert_array_equal(y, x0)


def test_epoch_collapses_to_gd_when_b_B_n_one():
    # the control variate cancels: g_I(y) - g_I(x0) + g_anchor = grad f(y)
    sphere = get_problem("sphere", d=3)
    fs = as_finite_sum(sphere, 1)
    cfg = ScsgConfig(B=1, b=1, eta=0.1, p=0.5, mode="finite_sum")
    seed = _seed_with_T(0.5, 4)
    x0 = np.array([1.0, -2.0, 0.5])
    y = scsg_epoch(fs.oracle, x0, cfg, fs.oracle.gradient(x0),
                   np.random.default_rng(seed))
    T = sample_geometric(0.5, np.random.default_rng(seed))
    z = x0.copy()
    for _ in range(T):
        z = z - 0.1 * sphere.oracle.gradient(z)
    assert np.max(np.abs(y - z)) <= 1e-12 * max(1, T)


def test_epoch_counts_two_b_T_evals():
    sphere = get_problem("sphere", d=3)
    fs = as_finite_sum(sphere, 4)
    cfg = ScsgConfig(B=4, b=2, eta=0.05, p=4.0 / 6.0, mode="finite_sum")
    seed = _seed_with_T(4.0 / 6.0, 3)
    co = as_counting(fs.oracle)
    scsg_epoch(co, np.ones(3), cfg, fs.oracle.gradient(np.ones(3)),
               np.random.default_rng(seed))
    assert co.counters.component_grad_evals == 2 * 2 * 3  # 2 * b * T


def test_epoch_mean_descent_on_finite_sum_quadratic():
    # 100 seeded epochs from a fixed start: mean f(y_T) < f(x0)
    rng = np.random.default_rng(3)
    d, n = 6, 20
    A = planted_symmetric(d, rng.uniform(0.2, 1.0, d), rng)
    comps = A[None] + 0.05 * rng.standard_normal((n, d, d))
    comps = 0.5 * (comps + comps.transpose(0, 2, 1))
    comps -= comps.mean(axis=0, keepdims=True) - A[None]
    oracle = ObjectiveOracle(
        d, lambda x: 0.5 * float(x @ (A @ x)), lambda x: A @ x,
        hvp=lambda x, v: A @ v, n_components=n,
        component_gradient=lambda i, x: comps[i] @ x,
    )
    cfg = ScsgConfig(B=n, b=1, eta=1.0 / (1.0 * n ** (2 / 3)), p=n / (n + 1),
                     mode="finite_sum")
    x0 = np.full(d, 2.0)
    f0 = oracle.value(x0)
    vals = []
    for seed in range(100):
        y = scsg_epoch(oracle, x0, cfg, oracle.gradient(x0),
                       np.random.default_rng(seed))
        vals.append(oracle.value(y))
    assert np.mean(vals) < f0


def test_epoch_stochastic_common_random_numbers():
    # additive-noise draws replayed at both points cancel exactly, so a
    # zero-variance check: epoch equals anchored full-gradient recursion
    sphere = get_problem("sphere", d=4)
    noisy = with_gradient_noise(sphere, sigma=0.3)
    cfg = ScsgConfig(B=8, b=2, eta=0.05, p=8.0 / 10.0, mode="stochastic")
    seed = _seed_with_T(8.0 / 10.0, 5)
    x0 = np.ones(4)
    g_anchor = sphere.oracle.gradient(x0)  # exact anchor isolates the noise path
    y = scsg_epoch(noisy.oracle, x0, cfg, g_anchor, np.random.default_rng(seed))
    z = x0.copy()
    for _ in range(5):
        z = z - 0.05 * (sphere.oracle.gradient(z) - sphere.oracle.gradient(x0) + g_anchor)
    assert np.max(np.abs(y - z)) <= 1e-9


# ---------------------------------------------------------------------------
# first-order solvers


def test_gd_sphere_one_step():
    sphere = get_problem("sphere", d=2)
    res = gd_to_stationarity(sphere.oracle, np.array([1.0, 0.0]), 1.0, 0.01)
    assert res.converged
    assert res.grad_norm == 0.0
    np.testing.assert_allclose(res.point, [0.0, 0.0])


def test_gd_rosenbrock_monotone_to_tolerance():
    ros = get_problem("rosenbrock", d=2)
    seen = []
    base = ros.oracle

    class Recording:
        dimension = 2
        n_components = 0
        capabilities = base.capabilities

        def gradient(self, x):
            seen.append(np.array(x))
            return base.gradient(x)

        def value(self, x):
            return base.value(x)

    res = gd_to_stationarity(Recording(), np.array([-1.2, 1.0]), 800.0, 1e-3,
                             max_iters=100_000)
    assert res.converged
    assert res.grad_norm <= 1e-3
    values = [base.value(x) for x in seen]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_gd_linear_function_exhausts_budget():
    c = np.array([1.0, 2.0])
    lin = ObjectiveOracle(2, lambda x: float(c @ x), lambda x: c.copy())
    res = gd_to_stationarity(lin, np.zeros(2), 1.0, 0.01, max_iters=100)
    assert not res.converged
    assert res.iters == 100


def test_agd_beats_gd_on_conditioned_quadratic():
    prob = get_problem("quadratic_saddle", d=10,
                       spectrum=list(np.linspace(0.01, 1.0, 10)), orth=False)
    x0 = np.ones(10)
    gd_oracle = as_counting(prob.oracle)
    gd = gd_to_stationarity(gd_oracle, x0, 1.0, 1e-6)
    agd_oracle = as_counting(prob.oracle)
    agd = guarded_agd(agd_oracle, x0, 1.0, 1.0, 1e-6)
    assert gd.converged and agd.converged
    assert agd_oracle.counters.grad_evals < gd_oracle.counters.grad_evals


def test_agd_sphere_converges():
    sphere = get_problem("sphere", d=4)
    res = guarded_agd(sphere.oracle, np.ones(4), 1.0, 1.0, 1e-8)
    assert res.converged
    assert np.linalg.norm(res.point) <= 1e-7


def test_agd_output_contract_on_nonconvex_starts():
    # any run: grad norm <= eps or flagged, and f(out) <= f(x0)
    for seed in range(10):
        rng = np.random.default_rng(seed)
        chain = get_problem("chained_saddles", d=4)
        x0 = rng.uniform(-1.2, 1.2, 4)
        res = guarded_agd(chain.oracle, x0, chain.known_L, 1.0, 1e-4,
                          max_iters=50_000)
        assert chain.oracle.value(res.point) <= chain.oracle.value(x0) + 1e-12
        if res.converged:
            assert res.grad_norm <= 1e-4


def test_solver_convergence_budget_rule():
    # both solvers converge on the convex suite within 10*L*Delta_f/eps**2
    for name in ("gd", "agd"):
        prob = get_problem("quadratic_saddle", d=5,
                           spectrum=[0.2, 0.4, 0.6, 0.8, 1.0], orth=True)
        x0 = np.ones(5)
        delta_f = prob.oracle.value(x0)
        eps = 0.05
        budget = int(10 * 1.0 * delta_f / eps ** 2)
        res = run_solver(name, prob.oracle, x0, 1.0, 1.0, eps, max_iters=budget)
        assert res.converged, name


def test_run_solver_unknown_name():
    sphere = get_problem("sphere", d=2)
    with pytest.raises(ConfigError):
        run_solver("newton", sphere.oracle, np.ones(2), 1.0, 1.0, 0.01)
