import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from zivr.dataio import parse_libsvm
from zivr.errors import CapabilityError, ParameterError
from zivr.problems import make_logistic_elastic_net, make_synthetic_quadratic
from zivr.sampling import SamplerConfig, apply_P, gen_plan, sigma_nu
from zivr.verification import (
    battery,
    enumerate_impl1,
    fd_gradient,
    mc_expectation,
    reference_minimize,
)


def test_fd_gradient_quadratic_exact():
    oracle = lambda i, x: float(x[0] ** 2)
    out = fd_gradient(oracle, 0, np.array([1.0]), 1e-5)
    assert abs(out[0] - 2.0) <= 1e-9  # odd error terms cancel for quadratics


def test_fd_gradient_sine():
    oracle = lambda i, x: math.sin(float(x[0]))
    h = 1e-4
    out = fd_gradient(oracle, 0, np.array([0.0]), h)
    assert abs(out[0] - 1.0) <= h * h / 6 + 1e-11


def test_fd_gradient_logistic_matches_analytic():
    ds = parse_libsvm("+1 1:0.7 2:-0.3\n")
    p = make_logistic_elastic_net(ds, mu=1e-3, lam=0.0)
    x = np.array([0.4, 0.9])
    fd = fd_gradient(p.component_eval, 0, x, 1e-6)
    assert np.linalg.norm(fd - p.reference_gradient(0, x)) <= 1e-6


def test_fd_gradient_validation():
    with pytest.raises(ParameterError):
        fd_gradient(lambda i, x: 0.0, 0, np.zeros(1), 0.0)


def test_mc_expectation_constant_sampler():
    rep = mc_expectation(lambda: np.array([2.0, -1.0]), 500, np.array([2.0, -1.0]))
    assert rep.passed and np.all(rep.stderr == 0.0)
    rep_bad = mc_expectation(lambda: np.array([2.0, -1.0]), 500, np.array([2.0, -0.5]))
    assert not rep_bad.passed and rep_bad.worst_z == np.inf


def test_mc_expectation_fair_coin(rng):
    rep = mc_expectation(
        lambda: np.array([rng.choice([-1.0, 1.0])]), 100_000, np.array([0.0])
    )
    assert rep.passed
    rep_bad = mc_expectation(
        lambda: np.array([rng.choice([-1.0, 1.0])]), 100_000, np.array([0.5])
    )
    assert not rep_bad.passed


def test_mc_expectation_min_samples():
    with pytest.raises(ParameterError):
        mc_expectation(lambda: np.zeros(1), 50, np.zeros(1))


def test_enumerate_impl1_trivial_cases(rng):
    A1 = rng.standard_normal((1, 1))
    assert_allclose(enumerate_impl1(1, 1, 1, A1), A1)
    A = rng.standard_normal((2, 2))
    assert_allclose(enumerate_impl1(2, 2, 1, A), A / 4, atol=1e-15)
    assert_allclose(enumerate_impl1(2, 2, 2, A), A / 2, atol=1e-15)


def test_enumerate_impl1_capability_guard():
    with pytest.raises(CapabilityError):
        enumerate_impl1(30, 40, 3, np.zeros((40, 30)))
    with pytest.raises(ParameterError):
        enumerate_impl1(2, 2, 1, np.zeros((3, 2)))


def test_enumeration_agrees_with_monte_carlo(rng):
    n, d, R = 2, 3, 2
    A = rng.standard_normal((d, n))
    exact = enumerate_impl1(n, d, R, A)
    cfg = SamplerConfig("impl1", n=n, d=d, R=R)
    sigma = sigma_nu(cfg).sigma
    assert_allclose(exact, sigma * A, atol=1e-14)

    def draw():
        plan = gen_plan(cfg, rng)
        return apply_P(plan.S, A) if plan.omega else np.zeros_like(A)

    rep = mc_expectation(draw, 20_000, exact, k_sigma=4.5)
    assert rep.passed, rep.summary()


def test_reference_minimize_quadratic():
    p = make_synthetic_quadratic(n=8, d=5, cond=20.0, seed=4)
    x_star, h_star = p.known_optimum
    x, h = reference_minimize(p, tol=1e-12)
    assert np.linalg.norm(x - x_star) <= 1e-8
    assert abs(h - h_star) <= 1e-12


def test_reference_minimize_lasso_kkt():
    ds = parse_libsvm("+1 1:0.9 2:-0.4\n-1 1:0.2 2:1.0\n+1 2:0.7\n-1 1:-0.8\n")
    lam = 0.05
    p = make_logistic_elastic_net(ds, mu=1e-2, lam=lam)
    x, _ = reference_minimize(p, tol=1e-12)
    g = p.grad_f(x)
    for j in range(p.d):
        if x[j] != 0.0:
            assert abs(g[j] + lam * np.sign(x[j])) <= 1e-8
        else:
            assert abs(g[j]) <= lam + 1e-8


def test_battery_small_scale_passes():
    results = battery(seed=1, samples_scale=0.02)
    failed = [r.name for r in results if not r.passed]
    assert not failed, failed


def test_battery_detects_injected_sigma_fault():
    results = battery(seed=1, samples_scale=0.02, sigma_scale=2.0)
    bad = [r for r in results if r.name.startswith("sketch_unbiasedness")]
    assert bad and all(not r.passed for r in bad)
    good = [r for r in results if not r.name.startswith("sketch_unbiasedness")]
    assert all(r.passed for r in good)
