import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.sparse.linalg import cg

from zivr.dataio import SurvivalDataset, gen_survival, parse_libsvm
from zivr.errors import EvaluationError, InputError, ParameterError, SchemaError
from zivr.problems import (
    CompositeProblem,
    CountingOracle,
    OracleCounter,
    make_cox_elastic_net,
    make_logistic_elastic_net,
    make_sigmoid_loss,
    make_synthetic_quadratic,
    objective_value,
)
from zivr.proximal import zero_prox
from zivr.verification import fd_gradient


# ---------------------------------------------------------------------------
# logistic


def test_logistic_single_row_at_zero():
    ds = parse_libsvm("+1 1:1\n", min_dim=2)  # a = (1, 0), b = +1
    p = make_logistic_elastic_net(ds, mu=0.0, lam=0.0)
    val = p.component_eval(0, np.zeros(2))
    assert_allclose(val, math.log(2.0), rtol=1e-12)
    assert_allclose(objective_value(p, np.zeros(2)), math.log(2.0), rtol=1e-12)


def test_logistic_smoothness_constant():
    ds = parse_libsvm("+1 1:3 2:4\n-1 1:1\n")
    p = make_logistic_elastic_net(ds, mu=0.01, lam=0.0)
    assert_allclose(p.smoothness_L, 0.01 + 25.0 / 4.0)


def test_logistic_rejects_empty_and_bad_params():
    ds = parse_libsvm("+1 1:1\n")
    with pytest.raises(ParameterError):
        make_logistic_elastic_net(ds, mu=-1.0)
    with pytest.raises(SchemaError):
        parse_libsvm("+2 1:1\n")


def test_logistic_objective_matches_row_loop(rng):
    lines = []
    for _ in range(40):
        label = "+1" if rng.random() < 0.5 else "-1"
        feats = " ".join(
            f"{j + 1}:{rng.standard_normal():.6f}" for j in range(6) if rng.random() < 0.6
        )
        lines.append(f"{label} {feats}".strip())
    ds = parse_libsvm("\n".join(lines) + "\n")
    p = make_logistic_elastic_net(ds, mu=1e-4, lam=1e-4)
    x = rng.standard_normal(ds.d)
    brute = sum(p.component_eval(i, x) for i in range(p.n)) / p.n + p.psi(x)
    assert_allclose(objective_value(p, x), brute, rtol=1e-12)


def _fd_matches_reference(p, rng, n_points=100, rel_tol=1e-5):
    for _ in range(n_points):
        i = int(rng.integers(p.n))
        x = rng.standard_normal(p.d)
        h = 1e-6 * (1.0 + float(np.linalg.norm(x)))
        fd = fd_gradient(p.component_eval, i, x, h)
        ref = p.reference_gradient(i, x)
        denom = max(float(np.linalg.norm(ref)), 1e-8)
        assert np.linalg.norm(fd - ref) <= rel_tol * denom


def test_logistic_gradient_matches_finite_differences(rng):
    ds = parse_libsvm(
        "+1 1:0.4 3:-1.2\n-1 2:0.9 3:0.3\n+1 1:-0.5 2:0.2 3:0.8\n"
    )
    p = make_logistic_elastic_net(ds, mu=1e-3, lam=0.0)
    _fd_matches_reference(p, rng)


def test_logistic_full_gradient_consistent(rng):
    ds = parse_libsvm("+1 1:0.4 3:-1.2\n-1 2:0.9 3:0.3\n")
    p = make_logistic_elastic_net(ds, mu=1e-3, lam=0.0)
    x = rng.standard_normal(3)
    avg = sum(p.reference_gradient(i, x) for i in range(p.n)) / p.n
    assert_allclose(p.full_gradient(x), avg, atol=1e-12)


def _smoothness_holds(p, rng, pairs=1000):
    worst = 0.0
    for _ in range(pairs):
        i = int(rng.integers(p.n))
        x = rng.standard_normal(p.d)
        y = rng.standard_normal(p.d)
        num = np.linalg.norm(p.reference_gradient(i, x) - p.reference_gradient(i, y))
        den = np.linalg.norm(x - y)
        worst = max(worst, num / den)
    assert worst <= p.smoothness_L * (1 + 1e-9)


def test_logistic_smoothness_bound_sampled(rng):
    ds = parse_libsvm("+1 1:0.4 3:-1.2\n-1 2:0.9 3:0.3\n+1 1:1.5\n")
    p = make_logistic_elastic_net(ds, mu=1e-2, lam=0.0)
    _smoothness_holds(p, rng)


# ---------------------------------------------------------------------------
# cox


def _cox_brute(features, times, events, x, mu):
    n = len(times)
    total = 0.0
    for i in range(n):
        if events[i]:
            risk = [j for j in range(n) if times[j] >= times[i]]
            lse = math.log(sum(math.exp(float(features[j] @ x)) for j in risk))
            total += -float(features[i] @ x) + lse
    return total / n + 0.5 * mu * float(x @ x)


def test_cox_two_row_example():
    surv = SurvivalDataset(
        features=np.zeros((2, 3)), times=np.array([1.0, 2.0]), events=np.array([1, 1])
    )
    p = make_cox_elastic_net(surv, mu=0.0, lam=0.0)
    # risk sets {1,2} and {2}: objective at 0 is (log 2 + log 1)/2
    assert_allclose(objective_value(p, np.zeros(3)), math.log(2.0) / 2.0, rtol=1e-12)


def test_cox_all_censored_reduces_to_ridge(rng):
    surv = SurvivalDataset(
        features=rng.standard_normal((4, 3)),
        times=np.array([1.0, 2.0, 0.5, 1.5]),
        events=np.zeros(4, dtype=int),
    )
    p = make_cox_elastic_net(surv, mu=0.3, lam=0.0)
    x = rng.standard_normal(3)
    assert_allclose(objective_value(p, x), 0.15 * float(x @ x), rtol=1e-12)


def test_cox_matches_brute_force(rng):
    surv = gen_survival(n=25, d=4, sparsity=0.5, censor_rate=0.3, seed=5)
    p = make_cox_elastic_net(surv, mu=1e-3, lam=0.0)
    for _ in range(10):
        x = rng.standard_normal(4)
        brute = _cox_brute(surv.features, surv.times, surv.events, x, 1e-3)
        assert_allclose(objective_value(p, x), brute, rtol=1e-10)
        i = int(rng.integers(p.n))
        naive = (
            0.5e-3 * float(x @ x)
            if not surv.events[i]
            else -float(surv.features[i] @ x)
            + math.log(
                sum(
                    math.exp(float(surv.features[j] @ x))
                    for j in range(p.n)
                    if surv.times[j] >= surv.times[i]
                )
            )
            + 0.5e-3 * float(x @ x)
        )
        assert_allclose(p.component_eval(i, x), naive, rtol=1e-10)


def test_cox_gradients(rng):
    surv = gen_survival(n=15, d=4, sparsity=0.5, censor_rate=0.2, seed=9)
    p = make_cox_elastic_net(surv, mu=1e-3, lam=0.0)
    _fd_matches_reference(p, rng, n_points=50)
    x = rng.standard_normal(4)
    avg = sum(p.reference_gradient(i, x) for i in range(p.n)) / p.n
    assert_allclose(p.full_gradient(x), avg, atol=1e-10)
    _smoothness_holds(p, rng, pairs=300)


def test_cox_rejects_bad_times():
    with pytest.raises(InputError):
        SurvivalDataset(
            features=np.zeros((2, 2)),
            times=np.array([1.0, -2.0]),
            events=np.array([1, 1]),
        )


# ---------------------------------------------------------------------------
# synthetic quadratic


def test_quadratic_single_component():
    p = make_synthetic_quadratic(n=1, d=1, cond=1.0, seed=3)
    x_star, h_star = p.known_optimum
    c = -p.full_gradient(np.zeros(1))  # A=1 so gradient at 0 is -c
    assert_allclose(x_star, c, atol=1e-12)
    assert_allclose(h_star, 0.0, atol=1e-15)
    assert_allclose(objective_value(p, x_star), 0.0, atol=1e-15)


def test_quadratic_identity_components_mean_center():
    p = make_synthetic_quadratic(n=2, d=2, cond=1.0, seed=11)
    x_star, _ = p.known_optimum
    centers = np.array(
        [x_star - p.reference_gradient(i, x_star) for i in range(2)]
    )  # A_i = I: c_i = x - grad_i(x)
    assert_allclose(x_star, centers.mean(axis=0), atol=1e-12)


def test_quadratic_optimum_matches_cg():
    p = make_synthetic_quadratic(n=50, d=20, cond=100.0, seed=7)
    x_star, h_star = p.known_optimum
    # independent solve of the stationarity system via conjugate gradients
    mean_mat = np.array(
        [p.full_gradient(e) - p.full_gradient(np.zeros(20)) for e in np.eye(20)]
    ).T
    rhs = -p.full_gradient(np.zeros(20))
    sol, info = cg(mean_mat, rhs, rtol=1e-14, maxiter=10_000)
    assert info == 0
    assert np.linalg.norm(sol - x_star) <= 1e-12 * (1 + np.linalg.norm(x_star))
    assert abs(objective_value(p, sol) - h_star) <= 1e-12


def test_quadratic_optimum_is_minimum(rng):
    p = make_synthetic_quadratic(n=5, d=4, cond=10.0, seed=2)
    x_star, h_star = p.known_optimum
    for _ in range(100):
        pert = x_star + rng.standard_normal(4) * rng.uniform(0.01, 2.0)
        assert objective_value(p, pert) >= h_star - 1e-12


def test_quadratic_conditioning_and_errors(rng):
    with pytest.raises(ParameterError):
        make_synthetic_quadratic(n=2, d=2, cond=0.5, seed=0)
    p = make_synthetic_quadratic(n=6, d=5, cond=50.0, seed=4)
    assert_allclose(p.smoothness_L, 1.0, rtol=1e-9)
    assert p.strong_convexity_mu >= 1.0 / 50.0 - 1e-12
    _smoothness_holds(p, rng, pairs=300)
    _fd_matches_reference(p, rng, n_points=50, rel_tol=1e-5)


# ---------------------------------------------------------------------------
# sigmoid loss


def test_sigmoid_loss_basics(rng):
    A = rng.standard_normal((12, 5))
    b = rng.choice([-1.0, 1.0], size=12)
    p = make_sigmoid_loss(A, b)
    assert_allclose(objective_value(p, np.zeros(5)), 0.5, rtol=1e-12)
    _fd_matches_reference(p, rng, n_points=50, rel_tol=2e-5)
    _smoothness_holds(p, rng, pairs=500)
    x = rng.standard_normal(5)
    avg = sum(p.reference_gradient(i, x) for i in range(p.n)) / p.n
    assert_allclose(p.full_gradient(x), avg, atol=1e-12)


def test_sigmoid_label_validation(rng):
    with pytest.raises(SchemaError):
        make_sigmoid_loss(rng.standard_normal((3, 2)), np.array([1.0, 2.0, -1.0]))


# ---------------------------------------------------------------------------
# oracle plumbing


def test_counting_oracle_and_errors():
    p = CompositeProblem(
        n=2,
        d=1,
        component_eval=lambda i, x: float("inf") if i == 1 else float(x[0]),
        prox_spec=zero_prox(),
        smoothness_L=1.0,
    )
    counter = OracleCounter()
    oracle = CountingOracle(p, counter)
    oracle(0, np.array([2.0]))
    oracle(0, np.array([3.0]))
    assert counter.calls == 2
    with pytest.raises(EvaluationError):
        oracle(1, np.array([0.0]))
    assert counter.calls == 3  # the failed call still consumed the budget
    counter.reset()
    assert counter.calls == 0


def test_objective_value_nonfinite_raises():
    p = CompositeProblem(
        n=1,
        d=1,
        component_eval=lambda i, x: float("nan"),
        prox_spec=zero_prox(),
        smoothness_L=1.0,
    )
    with pytest.raises(EvaluationError):
        objective_value(p, np.zeros(1))
