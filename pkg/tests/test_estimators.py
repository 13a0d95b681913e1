import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import stats

from zivr.dataio import parse_libsvm
from zivr.errors import EvaluationError, ParameterError
from zivr.estimators import (
    coord_full,
    direction_vector,
    directional_slope,
    random_orthogonal,
    sample_direction,
    two_point,
)
from zivr.problems import CountingOracle, make_logistic_elastic_net


def sq_norm_oracle(i, x):
    return 0.5 * float(x @ x)


def test_two_point_quadratic_coordinate():
    out = two_point(sq_norm_oracle, 0, np.array([1.0, 0.0]), 0, 0.1)
    assert_allclose(out, [1.05, 0.0], rtol=0, atol=1e-12)
    # dense direction vector gives the same answer
    out2 = two_point(sq_norm_oracle, 0, np.array([1.0, 0.0]), np.array([1.0, 0.0]), 0.1)
    assert_allclose(out2, out, atol=1e-12)


def test_two_point_exact_for_linear():
    oracle = lambda i, x: 3.0 * x[0]
    for beta in (1e-6, 0.1, 2.0):
        out = two_point(oracle, 0, np.zeros(3), 0, beta)
        assert_allclose(out, [3.0, 0.0, 0.0], atol=1e-9)


def test_two_point_oblique_direction():
    u = np.array([1.0, 1.0]) / math.sqrt(2.0)
    x = np.array([1.0, 0.0])
    out = two_point(sq_norm_oracle, 0, x, u, 0.2)
    assert_allclose(out, (1.0 / math.sqrt(2.0) + 0.1) * u, atol=1e-12)


def test_two_point_call_accounting():
    from zivr.problems import CompositeProblem
    from zivr.proximal import zero_prox

    p = CompositeProblem(
        n=1, d=2, component_eval=sq_norm_oracle, prox_spec=zero_prox(), smoothness_L=1.0
    )
    oracle = CountingOracle(p)
    two_point(oracle, 0, np.array([1.0, 0.0]), 0, 0.1)
    assert oracle.calls == 2
    base = oracle(0, np.array([1.0, 0.0]))
    before = oracle.calls
    two_point(oracle, 0, np.array([1.0, 0.0]), 0, 0.1, base=base)
    assert oracle.calls == before + 1


def test_two_point_rejects_bad_beta():
    with pytest.raises(ParameterError):
        two_point(sq_norm_oracle, 0, np.zeros(2), 0, 0.0)
    with pytest.raises(ParameterError):
        directional_slope(sq_norm_oracle, 0, np.zeros(2), 0, -1.0)


def test_two_point_nonfinite_raises():
    oracle = lambda i, x: float("nan")
    with pytest.raises(EvaluationError):
        two_point(oracle, 0, np.zeros(2), 0, 0.1)


def test_coord_full_quadratic():
    out = coord_full(sq_norm_oracle, 0, np.array([1.0, 2.0]), 0.2)
    assert_allclose(out, [1.1, 2.1], atol=1e-12)


def test_coord_full_exact_for_linear():
    c = np.array([2.0, -1.0, 0.5])
    oracle = lambda i, x: float(c @ x)
    assert_allclose(coord_full(oracle, 0, np.zeros(3), 1.7), c, atol=1e-9)


def test_coord_full_call_count():
    from zivr.problems import CompositeProblem
    from zivr.proximal import zero_prox

    d = 7
    p = CompositeProblem(
        n=1, d=d, component_eval=sq_norm_oracle, prox_spec=zero_prox(), smoothness_L=1.0
    )
    oracle = CountingOracle(p)
    coord_full(oracle, 0, np.zeros(d), 0.1)
    assert oracle.calls == d + 1


def test_coord_full_near_analytic_logistic():
    ds = parse_libsvm("+1 1:0.4 3:-1.25\n")
    p = make_logistic_elastic_net(ds, mu=0.0, lam=0.0)
    x = np.array([0.3, -0.2, 0.7])
    beta = 1e-6
    est = coord_full(p.component_eval, 0, x, beta)
    ref = p.reference_gradient(0, x)
    bound = p.smoothness_L * beta * math.sqrt(p.d) / 2.0
    assert np.linalg.norm(est - ref) <= bound + 1e-9


def test_coord_full_error_decays_linearly_in_beta():
    ds = parse_libsvm("+1 1:0.9 2:-0.3\n-1 1:0.1 2:1.1\n")
    p = make_logistic_elastic_net(ds, mu=1e-3, lam=0.0)
    x = np.array([0.5, -1.0])
    errs = []
    betas = [1e-2, 1e-3, 1e-4]
    for beta in betas:
        est = coord_full(p.component_eval, 1, x, beta)
        errs.append(np.linalg.norm(est - p.reference_gradient(1, x)))
    for beta, err in zip(betas, errs):
        assert err <= p.smoothness_L * beta * math.sqrt(p.d) / 2 + 1e-12


def test_sample_direction_coordinate_uniform(rng):
    d, n_draws = 3, 100_000
    counts = np.zeros(d)
    for _ in range(n_draws):
        u = sample_direction("coordinate", d, rng)
        assert u.sum() == 1.0 and np.count_nonzero(u) == 1
        counts[np.argmax(u)] += 1
    freq = counts / n_draws
    stderr = math.sqrt((1 / 3) * (2 / 3) / n_draws)
    assert np.all(np.abs(freq - 1 / 3) <= 3 * stderr + 1e-12)


def test_sample_direction_spherical_unit_norm(rng):
    for _ in range(200):
        u = sample_direction("spherical", 5, rng)
        assert abs(np.linalg.norm(u) - 1.0) <= 1e-12


def test_spherical_second_moment(rng):
    """E[u u'] = I/d componentwise within 4 standard errors."""
    d, n_draws = 5, 100_000
    g = rng.standard_normal((n_draws, d))
    u = g / np.linalg.norm(g, axis=1, keepdims=True)
    prods = u[:, :, None] * u[:, None, :]
    mean = prods.mean(axis=0)
    stderr = prods.std(axis=0, ddof=1) / math.sqrt(n_draws)
    target = np.eye(d) / d
    assert np.all(np.abs(mean - target) <= 4 * stderr + 1e-12)


def test_sample_direction_validation(rng):
    with pytest.raises(ParameterError):
        sample_direction("coordinate", 0, rng)
    with pytest.raises(ParameterError):
        sample_direction("weird", 3, rng)


def test_random_orthogonal_is_orthogonal(rng):
    for d in (1, 2, 5, 12):
        q = random_orthogonal(d, rng)
        assert np.linalg.norm(q.T @ q - np.eye(d)) <= 1e-10


def test_random_orthogonal_d1_signs(rng):
    vals = {float(random_orthogonal(1, rng)[0, 0]) for _ in range(200)}
    assert vals == {-1.0, 1.0}


def test_random_orthogonal_columns_spherical(rng):
    """Column marginals match direct sphere sampling (two-sample KS test
    on a fixed projection)."""
    d, n_draws = 4, 4000
    col_proj = np.array([random_orthogonal(d, rng)[0, 0] for _ in range(n_draws)])
    g = rng.standard_normal((n_draws, d))
    sph_proj = (g / np.linalg.norm(g, axis=1, keepdims=True))[:, 0]
    _, p_value = stats.ks_2samp(col_proj, sph_proj)
    assert p_value > 1e-4


def test_direction_vector_conversion():
    assert_allclose(direction_vector(2, 4), [0, 0, 1, 0])
    v = np.array([0.6, 0.8])
    assert direction_vector(v, 2) is not None
    assert_allclose(direction_vector(v, 2), v)
