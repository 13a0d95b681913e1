import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from zivr.errors import ParameterError
from zivr.proximal import ProxSpec, box_prox, l1_prox, prox, psi_value, zero_prox


def test_l1_soft_threshold_example():
    spec = l1_prox(1.0)
    out = prox(spec, np.array([2.0, -0.3, 0.0]), 0.5)
    assert_allclose(out, [1.5, 0.0, 0.0])


def test_l1_zero_weight_is_identity():
    spec = l1_prox(0.0)
    x = np.array([3.0, -2.5, 0.1])
    assert_allclose(prox(spec, x, 0.7), x)


def test_l1_tie_maps_to_exact_zero():
    out = prox(l1_prox(2.0), np.array([1.0, -1.0]), 0.5)  # |x| == t*lam
    assert out[0] == 0.0 and out[1] == 0.0


def test_box_clamps():
    spec = box_prox([-1.0], [1.0])
    assert_allclose(prox(spec, np.array([3.0]), 1.0), [1.0])
    assert_allclose(prox(spec, np.array([-5.0]), 2.0), [-1.0])
    assert_allclose(prox(spec, np.array([0.25]), 2.0), [0.25])


def test_zero_prox_identity():
    x = np.array([1.0, -2.0])
    assert_allclose(prox(zero_prox(), x, 3.0), x)


def test_nonpositive_t_rejected():
    for t in (0.0, -1.0):
        with pytest.raises(ParameterError):
            prox(l1_prox(1.0), np.array([1.0]), t)


def test_bad_specs_rejected():
    with pytest.raises(ParameterError):
        ProxSpec("huber")
    with pytest.raises(ParameterError):
        l1_prox(-0.5)
    with pytest.raises(ParameterError):
        box_prox([1.0, 0.0], [0.0, 1.0])


def test_psi_values():
    assert psi_value(zero_prox(), np.array([5.0])) == 0.0
    assert psi_value(l1_prox(2.0), np.array([1.0, -3.0])) == 8.0
    box = box_prox([-1.0, -1.0], [1.0, 1.0])
    assert psi_value(box, np.array([0.5, -0.5])) == 0.0
    assert psi_value(box, np.array([2.0, 0.0])) == np.inf


@pytest.mark.parametrize(
    "spec",
    [zero_prox(), l1_prox(0.8), box_prox(-np.ones(6), np.ones(6))],
    ids=["zero", "l1", "box"],
)
def test_nonexpansive(spec, rng):
    for _ in range(1000):
        x = rng.standard_normal(6) * 3
        y = rng.standard_normal(6) * 3
        t = 10.0 ** rng.uniform(-3, 1)
        px, py = prox(spec, x, t), prox(spec, y, t)
        assert np.linalg.norm(px - py) <= np.linalg.norm(x - y) + 1e-12


@settings(max_examples=100, deadline=None)
@given(
    x=st.lists(st.floats(-50, 50), min_size=1, max_size=8),
    lam=st.floats(0.0, 5.0),
    t=st.floats(1e-3, 10.0),
)
def test_l1_subgradient_optimality(x, lam, t):
    """(x - p)/t must be a scaled subgradient of the L1 norm at p."""
    x = np.asarray(x)
    p = prox(l1_prox(lam), x, t)
    resid = (x - p) / t
    for j in range(len(x)):
        if p[j] != 0.0:
            assert abs(resid[j] - lam * np.sign(p[j])) <= 1e-12 * (1 + lam)
        else:
            assert abs(resid[j]) <= lam + 1e-12 * (1 + lam)


def test_box_projection_idempotent(rng):
    spec = box_prox(-np.ones(4), np.ones(4))
    for _ in range(100):
        x = rng.standard_normal(4) * 3
        p = prox(spec, x, 1.0)
        assert_allclose(prox(spec, p, 1.0), p)
