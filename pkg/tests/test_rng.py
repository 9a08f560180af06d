import numpy as np
import pytest

from difobs import rng
from difobs.errors import InvalidParameterError


def test_normals_frozen():
    g = rng.make_rng(0, rng.STATE)
    np.testing.assert_allclose(
        rng.standard_normal(g, (4,)), [-1.3078527, 0.91870519, 0.10073103, -0.21081286], atol=1e-8
    )


def test_poisson_frozen():
    g = rng.make_rng(12345, rng.SENSOR)
    np.testing.assert_array_equal(rng.poisson(g, np.array([0.5, 3.0, 20.0])), [1, 5, 16])


def test_streams_are_independent():
    a = rng.standard_normal(rng.make_rng(1, rng.STATE), (8,))
    b = rng.standard_normal(rng.make_rng(1, rng.BURST), (8,))
    assert not np.allclose(a, b)


def test_normal_moments():
    z = rng.standard_normal(rng.make_rng(5), (200_000,))
    assert abs(z.mean()) < 0.01
    assert abs(z.var() - 1) < 0.01
    assert z.shape == (200_000,)


def test_odd_shape():
    z = rng.standard_normal(rng.make_rng(5), (3, 5))
    assert z.shape == (3, 5)


@pytest.mark.parametrize("rate", [0.1, 2.0, 40.0])
def test_poisson_mean_and_variance(rate):
    k = rng.poisson(rng.make_rng(2), np.full(100_000, rate))
    se = np.sqrt(rate / k.size)
    assert abs(k.mean() - rate) < 4 * se
    assert abs(k.var() / rate - 1) < 0.03


def test_poisson_zero_rate():
    assert np.all(rng.poisson(rng.make_rng(0), np.zeros(10)) == 0)


def test_bad_inputs():
    with pytest.raises(InvalidParameterError):
        rng.make_rng(-1)
    with pytest.raises(InvalidParameterError):
        rng.poisson(rng.make_rng(0), np.array([-1.0]))
