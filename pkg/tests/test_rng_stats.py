import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats as sps

from stochconv import rng
from stochconv.stats import batch_means, batch_split, wilson_interval


def test_keyed_access_is_order_free():
    full = rng.keyed_normals(5, rng.WIENER, np.arange(10), np.arange(7), np.arange(3))
    part = rng.keyed_normals(5, rng.WIENER, [7, 2], [4], [1, 2])
    np.testing.assert_array_equal(part[:, 0, :], full[[7, 2], 4][:, [1, 2]])


def test_streams_and_seeds_differ():
    a = rng.keyed_uniforms(1, rng.WIENER, [0], [0], np.arange(100))
    b = rng.keyed_uniforms(1, rng.EXACT, [0], [0], np.arange(100))
    c = rng.keyed_uniforms(2, rng.WIENER, [0], [0], np.arange(100))
    assert not np.array_equal(a, b) and not np.array_equal(a, c)


def test_normals_pass_distribution_check():
    z = rng.keyed_normals(11, rng.TEST, np.arange(20000), [0], [0, 1]).ravel()
    assert sps.kstest(z, "norm").pvalue > 1e-3
    assert abs(np.corrcoef(z[0::2], z[1::2])[0, 1]) < 0.03


def test_uniforms_strictly_inside_unit_interval():
    u = rng.keyed_uniforms(0, 0, np.arange(1000), [0], [0])
    assert u.min() > 0 and u.max() < 1


def test_negative_seed_rejected():
    with pytest.raises(ValueError):
        rng.keyed_uniforms(-1, 0, [0], [0], [0])


@given(st.integers(50, 5000), st.integers(2, 50))
def test_batch_split_is_balanced(n, b):
    labels = batch_split(n, b)
    counts = np.bincount(labels, minlength=b)
    assert counts.max() - counts.min() <= 1 and np.all(np.diff(labels) >= 0)


def test_batch_means_interval_has_nominal_coverage():
    z = rng.keyed_normals(3, rng.TEST, np.arange(5000), np.arange(200), [0])[:, :, 0] + 2.0
    hits = [batch_means(z[:, r]).covers(2.0) for r in range(200)]
    # 95% nominal; binomial(200, 0.95) stays inside [0.89, 0.99] with overwhelming probability
    assert 0.89 <= np.mean(hits) <= 0.99


def test_wilson_edges():
    lo, hi = wilson_interval(np.array([0, 100]), 100)
    assert lo[0] == pytest.approx(0.0, abs=1e-15) and hi[0] > 0
    assert hi[1] == pytest.approx(1.0) and lo[1] < 1
