import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochconv.model import MatrixGenerator, SpectralGenerator, heat_generator, lq_norm, semigroup_matrix
from stochconv.renorm import (
    contractivity_check,
    cr_bound_probe,
    hessian_matrix,
    lyapunov_renorm,
    phi_derivatives,
    random_sectorial_matrix,
    renorm_for,
    square_function_norm_quadrature,
    square_function_renorm,
)

# A = -(I - N): (-A)^{1/2} = I - N/2, and int_0^inf e^{-2t} M(t)^T M(t) dt by hand
JORDAN = np.array([[-1.0, 1.0], [0.0, -1.0]])
JORDAN_GRAM = np.diag([0.5, 0.625])

points = st.lists(st.floats(-3, 3), min_size=2, max_size=5).map(np.array).filter(lambda x: np.abs(x).min() > 0.05)
exps = st.sampled_from([(2.0, 2.0), (3.0, 2.0), (4.0, 3.0), (4.0, 4.0), (6.0, 4.0)])


@given(points, exps)
def test_gradient_matches_finite_differences(x, rq):
    r, q = rq
    val, g, _ = phi_derivatives(x, r, q)
    assert val == pytest.approx(lq_norm(x, q) ** r, rel=1e-12)
    h = 1e-6
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        fd = (phi_derivatives(x + e, r, q)[0] - phi_derivatives(x - e, r, q)[0]) / (2 * h)
        assert g[k] == pytest.approx(fd, rel=1e-5, abs=1e-6)


@given(points, exps)
def test_hessian_matches_gradient_differences(x, rq):
    r, q = rq
    H = hessian_matrix(x, r, q)
    np.testing.assert_allclose(H, H.T, atol=1e-12)
    h = 1e-6
    fd = np.empty_like(H)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        fd[:, k] = (phi_derivatives(x + e, r, q)[1] - phi_derivatives(x - e, r, q)[1]) / (2 * h)
    assert np.linalg.norm(H - fd) <= 1e-5 * max(1.0, np.linalg.norm(H))


def test_phi_at_origin_and_exponent_checks():
    val, g, h = phi_derivatives(np.zeros(3), 2.0, 2.0)
    assert val == 0.0 and not g.any()
    assert h(np.ones(3), np.ones(3)) == 6.0
    assert phi_derivatives(np.zeros(3), 4.0, 3.0)[2](np.ones(3), np.ones(3)) == 0.0
    with pytest.raises(ValueError, match="r >= q"):
        phi_derivatives(np.ones(2), 3.0, 4.0)
    with pytest.raises(ValueError):
        phi_derivatives(np.ones(2), 2.0, 1.5)


def test_probe_first_constant_is_exactly_r():
    # ||grad||_{q'} = r ||x||_q^{r-1} holds identically
    res = cr_bound_probe(4.0, 3.0, 5, 1000, 7)
    assert res.k1_hat == pytest.approx(4.0, rel=1e-12)
    assert res.scale_residual <= 1e-12
    assert 0 < res.k2_hat < np.inf
    with pytest.raises(ValueError, match="1000"):
        cr_bound_probe(4.0, 3.0, 5, 999, 7)
    with pytest.raises(ValueError, match="degenerate"):
        cr_bound_probe(4.0, 3.0, 2, 1000, 7, x_cloud=np.zeros((5, 2)))


def test_lyapunov_gram_jordan_block():
    R = lyapunov_renorm(MatrixGenerator(JORDAN))
    np.testing.assert_allclose(R.gram.real, JORDAN_GRAM, atol=1e-14)
    assert R.residual <= 1e-12
    b, B = R.equivalence()
    x = np.array([1.0, -2.0])
    assert b * R.norm(x) <= lq_norm(x, 2.0) <= B * R.norm(x)


def test_euclidean_norm_is_not_contractive_but_renorm_is():
    a = np.array([[-1.0, 5.0], [0.0, -1.0]])
    gen = MatrixGenerator(a)
    assert np.linalg.norm(semigroup_matrix(gen, 0.5), 2) > 1.5
    for q in (2.0, 3.0):
        assert contractivity_check(gen, renorm_for(gen, q), 500, [0.0, 0.01, 0.5, 2.0, 5.0], 1) <= 1 + 1e-12


@given(st.integers(0, 500), st.sampled_from([2.0, 3.0, 4.0]))
def test_random_sectorial_generators_are_contracted(index, q):
    gen = MatrixGenerator(random_sectorial_matrix(4, 3, index))
    assert contractivity_check(gen, renorm_for(gen, q), 200, [0.01, 0.1, 1.0, 5.0], index) <= 1 + 1e-10


def test_contractivity_rejects_foreign_norm():
    g1 = MatrixGenerator(random_sectorial_matrix(3, 0, 0))
    g2 = MatrixGenerator(random_sectorial_matrix(3, 0, 1))
    with pytest.raises(ValueError, match="different generator"):
        contractivity_check(g2, renorm_for(g1, 2.0), 10, [1.0], 0)


@pytest.mark.parametrize("q", [2.0, 3.0, 4.0, 6.0])
def test_diagonal_generator_renorm_collapses(q):
    # int_0^inf mu e^{-2 mu t} dt = 1/2 for every real mode
    gen = heat_generator(5)
    x = np.array([1.0, -0.5, 2.0, 0.0, 3.0])
    assert renorm_for(gen, q).norm(x) == pytest.approx(lq_norm(x, q) / np.sqrt(2), rel=1e-12)
    assert square_function_norm_quadrature(gen, q, x) == pytest.approx(lq_norm(x, q) / np.sqrt(2), rel=1e-10)


def test_lyapunov_route_agrees_with_quadrature():
    gen = MatrixGenerator(random_sectorial_matrix(4, 11))
    x = np.array([1.0, 0.5, -1.0, 2.0])
    for q in (2.0, 3.0):
        assert renorm_for(gen, q).norm(x) == pytest.approx(square_function_norm_quadrature(gen, q, x), rel=1e-9)
    cgen = SpectralGenerator([1.0 + 2.0j, 3.0])
    y = np.array([1.0 - 1.0j, 0.5])
    assert square_function_renorm(cgen, 4.0).norm(y) == pytest.approx(
        square_function_norm_quadrature(cgen, 4.0, y), rel=1e-9)
