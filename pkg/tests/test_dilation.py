import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from stochconv.dilation import (
    DilationRep,
    characteristic,
    characteristic_quadrature,
    convolve_via_dilation,
    convolve_via_dilation_batch,
    dilation_embed,
    dilation_group,
    dilation_project,
    kernel_values,
    poisson_density,
    pullback,
    residual_table,
    verify_dilation_identity,
    write_residual_csv,
)
from stochconv.model import MatrixGenerator, SpectralGenerator, heat_generator, lq_norm, semigroup_apply
from stochconv.simulate import StepProcess, TimeGrid, convolve_exponential_euler, sample_wiener, wiener_increments

# int e^{i tau xi} p(xi) d xi for mu = 2 + 0.5i, tau = 0.7 (mpmath quadosc)
CHAR_ORACLE = 0.23164645899775415 - 0.084557558260747857j

# int |sum_j c_j e^{i s_j xi}|^2 p(xi) d xi for the representation below, lag by lag with mpmath quadosc
NORM_SQ_ORACLE = 1.2795154202571975

modes = st.builds(complex, st.floats(0.1, 100.0), st.floats(-50.0, 50.0))


def test_characteristic_against_oscillatory_quadrature_oracle():
    mu = 2.0 + 0.5j
    assert characteristic(mu, 0.7) == pytest.approx(CHAR_ORACLE, abs=1e-15)
    assert characteristic_quadrature(mu, 0.7) == pytest.approx(CHAR_ORACLE, abs=1e-10)


@given(modes, st.floats(0.0, 10.0))
def test_quadrature_kernel_matches_closed_form(mu, tau):
    assert abs(characteristic_quadrature(mu, tau) - characteristic(mu, tau)) <= 1e-9


def test_kernel_is_hermitian_in_the_lag():
    mu = np.array([1.0 + 1.0j, 3.0])
    taus = np.array([-2.0, -0.3, 0.0, 0.3, 2.0])
    kv = kernel_values(mu, taus, "closed")
    np.testing.assert_allclose(kv[:, ::-1], kv.conj(), atol=1e-15)
    with pytest.raises(ValueError):
        kernel_values(mu, taus, "spline")


@given(modes)
def test_poisson_density_is_a_probability(mu):
    a = mu.real
    # split at the centre so quad sees the peak
    c = -mu.imag
    f = lambda x: float(poisson_density(mu, x))  # noqa: E731
    total = quad(f, -np.inf, c)[0] + quad(f, c, np.inf)[0]
    assert total == pytest.approx(1.0, abs=1e-8 * max(1.0, 1.0 / a))


def test_embedding_is_isometric_and_pullback_inverts():
    gen = SpectralGenerator([0.5, 2.0 + 1.0j, 7.0])
    x = np.array([1.0, -2.0 + 0.5j, 0.25])
    y = dilation_embed(gen, x)
    for q in (2.0, 3.0):
        assert y.norm(q) == pytest.approx(lq_norm(x, q), rel=1e-14)
    np.testing.assert_array_equal(pullback(y), x)
    with pytest.raises(ValueError):
        pullback(dilation_group(1.0, y))


def test_norms_against_gram_oracle():
    y = DilationRep(np.array([1.5 + 0.5j]), [0.0, 0.8, -1.3], np.array([[1.0, -0.5j, 0.3]]))
    assert y.mode_norms("closed")[0] ** 2 == pytest.approx(NORM_SQ_ORACLE, rel=1e-14)
    assert y.mode_norms("quadrature")[0] == pytest.approx(y.mode_norms("closed")[0], rel=1e-9)


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_group_is_isometric_and_additive(t, s):
    gen = SpectralGenerator([1.0, 4.0 + 2.0j])
    y = DilationRep(gen.modes, [0.0, 0.5], np.array([[1.0, 2.0], [0.5j, -1.0]]))
    assert dilation_group(t, y).norm(3.0) == pytest.approx(y.norm(3.0), rel=1e-12)
    np.testing.assert_allclose(dilation_group(t, dilation_group(s, y)).shifts, dilation_group(t + s, y).shifts)


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=4), st.integers(0, 1000))
def test_projection_is_idempotent_contraction(shifts, seed):
    gen = SpectralGenerator([0.7, 3.0 - 1.0j])
    r = np.random.default_rng(seed)
    coeffs = r.normal(size=(2, len(shifts))) + 1j * r.normal(size=(2, len(shifts)))
    y = DilationRep(gen.modes, shifts, coeffs)
    py = dilation_project(gen, y)
    np.testing.assert_allclose(dilation_project(gen, py).coeffs, py.coeffs, atol=1e-14)
    for q in (2.0, 4.0):
        assert py.norm(q) <= y.norm(q) * (1 + 1e-12)
    # P y - y is orthogonal to the range of J: Pythagoras in every coordinate
    resid = (y - py).mode_norms()
    np.testing.assert_allclose(resid**2 + py.mode_norms() ** 2, y.mode_norms() ** 2, rtol=1e-10, atol=1e-12)


def test_dilation_identity_heat_preset():
    gen = heat_generator(8)
    x = np.linspace(1.0, -2.0, 8)
    for t in (0.0, 0.01, 0.5, 3.0):
        assert verify_dilation_identity(gen, t, x) <= 1e-8 * lq_norm(x, 2.0)
    with pytest.raises(ValueError):
        verify_dilation_identity(gen, -0.1, x)
    with pytest.raises(TypeError):
        dilation_embed(MatrixGenerator(-np.eye(2)), np.ones(2))


def test_projected_group_reproduces_semigroup():
    gen = SpectralGenerator([0.3, 2.0 + 3.0j])
    x = np.array([1.0, 1.0 - 1.0j])
    out = pullback(dilation_project(gen, dilation_group(1.7, dilation_embed(gen, x)), "closed"))
    np.testing.assert_allclose(out, semigroup_apply(gen, 1.7, x), atol=1e-15)


def test_residual_table_csv(tmp_path):
    rows = residual_table(heat_generator(2), [0.0, 1.0], np.ones(2))
    assert len(rows) == 4 and max(r for *_, r in rows) <= 1e-8
    write_residual_csv(tmp_path / "r.csv", rows)
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "mode,t,residual"


def test_dilation_route_matches_euler_pathwise():
    gen = SpectralGenerator([1.0, 4.0, 2.0 + 1.0j])
    grid = TimeGrid.uniform(1.0, 16)
    ops = np.array([[1.0, 0.2], [0.0, 1.0], [0.5, -0.5]])
    G = StepProcess.constant(grid, ops)
    W = sample_wiener(grid, 2, 6, 0)
    dil = convolve_via_dilation(gen, G, W)
    eul = convolve_exponential_euler(gen, G, W)
    assert np.max(np.abs(dil - eul)) <= 1e-8 * np.max(np.abs(eul))


def test_lifted_integral_dominates_its_projection():
    gen = heat_generator(4)
    grid = TimeGrid.uniform(1.0, 16)
    G = StepProcess.deterministic(grid, np.ones(4), diagonal=True)
    inc = wiener_increments(grid, 4, 2, np.arange(50))
    out = convolve_via_dilation_batch(gen, G, inc, 4.0, "closed")
    assert np.all(lq_norm(np.abs(out.values), 4.0) <= out.z_norms * (1 + 1e-12) + 1e-15)
    # the lift is a martingale in Y: its norm at the first node is the increment norm
    np.testing.assert_allclose(out.z_norms[:, 1], lq_norm(np.abs(inc[:, 0, :]), 4.0), rtol=1e-12)
