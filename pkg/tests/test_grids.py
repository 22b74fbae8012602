import numpy as np
import pytest

from epival import Bump, DomainExceeded, ExtGridFn, GridDomain, Polytope, interpolate

from helpers import grid1d, grid2d, sample


def test_domain_validation():
    with pytest.raises(ValueError):
        GridDomain([0.0], [0.0], [5])
    with pytest.raises(ValueError):
        GridDomain([0.0], [1.0], [2])
    with pytest.raises(ValueError):
        GridDomain([0.0] * 4, [1.0] * 4, [5] * 4)
    d = GridDomain([-1, -1], [1, 3], [5, 9])
    assert d.ndim == 2
    assert np.allclose(d.spacing, [0.5, 0.5])
    assert d.points().shape == (45, 2)


def test_points_row_major_last_axis_fastest():
    d = GridDomain([0, 0], [1, 2], [3, 5])
    pts = d.points()
    # first block shares the first coordinate while the second sweeps
    assert np.allclose(pts[:5, 0], 0.0)
    assert np.allclose(pts[:5, 1], np.linspace(0, 2, 5))


def test_grid_fn_invariants():
    d = grid1d(n=5)
    with pytest.raises(ValueError):
        ExtGridFn(d, [np.nan, 0, 0, 0, 0])
    with pytest.raises(ValueError):
        ExtGridFn(d, [-np.inf, 0, 0, 0, 0])
    with pytest.raises(ValueError):
        ExtGridFn(d, [np.inf] * 5)
    f = ExtGridFn(d, [np.inf, 1.0, 0.0, 1.0, np.inf])
    assert f.finite_mask.sum() == 3
    with pytest.raises(ValueError):
        f.values[0] = 3.0  # immutable


def test_grid_fn_scaling_keeps_infinity():
    d = grid1d(n=5)
    f = ExtGridFn(d, [np.inf, 1.0, 0.0, 1.0, np.inf])
    g = f * 0.0
    assert np.isposinf(g.values[0]) and g.values[2] == 0.0
    h = f * 2.0
    assert np.isposinf(h.values[0]) and h.values[1] == 2.0


def test_interpolation_exact_on_nodes_and_affine():
    d = grid2d(n=9)
    f = sample(d, lambda p: 3.0 * p[:, 0] - 2.0 * p[:, 1] + 0.5)
    pts = np.array([[0.37, -1.2], [1.99, 1.99], [-2.0, -2.0]])
    want = 3.0 * pts[:, 0] - 2.0 * pts[:, 1] + 0.5
    assert np.allclose(interpolate(f, pts), want, atol=1e-12)
    nodes = d.points()[[0, 17, 44]]
    got = interpolate(f, nodes)
    assert np.allclose(got, 3.0 * nodes[:, 0] - 2.0 * nodes[:, 1] + 0.5,
                       atol=1e-12)


def test_interpolation_rejects_outside_and_inf():
    d = grid1d(n=5)
    f = ExtGridFn(d, [np.inf, 1.0, 0.0, 1.0, 2.0])
    with pytest.raises(DomainExceeded):
        interpolate(f, [[5.0]])
    with pytest.raises(ValueError):
        interpolate(f, [[-1.7]])  # between an inf corner and a finite one


def test_polytope_support():
    K = Polytope([[1.0, 0.0], [-1.0, 0.0]])
    assert np.allclose(K.support([[2.0, 0.0]]), [2.0])
    Kt = K.translate([0.5, 1.0])
    assert np.allclose(Kt.vertices, [[1.5, 1.0], [-0.5, 1.0]])
    with pytest.raises(ValueError):
        Polytope(np.zeros((0, 2)))


@pytest.mark.parametrize("ndim", [1, 2])
def test_bump_derivatives_match_finite_differences(ndim):
    center = np.zeros(ndim)
    b = Bump(center, 1.0, 1.3)
    rng = np.random.default_rng(3)
    pts = rng.uniform(-0.85, 0.85, size=(40, ndim))
    eps = 1e-6
    grad = b.gradient(pts)
    hess = b.hessian(pts)
    for a in range(ndim):
        e = np.zeros(ndim)
        e[a] = eps
        num = (b.value(pts + e) - b.value(pts - e)) / (2 * eps)
        assert np.allclose(grad[:, a], num, atol=1e-6, rtol=1e-5)
        numh = (b.gradient(pts + e) - b.gradient(pts - e)) / (2 * eps)
        assert np.allclose(hess[:, :, a], numh, atol=1e-5, rtol=1e-4)


def test_bump_support_and_smoothness():
    b = Bump([0.5], 0.25, 2.0)
    d = grid1d(n=129)
    f = b.sample(d)
    x = d.points().ravel()
    assert np.all(f.values[np.abs(x - 0.5) >= 0.25] == 0.0)
    assert f.values.max() == pytest.approx(2.0, abs=1e-6)
    assert b.c2_norm() > 2.0
