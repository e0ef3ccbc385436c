"""Tests for the gauge calculus."""
import math

import numpy as np
import pytest

from anisolab.exceptions import DegenerateAtZero, WrongRegime
from anisolab.models.schemas import GaugeSpec
from anisolab.services.gauge import gauge_calculus

GAUGES = [
    GaugeSpec(),
    GaugeSpec(family="ellipse", a=2.0, b=1.0),
    GaugeSpec(family="lp_norm", q=3.0),
]


def test_eval_F_closed_forms(euclidean, ellipse):
    assert gauge_calculus.eval_F(euclidean, [3.0, 4.0]) == pytest.approx(5.0)
    assert gauge_calculus.eval_F(ellipse, [1.0, 0.0]) == pytest.approx(2.0)
    assert gauge_calculus.eval_F(euclidean, [0.0, 0.0]) == 0.0


def test_eval_polar_closed_forms(euclidean, ellipse):
    assert gauge_calculus.eval_polar(euclidean, [3.0, 4.0]) == pytest.approx(5.0)
    assert gauge_calculus.eval_polar(ellipse, [2.0, 0.0]) == pytest.approx(1.0)
    for g in GAUGES:
        assert gauge_calculus.eval_polar(g, [0.0, 0.0]) == 0.0


@pytest.mark.parametrize("g", GAUGES, ids=lambda g: g.label)
def test_polar_grid_matches_closed_form(g):
    x = np.array([[2.0, 0.0], [0.3, -1.2], [-0.7, 0.4]])
    closed = gauge_calculus.eval_polar(g, x)
    grid = gauge_calculus.eval_polar(g, x, method="grid", directions=20000)
    np.testing.assert_allclose(grid, closed, rtol=1e-6)


@pytest.mark.parametrize("g", GAUGES, ids=lambda g: g.label)
def test_homogeneity_and_evenness(g):
    rng = np.random.default_rng(1)
    xi = rng.normal(size=(1000, 2))
    t = rng.uniform(-10, 10, size=1000)
    F = gauge_calculus.eval_F(g, xi)
    Ft = gauge_calculus.eval_F(g, t[:, None] * xi)
    assert np.all(np.abs(Ft - np.abs(t) * F) <= 1e-12 * (1 + np.abs(t) * F))
    np.testing.assert_allclose(gauge_calculus.eval_F(g, -xi), F, rtol=1e-14)


@pytest.mark.parametrize("g", GAUGES, ids=lambda g: g.label)
def test_bipolar_residual_is_small(g):
    rng = np.random.default_rng(2)
    x = rng.normal(size=(20, 2))
    assert gauge_calculus.bipolar_residual(g, x, directions=20000) < 1e-6


def test_grad_Fp_examples(euclidean, ellipse):
    grad = gauge_calculus.grad_Fp(euclidean, 2.0, [3.0, 4.0])
    np.testing.assert_allclose(grad, [6.0, 8.0])
    assert float(np.dot([3.0, 4.0], grad)) == pytest.approx(50.0)

    expected = 3.0 * math.sqrt(5.0) * np.array([4.0, 1.0])
    np.testing.assert_allclose(gauge_calculus.grad_Fp(ellipse, 3.0, [1.0, 1.0]), expected, rtol=1e-12)


def test_grad_Fp_is_zero_at_origin():
    for g in GAUGES:
        np.testing.assert_array_equal(gauge_calculus.grad_Fp(g, 2.5, [0.0, 0.0]), [0.0, 0.0])


@pytest.mark.parametrize("g", GAUGES, ids=lambda g: g.label)
@pytest.mark.parametrize("p", [2.0, 2.5, 3.0])
def test_euler_identity(g, p):
    rng = np.random.default_rng(3)
    xi = rng.normal(size=(200, 2))
    lhs = np.sum(xi * gauge_calculus.grad_Fp(g, p, xi), axis=1)
    rhs = p * gauge_calculus.eval_F(g, xi) ** p
    np.testing.assert_allclose(lhs, rhs, rtol=1e-9)


@pytest.mark.parametrize("g", GAUGES[:2], ids=lambda g: g.label)
def test_grad_Fp_matches_finite_differences(g):
    rng = np.random.default_rng(4)
    p, h = 2.5, 1e-6
    for _ in range(20):
        direction = rng.normal(size=2)
        xi = direction / np.linalg.norm(direction) * rng.uniform(0.1, 10)
        fd = np.array([
            (gauge_calculus.eval_F(g, xi + h * e) ** p - gauge_calculus.eval_F(g, xi - h * e) ** p) / (2 * h)
            for e in np.eye(2)
        ])
        np.testing.assert_allclose(gauge_calculus.grad_Fp(g, p, xi), fd, rtol=1e-6, atol=1e-6 * np.abs(fd).max())


def test_hess_Fp_examples(euclidean, ellipse):
    np.testing.assert_allclose(gauge_calculus.hess_Fp(euclidean, 2.0, [0.3, -2.0]), 2.0 * np.eye(2), atol=1e-12)
    np.testing.assert_allclose(gauge_calculus.hess_Fp(ellipse, 2.0, [1.0, 5.0]), 2.0 * np.diag([4.0, 1.0]), atol=1e-12)
    eigenvalues = np.linalg.eigvalsh(gauge_calculus.hess_Fp(euclidean, 3.0, [1.0, 0.0]))
    np.testing.assert_allclose(eigenvalues, [3.0, 6.0])


@pytest.mark.parametrize("g", GAUGES, ids=lambda g: g.label)
def test_hess_Fp_matches_finite_differences(g):
    p, h = 3.0, 1e-6
    xi = np.array([0.8, -1.3])
    fd = np.column_stack([
        (gauge_calculus.grad_Fp(g, p, xi + h * e) - gauge_calculus.grad_Fp(g, p, xi - h * e)) / (2 * h)
        for e in np.eye(2)
    ])
    np.testing.assert_allclose(gauge_calculus.hess_Fp(g, p, xi), fd, rtol=1e-5, atol=1e-6)


def test_hess_Fp_rejects_origin(euclidean):
    with pytest.raises(DegenerateAtZero):
        gauge_calculus.hess_Fp(euclidean, 2.0, [0.0, 0.0])


def test_hess_Fp_rejects_singular_lp_axis():
    with pytest.raises(DegenerateAtZero):
        gauge_calculus.hess_Fp(GaugeSpec(family="lp_norm", q=1.5), 2.0, [1.0, 0.0])


def test_wulff_volumes(euclidean, ellipse):
    disk = gauge_calculus.wulff_volume(euclidean)
    assert disk.kappa_n == pytest.approx(math.pi, abs=1e-6)
    assert disk.omega_K == pytest.approx(math.pi, abs=1e-6)

    info = gauge_calculus.wulff_volume(ellipse)
    assert info.kappa_n == pytest.approx(2 * math.pi, rel=1e-6)
    assert info.omega_K == pytest.approx(math.pi / 2, rel=1e-6)


def test_wulff_volume_is_planar_only():
    with pytest.raises(WrongRegime):
        gauge_calculus.wulff_volume(GaugeSpec(dimension=3))


def test_unit_ball_and_sphere_measures():
    assert gauge_calculus.unit_ball_volume(2) == pytest.approx(math.pi)
    assert gauge_calculus.unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)
    assert gauge_calculus.unit_sphere_area(2) == pytest.approx(2 * math.pi)
    assert gauge_calculus.unit_sphere_area(3) == pytest.approx(4 * math.pi)


def test_hypotheses_report(euclidean, ellipse):
    report = gauge_calculus.hypotheses(ellipse, 2.0)
    assert report.alpha == pytest.approx(1.0, rel=1e-3)
    assert report.beta == pytest.approx(2.0, rel=1e-3)
    assert report.homogeneity_residual < 1e-12
    assert report.evenness_residual < 1e-12
    assert report.hessian_positive_definite
    assert gauge_calculus.hypotheses(euclidean, 3.0).hessian_positive_definite


def test_hypotheses_flag_degenerate_lp_hessian():
    assert not gauge_calculus.hypotheses(GaugeSpec(family="lp_norm", q=3.0), 2.0).hessian_positive_definite
    assert not gauge_calculus.hypotheses(GaugeSpec(family="lp_norm", q=1.5), 2.0).hessian_positive_definite


def test_ellipse_gauge_needs_parameters():
    with pytest.raises(ValueError):
        GaugeSpec(family="ellipse", a=2.0)
