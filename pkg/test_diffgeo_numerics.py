"""
Test script for the finite-difference calculus kit
"""
import sys
import os

import numpy as np

# Add current directory to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from geometry.diffgeo_numerics import (
    ChartGrid,
    Exclusion,
    convergence_ratio,
    fd_d,
    fit_power_law,
    fit_semilog,
    hodge_star,
    kahler_ricci_residual,
    ricci_residual,
    riemann_fd,
    wedge,
)
from geometry.errors import InsufficientRange, StencilOverrun
from geometry.model_spaces import EguchiHanson


def round_sphere(points):
    """Unit 2-sphere in stereographic coordinates"""
    r2 = np.sum(points ** 2, axis=1)
    factor = 4.0 / (1.0 + r2) ** 2
    return factor[:, None, None] * np.eye(2)[None]


def test_forms_algebra():
    """Test wedge products and Hodge stars"""
    print("=" * 60)
    print("Testing Form Algebra")
    print("=" * 60)

    e = np.eye(4)
    dx01 = wedge(e[0], e[1], 1, 1)
    assert dx01[0, 1] == 1.0 and dx01[1, 0] == -1.0

    omega = np.zeros((4, 4))
    omega[0, 1], omega[1, 0] = 1.0, -1.0
    omega[2, 3], omega[3, 2] = 1.0, -1.0
    top = wedge(omega, omega, 2, 2)
    print(f"\n(omega ^ omega)_0123 = {top[0, 1, 2, 3]:.12f}")
    assert abs(top[0, 1, 2, 3] - 2.0) < 1e-12

    star = hodge_star(dx01, 2, np.eye(4))
    assert abs(star[2, 3] - 1.0) < 1e-12
    assert abs(hodge_star(np.eye(3)[0], 1, np.eye(3))[1, 2] - 1.0) < 1e-12

    rng = np.random.default_rng(3)
    a = rng.normal(size=(4, 4))
    metric = a @ a.T + np.eye(4)
    alpha = rng.normal(size=(4, 4))
    alpha = alpha - alpha.T
    double = hodge_star(hodge_star(alpha, 2, metric), 2, metric)
    print(f"|** alpha - alpha| = {np.max(np.abs(double - alpha)):.3e}")
    assert np.max(np.abs(double - alpha)) < 1e-10

    print("\n[PASS] Form algebra tests passed!")


def test_exterior_derivative():
    """Test fd_d on exact and closed forms"""
    print("\n" + "=" * 60)
    print("Testing Exterior Derivative")
    print("=" * 60)

    grid = ChartGrid(dimension=2, lower=[0.0, 0.0], upper=[1.0, 1.0], h=0.05)
    x, y = grid.mesh()

    alpha = np.zeros((2,) + x.shape)
    alpha[1] = x
    d_alpha = fd_d(alpha, 1, grid)
    print(f"\nd(x dy)_01 range: [{d_alpha[0, 1].min():.12f}, {d_alpha[0, 1].max():.12f}]")
    assert np.allclose(d_alpha[0, 1], 1.0, atol=1e-10)
    assert np.allclose(d_alpha[1, 0], -1.0, atol=1e-10)

    exact = np.stack([2.0 * x * y, x ** 2])
    dd = fd_d(exact, 1, grid)
    print(f"max |d d(x^2 y)| = {np.max(np.abs(dd)):.3e}")
    assert np.max(np.abs(dd)) < 1e-10

    cornered = ChartGrid(dimension=2, lower=[0.0, 0.0], upper=[1.0, 1.0], h=0.05,
                         exclusions=[Exclusion(center=[0.0, 0.0], radius=0.12)])
    singular = np.zeros((2,) + x.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        singular[1] = x / np.hypot(x, y)
    masked = fd_d(singular, 1, cornered)
    near = np.hypot(x, y) < 0.12 + 2.0 * cornered.h
    print(f"masked near the corner ball: {int(np.sum(np.isnan(masked[0, 1])))} of {x.size} points")
    assert np.all(np.isnan(masked[0, 1][near]))
    assert np.all(np.isfinite(masked[0, 1][~near]))
    far = np.hypot(x, y) > 0.7
    expected = y ** 2 / np.hypot(x, y) ** 3
    assert np.max(np.abs(masked[0, 1][far] - expected[far])) < 0.05

    try:
        cornered.check_stencil(np.array([[0.05, 0.05]]))
        raise AssertionError("pointwise stencil over an excluded ball accepted")
    except StencilOverrun:
        print("Pointwise stencil at the corner ball refused with StencilOverrun")

    swallowed = ChartGrid(dimension=2, lower=[0.0, 0.0], upper=[1.0, 1.0], h=0.05,
                          exclusions=[Exclusion(center=[0.5, 0.5], radius=1.0)])
    try:
        fd_d(alpha, 1, swallowed)
        raise AssertionError("grid inside an excluded ball accepted")
    except StencilOverrun:
        print("Grid covered by an excluded ball refused with StencilOverrun")

    print("\n[PASS] Exterior derivative tests passed!")


def test_curvature():
    """Test Riemann/Ricci on the round sphere and flat space"""
    print("\n" + "=" * 60)
    print("Testing Curvature")
    print("=" * 60)

    pts = np.array([[0.0, 0.0], [0.3, -0.2], [0.8, 0.5]])
    sample = riemann_fd(round_sphere, pts, 1e-3)
    gap = np.max(np.abs(sample.ricci - round_sphere(pts)))
    print(f"\n|Ric - g| on the unit sphere: {gap:.3e}")
    print(f"|Rm|: {sample.riemann_norm}")
    assert gap < 1e-4
    assert np.allclose(sample.riemann_norm, 2.0, atol=1e-3)

    flat = lambda p: np.repeat(np.eye(3)[None], len(p), axis=0)
    assert ricci_residual(flat, np.zeros((2, 3)), 1e-2) == 0.0

    print("\n[PASS] Curvature tests passed!")


def test_eguchi_hanson_ricci_flat():
    """Test second-order convergence of the Kahler-Ricci residual"""
    print("\n" + "=" * 60)
    print("Testing Eguchi-Hanson Ricci Flatness")
    print("=" * 60)

    eh = EguchiHanson()
    rng = np.random.default_rng(5)
    directions = rng.normal(size=(6, 4))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    pts = directions * rng.uniform(1.2, 2.0, size=6)[:, None]

    residual = lambda h: kahler_ricci_residual(eh.potential, pts, h)
    coarse = residual(0.04)
    ratio = convergence_ratio(residual, 0.04)
    print(f"\nresidual(h=0.04) = {coarse:.3e}, ratio = {ratio:.3f}")
    assert coarse < 1e-2
    assert 3.0 < ratio < 5.0

    print("\n[PASS] Eguchi-Hanson tests passed!")


def test_rate_fits():
    """Test power-law and semi-log fits"""
    print("\n" + "=" * 60)
    print("Testing Rate Fits")
    print("=" * 60)

    x = np.array([1e-2, 1e-3, 1e-4, 1e-5])
    fit = fit_power_law(x, 3.0 * x ** 2.5)
    print(f"\nPower law exponent: {fit.exponent:.12f}, R2={fit.r2:.12f}")
    assert abs(fit.exponent - 2.5) < 1e-10
    assert abs(fit.r2 - 1.0) < 1e-12
    assert fit.n_points == 4

    t = np.array([10.0, 15.0, 20.0])
    semilog = fit_semilog(t, -0.7 * t + 2.0)
    assert abs(semilog.exponent + 0.7) < 1e-12
    assert abs(semilog.intercept - 2.0) < 1e-10

    two = fit_power_law(np.array([1.0, 2.0]), np.array([1.0, 8.0]))
    assert abs(two.exponent - 3.0) < 1e-12 and two.r2 == 1.0

    try:
        fit_power_law(np.array([1.0]), np.array([1.0]))
        raise AssertionError("single-point fit accepted")
    except InsufficientRange:
        print("Single-point fit refused with InsufficientRange")

    assert abs(convergence_ratio(lambda h: h ** 2, 0.1) - 4.0) < 1e-12

    print("\n[PASS] Rate fit tests passed!")


def main():
    """Run all tests"""
    print("\n" + "=" * 60)
    print("CALCULUS KIT - TEST SUITE")
    print("=" * 60 + "\n")

    try:
        test_forms_algebra()
        test_exterior_derivative()
        test_curvature()
        test_eguchi_hanson_ricci_flat()
        test_rate_fits()

        print("\n" + "=" * 60)
        print("ALL TESTS PASSED!")
        print("=" * 60 + "\n")

    except Exception as e:
        print(f"\n[FAIL] Test failed with error: {str(e)}")
        import traceback
        traceback.print_exc()
        sys.exit(1)


if __name__ == "__main__":
    main()
