"""
Test script for semi-flat period data and operators
"""
import sys
import os
import math

import numpy as np

# Add current directory to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from geometry.errors import SingularFiberHit
from geometry.semi_flat import (
    FiniteMonodromyPeriods,
    InuPeriods,
    SemiFlatChart,
    SemiFlatOneForm,
    SL2Periods,
    dplus_dstar_semiflat,
    fd_dplus_dstar,
    mclean_metric,
    semiflat_triple,
)
from geometry.triple_algebra import DefiniteTriple, hk_deviation


def base_points(count, seed, radius=(0.2, 0.5)):
    rng = np.random.default_rng(seed)
    r = rng.uniform(*radius, count)
    angle = rng.uniform(-2.0, 2.0, count)
    return np.stack([
        r * np.cos(angle), r * np.sin(angle), rng.uniform(0.0, 1.0, count), rng.uniform(0.0, 1.0, count),
    ], axis=1)


def test_period_models():
    """Test conformal factors and monodromy"""
    print("=" * 60)
    print("Testing Period Models")
    print("=" * 60)

    u = 0.3 * np.exp(0.7j)
    for fiber, h in (("IV", 1.0), ("II", 0.4), ("I0*", 2.0)):
        periods = FiniteMonodromyPeriods(fiber)
        value = float(periods.imaginary_product(np.array([u]))[0])
        print(f"\n{fiber}: Im(conj(tau1) tau2) = {value:.12f}, expected {1.0 - 0.3 ** h:.12f}")
        assert abs(value - (1.0 - 0.3 ** h)) < 1e-12

    limit = FiniteMonodromyPeriods("IV").limit()
    assert abs(np.imag(np.conj(limit[0]) * limit[1]) - 1.0) < 1e-12

    inu = InuPeriods(2)
    y = np.array([0.1 + 0.05j])
    jump = inu.monodromy().periods(y)[1] - inu.periods(y)[1]
    print(f"tau2 monodromy jump: {complex(jump[0])}")
    assert abs(jump[0] - 2.0) < 1e-12
    assert abs(inu.imaginary_product(y)[0] + (2.0 / (2.0 * math.pi)) * math.log(abs(y[0]))) < 1e-12

    metric = mclean_metric(inu, y)
    assert metric.shape == (1, 2, 2) and metric[0, 0, 1] == 0.0
    try:
        mclean_metric(inu, 0.0)
        raise AssertionError("singular fiber accepted")
    except SingularFiberHit:
        print("y = 0 refused with SingularFiberHit")

    print("\n[PASS] Period model tests passed!")


def test_wirtinger_and_basis_change():
    """Test d/dy of the conformal factor and SL(2,Z) invariance"""
    print("\n" + "=" * 60)
    print("Testing Wirtinger Derivative and Basis Change")
    print("=" * 60)

    periods = FiniteMonodromyPeriods("III")
    y = np.array([0.35 * np.exp(0.4j), 0.2 * np.exp(-1.1j)])
    h = 1e-6
    dx = (periods.imaginary_product(y + h) - periods.imaginary_product(y - h)) / (2.0 * h)
    dyy = (periods.imaginary_product(y + 1j * h) - periods.imaginary_product(y - 1j * h)) / (2.0 * h)
    fd = 0.5 * (dx - 1j * dyy)
    gap = np.max(np.abs(fd - periods.imaginary_product_dy(y)))
    print(f"\n|d/dy I - FD| = {gap:.3e}")
    assert gap < 1e-7

    changed = SL2Periods(periods, ((2, 1), (1, 1)))
    assert np.allclose(changed.imaginary_product(y), periods.imaginary_product(y), atol=1e-12)
    try:
        SL2Periods(periods, ((2, 0), (0, 1)))
        raise AssertionError("non-unimodular basis change accepted")
    except ValueError:
        print("Basis change with determinant 2 rejected")

    print("\n[PASS] Wirtinger and basis change tests passed!")


def test_semiflat_triple():
    """Test that the semi-flat triple is hyperkahler"""
    print("\n" + "=" * 60)
    print("Testing Semi-Flat Triple")
    print("=" * 60)

    pts = base_points(20, seed=6)
    for periods in (FiniteMonodromyPeriods("IV"), InuPeriods(1)):
        chart = SemiFlatChart(periods=periods, delta=0.05)
        deviation = hk_deviation(DefiniteTriple(forms=semiflat_triple(chart, pts)))
        print(f"\n{periods.fiber_type}: max ||Q_omega - Id|| = {float(np.max(deviation)):.3e}")
        assert np.max(deviation) < 1e-10

    print("\n[PASS] Semi-flat triple tests passed!")


def test_dplus_dstar():
    """Test closed-form d+ and d* against finite differences"""
    print("\n" + "=" * 60)
    print("Testing d+ and d*")
    print("=" * 60)

    chart = SemiFlatChart(periods=FiniteMonodromyPeriods("IV"), delta=0.5)
    eta = SemiFlatOneForm(
        f=lambda y: np.abs(y) ** 2,
        f_dybar=lambda y: y,
        F=lambda y: y,
        F_dy=lambda y: np.ones_like(y),
    )
    pts = base_points(6, seed=8, radius=(0.3, 0.5))
    closed_plus, closed_star = dplus_dstar_semiflat(eta, chart, pts)
    fd_plus, fd_star = fd_dplus_dstar(eta, chart, pts, 1e-5)
    plus_gap = np.max(np.abs(closed_plus - fd_plus)) / np.max(np.abs(closed_plus))
    star_gap = np.max(np.abs(closed_star - fd_star)) / np.max(np.abs(closed_star))
    print(f"\nrelative d+ gap: {plus_gap:.3e}, relative d* gap: {star_gap:.3e}")
    assert plus_gap < 1e-5
    assert star_gap < 1e-5

    print("\n[PASS] d+ and d* tests passed!")


def main():
    """Run all tests"""
    print("\n" + "=" * 60)
    print("SEMI-FLAT - TEST SUITE")
    print("=" * 60 + "\n")

    try:
        test_period_models()
        test_wirtinger_and_basis_change()
        test_semiflat_triple()
        test_dplus_dstar()

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
