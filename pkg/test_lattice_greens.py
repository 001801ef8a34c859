"""
Test script for the periodic Green's function
"""
import sys
import os
import math

import numpy as np

# Add current directory to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from geometry.diffgeo_numerics import fit_semilog, gradient_pointwise, laplacian_pointwise
from geometry.errors import DomainViolation, PoleHit
from geometry.lattice_greens import (
    HolomorphicPolynomial,
    MonopoleSet,
    calibration_constant,
    eval_green,
    eval_potential_V,
    green_values,
    ooguri_vafa_T,
)

EULER_GAMMA = 0.5772156649015329


def test_monopole_sets():
    """Test pole bookkeeping"""
    print("=" * 60)
    print("Testing Monopole Sets")
    print("=" * 60)

    poles = MonopoleSet(poles=[0.25, 1.75])
    assert poles.nu == 2
    assert poles.poles == [0.25, 0.75]
    assert abs(poles.iota0() - 0.25) < 1e-15
    assert MonopoleSet(poles=[0.1]).iota0() == 0.5

    symmetric = MonopoleSet.symmetric(2)
    print(f"\nSymmetric set for nu_half=2: {symmetric.poles}")
    assert symmetric.nu == 4
    assert symmetric.is_symmetric()
    assert not MonopoleSet(poles=[0.1, 0.3]).is_symmetric()

    try:
        MonopoleSet(poles=[0.2, 1.2])
        raise AssertionError("coincident poles accepted")
    except ValueError as exc:
        print(f"Coincident poles rejected: {type(exc).__name__}")

    print("\n[PASS] Monopole set tests passed!")


def test_representations_agree():
    """Test image sum against Fourier-Bessel series"""
    print("\n" + "=" * 60)
    print("Testing Dual Representations")
    print("=" * 60)

    poles = MonopoleSet(poles=[0.0, 0.3])
    rng = np.random.default_rng(1)
    rho = np.linspace(0.15, 0.4, 12)
    phi = rng.uniform(0.0, 2.0 * math.pi, 12)
    pts = np.stack([rho * np.cos(phi), rho * np.sin(phi), rng.uniform(0.0, 1.0, 12)], axis=1)

    images, image_grads, _ = green_values(pts, poles, 1e-13, representation="image_sum")
    bessel, bessel_grads, _ = green_values(pts, poles, 1e-13, representation="fourier_bessel")
    gap = float(np.max(np.abs(images - bessel)))
    grad_gap = float(np.max(np.abs(image_grads - bessel_grads)))
    print(f"\nValue gap: {gap:.3e}, gradient gap: {grad_gap:.3e}")
    assert gap <= 1e-10
    assert grad_gap <= 1e-8

    constant = calibration_constant()
    print(f"Calibration constant: {constant:.12f} (gamma - log 2 = {EULER_GAMMA - math.log(2.0):.12f})")
    assert abs(constant - (EULER_GAMMA - math.log(2.0))) < 1e-9

    print("\n[PASS] Dual representation tests passed!")


def test_fiber_mean_and_decay():
    """Test normalization and exponential approach to nu log(1/r)"""
    print("\n" + "=" * 60)
    print("Testing Fiber Mean and Decay")
    print("=" * 60)

    poles = MonopoleSet(poles=[0.0, 0.3, 0.55])
    for rho in (0.2, 0.5, 1.0):
        u3 = np.arange(64) / 64.0
        pts = np.stack([np.full(64, rho), np.zeros(64), u3], axis=1)
        values, _, _ = green_values(pts, poles, 1e-13)
        mean_gap = abs(float(np.mean(values)) - 3.0 * math.log(1.0 / rho))
        print(f"rho={rho}: fiber mean error {mean_gap:.3e}")
        assert mean_gap <= 1e-8

    r = np.linspace(2.0, 4.0, 9)
    pts = np.stack([r, np.zeros_like(r), np.zeros_like(r)], axis=1)
    values, _, _ = green_values(pts, poles, 1e-13)
    fit = fit_semilog(r, np.log(np.abs(values - 3.0 * np.log(1.0 / r))))
    print(f"Decay slope: {fit.exponent:.4f} (expected {-2.0 * math.pi:.4f}), R2={fit.r2:.6f}")
    assert abs(fit.exponent + 2.0 * math.pi) <= 0.05 * 2.0 * math.pi
    assert fit.r2 > 0.999

    print("\n[PASS] Fiber mean and decay tests passed!")


def test_harmonic_and_gradient():
    """Test that G is harmonic with consistent gradient"""
    print("\n" + "=" * 60)
    print("Testing Harmonicity and Gradients")
    print("=" * 60)

    poles = MonopoleSet(poles=[0.5])
    pts = np.array([[0.1, 0.05, 0.2], [0.4, -0.3, 0.7], [1.2, 0.4, 0.45]])
    value_fn = lambda p: green_values(p, poles, 1e-13)[0]
    laplacian = laplacian_pointwise(value_fn, pts, 1e-3)
    _, grads, _ = green_values(pts, poles, 1e-13)
    fd_grads = gradient_pointwise(value_fn, pts, 1e-4)
    print(f"\nmax |Laplacian G| = {float(np.max(np.abs(laplacian))):.3e}")
    print(f"max gradient mismatch = {float(np.max(np.abs(grads - fd_grads))):.3e}")
    assert np.max(np.abs(laplacian)) < 1e-4
    assert np.max(np.abs(grads - fd_grads)) < 1e-6

    print("\n[PASS] Harmonicity tests passed!")


def test_single_point_evaluators():
    """Test eval_green and eval_potential_V"""
    print("\n" + "=" * 60)
    print("Testing Single-Point Evaluators")
    print("=" * 60)

    poles = MonopoleSet(poles=[0.0])
    near = eval_green([0.1, 0.0, 0.3], poles)
    far = eval_green([0.6, 0.2, 0.3], poles)
    print(f"\nNear: {near.value:.10f} via {near.representation_used}")
    print(f"Far:  {far.value:.10f} via {far.representation_used}")
    assert near.representation_used == "image_sum"
    assert far.representation_used == "fourier_bessel"
    assert near.truncation_error_bound <= 1e-12

    try:
        eval_green([0.0, 0.0, 1.0], poles)
        raise AssertionError("pole accepted")
    except PoleHit:
        print("Pole rejected with PoleHit")

    delta = math.exp(-20.0)
    T = ooguri_vafa_T(1, delta)
    assert abs(T - 20.0) < 1e-12
    V = eval_potential_V([0.6, 0.2, 0.3], poles, T, None, delta)
    assert abs(V - (T + far.value)) < 1e-12

    h = HolomorphicPolynomial(coefficients=[(0.0, 0.0), (0.0, 1.0)])
    corrected = eval_potential_V([0.6, 0.2, 0.3], poles, T, h, 0.1)
    # 2 pi Im(i * 0.1 * (0.6 + 0.2i)) = 2 pi * 0.06
    assert abs(corrected - (T + far.value + 2.0 * math.pi * 0.06)) < 1e-12

    try:
        eval_potential_V([10.0, 0.0, 0.3], poles, T, None, 0.1)
        raise AssertionError("point outside the base disc accepted")
    except DomainViolation:
        print("Point outside |delta w| <= 2 delta0 rejected")

    print("\n[PASS] Single-point evaluator tests passed!")


def main():
    """Run all tests"""
    print("\n" + "=" * 60)
    print("GREEN'S FUNCTION - TEST SUITE")
    print("=" * 60 + "\n")

    try:
        test_monopole_sets()
        test_representations_agree()
        test_fiber_mean_and_decay()
        test_harmonic_and_gradient()
        test_single_point_evaluators()

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
