"""
Test script for sector Fourier analysis and distortion fits
"""
import sys
import os
import math
from fractions import Fraction

import numpy as np

# Add current directory to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from geometry.errors import BoundaryTwistViolation, InsufficientRange, SectorMismatch
from geometry.sector_analysis import (
    SectorSpec,
    alg_laplacian_indicial_roots,
    alg_sector_pairs,
    as_exact,
    distortion_fit,
    fit_expansion,
    indicial_data,
    liouville_check,
    mode,
    sample_circles,
)
from geometry.semi_flat import ConstantPeriods, FiniteMonodromyPeriods

SPEC = SectorSpec(beta=2.0 / 3.0, sigma=2.0 / 3.0, r1=1.0, r2=2.0, n_samples=64, max_mode=4)


def harmonic(terms, spec):
    """U(r, theta) = sum of c r^power phi_j for (j, power, c) in terms"""
    def fn(r, theta):
        total = np.zeros(np.shape(theta), dtype=complex)
        for j, power, c in terms:
            total += c * r ** power * mode(j, theta, spec.beta, spec.sigma)
        return total
    return fn


def test_indicial_data():
    """Test exact spectral gaps and indicial roots"""
    print("=" * 60)
    print("Testing Indicial Data")
    print("=" * 60)

    assert as_exact(0.4) == Fraction(2, 5)
    assert isinstance(as_exact(math.pi), float)

    gaps = {data.beta: data.iota for data in alg_sector_pairs()}
    print(f"\niota by beta: {gaps}")
    assert gaps[Fraction(5, 6)] == Fraction(1, 5)
    assert gaps[Fraction(3, 4)] == Fraction(1, 3)
    assert gaps[Fraction(2, 3)] == Fraction(1, 2)
    assert gaps[Fraction(1, 2)] == 1
    assert gaps[Fraction(1, 6)] == 1

    untwisted = indicial_data(0.5, 0)
    assert untwisted.iota == 2
    assert untwisted.ladder[1] == 2 and untwisted.ladder[-3] == -6

    forms = alg_laplacian_indicial_roots(5.0 / 6.0, "forms")
    assert Fraction(-8, 5) in forms
    assert Fraction(-6, 5) in forms
    assert Fraction(6, 5) in alg_laplacian_indicial_roots(5.0 / 6.0)
    assert set(alg_laplacian_indicial_roots(5.0 / 6.0)) <= set(forms)
    sixth = alg_laplacian_indicial_roots(1.0 / 6.0, "forms")
    assert Fraction(-6) in sixth and Fraction(-12) in sixth
    two_thirds = alg_laplacian_indicial_roots(2.0 / 3.0, "forms")
    gap = [root for root in two_thirds if Fraction(-2) < root < Fraction(-3, 2)]
    print(f"\nbeta=2/3 form roots in (-2, -3/2): {gap}")
    assert gap == []
    try:
        alg_laplacian_indicial_roots(0.5, "spinors")
        raise AssertionError("unknown root class accepted")
    except ValueError:
        print("Unknown root class rejected")

    print("\n[PASS] Indicial data tests passed!")


def test_sector_spec():
    """Test sampling validation"""
    print("\n" + "=" * 60)
    print("Testing Sector Spec")
    print("=" * 60)

    assert SPEC.log_mode_index() is None
    assert SectorSpec(beta=0.5, sigma=1.0, r1=1.0, r2=2.0).log_mode_index() == 1
    for kwargs in ({"r1": 2.0, "r2": 1.0}, {"n_samples": 16, "max_mode": 4}):
        params = {"beta": 0.5, "r1": 1.0, "r2": 2.0, **kwargs}
        try:
            SectorSpec(**params)
            raise AssertionError(f"{kwargs} accepted")
        except ValueError:
            print(f"\n{kwargs} rejected")

    print("\n[PASS] Sector spec tests passed!")


def test_expansion_fit():
    """Test coefficient recovery on two circles"""
    print("\n" + "=" * 60)
    print("Testing Expansion Fit")
    print("=" * 60)

    lam_plus = (1.0 - SPEC.sigma) / SPEC.beta
    lam_minus = (-1.0 - SPEC.sigma) / SPEC.beta
    assert abs(lam_plus - 0.5) < 1e-12 and abs(lam_minus + 2.5) < 1e-12

    fn = harmonic([(1, lam_plus, 0.5), (-1, -lam_minus, 0.2)], SPEC)
    expansion = fit_expansion(sample_circles(fn, SPEC, [SPEC.r1, SPEC.r2]), SPEC)
    print(f"\nC_1 = {expansion.coefficient(1):.6f}, C*_-1 = {expansion.coefficient(-1, 'decaying'):.6f}")
    assert abs(expansion.coefficient(1) - 0.5) < 1e-10
    assert abs(expansion.coefficient(-1, "decaying") - 0.2) < 1e-10
    assert abs(expansion.coefficient(2)) < 1e-10
    assert expansion.reconstruction_error(fn, 1.5) < 1e-10

    log_spec = SectorSpec(beta=0.5, sigma=0.0, r1=1.0, r2=3.0, n_samples=64, max_mode=4)
    log_fn = lambda r, theta: 2.0 + 3.0 * np.log(r) + 0.0 * theta
    log_fit = fit_expansion(sample_circles(log_fn, log_spec, [1.0, 3.0]), log_spec)
    assert abs(log_fit.kappa0 - 2.0) < 1e-10 and abs(log_fit.c0 - 3.0) < 1e-10

    print("\n[PASS] Expansion fit tests passed!")


def test_liouville():
    """Test the numerical Liouville verdict"""
    print("\n" + "=" * 60)
    print("Testing Liouville Check")
    print("=" * 60)

    growing = harmonic([(1, 0.5, 1.0)], SPEC)
    verdict = liouville_check(fit_expansion(sample_circles(growing, SPEC, [1.0, 2.0]), SPEC), mu=0.25)
    print(f"\ngrowing mode: passed={verdict.passed}, offending={verdict.offending}")
    assert not verdict.passed and verdict.offending == [1]

    zero = np.zeros((2, SPEC.n_samples + 1), dtype=complex)
    assert liouville_check(fit_expansion(zero, SPEC), mu=0.25).passed

    try:
        liouville_check(fit_expansion(zero, SPEC), mu=0.7)
        raise AssertionError("mu above the gap accepted")
    except ValueError:
        print("mu = 0.7 rejected (gap 1/2)")

    constant = np.ones((2, SPEC.n_samples + 1), dtype=complex)
    try:
        fit_expansion(constant, SPEC)
        raise AssertionError("untwisted constant accepted")
    except BoundaryTwistViolation:
        print("Constant function rejected with BoundaryTwistViolation")

    print("\n[PASS] Liouville tests passed!")


def test_distortion_fit():
    """Test fitted distortion orders"""
    print("\n" + "=" * 60)
    print("Testing Distortion Fit")
    print("=" * 60)

    u = np.geomspace(1e-3, 1e-1, 12) * np.exp(0.5j)
    fit = distortion_fit(FiniteMonodromyPeriods("II"), "II", u)
    print(f"\nII: lambda = {fit.exponent:.8f} (table {fit.expected})")
    assert abs(fit.exponent - 0.4) < 1e-8
    assert fit.relative_error() < 1e-6

    wide = np.geomspace(0.04, 0.8, 12) * np.exp(0.5j)
    for h in (2, 5):
        kodaira = distortion_fit(FiniteMonodromyPeriods.kodaira(h), "IV", wide)
        print(f"IV normal form h={h}: lambda = {kodaira.exponent:.8f} (table bound {kodaira.expected})")
        assert abs(kodaira.exponent - h) < 1e-6
        assert kodaira.exponent >= kodaira.expected
    try:
        FiniteMonodromyPeriods.kodaira(3)
        raise AssertionError("h = 3 accepted")
    except ValueError:
        print("Kodaira exponent h = 3 rejected")

    flat = distortion_fit(ConstantPeriods(), "I0*", u)
    assert flat.exact_flat and math.isinf(flat.exponent) and flat.relative_error() == 0.0

    try:
        distortion_fit(FiniteMonodromyPeriods("II"), "II", np.geomspace(0.01, 0.05, 5))
        raise AssertionError("narrow sweep accepted")
    except InsufficientRange:
        print("Sweep narrower than a decade rejected with InsufficientRange")
    try:
        distortion_fit(FiniteMonodromyPeriods("II"), "IV", u)
        raise AssertionError("fiber type mismatch accepted")
    except SectorMismatch:
        print("II periods fitted as IV rejected with SectorMismatch")

    print("\n[PASS] Distortion fit tests passed!")


def main():
    """Run all tests"""
    print("\n" + "=" * 60)
    print("SECTOR ANALYSIS - TEST SUITE")
    print("=" * 60 + "\n")

    try:
        test_indicial_data()
        test_sector_spec()
        test_expansion_fit()
        test_liouville()
        test_distortion_fit()

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
