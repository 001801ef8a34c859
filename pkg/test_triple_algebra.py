"""
Test script for definite triples and the hyperkahler error
"""
import sys
import os

import numpy as np

# Add current directory to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from geometry.errors import DefiniteViolation, EmptyRegion
from geometry.triple_algebra import (
    DefiniteTriple,
    hk_deviation,
    hk_error,
    hodge_star_2form,
    linearized_deviation,
    metric_from_triple,
    q_matrix,
    standard_triple,
    two_form,
)

FRAME = np.array([
    [1.2, 0.3, 0.0, 0.1],
    [0.0, 0.9, 0.2, 0.0],
    [0.0, 0.0, 1.1, -0.4],
    [0.0, 0.0, 0.0, 0.8],
])


def test_q_matrix():
    """Test Q for flat, scaled and non-definite triples"""
    print("=" * 60)
    print("Testing Q-Matrix")
    print("=" * 60)

    flat = DefiniteTriple(forms=standard_triple())
    data = q_matrix(flat)
    print(f"\nQ of the standard triple:\n{data.q[0]}")
    assert np.allclose(data.q[0], np.eye(3))
    assert abs(data.dvol[0] - 1.0) < 1e-14
    assert hk_deviation(flat)[0] < 1e-14

    scaled = q_matrix(DefiniteTriple(forms=3.0 * standard_triple()))
    assert np.allclose(scaled.q[0], 9.0 * np.eye(3))
    assert abs(scaled.dvol[0] - 9.0) < 1e-12
    assert np.allclose(scaled.q_normalized[0], np.eye(3))

    anti = np.array([
        two_form({(0, 1): 1.0, (2, 3): -1.0}),
        two_form({(0, 2): 1.0, (1, 3): 1.0}),
        two_form({(0, 3): 1.0, (1, 2): -1.0}),
    ])
    try:
        q_matrix(DefiniteTriple(forms=anti))
        raise AssertionError("anti-self-dual triple accepted")
    except DefiniteViolation:
        print("Anti-self-dual triple rejected with DefiniteViolation")

    print("\n[PASS] Q-matrix tests passed!")


def test_metric_recovery():
    """Test that the metric of a pulled-back triple is A^T A"""
    print("\n" + "=" * 60)
    print("Testing Metric Recovery")
    print("=" * 60)

    flat_metric = metric_from_triple(DefiniteTriple(forms=standard_triple()))
    assert np.allclose(flat_metric[0], np.eye(4), atol=1e-12)

    pulled = np.einsum("ai,kab,bj->kij", FRAME, standard_triple(), FRAME)
    recovered = metric_from_triple(DefiniteTriple(forms=pulled))[0]
    expected = FRAME.T @ FRAME
    print(f"\nmax |g - A^T A| = {np.max(np.abs(recovered - expected)):.3e}")
    assert np.allclose(recovered, expected, atol=1e-10)

    star = hodge_star_2form(pulled, expected)
    assert np.allclose(star, pulled, atol=1e-10)

    print("\n[PASS] Metric recovery tests passed!")


def test_hk_error():
    """Test sup, weighted sup and Holder seminorm"""
    print("\n" + "=" * 60)
    print("Testing Hyperkahler Error")
    print("=" * 60)

    deviations = np.array([0.1, 0.2, 0.4])
    points = np.array([[0.0], [1.0], [2.0]])
    weight = lambda pts: np.full(len(pts), 2.0)
    report = hk_error(deviations, points, weight=weight, mu=0.05, alpha=0.5)
    print(f"\n{report}")
    assert report.sup_error == 0.4
    assert abs(report.weighted_sup - 2.0 ** 1.05 * 0.4) < 1e-14
    assert report.pair_count == 3
    assert abs(report.holder_seminorm - 2.0 ** 1.55 * 0.3 / np.sqrt(2.0)) < 1e-12

    triple = DefiniteTriple(forms=np.repeat(standard_triple()[None], 5, axis=0))
    flat_report = hk_error(triple, np.zeros((5, 4)))
    assert flat_report.sup_error < 1e-14 and flat_report.holder_seminorm == 0.0

    try:
        hk_error(np.array([]), np.zeros((0, 4)))
        raise AssertionError("empty region accepted")
    except EmptyRegion:
        print("Empty sample set rejected with EmptyRegion")

    try:
        hk_error(deviations, points, mu=0.3)
        raise AssertionError("mu outside (0, 1/5) accepted")
    except ValueError:
        print("mu = 0.3 rejected")

    print("\n[PASS] Hyperkahler error tests passed!")


def test_linearization():
    """Test first-order deviation against the exact Q_omega"""
    print("\n" + "=" * 60)
    print("Testing Linearized Deviation")
    print("=" * 60)

    rng = np.random.default_rng(11)
    raw = rng.normal(size=(1, 3, 4, 4))
    perturbation = 1e-6 * (raw - np.swapaxes(raw, -1, -2))
    base = standard_triple()[None]

    exact = q_matrix(DefiniteTriple(forms=base + perturbation)).q_normalized - np.eye(3)[None]
    linear = linearized_deviation(base, perturbation)
    print(f"\n|exact - linear| = {np.max(np.abs(exact - linear)):.3e} (|linear| = {np.max(np.abs(linear)):.3e})")
    assert abs(np.trace(linear[0])) < 1e-15
    assert np.max(np.abs(exact - linear)) < 1e-9

    print("\n[PASS] Linearization tests passed!")


def main():
    """Run all tests"""
    print("\n" + "=" * 60)
    print("TRIPLE ALGEBRA - TEST SUITE")
    print("=" * 60 + "\n")

    try:
        test_q_matrix()
        test_metric_recovery()
        test_hk_error()
        test_linearization()

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
