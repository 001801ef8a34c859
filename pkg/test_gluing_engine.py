"""
Test script for the gluing engine
"""
import sys
import os
import math

import numpy as np

# Add current directory to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from geometry.diffgeo_numerics import fd_d_pointwise
from geometry.errors import DecayViolation, ScaleViolation, SectorMismatch
from geometry.gluing_engine import (
    CutoffProfile,
    EHCap,
    glue_ALG,
    glue_Inu,
    glue_Inustar,
    inu_damage_points,
    leading_mode,
    orbifold_scale_bound,
    quintic_step,
    radial_primitive,
    shell_points,
)
from geometry.lattice_greens import MonopoleSet
from geometry.model_spaces import OMEGA, ALGModel, EguchiHanson, SyntheticALG
from geometry.semi_flat import FiniteMonodromyPeriods
from geometry.triple_algebra import DefiniteTriple, hk_deviation

EISENSTEIN = (OMEGA.real, OMEGA.imag)


def ring_points(rho, count=4, seed=0):
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.0, 2.0 * math.pi, count)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), rng.uniform(0.0, 1.0, count),
                     rng.uniform(0.0, 2.0 * math.pi, count)], axis=1)


def test_cutoffs():
    """Test the quintic step and cutoff bounds"""
    print("=" * 60)
    print("Testing Cutoffs")
    print("=" * 60)

    assert quintic_step(np.array([-1.0]))[0] == 0.0
    assert quintic_step(np.array([2.0]))[0] == 1.0
    assert abs(quintic_step(np.array([0.5]))[0] - 0.5) < 1e-15

    profile = CutoffProfile(inner=1.0, outer=3.0)
    assert profile.value(np.array([0.5]))[0] == 1.0
    assert profile.value(np.array([3.5]))[0] == 0.0
    r = np.linspace(1.05, 2.95, 12)
    h = 1e-6
    fd = (profile.value(r + h) - profile.value(r - h)) / (2.0 * h)
    assert np.allclose(fd, profile.derivative(r), atol=1e-8)

    first, second = profile.derivative_bounds()
    dense = np.linspace(1.0, 3.0, 20001)
    print(f"\nsup |chi'| = {np.max(np.abs(profile.derivative(dense))):.6f} (bound {first:.6f})")
    assert abs(np.max(np.abs(profile.derivative(dense))) - first) < 1e-6
    assert np.max(np.abs(profile.second_derivative(dense))) <= second + 1e-9

    increasing = CutoffProfile(inner=1.0, outer=3.0, increasing=True)
    assert np.allclose(increasing.value(r) + profile.value(r), 1.0)

    print("\n[PASS] Cutoff tests passed!")


def test_inu_gluing():
    """Test the I_nu assembly and its exponential error"""
    print("\n" + "=" * 60)
    print("Testing I_nu Gluing")
    print("=" * 60)

    assert leading_mode(MonopoleSet(poles=[0.25, 0.75])) == 2
    assert leading_mode(MonopoleSet(poles=[0.0, 0.3])) == 1

    delta0 = 0.1
    logs = {}
    for x in (10.0, 12.0):
        delta = math.exp(-x)
        assembly = glue_Inu(delta, 1, delta0=delta0)
        gluing = assembly.components["inu"]
        labels = assembly.classify(np.concatenate([
            ring_points(0.05 / delta, 1), ring_points(0.15 / delta, 1), ring_points(0.3 / delta, 1),
        ]))
        assert list(labels) == ["ov_core", "inu_damage", "semi_flat"]
        pts = ring_points(1.001 * delta0 / delta, seed=1)
        logs[x] = float(np.max(gluing.log_deviation(pts)))
        print(f"\ndelta = e^-{x:g}: log ||Q_omega - Id|| = {logs[x]:.2f}")

    slope = (logs[12.0] - logs[10.0]) / (math.exp(12.0) - math.exp(10.0))
    expected = -2.0 * math.pi * 1.001 * delta0
    print(f"slope in 1/delta: {slope:.5f} (expected {expected:.5f})")
    assert abs(slope / expected - 1.0) < 0.01

    core = ring_points(0.5 * delta0 / math.exp(-12.0), seed=2)
    core_deviation = assembly.region_deviation("ov_core", core)
    print(f"ov_core deviation: {core_deviation:.3e}")
    assert core_deviation < 1e-9

    try:
        glue_Inu(1e-4, 2, poles=MonopoleSet(poles=[0.1]), check_points=0)
        raise AssertionError("nu mismatch accepted")
    except SectorMismatch:
        print("Pole count mismatch rejected with SectorMismatch")

    print("\n[PASS] I_nu gluing tests passed!")


def test_eh_caps():
    """Test Eguchi-Hanson caps and the orbifold scale bound"""
    print("\n" + "=" * 60)
    print("Testing Eguchi-Hanson Caps")
    print("=" * 60)

    cap = EHCap(scale_e=0.1, delta=1e-3)
    core = shell_points(0.3, 0.9, 32, seed=3)
    deviation = hk_deviation(DefiniteTriple(forms=cap.forms(core)))
    print(f"\ncore deviation: {float(np.max(deviation)):.3e}")
    assert np.max(deviation) < 1e-9

    error = cap.damage_error(count=64)
    smaller = EHCap(scale_e=0.1, delta=1e-4).damage_error(count=64)
    print(f"damage error at delta=1e-3: {error:.3e}, at delta=1e-4: {smaller:.3e}")
    assert 0.0 < smaller < error

    bound = orbifold_scale_bound(1, math.exp(-10.0))
    assert abs(bound - 1.0 / math.sqrt(10.0)) < 1e-15
    try:
        glue_Inustar(math.exp(-10.0), 1, scale_es=(0.5, 0.1, 0.1, 0.1))
        raise AssertionError("oversized orbifold parameter accepted")
    except ScaleViolation:
        print("e_1 = 0.5 rejected with ScaleViolation")
    try:
        glue_Inustar(math.exp(-10.0), 1, scale_es=(0.1, 0.1, 0.1))
        raise AssertionError("three orbifold parameters accepted")
    except ValueError:
        print("Three orbifold parameters rejected")

    print("\n[PASS] Eguchi-Hanson cap tests passed!")


def test_inustar_background():
    """Test that each cap takes its quartic coefficient from the quotient chart"""
    print("\n" + "=" * 60)
    print("Testing Orbifold Background of the Caps")
    print("=" * 60)

    delta = math.exp(-10.0)
    scale_es = (0.05,) * 4
    single = glue_Inustar(delta, 1, delta0=0.1, scale_es=scale_es, check_points=0)
    double = glue_Inustar(delta, 2, delta0=0.1, scale_es=scale_es, check_points=0)
    wider = glue_Inustar(delta, 1, delta0=0.2, scale_es=scale_es, check_points=0)

    caps = single.components["caps"]
    kappa1 = caps[0].kappa
    kappa2 = double.components["caps"][0].kappa
    print(f"\nkappa at q1: nu=1 {kappa1:.6e}, nu=2 {kappa2:.6e}")
    assert math.isfinite(kappa1) and kappa1 > 0.0
    assert abs(caps[1].kappa - kappa1) <= 1e-12 * kappa1
    assert abs(kappa2 - kappa1) > 1e-3 * kappa1

    # delta0 only moves the I_nu damage zone, far from the fixed points
    assert abs(wider.components["caps"][0].kappa - kappa1) <= 1e-12 * kappa1

    error1 = caps[0].damage_error(count=64)
    error2 = double.components["caps"][0].damage_error(count=64)
    frozen = EHCap(scale_e=0.05, delta=delta, kappa=1.0).damage_error(count=64)
    print(f"damage error: nu=1 {error1:.6e}, nu=2 {error2:.6e}, frozen kappa=1 {frozen:.6e}")
    assert abs(error2 - error1) > 1e-3 * error1
    assert error1 > frozen

    fixed = glue_Inustar(delta, 1, delta0=0.1, scale_es=scale_es, kappa=1.0, check_points=0)
    assert all(cap.kappa == 1.0 for cap in fixed.components["caps"])

    print("\n[PASS] Orbifold background tests passed!")


def test_inustar_symmetry_and_deep_cap():
    """Test involution invariance of the assembly and the pure Eguchi-Hanson cap center"""
    print("\n" + "=" * 60)
    print("Testing I_nu* Symmetry and Deep Cap")
    print("=" * 60)

    delta = math.exp(-10.0)
    scale_e = 0.05
    assembly = glue_Inustar(delta, 1, delta0=0.1, scale_es=(scale_e,) * 4)

    rng = np.random.default_rng(7)
    core = np.concatenate([ring_points(rho, count=3, seed=index)
                           for index, rho in enumerate(rng.uniform(1.0, 0.9 * 0.1 / delta, 6))])
    main_points = np.concatenate([core, inu_damage_points(delta, 0.1, count=12, concentrate=False)])
    main_defect = assembly.involution_defect(main_points)
    cap_defect = assembly.involution_defect(shell_points(0.3, 3.0, 24, seed=5), chart="cap1")
    print(f"\ninvolution defect: main {main_defect:.3e}, cap1 {cap_defect:.3e}")
    assert main_defect < 1e-10
    assert cap_defect < 1e-10

    deep = shell_points(0.5 * scale_e, 2.0 * scale_e, 16, seed=6)
    pure = EguchiHanson(scale_e=scale_e, delta=delta).forms(scale_e * delta * deep)
    gap = float(np.max(np.abs(assembly.forms(deep, chart="cap1") - pure)))
    print(f"deep cap against rescaled Eguchi-Hanson: {gap:.3e}")
    assert gap < 1e-8

    print("\n[PASS] I_nu* symmetry and deep cap tests passed!")


def test_radial_primitive():
    """Test d eta = psi for the decaying radial primitive"""
    print("\n" + "=" * 60)
    print("Testing Radial Primitive")
    print("=" * 60)

    synthetic = SyntheticALG(model=ALGModel(beta=2.0 / 3.0, tau=EISENSTEIN), amplitude=1.0, order=3.0)
    pts = np.array([[1.2, 0.4, 0.3, -0.2], [-0.9, 1.1, 0.5, 0.1], [0.2, -1.5, -0.4, 0.7]])
    primitive = lambda p: radial_primitive(synthetic.psi, p, aleph=3.0, check_decay=False)
    d_eta = fd_d_pointwise(primitive, pts, 1, 1e-4)
    gap = np.max(np.abs(d_eta - synthetic.psi(pts)))
    print(f"\n|d eta - psi| = {gap:.3e} (|psi| = {np.max(np.abs(synthetic.psi(pts))):.3e})")
    assert gap < 1e-5

    assert np.allclose(radial_primitive(synthetic.psi, pts, aleph=3.0), primitive(pts), atol=1e-12)

    try:
        radial_primitive(synthetic.psi, pts, aleph=4.0)
        raise AssertionError("declared decay faster than measured accepted")
    except DecayViolation:
        print("Over-declared decay order rejected with DecayViolation")

    for kwargs in ({"aleph": 1.0}, {"mode": "annulus"}):
        try:
            radial_primitive(synthetic.psi, pts, **kwargs)
            raise AssertionError(f"{kwargs} accepted")
        except ValueError:
            print(f"{kwargs} rejected")

    print("\n[PASS] Radial primitive tests passed!")


def test_alg_gluing():
    """Test ALG assembly validation and expected rates"""
    print("\n" + "=" * 60)
    print("Testing ALG Gluing")
    print("=" * 60)

    model = ALGModel(beta=2.0 / 3.0, tau=EISENSTEIN)
    periods = FiniteMonodromyPeriods("IV")
    assembly = glue_ALG(1e-8, 11.0 / 12.0, SyntheticALG(model=model, order=2.0), periods)
    rates = assembly.expected_rates
    print(f"\nexpected rates: {rates}")
    assert abs(rates["transition"] - 1.0 / 6.0) < 1e-12
    assert abs(rates["complex_distortion"] - 1.0) < 1e-12
    assert [region.name for region in assembly.regions] == ["alg_core", "alg_transition", "semi_flat"]

    gluing = assembly.components["alg"]
    q_gap, raw = gluing.complex_distortion(count=16)
    print(f"complex distortion: Q gap {q_gap:.3e}, raw {raw:.3e}")
    assert 0.0 < q_gap < 1e-3

    for bad_model, bad_periods, error in (
        (model, FiniteMonodromyPeriods("II"), SectorMismatch),
        (SyntheticALG(model=model, order=1.5), periods, DecayViolation),
    ):
        try:
            glue_ALG(1e-8, 11.0 / 12.0, bad_model, bad_periods)
            raise AssertionError(f"{error.__name__} not raised")
        except error:
            print(f"{error.__name__} raised as expected")

    print("\n[PASS] ALG gluing tests passed!")


def main():
    """Run all tests"""
    print("\n" + "=" * 60)
    print("GLUING ENGINE - TEST SUITE")
    print("=" * 60 + "\n")

    try:
        test_cutoffs()
        test_inu_gluing()
        test_eh_caps()
        test_inustar_background()
        test_inustar_symmetry_and_deep_cap()
        test_radial_primitive()
        test_alg_gluing()

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
