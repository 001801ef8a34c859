"""
Test script for the regularity-scale weight and bubble classification
"""
import sys
import os
import math
import tempfile
from pathlib import Path

import numpy as np

# Add current directory to path
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from geometry.errors import RegionUnresolved
from geometry.k3_config import FiberConfig, parse_fiber
from geometry.scales_bubbles import (
    FiberScales,
    ProbePoint,
    alg_label,
    bubble_map,
    classify_bubble,
    classify_region,
    cone_label,
    lipschitz_constant,
    pole_shell_points,
    weight,
)

CONFIG = FiberConfig(fibers=["IV", "I2", "I1*"] + ["I1"] * 11)
DELTA = 1e-6


def probe(**kwargs):
    return ProbePoint(**kwargs)


def test_labels():
    """Test ALG and cone label strings"""
    print("=" * 60)
    print("Testing Labels")
    print("=" * 60)

    print(f"\nIV -> {alg_label('IV')}, II -> {cone_label('II')}")
    assert alg_label("IV") == "ALG(2/3,omega)"
    assert alg_label("I0*") == "ALG(1/2,free)"
    assert alg_label("III") == "ALG(3/4,i)"
    assert cone_label("II") == "Cone(2pi*5/6)"

    print("\n[PASS] Label tests passed!")


def test_classify_bubble():
    """Test canonical bubble labels along probe families"""
    print("\n" + "=" * 60)
    print("Testing Bubble Classification")
    print("=" * 60)

    cases = [
        (probe(fiber="IV", anchor="core", coefficient=0.5, delta_power=1.0), "ALG(2/3,omega)"),
        (probe(fiber="IV", anchor="core", coefficient=1.5, delta_power=11.0 / 12.0), "Cone(2pi*2/3)"),
        (probe(fiber="IV", anchor="core", coefficient=0.05), "McLean-P1"),
        (probe(fiber="I2", anchor="pole", coefficient=0.125, log_power=-1.0), "TaubNUT"),
        (probe(fiber="I2", anchor="pole", log_power=-0.5), "R3"),
        (probe(fiber="I2", anchor="pole", coefficient=0.1), "R2xS1"),
        (probe(fiber="I2", anchor="pole", delta_power=-0.5), "R2"),
        (probe(fiber="I2", anchor="pole", coefficient=0.5, delta_power=-1.0), "McLean-P1"),
        (probe(fiber="I1*", anchor="fixed_point", log_power=-2.0), "EguchiHanson"),
        (probe(fiber="I1*", anchor="fixed_point", log_power=-1.0), "R4/Z2"),
        (probe(fiber="I1*", anchor="fixed_point", log_power=-0.5), "(R3xS1)/Z2"),
        (probe(fiber="I1*", anchor="fixed_point"), "R3/Z2"),
        (probe(fiber="I1*", anchor="fixed_point", log_power=0.5), "(R2xS1)/Z2"),
        (probe(anchor="fiber", coefficient=0.5), "McLean-P1"),
    ]
    for item, expected in cases:
        label = classify_bubble(item, CONFIG, DELTA)
        print(f"\n{item.fiber or 'regular'} {item.anchor} (a={item.delta_power:g}, b={item.log_power:g}): {label}")
        assert label == expected, (label, expected)

    failures = [
        probe(fiber="I2", anchor="fixed_point"),
        probe(fiber="IV", anchor="pole"),
        probe(fiber="II*", anchor="core"),
        probe(anchor="fiber", delta_power=1.0),
        probe(fiber="I2", anchor="pole", delta_power=-2.0),
    ]
    for item in failures:
        try:
            classify_bubble(item, CONFIG, DELTA)
            raise AssertionError(f"{item} classified")
        except RegionUnresolved as exc:
            print(f"RegionUnresolved: {exc}")

    print("\n[PASS] Bubble classification tests passed!")


def test_weights_and_regions():
    """Test weight values and region names at fixed delta"""
    print("\n" + "=" * 60)
    print("Testing Weights and Regions")
    print("=" * 60)

    core = probe(fiber="IV", anchor="core", coefficient=0.5, delta_power=1.0)
    assert abs(weight(core, CONFIG, DELTA) - DELTA) < 1e-18
    assert classify_region(core, CONFIG, DELTA) == "ALG.1"

    neck = probe(fiber="IV", anchor="core", coefficient=1.5, delta_power=11.0 / 12.0)
    assert abs(weight(neck, CONFIG, DELTA) - neck.distance(DELTA)) < 1e-18
    assert classify_region(neck, CONFIG, DELTA) == "ALG.2"

    scales = FiberScales(fiber=parse_fiber("I2"), delta=DELTA)
    near_pole = probe(fiber="I2", anchor="pole", coefficient=0.125, log_power=-1.0)
    assert abs(near_pole.distance(DELTA) - 0.25 / scales.T) < 1e-15
    expected = DELTA / math.sqrt(scales.T)
    value = weight(near_pole, CONFIG, DELTA)
    print(f"\nweight at d = 1/(4T): {value:.6e} (expected {expected:.6e})")
    assert abs(value / expected - 1.0) < 1e-9
    assert classify_region(near_pole, CONFIG, DELTA) == "Inu.1"
    assert classify_region(probe(fiber="I2", anchor="pole", coefficient=0.1), CONFIG, DELTA) == "Inu.2"

    assert abs(weight(probe(anchor="fiber", coefficient=0.2), CONFIG, DELTA) - 0.2) < 1e-15
    assert weight(probe(anchor="fiber", coefficient=2.0), CONFIG, DELTA) == 1.0
    assert classify_region(probe(anchor="fiber"), CONFIG, DELTA) == "regular"

    cap = probe(fiber="I1*", anchor="fixed_point", log_power=-2.0)
    assert weight(cap, CONFIG, DELTA) > 0.0

    try:
        weight(probe(anchor="pole"), CONFIG, DELTA)
        raise AssertionError("probe without a fiber accepted")
    except RegionUnresolved:
        print("Probe without a fiber rejected with RegionUnresolved")

    try:
        FiberScales(fiber=parse_fiber("I1*"), delta=DELTA, e_log_power=-0.2)
        raise AssertionError("slowly decaying EH parameter accepted")
    except ValueError:
        print("e = log(1/delta)^-0.2 rejected")

    print("\n[PASS] Weight and region tests passed!")


def test_bubble_map_and_lipschitz():
    """Test the bubble-map table and the Lipschitz bound of s"""
    print("\n" + "=" * 60)
    print("Testing Bubble Map and Lipschitz Constant")
    print("=" * 60)

    probes = [
        probe(name="alg", fiber="IV", anchor="core", coefficient=0.5, delta_power=1.0, expected="ALG(2/3,omega)"),
        probe(name="nut", fiber="I2", anchor="pole", coefficient=0.125, log_power=-1.0, expected="TaubNUT"),
        probe(name="base", anchor="fiber", coefficient=0.5, expected="McLean-P1"),
    ]
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "bubbles.csv"
        frame = bubble_map(probes, CONFIG, DELTA, path=path)
        assert path.exists()
    print(f"\n{frame[['probe', 'region', 'label']]}")
    assert list(frame["probe"]) == ["alg", "nut", "base"]
    assert frame["match"].all()

    points = pole_shell_points(2, DELTA, count=6)
    constant = lipschitz_constant(2, DELTA, points)
    print(f"Lipschitz constant of s near a monopole: {constant:.4f}")
    assert np.isfinite(constant) and constant > 0.0

    print("\n[PASS] Bubble map tests passed!")


def main():
    """Run all tests"""
    print("\n" + "=" * 60)
    print("SCALES AND BUBBLES - TEST SUITE")
    print("=" * 60 + "\n")

    try:
        test_labels()
        test_classify_bubble()
        test_weights_and_regions()
        test_bubble_map_and_lipschitz()

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
