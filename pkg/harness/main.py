"""
Scenario runner: parameter sweeps, rate fits and result files
"""
import math
import os
import sys
from fractions import Fraction
from functools import partial
from multiprocessing import Pool
from pathlib import Path
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from geometry.diffgeo_numerics import (
    convergence_ratio,
    fit_power_law,
    fit_semilog,
    kahler_ricci_residual,
    ricci_residual,
)
from geometry.errors import ConfigParse, GeometryError, ScenarioFailed
from geometry.gibbons_hawking import GHChart, gh_metric, gh_triple, monopole_residual
from geometry.gluing_engine import EHCap, glue_ALG, glue_Inu, glue_Inustar, inu_damage_points
from geometry.k3_config import FiberConfig, enumerate_configs, moduli_dims, parse_fiber, validate
from geometry.lattice_greens import MonopoleSet, green_values, ooguri_vafa_T
from geometry.model_spaces import ALG_TABLE, ALGModel, EguchiHanson, SyntheticALG
from geometry.scales_bubbles import bubble_map, check_curvature_band, lipschitz_constant, pole_shell_points
from geometry.sector_analysis import (
    SectorExpansion,
    SectorSpec,
    alg_laplacian_indicial_roots,
    alg_sector_pairs,
    distortion_fit,
    fit_expansion,
    liouville_check,
    sample_circles,
)
from geometry.semi_flat import (
    FiniteMonodromyPeriods,
    InuPeriods,
    SemiFlatChart,
    SemiFlatOneForm,
    dplus_dstar_semiflat,
    fd_dplus_dstar,
)
from geometry.triple_algebra import DefiniteTriple, hk_deviation, metric_from_triple
from harness.models import (
    CheckResult,
    RadialRange,
    RateRow,
    Scenario,
    ScenarioSummary,
    ToleranceProfile,
    load_scenario,
)

MONOPOLE_STEP = 1e-5
CROSS_CHECK_DELTA = 0.05
CONVERGENCE_BAND = (3.5, 4.5)
FLOAT_FORMAT = "%.15g"


class RunContext:
    """Run-level settings resolved from flags, environment and scenario"""

    def __init__(self, profile: ToleranceProfile, threads: int, seed: int, out_dir: Path):
        self.profile = profile
        self.threads = max(1, threads)
        self.seed = seed
        self.out_dir = out_dir


class KindReport:
    """Checks, rate fits and tables collected by one executor"""

    def __init__(self):
        self.checks: List[CheckResult] = []
        self.rates: List[RateRow] = []
        self.tables: Dict[str, pd.DataFrame] = {}
        self.extra: Dict[str, object] = {}

    def check(self, name: str, passed: bool, value: Optional[float] = None,
              threshold: Optional[str] = None, detail: str = "") -> bool:
        result = CheckResult(
            name=name,
            passed=bool(passed),
            value=None if value is None or not math.isfinite(value) else float(value),
            threshold=threshold,
            detail=detail,
        )
        self.checks.append(result)
        shown = "n/a" if value is None else f"{value:.6g}"
        logger.info(f"{'PASS' if passed else 'FAIL'} {name}: value={shown} threshold={threshold or '-'} {detail}")
        return result.passed

    def upper_bound(self, name: str, value: float, bound: float) -> bool:
        return self.check(name, value <= bound, value, f"<= {bound:.3g}")

    def within(self, name: str, value: float, lower: float, upper: float) -> bool:
        return self.check(name, lower <= value <= upper, value, f"in [{lower:.3g}, {upper:.3g}]")

    def rate(self, name: str, quantity: str, exponent: float, r2: float, n_points: int,
             expected: Optional[float] = None, tolerance: float = 0.10,
             min_r2: Optional[float] = None, negative: bool = False) -> bool:
        """Record a fitted rate and check it against its expected value"""
        passed = math.isfinite(exponent)
        conditions = []
        if expected is not None:
            passed = passed and abs(exponent - expected) <= tolerance * abs(expected)
            conditions.append(f"{expected:.4g} +- {100 * tolerance:.0f}%")
        if min_r2 is not None:
            passed = passed and r2 >= min_r2
            conditions.append(f"R2 >= {min_r2}")
        if negative:
            passed = passed and exponent < 0.0
            conditions.append("slope < 0")
        self.rates.append(RateRow(check=name, quantity=quantity, exponent=exponent, expected=expected,
                                  r2=r2, n_points=n_points, passed=passed))
        return self.check(name, passed, exponent, ", ".join(conditions) or None,
                          f"r2={r2:.6f} n={n_points}")

    def guard(self, name: str, block: Callable[[], None]) -> None:
        """Run a check block; geometry errors fail the check and the run continues"""
        try:
            block()
        except GeometryError as exc:
            self.check(name, False, detail=f"{type(exc).__name__}: {exc}")


def sweep(fn: Callable, items: Iterable, threads: int) -> List:
    """Map over sweep points in a worker pool; results keep the input order"""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with Pool(processes=min(threads, len(items))) as pool:
        return pool.map(fn, items)


def evenly_spaced(nu: int) -> MonopoleSet:
    return MonopoleSet(poles=[(k + 0.5) / nu for k in range(nu)])


# ---------------------------------------------------------------------------
# green
# ---------------------------------------------------------------------------

def _green_decay(poles: Tuple[float, ...], radii: Tuple[float, ...], tol: float) -> List[dict]:
    pole_set = MonopoleSet(poles=list(poles))
    r = np.asarray(radii)
    pts = np.stack([r, np.zeros_like(r), np.full_like(r, pole_set.array()[0])], axis=1)
    values, _, _ = green_values(pts, pole_set, tol)
    residual = np.abs(values - pole_set.nu * np.log(1.0 / r))
    label = " ".join(f"{t:g}" for t in pole_set.poles)
    return [{"poles": label, "nu": pole_set.nu, "r": float(x), "residual": float(v)} for x, v in zip(r, residual)]


def run_green(scenario: Scenario, ctx: RunContext, report: KindReport) -> None:
    params = scenario.parameters
    pole_sets = params.pole_sets or [[0.0], [0.0, 0.3], [0.0, 0.3, 0.55]]
    radii = params.radii or RadialRange(lower=2.0, upper=4.0, count=9)
    r = np.linspace(radii.lower, radii.upper, ctx.profile.count(radii.count, minimum=3))
    tol = ctx.profile.tol(1e-13)

    rows = sweep(partial(_green_decay, radii=tuple(r), tol=tol), [tuple(s) for s in pole_sets], ctx.threads)
    report.tables["green_decay"] = pd.DataFrame([row for block in rows for row in block])

    rng = np.random.default_rng(ctx.seed)
    for poles, block in zip(pole_sets, rows):
        pole_set = MonopoleSet(poles=poles)
        tag = f"nu{pole_set.nu}"
        residual = np.array([row["residual"] for row in block])
        fit = fit_semilog(r, np.log(residual))
        report.rate(f"green_decay_{tag}", "log|G - nu log(1/r)| vs r", fit.exponent, fit.r2, fit.n_points,
                    expected=-2.0 * math.pi, tolerance=0.05)

        def fiber_mean() -> None:
            count = ctx.profile.count(64, minimum=16)
            u3 = np.arange(count) / count
            worst = 0.0
            for rho in (0.2, 0.5, 1.0):
                pts = np.stack([np.full(count, rho * math.cos(0.7)), np.full(count, rho * math.sin(0.7)), u3], axis=1)
                values, _, _ = green_values(pts, pole_set, tol)
                worst = max(worst, abs(float(np.mean(values)) - pole_set.nu * math.log(1.0 / rho)))
            report.upper_bound(f"green_fiber_mean_{tag}", worst, params.threshold("fiber_mean", ctx.profile.tol(1e-8)))

        def dual_agreement() -> None:
            count = ctx.profile.count(32)
            rho = np.linspace(0.15, 0.4, count)
            phi = rng.uniform(0.0, 2.0 * math.pi, count)
            pts = np.stack([rho * np.cos(phi), rho * np.sin(phi), rng.uniform(0.0, 1.0, count)], axis=1)
            images, _, _ = green_values(pts, pole_set, tol, representation="image_sum")
            bessel, _, _ = green_values(pts, pole_set, tol, representation="fourier_bessel")
            gap = float(np.max(np.abs(images - bessel)))
            report.upper_bound(f"green_dual_{tag}", gap, params.threshold("dual", ctx.profile.tol(1e-10)))

        report.guard(f"green_fiber_mean_{tag}", fiber_mean)
        report.guard(f"green_dual_{tag}", dual_agreement)


# ---------------------------------------------------------------------------
# ov-triple
# ---------------------------------------------------------------------------

def ov_sample_points(count: int, seed: int, rho_min: float = 0.2, box: float = 1.0) -> np.ndarray:
    """Chart points with rho >= rho_min (away from poles and Dirac strings)"""
    rng = np.random.default_rng(seed)
    kept = np.zeros((0, 4))
    while len(kept) < count:
        raw = np.stack([
            rng.uniform(-box, box, 4 * count),
            rng.uniform(-box, box, 4 * count),
            rng.uniform(0.0, 1.0, 4 * count),
            rng.uniform(0.0, 2.0 * math.pi, 4 * count),
        ], axis=1)
        kept = np.concatenate([kept, raw[np.hypot(raw[:, 0], raw[:, 1]) >= rho_min]])
    return kept[:count]


def _ov_identity(item: Tuple[int, float, int, int]) -> dict:
    nu, delta, count, seed = item
    chart = GHChart(kind="ooguri_vafa", poles=evenly_spaced(nu), T=ooguri_vafa_T(nu, delta), delta=delta)
    pts = ov_sample_points(count, seed)
    triple = DefiniteTriple(forms=gh_triple(chart).forms(pts))
    exact = gh_metric(chart, pts)
    recovered = metric_from_triple(triple)
    return {
        "nu": nu,
        "delta": delta,
        "n_points": count,
        "sup_deviation": float(np.max(hk_deviation(triple))),
        "monopole_residual": monopole_residual(chart, pts[:, :3], MONOPOLE_STEP),
        "metric_gap": float(np.max(np.abs(recovered - exact)) / np.max(np.abs(exact))),
    }


def run_ov_triple(scenario: Scenario, ctx: RunContext, report: KindReport) -> None:
    params = scenario.parameters
    delta = params.deltas[0] if params.deltas else math.exp(-20.0)
    count = ctx.profile.count(params.samples)
    items = [(nu, delta, count, ctx.seed + nu) for nu in params.nus]

    def identity() -> None:
        rows = sweep(_ov_identity, items, ctx.threads)
        report.tables["ov_triple"] = pd.DataFrame(rows)
        for row in rows:
            tag = f"nu{row['nu']}"
            report.upper_bound(f"ov_monopole_residual_{tag}", row["monopole_residual"],
                               params.threshold("monopole", ctx.profile.tol(1e-8)))
            report.upper_bound(f"ov_hk_identity_{tag}", row["sup_deviation"],
                               params.threshold("hk_identity", ctx.profile.tol(1e-6)))
            report.upper_bound(f"ov_metric_recovery_{tag}", row["metric_gap"],
                               params.threshold("metric", ctx.profile.tol(1e-8)))

    def ov_ricci() -> None:
        nu = params.nus[0]
        chart = GHChart(kind="ooguri_vafa", poles=evenly_spaced(nu), T=ooguri_vafa_T(nu, delta), delta=delta)
        pts = ov_sample_points(4, ctx.seed, rho_min=0.4, box=0.8)
        ratio = convergence_ratio(lambda h: ricci_residual(partial(gh_metric, chart), pts, h), params.step)
        report.within("ov_ricci_convergence", ratio, *CONVERGENCE_BAND)

    def eh_ricci() -> None:
        rng = np.random.default_rng(ctx.seed)
        directions = rng.normal(size=(4, 4))
        directions /= np.linalg.norm(directions, axis=1)[:, None]
        pts = directions * np.linspace(1.0, 3.0, 4)[:, None]
        potential = EguchiHanson().potential
        ratio = convergence_ratio(lambda h: kahler_ricci_residual(potential, pts, h), params.step)
        report.within("eh_kahler_ricci_convergence", ratio, *CONVERGENCE_BAND)

    report.guard("ov_identity", identity)
    report.guard("ov_ricci_convergence", ov_ricci)
    report.guard("eh_kahler_ricci_convergence", eh_ricci)


# ---------------------------------------------------------------------------
# glue-inu
# ---------------------------------------------------------------------------

def _inu_log_error(item: Tuple[float, int, float, int, int]) -> Tuple[float, float]:
    delta, nu, delta0, count, seed = item
    assembly = glue_Inu(delta, nu, delta0)
    gluing = assembly.components["inu"]
    log_error = float(np.max(gluing.log_deviation(inu_damage_points(delta, delta0, count, seed))))
    return log_error, assembly.expected_rates["log_error_vs_inverse_delta"]


def run_glue_inu(scenario: Scenario, ctx: RunContext, report: KindReport) -> None:
    params = scenario.parameters
    count = ctx.profile.count(params.samples)
    for nu in params.nus:
        tag = f"nu{nu}"

        def damage_law() -> None:
            items = [(delta, nu, params.delta0, count, ctx.seed) for delta in params.deltas]
            results = sweep(_inu_log_error, items, ctx.threads)
            log_errors = np.array([value for value, _ in results])
            inverse = 1.0 / np.asarray(params.deltas)
            report.tables[f"glue_inu_{tag}"] = pd.DataFrame({
                "delta": params.deltas, "inverse_delta": inverse, "log_sup_deviation": log_errors,
            })
            fit = fit_semilog(inverse, log_errors)
            report.rate(f"inu_damage_law_{tag}", "log sup ||Q - Id|| vs 1/delta", fit.exponent, fit.r2,
                        fit.n_points, expected=results[0][1], tolerance=params.rate_tolerance,
                        min_r2=0.99, negative=True)

        def cross_check() -> None:
            assembly = glue_Inu(CROSS_CHECK_DELTA, nu, params.delta0)
            gluing = assembly.components["inu"]
            pts = inu_damage_points(CROSS_CHECK_DELTA, params.delta0, count, ctx.seed, concentrate=False)
            log_value = float(np.max(gluing.log_deviation(pts)))
            direct = float(np.max(gluing.direct_deviation(pts)))
            report.upper_bound(f"inu_log_direct_agreement_{tag}", abs(log_value - math.log(direct)),
                               params.threshold("log_direct", 0.05))
            closed = assembly.closedness(pts[:8], 1e-4)
            report.upper_bound(f"inu_glued_closedness_{tag}", closed,
                               params.threshold("closedness", ctx.profile.tol(1e-6)))

        report.guard(f"inu_damage_law_{tag}", damage_law)
        report.guard(f"inu_cross_check_{tag}", cross_check)


# ---------------------------------------------------------------------------
# glue-inustar
# ---------------------------------------------------------------------------

def _inustar_error(item: Tuple[float, float, int, float, float, int, int, float]) -> float:
    delta, scale_e, nu, delta0, kappa, count, seed, mu = item
    assembly = glue_Inustar(delta, nu, delta0, scale_es=(scale_e,) * 4, kappa=kappa, check_points=8)
    return assembly.components["caps"][0].damage_error(count, mu, seed)


def _cap_error(item: Tuple[float, float, float, int, int, float]) -> float:
    delta, scale_e, kappa, count, seed, mu = item
    return EHCap(scale_e=scale_e, delta=delta, kappa=kappa).damage_error(count, mu, seed)


def _grid_rates(report: KindReport, name: str, errors: np.ndarray, deltas: List[float], scale_es: List[float],
                delta_expected: float, e_expected: float, tolerance: float) -> None:
    for j, scale_e in enumerate(scale_es):
        fit = fit_power_law(np.asarray(deltas), errors[:, j])
        report.rate(f"{name}_delta_exponent_e{scale_e:g}", "weighted damage error vs delta", fit.exponent,
                    fit.r2, fit.n_points, expected=delta_expected, tolerance=tolerance)
    for i, delta in enumerate(deltas):
        fit = fit_power_law(np.asarray(scale_es), errors[i, :])
        report.rate(f"{name}_e_exponent_delta{delta:.4g}", "weighted damage error vs e", fit.exponent,
                    fit.r2, fit.n_points, expected=e_expected, tolerance=tolerance)


def run_glue_inustar(scenario: Scenario, ctx: RunContext, report: KindReport) -> None:
    params = scenario.parameters
    count = ctx.profile.count(params.samples)
    mu = params.mu
    nu = params.nus[0]

    def eh_law() -> None:
        items = [(delta, e, nu, params.delta0, params.kappa, count, ctx.seed, mu)
                 for delta in params.deltas for e in params.scale_es]
        errors = np.array(sweep(_inustar_error, items, ctx.threads)).reshape(len(params.deltas), len(params.scale_es))
        report.tables["glue_inustar"] = pd.DataFrame(
            [{"delta": d, "scale_e": e, "weighted_error": errors[i, j]}
             for i, d in enumerate(params.deltas) for j, e in enumerate(params.scale_es)])
        _grid_rates(report, "inustar_eh", errors, params.deltas, params.scale_es,
                    mu + 1.0, mu + 5.0, params.rate_tolerance)

    def orbifold_law() -> None:
        deltas, scale_es = params.orbifold_deltas, params.orbifold_scale_es
        items = [(delta, e, params.kappa, count, ctx.seed, mu) for delta in deltas for e in scale_es]
        errors = np.array(sweep(_cap_error, items, ctx.threads)).reshape(len(deltas), len(scale_es))
        report.tables["orbifold_cap"] = pd.DataFrame(
            [{"delta": d, "scale_e": e, "weighted_error": errors[i, j]}
             for i, d in enumerate(deltas) for j, e in enumerate(scale_es)])
        _grid_rates(report, "inustar_orbifold", errors, deltas, scale_es, mu + 3.0, mu + 3.0, params.rate_tolerance)

    def background() -> None:
        rows = []
        for nu_value in params.nus:
            assembly = glue_Inustar(params.deltas[0], nu_value, params.delta0,
                                    scale_es=(params.scale_es[-1],) * 4, check_points=0)
            cap = assembly.components["caps"][0]
            error = cap.damage_error(count, mu, ctx.seed)
            rows.append({"nu": nu_value, "delta": params.deltas[0], "scale_e": params.scale_es[-1],
                         "kappa": cap.kappa, "weighted_error": error})
            report.check(f"inustar_background_kappa_nu{nu_value}", math.isfinite(cap.kappa) and cap.kappa > 0.0,
                         cap.kappa, "> 0")
        report.tables["inustar_background"] = pd.DataFrame(rows)

    report.guard("inustar_eh_law", eh_law)
    if params.orbifold_deltas and params.orbifold_scale_es:
        report.guard("inustar_orbifold_law", orbifold_law)
    report.guard("inustar_background", background)


# ---------------------------------------------------------------------------
# glue-alg
# ---------------------------------------------------------------------------

def _alg_errors(item: Tuple[str, float, float, float, float, int, int]) -> Tuple[float, float, Dict[str, float]]:
    fiber_type, delta, ell, aleph, amplitude, count, seed = item
    row = ALG_TABLE[fiber_type]
    model = ALGModel(beta=row.beta, tau=row.tau if row.tau is not None else (0.0, 1.0))
    synthetic = SyntheticALG(model=model, amplitude=amplitude, order=aleph)
    assembly = glue_ALG(delta, ell, synthetic, FiniteMonodromyPeriods(fiber_type))
    gluing = assembly.components["alg"]
    q_gap, _ = gluing.complex_distortion(count=count, seed=seed)
    return gluing.transition_error(count, seed), q_gap, dict(assembly.expected_rates)


def run_glue_alg(scenario: Scenario, ctx: RunContext, report: KindReport) -> None:
    params = scenario.parameters
    count = ctx.profile.count(params.samples)
    frames = []
    for fiber_type in params.fiber_types:

        def transition_law() -> None:
            items = [(fiber_type, delta, params.ell, params.aleph, params.amplitude, count, ctx.seed)
                     for delta in params.deltas]
            results = sweep(_alg_errors, items, ctx.threads)
            transition = np.array([value for value, _, _ in results])
            distortion = np.array([value for _, value, _ in results])
            rates = results[0][2]
            frames.append(pd.DataFrame({"fiber_type": fiber_type, "delta": params.deltas,
                                        "transition_error": transition, "complex_distortion": distortion}))
            fit = fit_power_law(np.asarray(params.deltas), transition)
            report.rate(f"alg_transition_{fiber_type}", "sup ||Q - Id|| on the transition annulus vs delta",
                        fit.exponent, fit.r2, fit.n_points, expected=rates["transition"],
                        tolerance=params.rate_tolerance)
            fit = fit_power_law(np.asarray(params.deltas), distortion)
            report.rate(f"alg_complex_distortion_{fiber_type}", "Q gap of Omega_SF against Omega_FF vs delta",
                        fit.exponent, fit.r2, fit.n_points, expected=rates["complex_distortion"],
                        tolerance=params.rate_tolerance)

        report.guard(f"alg_transition_{fiber_type}", transition_law)
    if frames:
        report.tables["glue_alg"] = pd.concat(frames, ignore_index=True)


# ---------------------------------------------------------------------------
# sector-liouville
# ---------------------------------------------------------------------------

def _sector_pair(item: Tuple[float, float, int, int, int, float]) -> dict:
    beta, sigma, n_samples, max_mode, seed, mu = item
    spec = SectorSpec(beta=beta, sigma=sigma, r1=1.0, r2=1.25, n_samples=n_samples, max_mode=max_mode)
    rng = np.random.default_rng(seed)
    size = len(spec.modes())
    log_mode = spec.has_log_mode()
    truth = SectorExpansion(
        spec=spec,
        modes=spec.modes(),
        exponents=spec.exponents(),
        growing=rng.normal(size=size) + 1j * rng.normal(size=size),
        decaying=rng.normal(size=size) + 1j * rng.normal(size=size),
        kappa0=complex(rng.normal() if log_mode else 0.0),
        c0=complex(rng.normal() if log_mode else 0.0),
        sup_norm=1.0,
        condition=1.0,
    )
    radii = [spec.r1, spec.r2]
    fitted = fit_expansion(sample_circles(truth.evaluate, spec, radii), spec)
    keep = np.ones(size, dtype=bool)
    if log_mode:
        keep[spec.modes() == spec.log_mode_index()] = False
    roundtrip = max(
        float(np.max(np.abs(fitted.growing - truth.growing)[keep], initial=0.0)),
        float(np.max(np.abs(fitted.decaying - truth.decaying)[keep], initial=0.0)),
        abs(fitted.kappa0 - truth.kappa0),
        abs(fitted.c0 - truth.c0),
    )

    zero = liouville_check(fit_expansion(np.zeros((2, spec.n_samples + 1), dtype=complex), spec), mu)

    lam = float(spec.exponents()[spec.modes() == 1][0])
    growing = sample_circles(lambda r, theta: r ** lam * np.exp(-1j * lam * theta), spec, radii)
    detected = not liouville_check(fit_expansion(growing, spec), mu).passed

    try:
        fit_expansion(sample_circles(lambda r, theta: np.ones_like(theta, dtype=complex), spec, radii), spec)
        twist_rejected = False
    except GeometryError:
        twist_rejected = True

    return {"beta": beta, "sigma": sigma, "roundtrip_error": roundtrip, "zero_fit_largest": zero.largest,
            "zero_fit_passed": zero.passed, "growing_mode_detected": detected, "twist_rejected": twist_rejected}


def run_sector_liouville(scenario: Scenario, ctx: RunContext, report: KindReport) -> None:
    params = scenario.parameters
    pairs = [(float(data.beta), float(data.sigma)) for data in alg_sector_pairs()]
    items = [(beta, sigma, params.n_samples, params.max_mode, ctx.seed + idx, params.mu)
             for idx, (beta, sigma) in enumerate(pairs)]

    def suite() -> None:
        rows = sweep(_sector_pair, items, ctx.threads)
        report.tables["sector_liouville"] = pd.DataFrame(rows)
        bound = params.threshold("roundtrip", ctx.profile.tol(1e-8))
        for label, row in zip(ALG_TABLE, rows):
            report.upper_bound(f"sector_roundtrip_{label}", row["roundtrip_error"], bound)
            report.check(f"sector_zero_fit_{label}", row["zero_fit_passed"] and row["zero_fit_largest"] <= bound,
                         row["zero_fit_largest"], f"<= {bound:.3g}")
            report.check(f"sector_growing_mode_detected_{label}", row["growing_mode_detected"])
            report.check(f"sector_twist_rejected_{label}", row["twist_rejected"])

    report.guard("sector_liouville", suite)


# ---------------------------------------------------------------------------
# distortion
# ---------------------------------------------------------------------------

def run_distortion(scenario: Scenario, ctx: RunContext, report: KindReport) -> None:
    params = scenario.parameters
    count = ctx.profile.count(params.samples)
    u = np.geomspace(1e-6, 1e-1, count) * np.exp(0.3j)
    rows = []
    for fiber_type in params.fiber_types:

        def fit_one() -> None:
            fit = distortion_fit(FiniteMonodromyPeriods(fiber_type), fiber_type, u)
            rows.append({"fiber_type": fiber_type, "exponent": fit.exponent, "expected": fit.expected,
                         "r2": fit.r2, "n_points": fit.n_points})
            report.rate(f"distortion_{fiber_type}", "|Im(conj(tau1) tau2) - 1| vs |u|", fit.exponent, fit.r2,
                        fit.n_points, expected=fit.expected, tolerance=params.rate_tolerance)

        report.guard(f"distortion_{fiber_type}", fit_one)
    report.tables["distortion"] = pd.DataFrame(rows)


# ---------------------------------------------------------------------------
# indicial
# ---------------------------------------------------------------------------

def run_indicial(scenario: Scenario, ctx: RunContext, report: KindReport) -> None:
    params = scenario.parameters
    expected = params.exact_iota()
    rows = []
    for label, data in zip(ALG_TABLE, alg_sector_pairs()):
        ladder_exact = all(value == (j - data.sigma) / data.beta for j, value in data.ladder.items())
        rows.append({"fiber_type": label, "beta": str(data.beta), "sigma": str(data.sigma),
                     "iota": str(data.iota), "expected": str(expected.get(label, ""))})
        report.check(f"indicial_ladder_{label}", ladder_exact)
        if label in expected:
            report.check(f"indicial_iota_{label}", data.iota == expected[label], float(data.iota),
                         f"== {expected[label]}")
    report.tables["indicial"] = pd.DataFrame(rows)

    for beta, required in params.expected_roots.items():
        roots = alg_laplacian_indicial_roots(Fraction(beta), "forms")
        for root in required:
            report.check(f"indicial_form_root_{beta}_{root}", Fraction(root) in roots, float(Fraction(root)))
    report.extra["form_roots"] = {beta: [str(r) for r in alg_laplacian_indicial_roots(Fraction(beta), "forms")]
                                  for beta in params.expected_roots}


# ---------------------------------------------------------------------------
# moduli
# ---------------------------------------------------------------------------

def run_moduli(scenario: Scenario, ctx: RunContext, report: KindReport) -> None:
    params = scenario.parameters
    cases = []
    for case in params.moduli_cases:
        config = FiberConfig.from_counts(case.counts)
        name = config.summary().replace(" ", "")

        def count_case() -> None:
            verdict = validate(config)
            entry = {"config": config.summary(), "valid": verdict.passed, "euler": verdict.euler_sum}
            report.check(f"moduli_valid_{name}", verdict.passed == case.expected_valid,
                         detail="; ".join(verdict.reasons))
            if verdict.passed:
                dims = moduli_dims(config)
                entry.update({"dimB": dims.dim_base, "total": dims.total})
                if case.expected_dim_base is not None:
                    report.check(f"moduli_dim_base_{name}", dims.dim_base == case.expected_dim_base,
                                 dims.dim_base, f"== {case.expected_dim_base}")
                if case.expected_total is not None:
                    report.check(f"moduli_total_{name}", dims.total == case.expected_total,
                                 dims.total, f"== {case.expected_total}")
            cases.append(entry)

        report.guard(f"moduli_case_{name}", count_case)

    def exhaustive() -> None:
        rows = []
        for config in enumerate_configs(params.max_fibers):
            k1, k2, k3 = config.counts()
            dims = moduli_dims(config)
            rows.append({"config": config.summary(), "k1": k1, "k2": k2, "k3": k3,
                         "dim_base": dims.dim_base, "total": dims.total})
        frame = pd.DataFrame(rows)
        report.tables["moduli_enumeration"] = frame
        bad = int(np.sum(frame["total"] != 20)) if len(frame) else 0
        report.check("moduli_universal_total", len(frame) > 0 and bad == 0, float(len(frame)),
                     "total == 20 for every configuration", f"{bad} configurations differ")

    report.guard("moduli_universal_total", exhaustive)
    report.extra["cases"] = cases


# ---------------------------------------------------------------------------
# bubble-map
# ---------------------------------------------------------------------------

def run_bubble_map(scenario: Scenario, ctx: RunContext, report: KindReport) -> None:
    params = scenario.parameters
    delta = params.deltas[0]

    def tour() -> None:
        config = FiberConfig(fibers=params.fibers)
        frame = bubble_map(params.probes, config, delta)
        report.tables["bubble_map"] = frame
        misses = frame.loc[~frame["match"], "probe"].tolist()
        report.check("bubble_labels", not misses, float(len(frame) - len(misses)),
                     f"== {len(frame)} matches", f"mismatched: {misses}" if misses else "")

    def scale_sanity() -> None:
        count = ctx.profile.count(12)
        for nu in params.nus:
            passed, ratios = check_curvature_band(nu, delta, tuple(params.band), count)
            report.check(f"curvature_band_nu{nu}", passed, float(np.max(ratios)),
                         f"in [{params.band[0]:.3g}, {params.band[1]:.3g}]", f"min ratio {float(np.min(ratios)):.4g}")
            points = pole_shell_points(nu, delta, count)
            report.upper_bound(f"weight_lipschitz_nu{nu}", lipschitz_constant(nu, delta, points, seed=ctx.seed),
                               params.threshold("lipschitz", 2.0))

    report.guard("bubble_labels", tour)
    report.guard("scale_sanity", scale_sanity)


# ---------------------------------------------------------------------------
# semiflat-ops
# ---------------------------------------------------------------------------

def sample_one_form() -> SemiFlatOneForm:
    """f = 0.3 y^2 + 0.2i conj(y) + 0.1 |y|^2, F = 0.1 + 0.2 y"""
    return SemiFlatOneForm(
        f=lambda y: 0.3 * y ** 2 + 0.2j * np.conj(y) + 0.1 * y * np.conj(y),
        f_dybar=lambda y: 0.2j + 0.1 * y,
        F=lambda y: 0.1 + 0.2 * y,
        F_dy=lambda y: np.full_like(y, 0.2),
    )


def semiflat_points(count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.3, 0.6, count)
    theta = rng.uniform(0.3, 2.5, count)
    return np.stack([r * np.cos(theta), r * np.sin(theta), rng.uniform(0.0, 1.0, count),
                     rng.uniform(0.0, 1.0, count)], axis=1)


def period_model(label: str):
    fiber = parse_fiber(label)
    if fiber.family == "Inu":
        return InuPeriods(fiber.nu)
    if fiber.family == "finite":
        return FiniteMonodromyPeriods(label)
    raise ConfigParse(f"no semi-flat period model for {label}")


def run_semiflat_ops(scenario: Scenario, ctx: RunContext, report: KindReport) -> None:
    params = scenario.parameters
    pts = semiflat_points(ctx.profile.count(16), ctx.seed)
    eta = sample_one_form()
    rows = []
    for label in params.fiber_types:

        def ratio_test() -> None:
            chart = SemiFlatChart(periods=period_model(label), delta=0.5)
            dplus, dstar = dplus_dstar_semiflat(eta, chart, pts)

            def error(h: float) -> float:
                fd_plus, fd_star = fd_dplus_dstar(eta, chart, pts, h)
                return max(float(np.max(np.abs(fd_plus - dplus))), float(np.max(np.abs(fd_star - dstar))))

            ratio = convergence_ratio(error, params.step)
            rows.append({"fiber_type": label, "h": params.step, "error": error(params.step), "ratio": ratio})
            report.within(f"semiflat_dplus_dstar_{label}", ratio, *CONVERGENCE_BAND)

        report.guard(f"semiflat_dplus_dstar_{label}", ratio_test)
    report.tables["semiflat_ops"] = pd.DataFrame(rows)


EXECUTORS: Dict[str, Callable[[Scenario, RunContext, KindReport], None]] = {
    "green": run_green,
    "ov-triple": run_ov_triple,
    "glue-inu": run_glue_inu,
    "glue-inustar": run_glue_inustar,
    "glue-alg": run_glue_alg,
    "sector-liouville": run_sector_liouville,
    "distortion": run_distortion,
    "indicial": run_indicial,
    "moduli": run_moduli,
    "bubble-map": run_bubble_map,
    "semiflat-ops": run_semiflat_ops,
}


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------

def write_results(scenario: Scenario, ctx: RunContext, report: KindReport) -> ScenarioSummary:
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for name, frame in sorted(report.tables.items()):
        path = ctx.out_dir / f"{name}.csv"
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        files.append(path.name)
    if report.rates:
        path = ctx.out_dir / "rates.csv"
        pd.DataFrame([row.model_dump() for row in report.rates]).to_csv(path, index=False, float_format=FLOAT_FORMAT)
        files.append(path.name)
    summary = ScenarioSummary(
        scenario=scenario.name,
        kind=scenario.kind,
        seed=ctx.seed,
        profile=ctx.profile.name,
        passed=bool(report.checks) and all(check.passed for check in report.checks),
        checks=report.checks,
        rates=report.rates,
        files=files + ["summary.json"],
        extra=report.extra,
    )
    (ctx.out_dir / "summary.json").write_text(summary.model_dump_json(indent=2))
    return summary


def execute(scenario: Scenario, out: Optional[Path] = None, threads: int = 1, seed: Optional[int] = None,
            profile: str = "strict") -> ScenarioSummary:
    """Run one validated scenario and write its result files"""
    base = Path(out or scenario.output or os.environ.get("HK_OUTPUT_DIR", "results"))
    ctx = RunContext(
        profile=ToleranceProfile.named(profile),
        threads=threads,
        seed=scenario.seed if seed is None else seed,
        out_dir=base / scenario.name,
    )
    logger.info("=" * 60)
    logger.info(f"Scenario {scenario.name} ({scenario.kind}), profile={ctx.profile.name}, "
                f"threads={ctx.threads}, seed={ctx.seed}")
    logger.info("=" * 60)
    report = KindReport()
    EXECUTORS[scenario.kind](scenario, ctx, report)
    summary = write_results(scenario, ctx, report)
    failed = [check.name for check in summary.checks if not check.passed]
    logger.info("=" * 60)
    logger.info(f"Scenario {scenario.name}: {len(summary.checks) - len(failed)}/{len(summary.checks)} checks passed; "
                f"results in {ctx.out_dir}")
    logger.info("=" * 60)
    return summary


def require_pass(summary: ScenarioSummary) -> None:
    """
    Raises:
        ScenarioFailed: if any check failed
    """
    failed = [check for check in summary.checks if not check.passed]
    if failed or not summary.checks:
        details = "; ".join(f"{check.name}: {check.detail or check.value}" for check in failed)
        raise ScenarioFailed(f"{summary.scenario}: {len(failed)} failed checks ({details})")


def run(scenario_path: Path, out: Optional[Path] = None, threads: int = 1, seed: Optional[int] = None,
        profile: str = "strict") -> int:
    """
    Run a scenario file

    Returns:
        Exit status: 0 when every check passes, 1 on a failed check, 2 on a configuration error
    """
    try:
        scenario = load_scenario(scenario_path)
        ToleranceProfile.named(profile)
    except ConfigParse as exc:
        logger.error(str(exc))
        return 2
    summary = execute(scenario, out, threads, seed, profile)
    try:
        require_pass(summary)
    except ScenarioFailed as exc:
        logger.error(str(exc))
        return 1
    return 0
