"""
Gluing engine: cutoff interpolation of model triples near I_nu, I_nu* and
finite-monodromy singular fibers
"""
import math
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field
from scipy.integrate import quad, quad_vec
from scipy.special import k0e, k1e

from geometry.diffgeo_numerics import fd_d_pointwise, fit_power_law, riemann_fd
from geometry.errors import (
    DecayViolation,
    EmptyRegion,
    PotentialMismatch,
    ScaleViolation,
    SectorMismatch,
)
from geometry.gibbons_hawking import (
    GHChart,
    fixed_points,
    gh_forms_from_data,
    gh_metric,
    gh_triple,
    involution_pullback,
    quotient_chart,
)
from geometry.lattice_greens import HolomorphicPolynomial, MonopoleSet, ooguri_vafa_T, wrap_circle
from geometry.model_spaces import (
    ALGModel,
    SyntheticALG,
    eh_potential_difference,
    eh_radial_derivatives,
    holomorphic_volume,
    kahler_form_from_hessian,
    radial_hessian,
)
from geometry.semi_flat import InuPeriods, PeriodModel
from geometry.triple_algebra import DefiniteTriple, hk_deviation, hk_error, linearized_deviation, q_matrix, two_form

DEFAULT_MU = 1.0 / 20.0
DEFAULT_ELL = 11.0 / 12.0
BESSEL_CUTOFF = 36.0
MAX_MODES = 4096


# ---------------------------------------------------------------------------
# Cutoffs
# ---------------------------------------------------------------------------

def quintic_step(t: np.ndarray) -> np.ndarray:
    """6t^5 - 15t^4 + 10t^3 clamped to [0, 1]"""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    return t ** 3 * (10.0 - 15.0 * t + 6.0 * t ** 2)


def quintic_step_derivatives(t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    t = np.asarray(t, dtype=float)
    inside = (t > 0.0) & (t < 1.0)
    first = np.where(inside, 30.0 * t ** 2 * (1.0 - t) ** 2, 0.0)
    second = np.where(inside, 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t), 0.0)
    return first, second


class CutoffProfile(BaseModel):

    """
    C^2 cutoff on [inner, outer]

    With increasing=True the cutoff is 0 inside and 1 outside; otherwise
    it is 1 inside and 0 outside.
    """
    inner: float = Field(..., gt=0, description="Inner radius")
    outer: float = Field(..., gt=0, description="Outer radius")
    increasing: bool = Field(False, description="0 inside / 1 outside when True")

    @property
    def width(self) -> float:
        return self.outer - self.inner

    def _t(self, r: np.ndarray) -> np.ndarray:
        return (np.asarray(r, dtype=float) - self.inner) / self.width

    def value(self, r: np.ndarray) -> np.ndarray:
        step = quintic_step(self._t(r))
        return step if self.increasing else 1.0 - step

    def derivative(self, r: np.ndarray) -> np.ndarray:
        first, _ = quintic_step_derivatives(self._t(r))
        sign = 1.0 if self.increasing else -1.0
        return sign * first / self.width

    def second_derivative(self, r: np.ndarray) -> np.ndarray:
        _, second = quintic_step_derivatives(self._t(r))
        sign = 1.0 if self.increasing else -1.0
        return sign * second / self.width ** 2

    def derivative_bounds(self) -> Tuple[float, float]:
        """sup |chi'| and sup |chi''| (15/8 / width and 10 / sqrt(3) / width^2)"""
        return 15.0 / 8.0 / self.width, 10.0 / math.sqrt(3.0) / self.width ** 2


def _wedge(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    return alpha[..., :, None] * beta[..., None, :] - beta[..., :, None] * alpha[..., None, :]


# ---------------------------------------------------------------------------
# Assemblies
# ---------------------------------------------------------------------------

class Region(BaseModel):

    """One piece of an assembly with its own triple evaluator"""
    model_config = {"arbitrary_types_allowed": True}

    name: str = Field(..., description="Region label")
    role: Literal["core", "damage", "exterior"] = Field(..., description="Role in the gluing")
    chart: str = Field("main", description="Chart the region lives in")
    contains: Callable[[np.ndarray], np.ndarray] = Field(..., description="Membership mask")
    evaluator: Callable[[np.ndarray], np.ndarray] = Field(..., description="Triple evaluator (m, 3, 4, 4)")


class GluedAssembly:
    """
    Region decomposition of a glued triple

    `glued` evaluates the interpolated triple everywhere in a chart; the
    region evaluators are the pure model triples (and the glued one in the
    damage zone) and must agree with it on their own regions.
    """

    def __init__(self, name: str, regions: List[Region], glued: Dict[str, Callable[[np.ndarray], np.ndarray]],
                 expected_rates: Optional[Dict[str, float]] = None, parameters: Optional[Dict[str, float]] = None):
        self.name = name
        self.regions = regions
        self.glued = glued
        self.expected_rates = expected_rates or {}
        self.parameters = parameters or {}
        self.components: Dict[str, object] = {}

    def charts(self) -> List[str]:
        return sorted(set(region.chart for region in self.regions))

    def region(self, name: str) -> Region:
        for region in self.regions:
            if region.name == name:
                return region
        raise KeyError(f"assembly {self.name} has no region {name}")

    def classify(self, points: np.ndarray, chart: str = "main") -> np.ndarray:
        """Region name per point (first matching region of the chart)"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        labels = np.full(len(pts), "", dtype=object)
        for region in self.regions:
            if region.chart != chart:
                continue
            mask = region.contains(pts) & (labels == "")
            labels[mask] = region.name
        return labels

    def forms(self, points: np.ndarray, chart: str = "main") -> np.ndarray:
        """Triple from the region evaluators"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        labels = self.classify(pts, chart)
        if np.any(labels == ""):
            raise EmptyRegion(f"{int(np.sum(labels == ''))} points of chart {chart} lie in no region")
        result = np.zeros((len(pts), 3, 4, 4))
        for region in self.regions:
            mask = labels == region.name
            if np.any(mask):
                result[mask] = region.evaluator(pts[mask])
        return result

    def deviation(self, points: np.ndarray, chart: str = "main") -> np.ndarray:
        return hk_deviation(DefiniteTriple(forms=self.forms(points, chart)))

    def region_deviation(self, name: str, points: np.ndarray) -> float:
        region = self.region(name)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mask = region.contains(pts)
        if not np.any(mask):
            raise EmptyRegion(f"no sample point in region {name}")
        return float(np.max(hk_deviation(DefiniteTriple(forms=region.evaluator(pts[mask])))))

    def overlap_agreement(self, points: np.ndarray, chart: str = "main") -> float:
        """sup |region evaluator - glued evaluator| over points of the chart"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return float(np.max(np.abs(self.forms(pts, chart) - self.glued[chart](pts))))

    def involution_defect(self, points: np.ndarray, chart: str = "main") -> float:
        """sup |Psi^* omega - omega| of the region triples; caps use Psi = -Id in xi"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        evaluate = lambda p: self.forms(p, chart)
        return float(np.max(np.abs(involution_pullback(evaluate)(pts) - evaluate(pts))))

    def closedness(self, points: np.ndarray, h: float, chart: str = "main") -> float:
        """sup |FD d omega_i| of the glued triple"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        worst = 0.0
        for index in range(3):
            d_form = fd_d_pointwise(lambda p: self.glued[chart](p)[:, index], pts, 2, h)
            worst = max(worst, float(np.max(np.abs(d_form))))
        return worst

    def weighted_error(self, points: np.ndarray, weight: Callable[[np.ndarray], np.ndarray],
                       mu: float = DEFAULT_MU, chart: str = "main"):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return hk_error(self.deviation(pts, chart), pts, weight=weight, mu=mu)


# ---------------------------------------------------------------------------
# I_nu fibers
# ---------------------------------------------------------------------------

class InuGluing:
    """
    Semi-flat / multi-Ooguri-Vafa interpolation in Gibbons-Hawking coordinates

    Both triples are Gibbons-Hawking triples, with potentials differing by
    g = 2 sum K_0(2 pi k rho) cos(2 pi k (u3 - t_i)) and connections by
    b dphi, b = 2 sum rho K_1(2 pi k rho) sin(2 pi k (u3 - t_i)). The
    difference of the triples is d xi with
        xi_1 = F dphi / 2pi, F = -2 sum rho K_1 cos / kappa,
        xi_2 = -p du2 / 2pi, xi_3 = p du1 / 2pi, p = 2 sum K_0 sin / kappa,
    and the glued triple is omega_SF + d(chi xi), closed by construction.
    Scaled evaluations multiply every Bessel term by exp(2 pi k0 rho_ref), k0
    the leading non-cancelling mode of the pole set.
    """

    def __init__(self, chart: GHChart, periods: InuPeriods, delta0: float, rho_ref: Optional[float] = None):
        if chart.poles is None or periods.nu != chart.poles.nu:
            raise SectorMismatch("period model and pole set disagree on nu")
        self.chart = chart
        self.periods = periods
        self.delta = chart.delta
        self.delta0 = delta0
        self.profile = CutoffProfile(inner=delta0, outer=2.0 * delta0, increasing=False)
        self.rho_ref = delta0 / chart.delta if rho_ref is None else rho_ref
        self.lead = leading_mode(chart.poles)

    # -- Bessel differences -------------------------------------------------

    def _terms(self, points: np.ndarray, scaled: bool) -> Dict[str, np.ndarray]:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rho = np.hypot(pts[:, 0], pts[:, 1])
        count = int(min(MAX_MODES, 1 + math.ceil(BESSEL_CUTOFF / (2.0 * math.pi * float(np.min(rho))))))
        modes = np.arange(1, count + 1)
        # modes cancelling over the pole set contribute exactly zero
        sums = np.sum(np.exp(2j * math.pi * modes[:, None] * self.chart.poles.array()[None, :]), axis=1)
        kappa = 2.0 * math.pi * modes[np.abs(sums) > 1e-9]
        arg = kappa[None, :] * rho[:, None]
        shift = 2.0 * math.pi * self.lead * self.rho_ref if scaled else 0.0
        factor = np.exp(-arg + shift)
        bessel0 = k0e(arg) * factor
        bessel1 = k1e(arg) * factor
        g = np.zeros(len(pts))
        b = np.zeros(len(pts))
        F = np.zeros(len(pts))
        p = np.zeros(len(pts))
        for t in self.chart.poles.array():
            phase = kappa[None, :] * (pts[:, 2][:, None] - t)
            cos, sin = np.cos(phase), np.sin(phase)
            g += 2.0 * np.sum(bessel0 * cos, axis=1)
            b += 2.0 * rho * np.sum(bessel1 * sin, axis=1)
            F -= 2.0 * rho * np.sum(bessel1 * cos / kappa[None, :], axis=1)
            p += 2.0 * np.sum(bessel0 * sin / kappa[None, :], axis=1)
        return {"rho": rho, "g": g, "b": b, "F": F, "p": p}

    @staticmethod
    def _dphi(points: np.ndarray, rho: np.ndarray) -> np.ndarray:
        dphi = np.zeros((len(points), 4))
        dphi[:, 0] = -points[:, 1] / rho ** 2
        dphi[:, 1] = points[:, 0] / rho ** 2
        return dphi

    def difference_forms(self, points: np.ndarray, scaled: bool = False) -> np.ndarray:
        """omega_OV - omega_SF, shape (m, 3, 4, 4)"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        terms = self._terms(pts, scaled)
        connection = terms["b"][:, None] * self._dphi(pts, terms["rho"])
        return gh_forms_from_data(terms["g"], connection)

    def primitives(self, points: np.ndarray, scaled: bool = False) -> np.ndarray:
        """xi_1, xi_2, xi_3 as (m, 3, 4) with d xi_i = omega_OV_i - omega_SF_i"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        terms = self._terms(pts, scaled)
        xi = np.zeros((len(pts), 3, 4))
        xi[:, 0] = terms["F"][:, None] * self._dphi(pts, terms["rho"])
        xi[:, 1, 1] = -terms["p"]
        xi[:, 2, 0] = terms["p"]
        return xi / (2.0 * math.pi)

    # -- model triples --------------------------------------------------------

    def ov_forms(self, points: np.ndarray) -> np.ndarray:
        return gh_triple(self.chart).forms(points)

    def semiflat_potential(self, points: np.ndarray) -> np.ndarray:
        """V_SF = 2 pi Im(conj(tau1) tau2) at y = delta w"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        y = self.delta * (pts[:, 0] + 1j * pts[:, 1])
        return 2.0 * math.pi * self.periods.imaginary_product(y)

    def sf_forms(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        terms = self._terms(pts, scaled=False)
        theta = self.chart.theta(pts)
        theta = theta - terms["b"][:, None] * self._dphi(pts, terms["rho"])
        return gh_forms_from_data(self.semiflat_potential(pts), theta)

    # -- glued triple -----------------------------------------------------------

    def cutoff(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """chi(delta rho) and d chi as (m, 4)"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        rho = np.hypot(pts[:, 0], pts[:, 1])
        s = self.delta * rho
        chi = self.profile.value(s)
        slope = self.profile.derivative(s) * self.delta
        d_chi = np.zeros((len(pts), 4))
        d_chi[:, 0] = slope * pts[:, 0] / rho
        d_chi[:, 1] = slope * pts[:, 1] / rho
        return chi, d_chi

    def perturbation(self, points: np.ndarray, scaled: bool = False) -> np.ndarray:
        """d(chi xi) = chi (omega_OV - omega_SF) + d chi ^ xi"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        chi, d_chi = self.cutoff(pts)
        diff = self.difference_forms(pts, scaled)
        xi = self.primitives(pts, scaled)
        return chi[:, None, None, None] * diff + _wedge(d_chi[:, None, :], xi)

    def glued_forms(self, points: np.ndarray) -> np.ndarray:
        return self.sf_forms(points) + self.perturbation(points)

    def log_deviation(self, points: np.ndarray) -> np.ndarray:
        """
        log ||Q_omega - Id|| of the glued triple to first order, evaluated
        without underflow via the scaled Bessel terms
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        linear = linearized_deviation(self.sf_forms(pts), self.perturbation(pts, scaled=True))
        norms = np.linalg.norm(linear, ord=2, axis=(1, 2))
        with np.errstate(divide="ignore"):
            return np.log(norms) - 2.0 * math.pi * self.lead * self.rho_ref

    def direct_deviation(self, points: np.ndarray) -> np.ndarray:
        return hk_deviation(DefiniteTriple(forms=self.glued_forms(points)))

    def check_potential(self, points: np.ndarray, h: float = 1e-3, tol: float = 1e-4) -> float:
        """
        FD check that d xi reproduces omega_OV - omega_SF (scaled units)

        Raises:
            PotentialMismatch: if the relative mismatch exceeds tol
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        target = self.difference_forms(pts, scaled=True)
        worst = 0.0
        for index in range(3):
            d_xi = fd_d_pointwise(lambda p: self.primitives(p, scaled=True)[:, index], pts, 1, h)
            scale = max(float(np.max(np.abs(target[:, index]))), 1e-300)
            worst = max(worst, float(np.max(np.abs(d_xi - target[:, index]))) / scale)
        if worst > tol:
            raise PotentialMismatch(f"d xi differs from omega_OV - omega_SF by {worst:.3e} (relative)")
        logger.debug(f"potential check: relative mismatch {worst:.3e}")
        return worst

    # -- regions --------------------------------------------------------------

    def base_radius(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.delta * np.hypot(pts[:, 0], pts[:, 1])

    def regions(self, chart: str = "main", exclude: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> List[Region]:
        keep = exclude or (lambda p: np.zeros(len(np.atleast_2d(p)), dtype=bool))
        return [
            Region(name="ov_core", role="core", chart=chart,
                   contains=lambda p: (self.base_radius(p) < self.delta0) & ~keep(p),
                   evaluator=self.ov_forms),
            Region(name="inu_damage", role="damage", chart=chart,
                   contains=lambda p: (self.base_radius(p) >= self.delta0) & (self.base_radius(p) <= 2.0 * self.delta0),
                   evaluator=self.glued_forms),
            Region(name="semi_flat", role="exterior", chart=chart,
                   contains=lambda p: self.base_radius(p) > 2.0 * self.delta0,
                   evaluator=self.sf_forms),
        ]

    def glued_everywhere(self, points: np.ndarray) -> np.ndarray:
        """Glued triple; the OV triple inside the core where xi is not needed"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        core = self.base_radius(pts) < self.delta0
        result = np.zeros((len(pts), 3, 4, 4))
        if np.any(core):
            result[core] = self.ov_forms(pts[core])
        if np.any(~core):
            result[~core] = self.glued_forms(pts[~core])
        return result


def inu_damage_points(delta: float, delta0: float, count: int = 256, seed: int = 0,
                      concentrate: bool = True) -> np.ndarray:
    """
    Gibbons-Hawking sample points with delta0 <= |delta w| <= 2 delta0

    With concentrate=True the radial parameter is geometrically clustered at
    the inner edge where the exponentially small error peaks.
    """
    rng = np.random.default_rng(seed)
    if concentrate:
        t = np.geomspace(1e-8, 1.0, count)
    else:
        t = np.linspace(0.0, 1.0, count)
    rho = (delta0 + delta0 * t) / delta
    phi = rng.uniform(0.0, 2.0 * math.pi, count)
    u3 = rng.uniform(0.0, 1.0, count)
    u4 = rng.uniform(0.0, 2.0 * math.pi, count)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), u3, u4], axis=1)


def leading_mode(poles: MonopoleSet) -> int:
    """Smallest k >= 1 whose Fourier mode sum_i e^(2 pi i k t_i) does not cancel"""
    t = poles.array()
    for k in range(1, poles.nu + 1):
        if abs(np.sum(np.exp(2j * math.pi * k * t))) > 1e-9:
            return k
    return poles.nu


def glue_Inu(delta: float, nu: int, delta0: float = 0.1, periods: Optional[InuPeriods] = None,
             poles: Optional[MonopoleSet] = None, check_points: int = 16) -> GluedAssembly:
    """
    Glue the multi-Ooguri-Vafa triple into the semi-flat triple over the
    annulus delta0 <= |y| <= 2 delta0

    Args:
        delta: collapsing parameter
        nu: number of monopoles
        delta0: inner radius of the damage zone in the base coordinate y
        periods: I_nu period model (h from it is used by the chart)
        poles: monopole set; evenly spaced if omitted
        check_points: damage-zone points for the exactness check

    Returns:
        GluedAssembly with chart "main" in Gibbons-Hawking coordinates

    Raises:
        PotentialMismatch: if d xi fails to reproduce the difference of the triples
        SectorMismatch: if the period model and pole set disagree on nu
    """
    poles = poles or MonopoleSet(poles=[(k + 0.5) / nu for k in range(nu)])
    if poles.nu != nu:
        raise SectorMismatch(f"I{nu} fiber glued with {poles.nu} monopoles")
    periods = periods or InuPeriods(nu)
    h_correction = periods.h_correction if not periods.h_correction.is_zero() else None
    chart = GHChart(kind="ooguri_vafa", poles=poles, T=ooguri_vafa_T(poles.nu, delta), delta=delta,
                    delta0=delta0, h_correction=h_correction, check_domain=False)
    gluing = InuGluing(chart, periods, delta0)
    if check_points > 0:
        gluing.check_potential(inu_damage_points(delta, delta0, check_points, concentrate=False))
    assembly = GluedAssembly(
        name=f"I{poles.nu}",
        regions=gluing.regions(),
        glued={"main": gluing.glued_everywhere},
        expected_rates={"log_error_vs_inverse_delta": -2.0 * math.pi * leading_mode(poles) * delta0},
        parameters={"delta": delta, "nu": float(poles.nu), "delta0": delta0},
    )
    assembly.components["inu"] = gluing
    logger.info(f"glue_Inu: nu={poles.nu}, delta={delta:.3e}, delta0={delta0}")
    return assembly


# ---------------------------------------------------------------------------
# I_nu* fibers: Eguchi-Hanson caps in the Z2 quotient
# ---------------------------------------------------------------------------

class EHCap(BaseModel):

    """
    Eguchi-Hanson cap glued into the orbifold background near one fixed point

    Coordinates are xi = zeta / (e delta). The potential is
    (1 - chi) psi + chi e^2 f(|xi|^2 / e^2) with psi = |xi|^2/2 + kappa' |xi|^4,
    kappa' = kappa (e delta)^2, and chi = 1 for |xi| <= 1, 0 for |xi| >= 2.
    """
    scale_e: float = Field(..., gt=0, description="Orbifold parameter e_lambda")
    delta: float = Field(..., gt=0, description="Collapsing parameter")
    kappa: float = Field(1.0, description="Quartic coefficient of the orbifold potential in zeta units")
    inner: float = Field(1.0, gt=0, description="Inner damage-zone radius in xi units")
    outer: float = Field(2.0, gt=0, description="Outer damage-zone radius in xi units")

    @property
    def unit(self) -> float:
        """Length of one xi unit in zeta coordinates"""
        return self.scale_e * self.delta

    @property
    def quartic(self) -> float:
        return self.kappa * self.unit ** 2

    def profile(self) -> CutoffProfile:
        return CutoffProfile(inner=self.inner, outer=self.outer, increasing=False)

    def radial_derivatives(self, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Phi_t and Phi_tt of the blended potential in t = |xi|^2"""
        t = np.asarray(t, dtype=float)
        e2 = self.scale_e ** 2
        s = t / e2
        r = np.sqrt(t)
        profile = self.profile()
        chi = profile.value(r)
        chi_r = profile.derivative(r)
        chi_rr = profile.second_derivative(r)
        chi_t = chi_r / (2.0 * r)
        chi_tt = (chi_rr - chi_r / r) / (4.0 * r ** 2)

        _, eh_t, eh_tt_scaled = eh_radial_derivatives(s)
        eh_tt = eh_tt_scaled / e2
        psi_t = 0.5 + 2.0 * self.quartic * t
        psi_tt = np.full_like(t, 2.0 * self.quartic)
        # E - psi and E_t - psi_t without cancellation
        gap = e2 * eh_potential_difference(np.sqrt(s)) - self.quartic * t ** 2
        gap_t = 1.0 / (2.0 * s * (np.sqrt(1.0 + s ** 2) + s)) - 2.0 * self.quartic * t

        phi_t = psi_t + chi * (eh_t - psi_t) + chi_t * gap
        phi_tt = (1.0 - chi) * psi_tt + chi * eh_tt + 2.0 * chi_t * gap_t + chi_tt * gap
        return phi_t, phi_tt

    def forms(self, points: np.ndarray) -> np.ndarray:
        """Triple (omega, Re dxi1^dxi2, Im dxi1^dxi2) at points (m, 4)"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        t = np.sum(pts ** 2, axis=1)
        if np.any(t <= 0.0):
            raise EmptyRegion("cap evaluated at the exceptional-sphere center")
        phi_t, phi_tt = self.radial_derivatives(t)
        omega = kahler_form_from_hessian(radial_hessian(pts, phi_t, phi_tt))
        holo = holomorphic_volume()
        m = len(pts)
        return np.stack([omega, np.repeat(holo.real[None], m, 0), np.repeat(holo.imag[None], m, 0)], axis=1)

    def weight(self, points: np.ndarray) -> np.ndarray:
        """Regularity scale |zeta| on the damage zone"""
        return self.unit * np.linalg.norm(np.atleast_2d(points), axis=1)

    def damage_error(self, count: int = 400, mu: float = DEFAULT_MU, seed: int = 0) -> float:
        """sup over inner <= |xi| <= outer of |zeta|^(mu+1) ||Q_omega - Id||"""
        pts = shell_points(self.inner, self.outer, count, seed)
        report = hk_error(hk_deviation(DefiniteTriple(forms=self.forms(pts))), pts,
                          weight=self.weight, mu=mu, max_pairs=0)
        return report.weighted_sup

    def regions(self, chart: str) -> List[Region]:
        norm = lambda p: np.linalg.norm(np.atleast_2d(p), axis=1)
        return [
            Region(name=f"{chart}_eh_core", role="core", chart=chart,
                   contains=lambda p: norm(p) < self.inner, evaluator=self.forms),
            Region(name=f"{chart}_eh_damage", role="damage", chart=chart,
                   contains=lambda p: (norm(p) >= self.inner) & (norm(p) <= self.outer), evaluator=self.forms),
            Region(name=f"{chart}_orbifold", role="exterior", chart=chart,
                   contains=lambda p: norm(p) > self.outer, evaluator=self.forms),
        ]


def shell_points(inner: float, outer: float, count: int, seed: int = 0) -> np.ndarray:
    """Points of R^4 with inner <= |x| <= outer, radii evenly spaced"""
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(count, 4))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    radii = np.linspace(inner, outer, count)
    return directions * radii[:, None]


def orbifold_scale_bound(nu: int, delta: float, eta0: float = 1.0) -> float:
    """Largest admissible e_lambda = eta0 / (nu log(1/delta))^(1/2)"""
    return eta0 / math.sqrt(nu * math.log(1.0 / delta))


def orbifold_quartic(chart: GHChart, point: Sequence[float], relative_step: float = 0.05) -> float:
    """
    Quartic coefficient of the quotient potential at a fixed point, zeta units

    In normal coordinates psi - |x|^2/2 is bounded by |Rm| |x|^4 / 4 at the
    center; |Rm| is that of the Gibbons-Hawking metric, divided by delta^2
    for the delta^2-rescaled chart. The axis gauge is re-centered on the
    fixed circle point so the stencil stays off every gauge string.
    """
    q = np.asarray(point, dtype=float).reshape(1, 4)
    local = chart.model_copy(update={"window": float(q[0, 2]), "check_domain": False})
    distance = float(np.min(np.abs(wrap_circle(local.poles.array() - q[0, 2]))))
    sample = riemann_fd(lambda p: gh_metric(local, p), q, relative_step * distance)
    norm = float(sample.riemann_norm[0])
    logger.debug(f"orbifold_quartic at u3={q[0, 2]:g}: |Rm|={norm:.4e}")
    return 0.25 * norm / chart.delta ** 2


def glue_Inustar(delta: float, nu: int, delta0: float = 0.1, scale_es: Sequence[float] = (0.05, 0.05, 0.05, 0.05),
                 eta0: float = 1.0, poles: Optional[MonopoleSet] = None,
                 h_correction: Optional[HolomorphicPolynomial] = None, kappa: Optional[float] = None,
                 check_points: int = 16) -> GluedAssembly:
    """
    Four Eguchi-Hanson caps glued into the Z2 quotient of the multi-Ooguri-Vafa
    triple with 2 nu symmetric monopoles

    Charts: "main" (Gibbons-Hawking coordinates of the double cover, Z2
    invariant) and "cap1".."cap4" (xi = zeta / (e_lambda delta) around q1..q4).
    Each cap takes the quartic coefficient of the quotient potential at its
    fixed point (orbifold_quartic) unless `kappa` freezes one for all caps.

    Raises:
        ScaleViolation: if some e_lambda exceeds eta0 / (nu log(1/delta))^(1/2)
        FixedPointMismatch: if the poles are not symmetric or h is not even
    """
    if len(scale_es) != 4:
        raise ValueError(f"need four orbifold parameters, got {len(scale_es)}")
    bound = orbifold_scale_bound(nu, delta, eta0)
    for index, value in enumerate(scale_es):
        if value > bound:
            raise ScaleViolation(f"e_{index + 1} = {value:.4g} exceeds {bound:.4g}")
    poles = poles or MonopoleSet.symmetric(nu)
    chart = quotient_chart(poles, ooguri_vafa_T(poles.nu, delta), delta, delta0, h_correction)
    chart = chart.model_copy(update={"check_domain": False})
    periods = InuPeriods(poles.nu, h_correction)
    gluing = InuGluing(chart, periods, delta0)
    if check_points > 0:
        gluing.check_potential(inu_damage_points(delta, delta0, check_points, concentrate=False))

    centers = np.array(fixed_points())
    if kappa is None:
        # V and A are independent of u4, so q1, q2 and q3, q4 share a coefficient
        by_height = {float(q[2]): orbifold_quartic(chart, q) for q in centers[[0, 2]]}
        kappas = [by_height[float(q[2])] for q in centers]
    else:
        kappas = [kappa] * 4
    caps = [EHCap(scale_e=value, delta=delta, kappa=coefficient) for value, coefficient in zip(scale_es, kappas)]
    fixed = centers[:, :3]
    fiber = centers[:, 3]
    radii = [2.0 * value * math.sqrt(2.0 * math.pi / chart.T) for value in scale_es]

    def near_fixed_point(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        mask = np.zeros(len(pts), dtype=bool)
        for center, angle, radius in zip(fixed, fiber, radii):
            du3 = wrap_circle(pts[:, 2] - center[2])
            du4 = np.angle(np.exp(1j * (pts[:, 3] - angle)))
            dist = np.sqrt(pts[:, 0] ** 2 + pts[:, 1] ** 2 + du3 ** 2 + du4 ** 2)
            mask |= dist < radius
        return mask

    regions = gluing.regions("main", exclude=near_fixed_point)
    glued = {"main": gluing.glued_everywhere}
    for index, cap in enumerate(caps):
        name = f"cap{index + 1}"
        regions += cap.regions(name)
        glued[name] = cap.forms

    mu = DEFAULT_MU
    assembly = GluedAssembly(
        name=f"I{nu}*",
        regions=regions,
        glued=glued,
        expected_rates={"delta_exponent": mu + 1.0, "scale_e_exponent": mu + 5.0,
                        "orbifold_exponent": mu + 3.0,
                        "log_error_vs_inverse_delta": -2.0 * math.pi * leading_mode(poles) * delta0},
        parameters={"delta": delta, "nu": float(nu), "delta0": delta0, "bound": bound},
    )
    assembly.components["inu"] = gluing
    assembly.components["caps"] = caps
    logger.info(f"glue_Inustar: nu={nu}, delta={delta:.3e}, e={list(scale_es)}, bound={bound:.4g}, "
                f"kappa={[round(value, 6) for value in kappas]}")
    return assembly


# ---------------------------------------------------------------------------
# Radial primitives
# ---------------------------------------------------------------------------

def _polar_frame(points: np.ndarray, s: Union[float, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    theta = np.arctan2(points[:, 1], points[:, 0])
    radial = np.zeros((len(points), 4))
    radial[:, 0], radial[:, 1] = np.cos(theta), np.sin(theta)
    angular = np.zeros((len(points), 4))
    angular[:, 0], angular[:, 1] = -np.sin(theta), np.cos(theta)
    return radial, angular * np.asarray(s).reshape(-1, 1)


def _contracted(psi: Callable[[np.ndarray], np.ndarray], points: np.ndarray, s: float) -> np.ndarray:
    """(psi(d_r, d_theta), psi(d_r, d_v1), psi(d_r, d_v2)) at radius s along each ray"""
    radius = np.hypot(points[:, 0], points[:, 1])
    moved = points.copy()
    moved[:, 0] = points[:, 0] * s / radius
    moved[:, 1] = points[:, 1] * s / radius
    radial, angular = _polar_frame(points, s)
    form = psi(moved)
    contracted = np.einsum("mab,ma->mb", form, radial)
    return np.stack([
        np.einsum("mb,mb->m", contracted, angular),
        contracted[:, 2],
        contracted[:, 3],
    ], axis=1)


def measured_decay(psi: Callable[[np.ndarray], np.ndarray], points: np.ndarray, factors: Sequence[float] = (1, 2, 4, 8)) -> float:
    """Median over rays of the fitted decay exponent of |psi|"""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    radius = np.hypot(pts[:, 0], pts[:, 1])
    norms = []
    for factor in factors:
        moved = pts.copy()
        moved[:, :2] *= factor
        norms.append(np.linalg.norm(psi(moved), axis=(1, 2)))
    norms = np.array(norms)
    slopes = []
    for idx in range(len(pts)):
        if np.all(norms[:, idx] > 0.0):
            slopes.append(-fit_power_law(radius[idx] * np.array(factors), norms[:, idx]).exponent)
    return float(np.median(slopes)) if slopes else math.inf


def radial_primitive(psi: Callable[[np.ndarray], np.ndarray], points: np.ndarray, aleph: float = 2.0,
                     mode: Literal["decay", "annulus"] = "decay", r0: Optional[float] = None,
                     check_decay: bool = True) -> np.ndarray:
    """
    1-form eta with d eta = psi on a region (r0, inf) x Y, r = |u|

    In "decay" mode eta = -int_r^inf i(d_r) psi ds; in "annulus" mode
    eta = int_r0^r i(d_r) psi ds (the radial gauge vanishing at r0).

    Args:
        psi: closed 2-form evaluator on (u1, u2, v1, v2)
        points: evaluation points (m, 4)
        aleph: declared decay order of psi (decay mode)
        mode: "decay" or "annulus"
        r0: inner radius (annulus mode)
        check_decay: measure the decay of psi first

    Returns:
        eta as (m, 4) Cartesian components

    Raises:
        DecayViolation: if psi decays slower than r^-(aleph - 1/4)
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    radius = np.hypot(pts[:, 0], pts[:, 1])
    if mode == "decay":
        if aleph <= 1.0:
            raise ValueError(f"decay order must exceed 1, got {aleph}")
        if check_decay:
            measured = measured_decay(psi, pts)
            if measured < aleph - 0.25:
                raise DecayViolation(f"psi decays like r^-{measured:.3f}, declared r^-{aleph}")
        coefficients = np.zeros((len(pts), 3))
        for idx in range(len(pts)):
            point = pts[idx:idx + 1]
            value, _ = quad_vec(lambda s: _contracted(psi, point, s)[0], radius[idx], np.inf,
                                epsabs=1e-13, epsrel=1e-10)
            coefficients[idx] = -value
    elif mode == "annulus":
        if r0 is None:
            raise ValueError("annulus mode needs r0")
        coefficients = np.zeros((len(pts), 3))
        for idx in range(len(pts)):
            point = pts[idx:idx + 1]
            for comp in range(3):
                value, _ = quad(lambda s: _contracted(psi, point, s)[0, comp], r0, radius[idx],
                                epsabs=1e-14, epsrel=1e-11)
                coefficients[idx, comp] = value
    else:
        raise ValueError(f"unknown mode {mode}")

    eta = np.zeros((len(pts), 4))
    eta[:, 0] = -coefficients[:, 0] * pts[:, 1] / radius ** 2
    eta[:, 1] = coefficients[:, 0] * pts[:, 0] / radius ** 2
    eta[:, 2] = coefficients[:, 1]
    eta[:, 3] = coefficients[:, 2]
    return eta


# ---------------------------------------------------------------------------
# Finite-monodromy fibers: ALG cores
# ---------------------------------------------------------------------------

FLAT_KAHLER = two_form({(0, 1): 1.0, (2, 3): 1.0})
BASE_AREA = two_form({(0, 1): 1.0})
DU = np.array([1.0, 1j, 0.0, 0.0])
DV = np.array([0.0, 0.0, 1.0, 1j])


class ALGGluing:
    """
    ALG core glued into the semi-flat metric of a finite-monodromy fiber

    Coordinates (u1, u2, v1, v2) with u = y^beta and v the flat fiber
    coordinate, so that omega_FF = du1^du2 + dv1^dv2 and
    omega_SF = omega_FF + (I - 1) du1^du2. The glued Kahler form is
    omega_FF + d(chi eta_G + (1 - chi) eta_B) with chi = 1 on |u| <= delta^ell
    and 0 on |u| >= 2 delta^ell; it is paired with Omega_SF.
    """

    def __init__(self, delta: float, ell: float, model: Union[ALGModel, SyntheticALG], periods: PeriodModel):
        self.synthetic = model if isinstance(model, SyntheticALG) else None
        self.model = model.model if isinstance(model, SyntheticALG) else model
        if abs(self.model.beta - periods.beta) > 1e-9:
            raise SectorMismatch(f"model beta {self.model.beta} differs from period beta {periods.beta}")
        if not 0.0 < ell < 1.0:
            raise ValueError(f"ell must lie in (0, 1), got {ell}")
        if self.synthetic is not None and self.synthetic.order < 2.0:
            raise DecayViolation(f"ALG decay order {self.synthetic.order} below 2")
        self.delta = delta
        self.ell = ell
        self.periods = periods
        self.r_inner = delta ** ell
        self.profile = CutoffProfile(inner=self.r_inner, outer=2.0 * self.r_inner, increasing=False)
        tau1, tau2 = periods.limit() if hasattr(periods, "limit") else (1.0, 1j)
        real_map = np.array([[tau1.real, tau2.real], [tau1.imag, tau2.imag]])
        self.fiber_inverse = np.linalg.inv(real_map)

    # -- model forms -----------------------------------------------------------

    @staticmethod
    def _u(points: np.ndarray) -> np.ndarray:
        return points[:, 0] + 1j * points[:, 1]

    def distortion(self, points: np.ndarray) -> np.ndarray:
        """I - 1 with I = Im(conj(tau1) tau2)"""
        return self.periods.imaginary_product(self._u(points)) - 1.0

    def holomorphic_sf(self, points: np.ndarray) -> np.ndarray:
        """Omega_SF = du ^ (tau1 dx1 + tau2 dx2) in v coordinates"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        tau1, tau2 = self.periods.periods(self._u(pts))
        covector = np.stack([tau1, tau2], axis=1) @ self.fiber_inverse
        fiber = np.zeros((len(pts), 4), dtype=complex)
        fiber[:, 2:] = covector
        du = np.repeat(DU[None], len(pts), axis=0)
        return _wedge(du, fiber)

    def holomorphic_ff(self, count: int) -> np.ndarray:
        return np.repeat(_wedge(DU, DV)[None], count, axis=0)

    def psi_B(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.distortion(pts)[:, None, None] * BASE_AREA[None]

    def eta_B(self, points: np.ndarray) -> np.ndarray:
        return radial_primitive(self.psi_B, points, mode="annulus", r0=self.r_inner)

    def psi_G(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.synthetic is None:
            return np.zeros((len(pts), 4, 4))
        return self.synthetic.psi(pts / self.delta)

    def eta_G(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.synthetic is None:
            return np.zeros((len(pts), 4))
        return self.delta * self.synthetic.eta(pts / self.delta)

    def cutoff(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.hypot(pts[:, 0], pts[:, 1])
        slope = self.profile.derivative(r)
        d_chi = np.zeros((len(pts), 4))
        d_chi[:, 0] = slope * pts[:, 0] / r
        d_chi[:, 1] = slope * pts[:, 1] / r
        return self.profile.value(r), d_chi

    def _triple(self, omega: np.ndarray, holo: np.ndarray) -> np.ndarray:
        return np.stack([omega, holo.real, holo.imag], axis=1)

    def core_forms(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self._triple(FLAT_KAHLER[None] + self.psi_G(pts), self.holomorphic_sf(pts))

    def sf_forms(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self._triple(FLAT_KAHLER[None] + self.psi_B(pts), self.holomorphic_sf(pts))

    def glued_forms(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        chi, d_chi = self.cutoff(pts)
        omega = (
            FLAT_KAHLER[None]
            + chi[:, None, None] * self.psi_G(pts)
            + (1.0 - chi)[:, None, None] * self.psi_B(pts)
            + _wedge(d_chi, self.eta_G(pts) - self.eta_B(pts))
        )
        return self._triple(omega, self.holomorphic_sf(pts))

    # -- measurements -----------------------------------------------------------

    def transition_points(self, count: int = 128, seed: int = 0) -> np.ndarray:
        return sector_points(self.r_inner, 2.0 * self.r_inner, self.model.beta, count, seed)

    def transition_error(self, count: int = 128, seed: int = 0) -> float:
        """sup ||Q_omega - Id|| over the transition annulus"""
        pts = self.transition_points(count, seed)
        return float(np.max(hk_deviation(DefiniteTriple(forms=self.glued_forms(pts)))))

    def complex_distortion(self, radius_factor: float = 2.0, count: int = 128, seed: int = 0) -> Tuple[float, float]:
        """
        Complex-structure distortion on delta R <= |u| <= 2 delta R

        Returns:
            (sup ||Q_omega(omega, Omega_SF) - Q_omega(omega, Omega_FF)||,
             sup |Omega_SF - Omega_FF|)
        """
        inner = self.delta * radius_factor
        pts = sector_points(inner, 2.0 * inner, self.model.beta, count, seed)
        omega = FLAT_KAHLER[None] + self.psi_G(pts)
        holo_sf = self.holomorphic_sf(pts)
        holo_ff = self.holomorphic_ff(len(pts))
        q_sf = q_matrix(DefiniteTriple(forms=self._triple(omega, holo_sf))).q_normalized
        q_ff = q_matrix(DefiniteTriple(forms=self._triple(omega, holo_ff))).q_normalized
        q_gap = float(np.max(np.linalg.norm(q_sf - q_ff, ord=2, axis=(1, 2))))
        raw = float(np.max(np.abs(holo_sf - holo_ff)))
        return q_gap, raw

    def regions(self) -> List[Region]:
        radius = lambda p: np.hypot(np.atleast_2d(p)[:, 0], np.atleast_2d(p)[:, 1])
        return [
            Region(name="alg_core", role="core", contains=lambda p: radius(p) < self.r_inner,
                   evaluator=self.core_forms),
            Region(name="alg_transition", role="damage",
                   contains=lambda p: (radius(p) >= self.r_inner) & (radius(p) <= 2.0 * self.r_inner),
                   evaluator=self.glued_forms),
            Region(name="semi_flat", role="exterior", contains=lambda p: radius(p) > 2.0 * self.r_inner,
                   evaluator=self.sf_forms),
        ]

    def glued_everywhere(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.hypot(pts[:, 0], pts[:, 1])
        result = np.zeros((len(pts), 3, 4, 4))
        core = r < self.r_inner
        if np.any(core):
            result[core] = self.core_forms(pts[core])
        if np.any(~core):
            result[~core] = self.glued_forms(pts[~core])
        return result


def sector_points(inner: float, outer: float, beta: float, count: int, seed: int = 0) -> np.ndarray:
    """Points with inner <= |u| <= outer, arg u inside the sector and away from the branch cut"""
    rng = np.random.default_rng(seed)
    top = min(2.0 * math.pi * beta, math.pi) - 0.2
    theta = rng.uniform(0.2, max(top, 0.3), count)
    r = np.linspace(inner, outer, count)
    v = rng.uniform(0.0, 1.0, (count, 2))
    return np.stack([r * np.cos(theta), r * np.sin(theta), v[:, 0], v[:, 1]], axis=1)


def glue_ALG(delta: float, ell: float = DEFAULT_ELL, model: Union[ALGModel, SyntheticALG, None] = None,
             periods: Optional[PeriodModel] = None) -> GluedAssembly:
    """
    Three-region assembly: ALG core |u| < delta^ell, transition annulus,
    semi-flat exterior

    Raises:
        SectorMismatch: if the model and period model have different beta
        DecayViolation: if the model perturbation decays slower than r^-2
    """
    if model is None or periods is None:
        raise ValueError("glue_ALG needs both an ALG model and a period model")
    gluing = ALGGluing(delta, ell, model, periods)
    lam = getattr(periods, "h_exponent", 0.0)
    order = gluing.synthetic.order if gluing.synthetic is not None else math.inf
    rates = {"distortion_term": ell * lam, "complex_distortion": lam}
    if math.isfinite(order):
        rates["alg_term"] = order - ell * order
        rates["transition"] = min(rates["alg_term"], rates["distortion_term"])
    else:
        rates["transition"] = rates["distortion_term"]
    assembly = GluedAssembly(
        name=f"ALG[{periods.fiber_type}]",
        regions=gluing.regions(),
        glued={"main": gluing.glued_everywhere},
        expected_rates=rates,
        parameters={"delta": delta, "ell": ell, "beta": gluing.model.beta},
    )
    assembly.components["alg"] = gluing
    logger.info(f"glue_ALG: type={periods.fiber_type}, delta={delta:.3e}, ell={ell:.4f}")
    return assembly
