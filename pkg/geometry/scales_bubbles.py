"""
Regularity-scale weight and canonical bubble classification
"""
import math
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, Field, model_validator

from geometry.diffgeo_numerics import riemann_fd
from geometry.errors import RegionUnresolved, ScaleViolation
from geometry.gibbons_hawking import GHChart, fixed_points, gh_metric
from geometry.gluing_engine import quintic_step
from geometry.k3_config import FiberConfig, KodairaFiber, parse_fiber
from geometry.lattice_greens import MonopoleSet, ooguri_vafa_T, wrap_circle
from geometry.model_spaces import ALG_TABLE, OMEGA
from geometry.sector_analysis import as_exact

BUBBLE_LABELS = (
    "TaubNUT", "EguchiHanson", "ALG", "Cone", "R3", "R2xS1", "R2", "R4/Z2",
    "(R3xS1)/Z2", "R3/Z2", "(R2xS1)/Z2", "R2/Z2", "McLean-P1",
)
DEFAULT_BAND = (1.0 / 20.0, 20.0)
DEFAULT_E_LOG_POWER = -0.75
ALG_ELL = 11.0 / 12.0
COINCIDENCE = 1e-12


def blend(x: np.ndarray, inner: float, outer: float, inside: np.ndarray, outside: np.ndarray) -> np.ndarray:
    """`inside` for x <= inner, `outside` for x >= outer, quintic interpolation between"""
    chi = quintic_step((np.asarray(x, dtype=float) - inner) / (outer - inner))
    return (1.0 - chi) * inside + chi * outside


# ---------------------------------------------------------------------------
# Probe points
# ---------------------------------------------------------------------------

class ProbePoint(BaseModel):

    """
    A point family x(delta) near one fiber

    The distance from the anchor is coefficient * delta^delta_power *
    log(1/delta)^log_power, which fixes how the point moves as delta -> 0.
    Anchors: "pole" and "origin" measure Q^3 distance in Gibbons-Hawking
    coordinates; "fixed_point" measures distance to q_lambda in the
    unscaled Gibbons-Hawking metric; "core" is the metric distance to the ALG
    core point; "fiber" is the metric distance to the nearest singular fiber
    from the regular region.
    """
    name: str = Field("", description="Probe label")
    fiber: Optional[str] = Field(None, description="Kodaira symbol of the nearby fiber")
    anchor: Literal["pole", "origin", "fixed_point", "core", "fiber"] = Field(..., description="Reference point")
    index: int = Field(0, ge=0, description="Pole or fixed-point index")
    coefficient: float = Field(1.0, ge=0, description="Distance prefactor")
    delta_power: float = Field(0.0, description="Exponent of delta in the distance")
    log_power: float = Field(0.0, description="Exponent of log(1/delta) in the distance")
    direction: Tuple[float, float, float] = Field((1.0, 0.0, 0.0), description="Q^3 direction of displacement")
    expected: Optional[str] = Field(None, description="Expected bubble label")

    def distance(self, delta: float) -> float:
        return self.coefficient * delta ** self.delta_power * math.log(1.0 / delta) ** self.log_power

    def unit_direction(self) -> np.ndarray:
        vector = np.asarray(self.direction, dtype=float)
        norm = float(np.linalg.norm(vector))
        if norm == 0.0:
            raise RegionUnresolved(f"probe {self.name} has a zero direction")
        return vector / norm


def _trend(delta_power: float, log_power: float, coefficient: float = 1.0) -> int:
    """+1 if c delta^a log(1/delta)^b -> inf as delta -> 0, -1 if -> 0, 0 if bounded"""
    if coefficient == 0.0:
        return -1
    if delta_power < 0.0:
        return 1
    if delta_power > 0.0:
        return -1
    if log_power > 0.0:
        return 1
    if log_power < 0.0:
        return -1
    return 0


# ---------------------------------------------------------------------------
# Per-fiber weights
# ---------------------------------------------------------------------------

class FiberScales(BaseModel):

    """Scale data of one singular fiber at a fixed delta"""
    model_config = {"arbitrary_types_allowed": True}

    fiber: KodairaFiber
    delta: float = Field(..., gt=0, lt=1, description="Collapsing parameter")
    delta0: float = Field(0.1, gt=0, description="Base radius of the singular region")
    poles: Optional[MonopoleSet] = Field(None, description="Monopoles of the (double cover) chart")
    scale_es: Optional[List[float]] = Field(None, description="Eguchi-Hanson parameters e_1..e_4")
    e_log_power: float = Field(DEFAULT_E_LOG_POWER, description="e = log(1/delta)^e_log_power by default")

    @model_validator(mode="after")
    def _fill(self) -> "FiberScales":
        if self.fiber.family == "Inu" and self.poles is None:
            nu = self.fiber.nu
            self.poles = MonopoleSet(poles=[(k + 0.5) / nu for k in range(nu)])
        if self.fiber.family == "Inustar":
            if self.poles is None:
                self.poles = MonopoleSet.symmetric(self.fiber.nu)
            if self.e_log_power >= -0.25:
                raise ScaleViolation(f"e must decay faster than T^(-1/2), got log power {self.e_log_power}")
            if self.scale_es is None:
                value = math.log(1.0 / self.delta) ** self.e_log_power
                self.scale_es = [value] * 4
        return self

    @property
    def log_inverse(self) -> float:
        return math.log(1.0 / self.delta)

    @property
    def n_poles(self) -> int:
        return self.poles.nu if self.poles is not None else 0

    @property
    def T(self) -> float:
        return ooguri_vafa_T(self.n_poles, self.delta)

    def fixed_bases(self) -> np.ndarray:
        return np.array([[0.0, 0.0, q[2]] for q in fixed_points()])

    def iota0(self) -> float:
        """Half the minimal Q^3 distance between poles (and fixed circles for I_nu*)"""
        t = list(self.poles.array())
        if self.fiber.family == "Inustar":
            t += [0.0, 0.5]
        if len(t) == 1:
            return 0.5
        t = np.asarray(t)
        gaps = np.abs(wrap_circle(t[:, None] - t[None, :]))
        gaps[np.eye(len(t), dtype=bool)] = np.inf
        return 0.5 * float(np.min(gaps))

    def T0(self) -> float:
        reach = float(np.max(np.abs(wrap_circle(self.poles.array()))))
        return self.iota0() + 2.0 * reach

    def iota_bar(self) -> float:
        return self.iota0() / (4.0 * math.sqrt(2.0 * math.pi))

    # -- Q^3 geometry ---------------------------------------------------------

    def pole_distance(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        t = self.poles.array()
        du3 = wrap_circle(u[:, 2][:, None] - t[None, :])
        return np.min(np.sqrt(u[:, 0][:, None] ** 2 + u[:, 1][:, None] ** 2 + du3 ** 2), axis=1)

    @staticmethod
    def origin_distance(u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        return np.sqrt(u[:, 0] ** 2 + u[:, 1] ** 2 + wrap_circle(u[:, 2]) ** 2)

    def fixed_distance(self, u: np.ndarray) -> np.ndarray:
        """Q^3 distance to the nearest fixed circle point"""
        u = np.atleast_2d(u)
        bases = np.array([0.0, 0.5])
        du3 = wrap_circle(u[:, 2][:, None] - bases[None, :])
        return np.min(np.sqrt(u[:, 0][:, None] ** 2 + u[:, 1][:, None] ** 2 + du3 ** 2), axis=1)

    def flat_radius(self, u: np.ndarray) -> np.ndarray:
        """Mollified Q^3 distance r(u) to the monopoles"""
        T = self.T
        n = self.n_poles
        d_pole = self.pole_distance(u)
        d_origin = self.origin_distance(u)
        iota0, T0 = self.iota0(), self.T0()
        r = blend(d_pole, 1.0 / T, 2.0 / T, np.full_like(d_pole, 1.0 / T), d_pole)
        r = blend(d_pole, iota0, T0, r, d_origin)
        low, high = math.exp((T - 2.0) / n), math.exp((T - 1.0) / n)
        return blend(d_origin, low, high, r, np.full_like(r, low))

    def log_term(self, u: np.ndarray) -> np.ndarray:
        """L_T = T + L_0(d(u, 0))"""
        d_origin = self.origin_distance(u)
        with np.errstate(divide="ignore"):
            far = -self.n_poles * np.log(np.maximum(d_origin, 1e-300))
        L = self.T + blend(d_origin, 2.0, 4.0, np.zeros_like(d_origin), far)
        if np.any(L <= 0.0):
            raise RegionUnresolved("point lies beyond the singular region (L_T <= 0)")
        return L

    def s_nu(self, u: np.ndarray) -> np.ndarray:
        """e^(-T/n) L_T^(1/2) r"""
        return math.exp(-self.T / self.n_poles) * np.sqrt(self.log_term(u)) * self.flat_radius(u)

    def d_star(self, D: np.ndarray, index: int) -> np.ndarray:
        """Mollified distance to q_index in the unscaled Gibbons-Hawking metric"""
        e2 = self.scale_es[index] ** 2
        root_T = math.sqrt(self.T)
        bar = self.iota_bar()
        value = blend(D, e2, 2.0 * e2, np.full_like(D, e2), D)
        return blend(D, 0.25 * bar * root_T, 0.5 * bar * root_T, value, np.full_like(D, root_T))

    def s_nustar(self, u: np.ndarray, D: np.ndarray, index: int) -> np.ndarray:
        root_T = math.sqrt(self.T)
        bar = self.iota_bar()
        near = math.exp(-self.T / self.n_poles) * self.d_star(D, index)
        far = self.s_nu(u)
        return blend(D, bar * root_T, 2.0 * bar * root_T, near, far)

    def s_alg(self, d: np.ndarray) -> np.ndarray:
        return blend(d, self.delta, 2.0 * self.delta, np.full_like(d, self.delta), d)

    def s_regular(self, d: np.ndarray) -> np.ndarray:
        return blend(d, 8.0 * self.delta0, 16.0 * self.delta0, d, np.ones_like(d))

    # -- probes ---------------------------------------------------------------

    def position(self, probe: ProbePoint) -> Tuple[np.ndarray, Optional[np.ndarray], int]:
        """Q^3 point, distance to the nearest q_lambda (I_nu* only) and its index"""
        d = probe.distance(self.delta)
        direction = probe.unit_direction()
        if probe.anchor == "pole":
            if probe.index >= self.n_poles:
                raise RegionUnresolved(f"pole index {probe.index} out of range for {self.fiber.label}")
            anchor = np.array([0.0, 0.0, self.poles.array()[probe.index]])
            u = anchor + d * direction
        elif probe.anchor == "origin":
            u = d * direction
        else:
            if probe.index > 3:
                raise RegionUnresolved(f"fixed point index {probe.index} out of range")
            base = self.fixed_bases()[probe.index]
            u = base + d * math.sqrt(2.0 * math.pi / self.T) * direction
            return u[None], np.array([d]), probe.index
        u = u[None]
        if self.fiber.family != "Inustar":
            return u, None, 0
        D = math.sqrt(self.T / (2.0 * math.pi)) * self.fixed_distance(u)
        on_upper = abs(wrap_circle(np.array(u[0, 2] - 0.5))) < abs(wrap_circle(np.array(u[0, 2])))
        return u, D, 2 if on_upper else 0

    def weight(self, probe: ProbePoint) -> float:
        family = self.fiber.family
        if probe.anchor == "fiber":
            return float(self.s_regular(np.array([probe.distance(self.delta)]))[0])
        if family == "finite":
            if probe.anchor != "core":
                raise RegionUnresolved(f"{self.fiber.label} probes must use the core anchor")
            return float(self.s_alg(np.array([probe.distance(self.delta)]))[0])
        if probe.anchor == "core" or (family == "Inu" and probe.anchor == "fixed_point"):
            raise RegionUnresolved(f"anchor {probe.anchor} does not exist near {self.fiber.label}")
        u, D, index = self.position(probe)
        if family == "Inu":
            return float(self.s_nu(u)[0])
        return float(self.s_nustar(u, D, index)[0])


class WeightField(BaseModel):

    """
    Global regularity-scale weight s(x) of a fiber configuration

    Each probe names the fiber it sits near; probes without a fiber belong
    to the regular region.
    """
    config: FiberConfig
    delta: float = Field(..., gt=0, lt=1, description="Collapsing parameter")
    delta0: float = Field(0.1, gt=0, description="Base radius of the singular regions")
    poles: Dict[str, List[float]] = Field(default_factory=dict, description="Monopole positions per fiber label")
    scale_es: Dict[str, List[float]] = Field(default_factory=dict, description="EH parameters per I_nu* label")
    e_log_power: float = Field(DEFAULT_E_LOG_POWER, description="Default EH parameter rule exponent")

    def scales(self, label: Optional[str]) -> FiberScales:
        if label is None:
            return FiberScales(fiber=parse_fiber("I0*"), delta=self.delta, delta0=self.delta0)
        if label not in self.config.fibers:
            raise RegionUnresolved(f"fiber {label} is not part of {self.config.summary()}")
        poles = MonopoleSet(poles=self.poles[label]) if label in self.poles else None
        return FiberScales(fiber=parse_fiber(label), delta=self.delta, delta0=self.delta0, poles=poles,
                           scale_es=self.scale_es.get(label), e_log_power=self.e_log_power)

    def weight(self, probe: ProbePoint) -> float:
        if probe.fiber is None and probe.anchor != "fiber":
            raise RegionUnresolved(f"probe {probe.name} has no fiber and is not a regular-region probe")
        value = self.scales(probe.fiber).weight(probe)
        if value <= 0.0:
            raise RegionUnresolved(f"non-positive weight at probe {probe.name}")
        return value


def weight(probe: ProbePoint, config: FiberConfig, delta: float, **options) -> float:
    """
    Regularity-scale weight at a probe point

    Raises:
        RegionUnresolved: if the probe does not carry enough region data
    """
    return WeightField(config=config, delta=delta, **options).weight(probe)


# ---------------------------------------------------------------------------
# Bubble classification
# ---------------------------------------------------------------------------

def _tau_name(tau: Optional[Tuple[float, float]]) -> str:
    if tau is None:
        return "free"
    if abs(complex(*tau) - OMEGA) < 1e-9:
        return "omega"
    if abs(complex(*tau) - 1j) < 1e-9:
        return "i"
    return f"{tau[0]:.4f}+{tau[1]:.4f}i"


def alg_label(fiber_type: str) -> str:
    row = ALG_TABLE[fiber_type]
    return f"ALG({as_exact(row.beta)},{_tau_name(row.tau)})"


def cone_label(fiber_type: str) -> str:
    return f"Cone(2pi*{as_exact(ALG_TABLE[fiber_type].beta)})"


def _large_scale(dp: float, lp: float, coefficient: float, n: int, quotient: bool) -> str:
    """Labels for points running off to infinity in Q^3"""
    if dp < -1.0 or (dp == -1.0 and lp > 0.0):
        raise RegionUnresolved("point leaves the singular region as delta -> 0")
    if dp == -1.0 and lp == 0.0:
        if -n * math.log(coefficient) <= 0.0:
            raise RegionUnresolved("point lies beyond the singular region (L_T <= 0)")
        return "McLean-P1"
    return "R2/Z2" if quotient else "R2"


def _near_pole(dp: float, lp: float, coefficient: float, n: int, quotient: bool) -> str:
    if _trend(dp, lp + 1.0, coefficient) <= 0:
        return "TaubNUT"
    trend = _trend(dp, lp, coefficient)
    if trend < 0:
        return "R3"
    if trend == 0:
        return "(R2xS1)/Z2" if quotient else "R2xS1"
    return _large_scale(dp, lp, coefficient, n, quotient)


def _near_fixed_point(dp: float, lp: float, coefficient: float, e_log_power: float, n: int) -> str:
    if _trend(dp, lp - 2.0 * e_log_power, coefficient) <= 0:
        return "EguchiHanson"
    inner = _trend(dp, lp + 0.5, coefficient)
    if inner < 0:
        return "R4/Z2"
    if inner == 0:
        return "(R3xS1)/Z2"
    outer = _trend(dp, lp - 0.5, coefficient)
    if outer < 0:
        return "R3/Z2"
    if outer == 0:
        return "(R2xS1)/Z2"
    return _large_scale(dp, lp - 0.5, coefficient, n, quotient=True)


def classify_bubble(probe: ProbePoint, config: FiberConfig, delta: float = 1e-6, **options) -> str:
    """
    Canonical bubble label of the point family described by the probe

    `delta` is only used to place bounded-distance points against the
    monopoles; the label depends on the delta -> 0 behaviour of the probe.

    Raises:
        RegionUnresolved: if the probe cannot be placed in a region
    """
    field = WeightField(config=config, delta=delta, **options)
    scales = field.scales(probe.fiber)
    family = scales.fiber.family
    dp, lp, c = probe.delta_power, probe.log_power, probe.coefficient

    if probe.anchor == "fiber":
        if _trend(dp, lp, c) < 0:
            raise RegionUnresolved("regular-region probe approaches a singular fiber; anchor it at the fiber")
        return "McLean-P1"

    if family == "finite":
        if probe.anchor != "core":
            raise RegionUnresolved(f"{scales.fiber.label} probes must use the core anchor")
        if _trend(dp - 1.0, lp, c) <= 0:
            return alg_label(scales.fiber.label)
        if _trend(dp, lp, c) < 0:
            return cone_label(scales.fiber.label)
        return "McLean-P1"

    quotient = family == "Inustar"
    n = scales.n_poles
    if probe.anchor == "core" or (not quotient and probe.anchor == "fixed_point"):
        raise RegionUnresolved(f"anchor {probe.anchor} does not exist near {scales.fiber.label}")
    if probe.anchor == "fixed_point":
        return _near_fixed_point(dp, lp, c, field.e_log_power, n)
    if probe.anchor == "pole":
        return _near_pole(dp, lp, c, n, quotient)

    # origin anchor
    trend = _trend(dp, lp, c)
    if trend > 0:
        return _large_scale(dp, lp, c, n, quotient)
    if quotient:
        # the origin is the base point of q_1, q_2
        return _near_fixed_point(dp, lp + 0.5, c, field.e_log_power, n)
    origin_to_pole = float(scales.pole_distance(np.zeros((1, 3)))[0])
    if origin_to_pole < COINCIDENCE:
        return _near_pole(dp, lp, c, n, quotient)
    if trend < 0:
        return "R2xS1"
    u, _, _ = scales.position(probe)
    if float(scales.pole_distance(u)[0]) < COINCIDENCE:
        return "TaubNUT"
    return "R2xS1"


def classify_region(probe: ProbePoint, config: FiberConfig, delta: float, **options) -> str:
    """Region name of the probe at this delta"""
    field = WeightField(config=config, delta=delta, **options)
    scales = field.scales(probe.fiber)
    family = scales.fiber.family
    if probe.anchor == "fiber":
        return "regular"
    d = probe.distance(delta)
    if family == "finite":
        if d <= delta:
            return "ALG.1"
        return "ALG.2" if d <= 2.0 * delta ** ALG_ELL else "regular"
    prefix = "Inu" if family == "Inu" else "Inustar"
    u, D, index = scales.position(probe)
    if D is not None:
        e = scales.scale_es[index]
        if D[0] <= e ** 2:
            return f"{prefix}.4"
        if D[0] <= e:
            return f"{prefix}.5"
    d_pole = float(scales.pole_distance(u)[0])
    if d_pole <= 1.0 / scales.T:
        return f"{prefix}.1"
    if d_pole <= scales.iota0():
        return f"{prefix}.2"
    return f"{prefix}.3"


def bubble_map(probes: Sequence[ProbePoint], config: FiberConfig, delta: float,
               path: Optional[Path] = None, **options) -> pd.DataFrame:
    """
    Bubble-map table (probe, fiber, region, weight, label, expected)

    Written as CSV when a path is given.
    """
    rows = []
    field = WeightField(config=config, delta=delta, **options)
    for probe in probes:
        label = classify_bubble(probe, config, delta, **options)
        rows.append({
            "probe": probe.name,
            "fiber": probe.fiber or "",
            "anchor": probe.anchor,
            "distance": probe.distance(delta),
            "region": classify_region(probe, config, delta, **options),
            "weight": field.weight(probe),
            "label": label,
            "expected": probe.expected or "",
            "match": probe.expected is None or probe.expected == label,
        })
    frame = pd.DataFrame(rows)
    if path is not None:
        frame.to_csv(path, index=False)
        logger.info(f"bubble map with {len(frame)} probes written to {path}")
    return frame


# ---------------------------------------------------------------------------
# Consistency checks on Ooguri-Vafa charts
# ---------------------------------------------------------------------------

def _ov_scales(nu: int, delta: float, poles: Optional[MonopoleSet]) -> FiberScales:
    return FiberScales(fiber=parse_fiber(f"I{nu}"), delta=delta, poles=poles)


def lipschitz_constant(nu: int, delta: float, base_points: np.ndarray, step: float = 1e-3,
                       poles: Optional[MonopoleSet] = None, seed: int = 0) -> float:
    """
    max |s(x) - s(y)| / d(x, y) over pairs (x, x + step * random direction)

    d is the length of the base segment in delta^2 V |du|^2.
    """
    scales = _ov_scales(nu, delta, poles)
    chart = GHChart(kind="ooguri_vafa", poles=scales.poles, T=scales.T, delta=delta, check_domain=False)
    pts = np.atleast_2d(np.asarray(base_points, dtype=float))
    rng = np.random.default_rng(seed)
    offsets = rng.normal(size=pts.shape)
    offsets *= step / np.linalg.norm(offsets, axis=1)[:, None]
    moved = pts + offsets
    mid, _ = chart.potential(0.5 * (pts + moved))
    lengths = delta * np.sqrt(mid) * step
    ratio = np.abs(scales.s_nu(moved) - scales.s_nu(pts)) / lengths
    return float(np.max(ratio))


def curvature_proxy_ratio(nu: int, delta: float, base_points: np.ndarray,
                          poles: Optional[MonopoleSet] = None, relative_step: float = 0.05) -> np.ndarray:
    """
    |Rm|^(-1/2) of the Ooguri-Vafa metric divided by s(x), per point

    Both sides are taken without the common factor e^(-T/nu); the FD step
    is a fixed fraction of the distance to the nearest monopole.
    """
    scales = _ov_scales(nu, delta, poles)
    chart = GHChart(kind="ooguri_vafa", poles=scales.poles, T=scales.T, delta=delta, check_domain=False)
    pts = np.atleast_2d(np.asarray(base_points, dtype=float))
    ratios = np.zeros(len(pts))
    for idx in range(len(pts)):
        u = pts[idx:idx + 1]
        point = np.concatenate([u, np.zeros((1, 1))], axis=1)
        h = relative_step * float(scales.pole_distance(u)[0])
        sample = riemann_fd(lambda p: gh_metric(chart, p), point, h)
        proxy = float(sample.riemann_norm[0]) ** -0.5
        ratios[idx] = proxy / (math.exp(scales.T / scales.n_poles) * float(scales.s_nu(u)[0]))
    return ratios


def pole_shell_points(nu: int, delta: float, count: int = 12, poles: Optional[MonopoleSet] = None) -> np.ndarray:
    """Base points between 1/(2T) and iota0/2 from the first monopole, off the Dirac string"""
    scales = _ov_scales(nu, delta, poles)
    radii = np.geomspace(0.5 / scales.T, 0.5 * scales.iota0(), count)
    angles = np.linspace(0.3, 2.8, count)
    t = scales.poles.array()[0]
    return np.stack([radii * np.sin(angles), 0.3 * radii * np.sin(angles), t + radii * np.cos(angles)], axis=1)


def check_curvature_band(nu: int, delta: float, band: Tuple[float, float] = DEFAULT_BAND,
                         count: int = 12) -> Tuple[bool, np.ndarray]:
    points = pole_shell_points(nu, delta, count)
    ratios = curvature_proxy_ratio(nu, delta, points)
    passed = bool(np.all((ratios >= band[0]) & (ratios <= band[1])))
    logger.debug(f"curvature band nu={nu}: ratios in [{ratios.min():.3g}, {ratios.max():.3g}]")
    return passed, ratios
