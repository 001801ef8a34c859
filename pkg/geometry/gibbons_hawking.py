"""
Gibbons-Hawking hyperkahler triples: multi-Ooguri-Vafa, Taub-NUT and
constant-potential charts, with gauge bookkeeping and the Z2 quotient data
"""
import math
from typing import Callable, List, Literal, Optional, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field
from scipy.special import k1, zeta

from geometry.errors import DefiniteViolation, FixedPointMismatch, GaugeStringHit
from geometry.lattice_greens import (
    CHUNK,
    SWITCH_RADIUS,
    HolomorphicPolynomial,
    MonopoleSet,
    bessel_mode_count,
    check_poles,
    image_count,
    potential_values,
    wrap_circle,
)

STRING_TOLERANCE = 1e-10
Gauge = Literal["upper", "lower", "axis"]


# ---------------------------------------------------------------------------
# d(phi)-coefficient of the periodic connection
# ---------------------------------------------------------------------------

def _half_plus(d: np.ndarray, r: np.ndarray, rho2: np.ndarray) -> np.ndarray:
    """1/2 (d/r + 1) without cancellation"""
    return np.where(d >= 0.0, 0.5 * (r + d) / r, 0.5 * rho2 / (r * (r - d)))


def _half_minus(d: np.ndarray, r: np.ndarray, rho2: np.ndarray) -> np.ndarray:
    """1/2 (d/r - 1) without cancellation"""
    return np.where(d <= 0.0, 0.5 * (d - r) / r, -0.5 * rho2 / (r * (r + d)))


def _image_phi_coefficient(rho: np.ndarray, s: np.ndarray, count: int) -> np.ndarray:
    """sum_n 1/2 (f_n + sigma_n) for one pole at the origin, upper gauge, s in [-1/2, 1/2)"""
    n = np.arange(-count, count + 1, dtype=float)
    d = s[:, None] - n[None, :]
    rho2 = (rho ** 2)[:, None]
    r = np.sqrt(rho2 + d ** 2)
    upper = n[None, :] >= 0.0
    terms = np.where(upper, _half_plus(d, r, rho2), _half_minus(d, r, rho2))
    return np.sum(terms, axis=1) + rho ** 2 * s * float(zeta(3.0, count + 1.0))


def _fourier_phi_coefficient(rho: np.ndarray, x: np.ndarray, tol: float) -> np.ndarray:
    """(z - t) + 1/2 + 2 sum_k rho K_1(2 pi k rho) sin(2 pi k (z - t)), upper gauge"""
    count, _ = bessel_mode_count(float(np.min(rho)), 1, tol)
    kappa = 2.0 * math.pi * np.arange(1, count + 1)
    series = rho[:, None] * k1(kappa[None, :] * rho[:, None]) * np.sin(kappa[None, :] * x[:, None])
    return x + 0.5 + 2.0 * np.sum(series, axis=1)


def gauge_shifts(poles: MonopoleSet, gauge: Gauge, window: float = 0.0) -> np.ndarray:
    """Integer subtracted from the upper-gauge coefficient of each pole"""
    t = poles.array()
    if gauge == "upper":
        return np.zeros(poles.nu)
    if gauge == "lower":
        return np.ones(poles.nu)
    return np.floor(window - t) + 1.0


def phi_coefficient(points: np.ndarray, poles: MonopoleSet, gauge: Gauge = "upper",
                    window: float = 0.0, tol: float = 1e-12) -> np.ndarray:
    """
    Coefficient a of the connection A = a dphi for the periodic Green's part

    Each pole contributes its upper-gauge coefficient minus a gauge integer;
    a(rho, z + 1) = a(rho, z) + nu.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    check_poles(pts, poles)
    rho = np.hypot(pts[:, 0], pts[:, 1])
    shifts = gauge_shifts(poles, gauge, window)

    on_axis = rho < STRING_TOLERANCE
    if np.any(on_axis):
        z = pts[on_axis, 2]
        axis_value = np.floor(z[:, None] - poles.array()[None, :]) + 1.0 - shifts[None, :]
        if np.any(axis_value != 0.0):
            idx = int(np.argmax(np.any(axis_value != 0.0, axis=1)))
            raise GaugeStringHit(
                f"point {pts[on_axis][idx].tolist()} lies on a {gauge} gauge string"
            )

    result = np.zeros(len(pts))
    far = rho >= SWITCH_RADIUS
    for i, t in enumerate(poles.array()):
        x = pts[:, 2] - t
        if np.any(far):
            result[far] += _fourier_phi_coefficient(rho[far], x[far], tol)
        near = ~far
        if np.any(near):
            count, _ = image_count(pts[near], poles, tol)
            s = wrap_circle(x[near])
            shift = x[near] - s
            values = np.zeros(int(np.count_nonzero(near)))
            for start in range(0, len(values), CHUNK):
                block = slice(start, start + CHUNK)
                values[block] = _image_phi_coefficient(rho[near][block], s[block], count)
            result[near] += values + shift
        result -= shifts[i]
    return result


# ---------------------------------------------------------------------------
# Connection evaluators
# ---------------------------------------------------------------------------

class ConnectionEvaluator:
    """
    Cartesian connection components (A1, A2, A3) with theta = du4 + A

    A = a dphi + (-2 pi Re h(delta w) + c) du3 for multi-Ooguri-Vafa charts.
    """

    def __init__(self, poles: Optional[MonopoleSet], gauge: Gauge = "upper", window: float = 0.0,
                 h_correction: Optional[HolomorphicPolynomial] = None, delta: float = 1.0,
                 shift_c: float = 0.0, tol: float = 1e-12, taub_nut: bool = False):
        self.poles = poles
        self.gauge = gauge
        self.window = window
        self.h_correction = h_correction
        self.delta = delta
        self.shift_c = shift_c
        self.tol = tol
        self.taub_nut = taub_nut

    def phi_coefficient(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        if self.taub_nut:
            return taub_nut_phi_coefficient(pts, self.gauge)
        if self.poles is None:
            return np.zeros(len(pts))
        return phi_coefficient(pts, self.poles, self.gauge, self.window, self.tol)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        a = self.phi_coefficient(pts)
        rho2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
        safe = np.where(rho2 > 0.0, rho2, 1.0)
        comps = np.zeros((len(pts), 3))
        comps[:, 0] = np.where(rho2 > 0.0, -a * pts[:, 1] / safe, 0.0)
        comps[:, 1] = np.where(rho2 > 0.0, a * pts[:, 0] / safe, 0.0)
        comps[:, 2] = self.shift_c
        if self.h_correction is not None and not self.h_correction.is_zero():
            w = pts[:, 0] + 1j * pts[:, 1]
            comps[:, 2] -= 2.0 * math.pi * np.real(self.h_correction.value(self.delta * w))
        return comps


def taub_nut_phi_coefficient(points: np.ndarray, gauge: Gauge = "upper") -> np.ndarray:
    """1/2 (z/r + 1) (upper) or 1/2 (z/r - 1) (lower) for a unit-charge monopole at the origin"""
    rho2 = points[:, 0] ** 2 + points[:, 1] ** 2
    z = points[:, 2]
    r = np.sqrt(rho2 + z ** 2)
    if np.any(r == 0.0):
        raise GaugeStringHit("Taub-NUT connection evaluated at the nut")
    on_axis = rho2 < STRING_TOLERANCE ** 2
    if gauge == "lower":
        if np.any(on_axis & (z < 0.0)):
            raise GaugeStringHit("point lies on the -u3 string of the lower gauge")
        return _half_minus(z, r, rho2)
    if np.any(on_axis & (z > 0.0)):
        raise GaugeStringHit("point lies on the +u3 string of the upper gauge")
    return _half_plus(z, r, rho2)


def build_connection(poles: Optional[MonopoleSet], gauge: Gauge = "upper", window: float = 0.0,
                     h_correction: Optional[HolomorphicPolynomial] = None, delta: float = 1.0,
                     shift_c: float = 0.0, tol: float = 1e-12) -> ConnectionEvaluator:
    """
    Connection solving d theta = *dV for V = T + G_P + 2 pi Im h

    Args:
        poles: monopole set, or None for a constant potential (A = 0)
        gauge: "upper" (strings along +u3), "lower" (strings along -u3), or
            "axis" (regular on the axis window containing `window`)
        window: axis point kept regular by the axis gauge
        h_correction: polynomial h; contributes -2 pi Re h(delta w) du3
        delta: scale inside h
        shift_c: constant c in theta + c du3
        tol: series tolerance

    Returns:
        ConnectionEvaluator
    """
    return ConnectionEvaluator(poles, gauge, window, h_correction, delta, shift_c, tol)


# ---------------------------------------------------------------------------
# Charts, metric and triple
# ---------------------------------------------------------------------------

class GHChart(BaseModel):

    """Gibbons-Hawking chart over a box in Q^3 (or R^3) with fiber u4 in R/2piZ"""
    model_config = {"arbitrary_types_allowed": True}

    kind: Literal["ooguri_vafa", "taub_nut", "constant"] = Field(..., description="Potential family")
    poles: Optional[MonopoleSet] = Field(None, description="Monopole set for Ooguri-Vafa charts")
    T: float = Field(0.0, description="Constant term of the potential")
    delta: float = Field(1.0, gt=0, description="Collapsing parameter")
    delta0: float = Field(0.1, gt=0, description="Size of the base disc |delta w| <= 2 delta0")
    h_correction: Optional[HolomorphicPolynomial] = Field(None, description="Holomorphic correction h")
    gauge: Gauge = Field("upper", description="Connection gauge")
    window: float = Field(0.0, description="Axis window kept regular by the axis gauge")
    shift_c: float = Field(0.0, description="Period-matching constant c")
    constant_value: float = Field(2.0 * math.pi, gt=0, description="Potential of a constant chart")
    tol: float = Field(1e-12, gt=0, description="Series tolerance")
    check_domain: bool = Field(True, description="Refuse points outside the base disc")

    def connection(self) -> ConnectionEvaluator:
        if self.kind == "taub_nut":
            return ConnectionEvaluator(None, self.gauge, taub_nut=True)
        if self.kind == "constant":
            return ConnectionEvaluator(None)
        return build_connection(self.poles, self.gauge, self.window, self.h_correction,
                                self.delta, self.shift_c, self.tol)

    def potential(self, base_points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """V and its gradient on base points (m, 3)"""
        pts = np.atleast_2d(np.asarray(base_points, dtype=float))
        if self.kind == "constant":
            return np.full(len(pts), self.constant_value), np.zeros((len(pts), 3))
        if self.kind == "taub_nut":
            r = np.linalg.norm(pts, axis=1)
            return 1.0 + 0.5 / r, -0.5 * pts / r[:, None] ** 3
        return potential_values(pts, self.poles, self.T, self.h_correction, self.delta,
                                self.delta0, self.tol, self.check_domain)

    def theta(self, points: np.ndarray) -> np.ndarray:
        """theta = du4 + A as 4-vectors (A1, A2, A3, 1)"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        comps = self.connection()(pts[:, :3])
        return np.concatenate([comps, np.ones((len(pts), 1))], axis=1)


def _wedge1(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    return alpha[:, :, None] * beta[:, None, :] - beta[:, :, None] * alpha[:, None, :]


def gh_forms_from_data(V: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """
    Gibbons-Hawking triple from potential values and theta vectors

    w1 = (du3^theta + V du1^du2)/2pi, w2 = (du1^theta + V du2^du3)/2pi,
    w3 = (du2^theta + V du3^du1)/2pi.
    """
    m = len(V)
    basis = np.eye(4)
    e = [np.repeat(basis[i][None], m, axis=0) for i in range(4)]
    scale = 1.0 / (2.0 * math.pi)
    v = V[:, None, None]
    w1 = _wedge1(e[2], theta) + v * _wedge1(e[0], e[1])
    w2 = _wedge1(e[0], theta) + v * _wedge1(e[1], e[2])
    w3 = _wedge1(e[1], theta) + v * _wedge1(e[2], e[0])
    return scale * np.stack([w1, w2, w3], axis=1)


def gh_metric(chart: GHChart, points: np.ndarray) -> np.ndarray:
    """
    g = (1/2pi)(V |du|^2 + V^-1 theta^2) at points (m, 4)

    Raises:
        GaugeStringHit, PoleHit, DomainViolation: as the underlying evaluators
        DefiniteViolation: if V <= 0 at some point
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    V, _ = chart.potential(pts[:, :3])
    if np.any(V <= 0.0):
        raise DefiniteViolation(f"potential not positive: min V = {float(np.min(V)):.3g}")
    theta = chart.theta(pts)
    base = np.zeros((len(pts), 4, 4))
    base[:, [0, 1, 2], [0, 1, 2]] = V[:, None]
    metric = base + theta[:, :, None] * theta[:, None, :] / V[:, None, None]
    return metric / (2.0 * math.pi)


class GHTriple:
    """Evaluator for the Gibbons-Hawking triple of a chart, times a scale factor"""

    def __init__(self, chart: GHChart, scale: float = 1.0):
        self.chart = chart
        self.scale = scale

    def forms(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        V, _ = self.chart.potential(pts[:, :3])
        if np.any(V <= 0.0):
            raise DefiniteViolation(f"potential not positive: min V = {float(np.min(V)):.3g}")
        return self.scale * gh_forms_from_data(V, self.chart.theta(pts))

    def omega(self, index: int):
        return lambda points: self.forms(points)[:, index]

    def volume_density(self, points: np.ndarray) -> np.ndarray:
        V, _ = self.chart.potential(np.atleast_2d(points)[:, :3])
        return self.scale ** 2 * V / (4.0 * math.pi ** 2)


def gh_triple(chart: GHChart, scale: float = 1.0) -> GHTriple:
    """Gibbons-Hawking triple of `chart`; scale = delta^2 gives the flat rescaling"""
    return GHTriple(chart, scale)


def monopole_residual(chart: GHChart, base_points: np.ndarray, h: float) -> float:
    """
    sup |d theta - *dV| on base points, derivatives of A by central differences

    With (dA)_{23} = dV/du1, (dA)_{31} = dV/du2, (dA)_{12} = dV/du3.
    """
    pts = np.atleast_2d(np.asarray(base_points, dtype=float))
    connection = chart.connection()
    _, grad_v = chart.potential(pts)
    jac = np.zeros((len(pts), 3, 3))
    for b in range(3):
        step = np.zeros(3)
        step[b] = h
        jac[:, :, b] = (connection(pts + step) - connection(pts - step)) / (2.0 * h)
    curl = np.stack([
        jac[:, 2, 1] - jac[:, 1, 2],
        jac[:, 0, 2] - jac[:, 2, 0],
        jac[:, 1, 0] - jac[:, 0, 1],
    ], axis=1)
    residual = float(np.max(np.abs(curl - grad_v)))
    logger.debug(f"monopole residual at h={h:.3g}: {residual:.3e}")
    return residual


# ---------------------------------------------------------------------------
# Z2 quotient data
# ---------------------------------------------------------------------------

def involution(points: np.ndarray, center: float = 0.0) -> np.ndarray:
    """Psi(u, u4) = (-u1, -u2, 2 center - u3, -u4)"""
    pts = np.atleast_2d(np.asarray(points, dtype=float)).copy()
    pts[:, 0] *= -1.0
    pts[:, 1] *= -1.0
    pts[:, 2] = 2.0 * center - pts[:, 2]
    if pts.shape[1] > 3:
        pts[:, 3] = -pts[:, 3]
    return pts


def involution_pullback(form_fn: Callable[[np.ndarray], np.ndarray], degree: int = 2,
                        center: float = 0.0) -> Callable[[np.ndarray], np.ndarray]:
    """
    Psi^* of a k-form field given by its component evaluator

    The linear part of Psi is -Id, so (Psi^* alpha)(x) = (-1)^k alpha(Psi(x))
    componentwise; 2-forms pull back without a sign.
    """
    sign = -1.0 if degree % 2 else 1.0

    def pulled(points: np.ndarray) -> np.ndarray:
        return sign * form_fn(involution(points, center))

    return pulled


def fixed_points() -> List[Tuple[float, float, float, float]]:
    """Fixed points q1..q4 of the involution on the fiber circles over u3 in {0, 1/2}"""
    return [(0.0, 0.0, 0.0, 0.0), (0.0, 0.0, 0.0, math.pi), (0.0, 0.0, 0.5, 0.0), (0.0, 0.0, 0.5, math.pi)]


def quotient_chart(poles: MonopoleSet, T: float, delta: float, delta0: float = 0.1,
                   h_correction: Optional[HolomorphicPolynomial] = None,
                   center: float = 0.0) -> GHChart:
    """
    Involution-invariant multi-Ooguri-Vafa chart

    Raises:
        FixedPointMismatch: if the poles are not symmetric under t -> -t,
            or a pole sits at a fixed circle point 0 or 1/2
    """
    if not poles.is_symmetric():
        raise FixedPointMismatch(f"pole set {poles.poles} is not symmetric under t -> -t")
    t = poles.array()
    if np.any(np.abs(wrap_circle(t)) < 1e-9) or np.any(np.abs(wrap_circle(t - 0.5)) < 1e-9):
        raise FixedPointMismatch("poles may not sit over the fixed circle points 0 and 1/2")
    if h_correction is not None and not h_correction.is_even():
        raise FixedPointMismatch("h must be even for an involution-invariant chart")
    return GHChart(kind="ooguri_vafa", poles=poles, T=T, delta=delta, delta0=delta0,
                   h_correction=h_correction, gauge="axis", window=center)


def flat_diameter_estimate(chart: GHChart, samples: int = 4000) -> float:
    """
    Length in delta^2 g of the base diameter through the axis plus half a fiber

    The base path runs along u1 at height midway between the first two poles.
    """
    radius = 2.0 * chart.delta0 / chart.delta
    t = chart.poles.array() if chart.poles is not None else np.array([0.0])
    height = float(np.sort(t)[0]) + 0.5 / max(len(t), 1)
    grid = np.concatenate([-np.geomspace(radius, 1e-3, samples // 2), np.geomspace(1e-3, radius, samples // 2)])
    pts = np.stack([grid, np.zeros_like(grid), np.full_like(grid, height)], axis=1)
    V, _ = chart.potential(pts)
    mid = 0.5 * (V[1:] + V[:-1])
    base_length = float(np.sum(np.sqrt(mid / (2.0 * math.pi)) * np.diff(grid)))
    fiber_length = math.pi * math.sqrt(1.0 / (2.0 * math.pi * float(np.min(V))))
    return chart.delta * (base_length + fiber_length)
