"""
Period data, semi-flat forms, McLean metric, hyperkahler coframe and the
closed-form d+ / d* operators on y-dependent 1-forms
"""
import math
from typing import Callable, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from geometry.diffgeo_numerics import fd_d_pointwise
from geometry.errors import SingularFiberHit
from geometry.lattice_greens import HolomorphicPolynomial
from geometry.model_spaces import ALG_TABLE
from geometry.triple_algebra import hodge_star_2form

SINGULAR_TOLERANCE = 1e-300


def _check_base(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=complex)
    if np.any(np.abs(y) <= SINGULAR_TOLERANCE):
        raise SingularFiberHit("base point is the singular fiber y = 0")
    return y


class PeriodModel:
    """Holomorphic periods (tau1, tau2) of the fibration over a slit disc"""

    fiber_type: str = "regular"
    beta: float = 1.0

    def periods(self, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def derivatives(self, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def imaginary_product(self, y: np.ndarray) -> np.ndarray:
        """Im(conj(tau1) tau2), the McLean conformal factor"""
        tau1, tau2 = self.periods(y)
        return np.imag(np.conj(tau1) * tau2)

    def imaginary_product_dy(self, y: np.ndarray) -> np.ndarray:
        """Wirtinger derivative d/dy of Im(conj(tau1) tau2)"""
        tau1, tau2 = self.periods(y)
        d1, d2 = self.derivatives(y)
        return (np.conj(tau1) * d2 - d1 * np.conj(tau2)) / 2j


class ConstantPeriods(PeriodModel):

    def __init__(self, tau1: complex = 1.0, tau2: complex = 1j, beta: float = 1.0):
        self.tau1 = complex(tau1)
        self.tau2 = complex(tau2)
        self.beta = beta

    def periods(self, y):
        y = np.asarray(y, dtype=complex)
        return np.full(y.shape, self.tau1), np.full(y.shape, self.tau2)

    def derivatives(self, y):
        y = np.asarray(y, dtype=complex)
        return np.zeros(y.shape, dtype=complex), np.zeros(y.shape, dtype=complex)

    def limit(self) -> Tuple[complex, complex]:
        return self.tau1, self.tau2


class InuPeriods(PeriodModel):
    """
    tau1 = 1, tau2 = (nu / 2 pi i) log y + h(y) on the disc slit along a ray

    `sheet` counts turns around y = 0; crossing the slit once adds nu to tau2.
    """

    def __init__(self, nu: int, h_correction: Optional[HolomorphicPolynomial] = None,
                 sheet: int = 0, branch_angle: float = -math.pi):
        self.nu = nu
        self.h_correction = h_correction or HolomorphicPolynomial()
        self.sheet = sheet
        self.branch_angle = branch_angle
        self.fiber_type = f"I{nu}"

    def log(self, y: np.ndarray) -> np.ndarray:
        y = _check_base(y)
        angle = np.mod(np.angle(y) - self.branch_angle, 2.0 * math.pi) + self.branch_angle
        return np.log(np.abs(y)) + 1j * (angle + 2.0 * math.pi * self.sheet)

    def periods(self, y):
        y = _check_base(y)
        tau2 = self.nu / (2j * math.pi) * self.log(y) + self.h_correction.value(y)
        return np.ones(y.shape, dtype=complex), tau2

    def derivatives(self, y):
        y = _check_base(y)
        return np.zeros(y.shape, dtype=complex), self.nu / (2j * math.pi * y) + self.h_correction.derivative(y)

    def monodromy(self) -> "InuPeriods":
        return InuPeriods(self.nu, self.h_correction, self.sheet + 1, self.branch_angle)


class FiniteMonodromyPeriods(PeriodModel):
    """
    Kodaira-form periods in the coordinate u = y^beta

    tau1 = (1 - w)/sqrt(Im tau), tau2 = (tau - conj(tau) w)/sqrt(Im tau),
    w = u^(h/2). Then Im(conj(tau1) tau2) = 1 - |u|^h exactly, so the
    distortion order equals the exponent h. By default h is the tabulated
    lambda_beta, and a distortion fit of the default model only confirms the
    period formulas reproduce the table; it does not derive the table. The
    normal form of a type IV fiber (`kodaira`) has h = 2 mod 3, whose order
    h >= 2 sits above the tabulated bound of 1.
    """

    def __init__(self, fiber_type: str, h_exponent: Optional[float] = None, sheet: int = 0):
        row = ALG_TABLE[fiber_type]
        self.fiber_type = fiber_type
        self.beta = row.beta
        tau = complex(*row.tau) if row.tau is not None else 1j
        self.tau = tau
        self.h_exponent = row.distortion_order if h_exponent is None else h_exponent
        self.sheet = sheet

    @classmethod
    def kodaira(cls, h: int, sheet: int = 0) -> "FiniteMonodromyPeriods":
        """
        Type IV periods tau2 / tau1 = (omega - conj(omega) y^(h/3)) / (1 - y^(h/3))
        with u = y^(2/3) and the holomorphic normalization frozen at y = 0

        Raises:
            ValueError: unless h is an integer >= 2 with h = 2 mod 3
        """
        if int(h) != h or h < 2 or h % 3 != 2:
            raise ValueError(f"Kodaira exponent must be an integer h >= 2 with h = 2 mod 3, got {h}")
        return cls("IV", h_exponent=float(h), sheet=sheet)

    def _w(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        u = _check_base(u)
        angle = np.angle(u) + 2.0 * math.pi * self.sheet
        power = 0.5 * self.h_exponent
        w = np.abs(u) ** power * np.exp(1j * power * angle)
        return w, power * w / u

    def periods(self, u):
        w, _ = self._w(u)
        norm = math.sqrt(self.tau.imag)
        return (1.0 - w) / norm, (self.tau - np.conj(self.tau) * w) / norm

    def derivatives(self, u):
        _, dw = self._w(u)
        norm = math.sqrt(self.tau.imag)
        return -dw / norm, -np.conj(self.tau) * dw / norm

    def limit(self) -> Tuple[complex, complex]:
        """Periods of the flat model at u = 0"""
        norm = math.sqrt(self.tau.imag)
        return 1.0 / norm, self.tau / norm


class SL2Periods(PeriodModel):
    """Periods in the basis (a g1 + b g2, c g1 + d g2) for [[a, b], [c, d]] in SL(2, Z)"""

    def __init__(self, base: PeriodModel, matrix: Tuple[Tuple[int, int], Tuple[int, int]]):
        (a, b), (c, d) = matrix
        if a * d - b * c != 1:
            raise ValueError(f"basis change {matrix} is not in SL(2, Z)")
        self.base = base
        self.matrix = np.array(matrix, dtype=float)
        self.fiber_type = base.fiber_type
        self.beta = base.beta

    def periods(self, y):
        t1, t2 = self.base.periods(y)
        (a, b), (c, d) = self.matrix
        return a * t1 + b * t2, c * t1 + d * t2

    def derivatives(self, y):
        t1, t2 = self.base.derivatives(y)
        (a, b), (c, d) = self.matrix
        return a * t1 + b * t2, c * t1 + d * t2

    def fiber_map(self) -> np.ndarray:
        """Linear map x -> x' with tau'.x' = tau.x"""
        return np.linalg.inv(self.matrix.T)


def mclean_metric(periods: PeriodModel, y) -> np.ndarray:
    """
    McLean metric Im(conj(tau1) tau2) |dy|^2 as 2x2 matrices

    Raises:
        SingularFiberHit: at y = 0
    """
    y = _check_base(np.atleast_1d(y))
    factor = periods.imaginary_product(y)
    return factor[:, None, None] * np.eye(2)[None]


# ---------------------------------------------------------------------------
# Semi-flat chart
# ---------------------------------------------------------------------------

class SemiFlatChart(BaseModel):

    """Semi-flat chart with coordinates (Re y, Im y, x1, x2), fibers of area delta^2"""
    model_config = {"arbitrary_types_allowed": True}

    periods: PeriodModel = Field(..., description="Period model")
    delta: float = Field(1.0, gt=0, description="Fiber-area scale")

    def base(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return _check_base(pts[:, 0] + 1j * pts[:, 1])

    def coframe(self, points: np.ndarray) -> np.ndarray:
        """e^1..e^4 as rows, shape (m, 4, 4)"""
        y = self.base(points)
        tau1, tau2 = self.periods.periods(y)
        factor = np.imag(np.conj(tau1) * tau2)
        root = np.sqrt(factor)
        frame = np.zeros((len(y), 4, 4))
        frame[:, 0, 0] = root
        frame[:, 1, 1] = root
        frame[:, 2, 2] = self.delta * tau1.real / root
        frame[:, 2, 3] = self.delta * tau2.real / root
        frame[:, 3, 2] = self.delta * tau1.imag / root
        frame[:, 3, 3] = self.delta * tau2.imag / root
        return frame

    def metric(self, points: np.ndarray) -> np.ndarray:
        frame = self.coframe(points)
        return np.einsum("mai,maj->mij", frame, frame)

    def fiber_form(self, points: np.ndarray) -> np.ndarray:
        """delta (tau1 dx1 + tau2 dx2) as complex 4-vectors"""
        y = self.base(points)
        tau1, tau2 = self.periods.periods(y)
        vec = np.zeros((len(y), 4), dtype=complex)
        vec[:, 2] = self.delta * tau1
        vec[:, 3] = self.delta * tau2
        return vec


def _wedge(alpha: np.ndarray, beta: np.ndarray) -> np.ndarray:
    return alpha[:, :, None] * beta[:, None, :] - beta[:, :, None] * alpha[:, None, :]


def semiflat_forms(chart: SemiFlatChart, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    omega = delta^2 dx1^dx2 + Im(conj(tau1) tau2) dy1^dy2 and
    Omega = -delta (tau1 dx1 + tau2 dx2) ^ dy

    Returns:
        omega (m, 4, 4) real, Omega (m, 4, 4) complex

    Raises:
        SingularFiberHit: over y = 0
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    y = chart.base(pts)
    factor = chart.periods.imaginary_product(y)
    omega = np.zeros((len(y), 4, 4))
    omega[:, 0, 1], omega[:, 1, 0] = factor, -factor
    omega[:, 2, 3], omega[:, 3, 2] = chart.delta ** 2, -chart.delta ** 2
    dy = np.zeros((len(y), 4), dtype=complex)
    dy[:, 0], dy[:, 1] = 1.0, 1j
    holo = _wedge(dy, chart.fiber_form(pts))
    return omega, holo


def semiflat_triple(chart: SemiFlatChart, points: np.ndarray) -> np.ndarray:
    omega, holo = semiflat_forms(chart, points)
    return np.stack([omega, holo.real, holo.imag], axis=1)


# ---------------------------------------------------------------------------
# d+ and d* of y-dependent 1-forms
# ---------------------------------------------------------------------------

class SemiFlatOneForm(BaseModel):

    """
    eta = f dy + conj(f) dybar + Re(F e^x) with e^x = e^3 + i e^4

    All coefficients are functions of y alone. Only d_ybar f and d_y F are
    supplied; d_y conj(f) is conj(d_ybar f).
    """
    model_config = {"arbitrary_types_allowed": True}

    f: Callable[[np.ndarray], np.ndarray]
    f_dybar: Callable[[np.ndarray], np.ndarray]
    F: Callable[[np.ndarray], np.ndarray] = Field(default=lambda y: np.zeros_like(y))
    F_dy: Callable[[np.ndarray], np.ndarray] = Field(default=lambda y: np.zeros_like(y))

    def components(self, chart: SemiFlatChart, points: np.ndarray) -> np.ndarray:
        """Real chart components (m, 4)"""
        y = chart.base(points)
        f = self.f(y)
        eta = np.zeros((len(y), 4))
        eta[:, 0] = 2.0 * f.real
        eta[:, 1] = -2.0 * f.imag
        frame = chart.coframe(points)
        F = self.F(y)
        eta += F.real[:, None] * frame[:, 2] - F.imag[:, None] * frame[:, 3]
        return eta


def dplus_dstar_semiflat(eta: SemiFlatOneForm, chart: SemiFlatChart,
                         points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Closed forms of d+ eta and d* eta on the semi-flat chart

    d+ eta = (d_y conj(f) - d_ybar f)(dy^dybar)+ + Re(d_y(sqrt(I) F)/sqrt(I) dy ^ e^x),
    d* eta = -(2/I)(d_ybar f + d_y conj(f)), with I = Im(conj(tau1) tau2)
    and (dy^dybar)+ = -i omega / I.

    Returns:
        d+ eta (m, 4, 4) and d* eta (m,)

    Raises:
        SingularFiberHit: over y = 0
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    y = chart.base(pts)
    factor = chart.periods.imaginary_product(y)
    factor_dy = chart.periods.imaginary_product_dy(y)
    root = np.sqrt(factor)

    f_dybar = eta.f_dybar(y)
    conj_f_dy = np.conj(eta.f_dybar(y))
    dstar = -(2.0 / factor) * (f_dybar + conj_f_dy).real

    omega, _ = semiflat_forms(chart, pts)
    first = ((conj_f_dy - f_dybar) * (-1j / factor))[:, None, None] * omega

    frame = chart.coframe(pts)
    dy = np.zeros((len(y), 4), dtype=complex)
    dy[:, 0], dy[:, 1] = 1.0, 1j
    ex = frame[:, 2] + 1j * frame[:, 3]
    F = eta.F(y)
    coefficient = (root * eta.F_dy(y) + F * factor_dy / (2.0 * root)) / root
    second = coefficient[:, None, None] * _wedge(dy, ex)
    return np.real(first + second), dstar


def fd_dplus_dstar(eta: SemiFlatOneForm, chart: SemiFlatChart, points: np.ndarray,
                   h: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Finite-difference d+ eta = 1/2 (d eta + * d eta) and d* eta = -div eta
    on the full four-dimensional chart
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d_eta = fd_d_pointwise(lambda p: eta.components(chart, p), pts, 1, h)
    metrics = chart.metric(pts)
    dplus = np.zeros_like(d_eta)
    for idx in range(len(pts)):
        dplus[idx] = 0.5 * (d_eta[idx] + hodge_star_2form(d_eta[idx], metrics[idx]))

    def flux(p: np.ndarray) -> np.ndarray:
        g = chart.metric(p)
        density = np.sqrt(np.linalg.det(g))
        return density[:, None] * np.einsum("mij,mj->mi", np.linalg.inv(g), eta.components(chart, p))

    divergence = np.zeros(len(pts))
    for a in range(4):
        step = np.zeros(4)
        step[a] = h
        divergence += (flux(pts + step)[:, a] - flux(pts - step)[:, a]) / (2.0 * h)
    density = np.sqrt(np.linalg.det(metrics))
    return dplus, -divergence / density
