"""
Closed-form model geometries: Eguchi-Hanson, standard ALG models and flat orbifolds
"""
import cmath
import math
from typing import Callable, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from geometry.errors import InvalidPair, NonPositiveRadius

OMEGA = cmath.exp(2j * math.pi / 3.0)
PAIR_TOLERANCE = 1e-9


class ALGType(BaseModel):

    """One row of the ALG invariants table"""
    fiber_type: str = Field(..., description="Kodaira type of the compactifying fiber")
    beta: float = Field(..., description="Cone angle fraction beta")
    tau: Optional[Tuple[float, float]] = Field(None, description="Fixed modulus, None if free")
    distortion_order: float = Field(..., description="lambda_beta")
    b2: int = Field(..., description="Second Betti number of the ALG space")
    euler: int = Field(..., description="Euler number of the compactifying fiber")


ALG_TABLE: Dict[str, ALGType] = {
    "I0*": ALGType(fiber_type="I0*", beta=1 / 2, tau=None, distortion_order=2.0, b2=5, euler=6),
    "II*": ALGType(fiber_type="II*", beta=1 / 6, tau=(OMEGA.real, OMEGA.imag), distortion_order=4.0, b2=9, euler=10),
    "II": ALGType(fiber_type="II", beta=5 / 6, tau=(OMEGA.real, OMEGA.imag), distortion_order=2 / 5, b2=1, euler=2),
    "III*": ALGType(fiber_type="III*", beta=1 / 4, tau=(0.0, 1.0), distortion_order=2.0, b2=8, euler=9),
    "III": ALGType(fiber_type="III", beta=3 / 4, tau=(0.0, 1.0), distortion_order=2 / 3, b2=2, euler=3),
    "IV*": ALGType(fiber_type="IV*", beta=1 / 3, tau=(OMEGA.real, OMEGA.imag), distortion_order=1.0, b2=7, euler=8),
    "IV": ALGType(fiber_type="IV", beta=2 / 3, tau=(OMEGA.real, OMEGA.imag), distortion_order=1.0, b2=3, euler=4),
}


def alg_type_for_beta(beta: float) -> ALGType:
    for row in ALG_TABLE.values():
        if abs(row.beta - beta) < PAIR_TOLERANCE:
            return row
    raise InvalidPair(f"no ALG model with beta = {beta}")


# ---------------------------------------------------------------------------
# Eguchi-Hanson
# ---------------------------------------------------------------------------

def _check_radius(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise NonPositiveRadius(f"Eguchi-Hanson potential needs r > 0, got min r = {float(np.min(r))}")
    return r


def eh_potential(r):
    """
    phi_EH(r) = 1/2 (sqrt(1 + r^4) + 2 log r - log(1 + sqrt(1 + r^4)))

    Raises:
        NonPositiveRadius: if r <= 0
    """
    r = _check_radius(r)
    value = 0.5 * (np.sqrt(1.0 + r ** 4) - np.arcsinh(r ** -2.0))
    return float(value) if value.ndim == 0 else value


def eh_potential_difference(r):
    """phi_EH(r) - r^2/2 evaluated without cancellation (about -1/(4 r^2) for large r)"""
    r = _check_radius(r)
    value = 0.5 * (1.0 / (np.sqrt(1.0 + r ** 4) + r ** 2) - np.arcsinh(r ** -2.0))
    return float(value) if value.ndim == 0 else value


def eh_radial_derivatives(t: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """f, f', f'' of the Eguchi-Hanson potential as a function of t = r^2"""
    t = np.asarray(t, dtype=float)
    s = np.sqrt(1.0 + t ** 2)
    f = 0.5 * (s - np.arcsinh(1.0 / t))
    return f, s / (2.0 * t), -1.0 / (2.0 * s * t ** 2)


def flat_radial_derivatives(t: np.ndarray, quartic: float = 0.0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """f, f', f'' of t/2 + quartic * t^2"""
    t = np.asarray(t, dtype=float)
    return 0.5 * t + quartic * t ** 2, 0.5 + 2.0 * quartic * t, np.full_like(t, 2.0 * quartic)


DZ = np.array([[1.0, 1j, 0.0, 0.0], [0.0, 0.0, 1.0, 1j]])


def radial_hessian(points: np.ndarray, d1: np.ndarray, d2: np.ndarray) -> np.ndarray:
    """Complex Hessian H_{j kbar} = f' delta_jk + f'' zbar_j z_k of f(|z|^2)"""
    z = np.stack([points[:, 0] + 1j * points[:, 1], points[:, 2] + 1j * points[:, 3]], axis=1)
    eye = np.eye(2)[None]
    return d1[:, None, None] * eye + d2[:, None, None] * np.conj(z)[:, :, None] * z[:, None, :]


def kahler_form_from_hessian(hessian: np.ndarray) -> np.ndarray:
    """Real 2-form i H_{j kbar} dz_j ^ dzbar_k in coordinates (x1, y1, x2, y2)"""
    dz = DZ
    dzbar = np.conj(DZ)
    outer = (
        np.einsum("mjk,ja,kb->mab", hessian, dz, dzbar)
        - np.einsum("mjk,kb,ja->mab", hessian, dzbar, dz).transpose(0, 2, 1)
    )
    return np.real(1j * outer)


def kahler_metric_from_hessian(hessian: np.ndarray) -> np.ndarray:
    """Riemannian metric 2 Re(H_{j kbar} dz_j dzbar_k)"""
    raw = np.real(np.einsum("mjk,ja,kb->mab", hessian, DZ, np.conj(DZ)))
    return raw + raw.transpose(0, 2, 1)


def holomorphic_volume() -> np.ndarray:
    """dz1 ^ dz2 as a complex 4x4 matrix"""
    return np.outer(DZ[0], DZ[1]) - np.outer(DZ[1], DZ[0])


class EguchiHanson(BaseModel):

    """Eguchi-Hanson metric i d dbar phi_EH on (C^2 minus 0)/Z2, rescaled by (e^2 delta)^2"""
    scale_e: float = Field(1.0, gt=0, description="Orbifold scale parameter")
    delta: float = Field(1.0, gt=0, description="Collapsing parameter")
    r_min: float = Field(1e-3, gt=0, description="Smallest radius evaluated")

    @property
    def size(self) -> float:
        return self.scale_e ** 2 * self.delta

    def potential(self, points: np.ndarray) -> np.ndarray:
        """a^2 phi_EH(|zeta| / a) with a = e^2 delta"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(pts, axis=1) / self.size
        if np.any(r < self.r_min):
            raise NonPositiveRadius(f"radius below r_min = {self.r_min}")
        return self.size ** 2 * eh_potential(r)

    def forms(self, points: np.ndarray) -> np.ndarray:
        """Triple (omega_EH, Re dz1^dz2, Im dz1^dz2) at points (m, 4)"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        t = np.sum(pts ** 2, axis=1) / self.size ** 2
        if np.any(t < self.r_min ** 2):
            raise NonPositiveRadius(f"radius below r_min = {self.r_min}")
        _, d1, d2 = eh_radial_derivatives(t)
        # chain rule for a^2 f(|zeta|^2 / a^2)
        hessian = radial_hessian(pts, d1, d2 / self.size ** 2)
        omega = kahler_form_from_hessian(hessian)
        holo = holomorphic_volume()
        m = len(pts)
        return np.stack([omega, np.repeat(holo.real[None], m, 0), np.repeat(holo.imag[None], m, 0)], axis=1)

    def metric(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        t = np.sum(pts ** 2, axis=1) / self.size ** 2
        _, d1, d2 = eh_radial_derivatives(t)
        return kahler_metric_from_hessian(radial_hessian(pts, d1, d2 / self.size ** 2))


# ---------------------------------------------------------------------------
# Metric patches
# ---------------------------------------------------------------------------

class MetricPatch(BaseModel):

    """Coordinate chart with metric evaluator, identifications and a decay model"""
    model_config = {"arbitrary_types_allowed": True}

    name: str = Field(..., description="Patch label")
    dimension: int = Field(..., description="Chart dimension")
    metric: Callable[[np.ndarray], np.ndarray] = Field(..., description="Metric evaluator")
    group: List[np.ndarray] = Field(default_factory=list, description="Nontrivial linear group elements")
    periods: List[np.ndarray] = Field(default_factory=list, description="Lattice translation vectors")
    fixed_points: List[np.ndarray] = Field(default_factory=list, description="Fixed points of the group modulo periods")
    forms: Optional[Callable[[np.ndarray], np.ndarray]] = Field(None, description="Triple evaluator")
    decay_order: float = Field(math.inf, description="Declared decay order to the model")

    def _lattice_shifts(self) -> List[np.ndarray]:
        shifts = [np.zeros(self.dimension)]
        for period in self.periods:
            shifts = [s + k * period for s in shifts for k in (-1, 0, 1)]
        return shifts

    def singular_distance(self, points: np.ndarray) -> np.ndarray:
        """Flat distance to the singular locus (inf when there is none)"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if not self.fixed_points:
            return np.full(len(pts), math.inf)
        best = np.full(len(pts), math.inf)
        for q in self.fixed_points:
            for shift in self._lattice_shifts():
                best = np.minimum(best, np.linalg.norm(pts - (q + shift)[None], axis=1))
        return best

    def injectivity_radius(self, points: np.ndarray) -> np.ndarray:
        """Half the flat distance from x to its nearest nontrivial image"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        best = np.full(len(pts), math.inf)
        elements = [np.eye(self.dimension)] + list(self.group)
        for index, element in enumerate(elements):
            for shift in self._lattice_shifts():
                if index == 0 and not np.any(shift):
                    continue
                images = pts @ element.T + shift[None]
                best = np.minimum(best, np.linalg.norm(images - pts, axis=1))
        return 0.5 * best


def _flat_metric(dimension: int) -> Callable[[np.ndarray], np.ndarray]:
    def metric(points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        return np.repeat(np.eye(dimension)[None], len(pts), axis=0)
    return metric


def _rotation(angle: float) -> np.ndarray:
    return np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])


OrbifoldKind = Literal["R4/Z2", "(R3xS1)/Z2", "R3/Z2", "(R2xS1)/Z2", "R2/Z2", "cone"]


def flat_orbifold(kind: OrbifoldKind, beta: float = 1.0) -> MetricPatch:
    """
    Flat orbifold bubble as a fundamental-domain chart

    Circle factors have unit length and come last; the Z2 acts by -1 on
    every coordinate. The cone C(S^1_{2 pi beta}) acts by rotation.
    """
    if kind == "cone":
        rotation = _rotation(2.0 * math.pi * beta)
        trivial = abs(beta - 1.0) < PAIR_TOLERANCE
        return MetricPatch(
            name=f"C(S1_{2 * beta:.4g}pi)",
            dimension=2,
            metric=_flat_metric(2),
            group=[] if trivial else [rotation],
            fixed_points=[] if trivial else [np.zeros(2)],
        )
    dims = {"R4/Z2": (4, 0), "(R3xS1)/Z2": (3, 1), "R3/Z2": (3, 0), "(R2xS1)/Z2": (2, 1), "R2/Z2": (2, 0)}
    flat, circles = dims[kind]
    dimension = flat + circles
    periods = []
    fixed = [np.zeros(dimension)]
    if circles:
        period = np.zeros(dimension)
        period[-1] = 1.0
        periods.append(period)
        half = np.zeros(dimension)
        half[-1] = 0.5
        fixed.append(half)
    return MetricPatch(
        name=kind,
        dimension=dimension,
        metric=_flat_metric(dimension),
        group=[-np.eye(dimension)],
        periods=periods,
        fixed_points=fixed,
    )


# ---------------------------------------------------------------------------
# Standard ALG models
# ---------------------------------------------------------------------------

class ALGModel(BaseModel):

    """Flat model C_{beta,tau} = (C x T^2) / Z_{1/beta} with coordinates (U, V)"""
    beta: float = Field(..., gt=0, le=1, description="Cone angle fraction")
    tau: Tuple[float, float] = Field((0.0, 1.0), description="Fiber modulus (re, im)")

    def validate_pair(self) -> ALGType:
        """
        Raises:
            InvalidPair: if (beta, tau) is not a row of the ALG table
        """
        tau = complex(*self.tau)
        if tau.imag <= 0.0:
            raise InvalidPair(f"tau must lie in the upper half-plane, got {tau}")
        if abs(self.beta - 1.0) < PAIR_TOLERANCE:
            return ALGType(fiber_type="I0", beta=1.0, tau=None, distortion_order=math.inf, b2=0, euler=0)
        row = alg_type_for_beta(self.beta)
        if row.tau is not None and abs(complex(*row.tau) - tau) > PAIR_TOLERANCE:
            raise InvalidPair(f"beta = {self.beta} requires tau = {complex(*row.tau)}, got {tau}")
        return row

    @property
    def tau_complex(self) -> complex:
        return complex(*self.tau)

    def fiber_coordinate(self, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
        """V = (v1 + tau v2) / sqrt(Im tau)"""
        tau = self.tau_complex
        return (np.asarray(v1) + tau * np.asarray(v2)) / math.sqrt(tau.imag)

    def lattice_coordinates(self, fiber: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        tau = self.tau_complex
        scaled = np.asarray(fiber) * math.sqrt(tau.imag)
        v2 = scaled.imag / tau.imag
        return scaled.real - tau.real * v2, v2

    def rotation_matrix(self) -> np.ndarray:
        """Real 4x4 matrix of (U, V) -> (e^{2 pi i beta} U, e^{-2 pi i beta} V)"""
        angle = 2.0 * math.pi * self.beta
        matrix = np.zeros((4, 4))
        matrix[:2, :2] = _rotation(angle)
        matrix[2:, 2:] = _rotation(-angle)
        return matrix

    def identify(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return pts @ self.rotation_matrix().T

    def translate(self, points: np.ndarray, m: int, n: int) -> np.ndarray:
        """Fiber lattice translation V -> V + (m + n tau)/sqrt(Im tau)"""
        pts = np.atleast_2d(np.asarray(points, dtype=float)).copy()
        shift = (m + n * self.tau_complex) / math.sqrt(self.tau_complex.imag)
        pts[:, 2] += shift.real
        pts[:, 3] += shift.imag
        return pts

    def lattice_preserved(self) -> bool:
        """True if e^{-2 pi i beta} maps Z + Z tau to itself"""
        tau = self.tau_complex
        rot = cmath.exp(-2j * math.pi * self.beta)
        for generator in (1.0, tau):
            image = rot * generator
            b = image.imag / tau.imag
            a = image.real - b * tau.real
            if abs(a - round(a)) > 1e-9 or abs(b - round(b)) > 1e-9:
                return False
        return True

    def patch(self) -> MetricPatch:
        tau = self.tau_complex
        lattice = [np.array([0.0, 0.0, 1.0 / math.sqrt(tau.imag), 0.0]),
                   np.array([0.0, 0.0, tau.real / math.sqrt(tau.imag), math.sqrt(tau.imag)])]
        return MetricPatch(
            name=f"ALG(beta={self.beta:.4g})",
            dimension=4,
            metric=_flat_metric(4),
            group=[self.rotation_matrix()],
            periods=lattice,
            forms=lambda pts: alg_model_forms(self, pts)[0],
        )


def alg_model_forms(model: ALGModel, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Flat hyperkahler data at points (m, 4) with coordinates (Re U, Im U, Re V, Im V)

    Returns:
        triple (omega_FF, Re Omega_FF, Im Omega_FF) of shape (m, 3, 4, 4),
        Omega_FF = dU ^ dV as complex (m, 4, 4), and the metric h_FF (m, 4, 4)

    Raises:
        InvalidPair: if (beta, tau) is not admissible
    """
    model.validate_pair()
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    m = len(pts)
    omega = np.zeros((4, 4))
    omega[0, 1], omega[1, 0] = 1.0, -1.0
    omega[2, 3], omega[3, 2] = 1.0, -1.0
    holo = holomorphic_volume()
    triple = np.stack([omega, holo.real, holo.imag])
    return (
        np.repeat(triple[None], m, axis=0),
        np.repeat(holo[None], m, axis=0),
        np.repeat(np.eye(4)[None], m, axis=0),
    )


class SyntheticALG(BaseModel):

    """
    Flat ALG model plus the closed perturbation d eta_syn of decay order aleph

    eta_syn = Re(f dVbar) with f = eps |U|^(2 - aleph) / U. For aleph = 2 the
    coefficient is holomorphic and d eta_syn is anti-self-dual.
    """
    model: ALGModel
    amplitude: float = Field(1.0, description="Perturbation amplitude eps")
    order: float = Field(2.0, gt=1, description="Decay order aleph")

    def _coefficient(self, u: np.ndarray) -> np.ndarray:
        return self.amplitude * np.abs(u) ** (2.0 - self.order) / u

    def eta(self, points: np.ndarray) -> np.ndarray:
        """eta_syn as 4-vectors in (Re U, Im U, Re V, Im V)"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        f = self._coefficient(pts[:, 0] + 1j * pts[:, 1])
        eta = np.zeros((len(pts), 4))
        eta[:, 2] = f.real
        eta[:, 3] = f.imag
        return eta

    def psi(self, points: np.ndarray) -> np.ndarray:
        """d eta_syn as (m, 4, 4)"""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        u = pts[:, 0] + 1j * pts[:, 1]
        p = 0.5 * (2.0 - self.order)
        f = self._coefficient(u)
        f_u = (p - 1.0) * f / u
        f_ubar = p * f / np.conj(u)
        du = np.array([1.0, 1j, 0.0, 0.0])
        dubar = np.conj(du)
        dvbar = np.array([0.0, 0.0, 1.0, -1j])
        wedge_u = np.outer(du, dvbar) - np.outer(dvbar, du)
        wedge_ubar = np.outer(dubar, dvbar) - np.outer(dvbar, dubar)
        return np.real(f_u[:, None, None] * wedge_u[None] + f_ubar[:, None, None] * wedge_ubar[None])

    def forms(self, points: np.ndarray) -> np.ndarray:
        """Triple (omega_FF + d eta_syn, Re Omega_FF, Im Omega_FF)"""
        triple, _, _ = alg_model_forms(self.model, points)
        triple = triple.copy()
        triple[:, 0] += self.psi(points)
        return triple
