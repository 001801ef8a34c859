"""
Finite-difference exterior calculus on coordinate charts
"""
import itertools
import math
from typing import Callable, List, Optional, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field
from sklearn.linear_model import LinearRegression
from sklearn.metrics import r2_score

from geometry.errors import InsufficientRange, StencilOverrun


class Exclusion(BaseModel):

    """Ball removed from a chart (pole, gauge string sample, singular locus)"""
    center: List[float] = Field(..., description="Center coordinates")
    radius: float = Field(..., gt=0, description="Ball radius")


class ChartGrid(BaseModel):

    """Uniform grid over a coordinate box"""
    dimension: int = Field(..., ge=2, le=4, description="Chart dimension")
    lower: List[float] = Field(..., description="Lower box corner")
    upper: List[float] = Field(..., description="Upper box corner")
    periodic: List[bool] = Field(default_factory=list, description="Per-axis periodicity flags")
    h: float = Field(..., gt=0, description="Grid spacing")
    exclusions: List[Exclusion] = Field(default_factory=list, description="Excluded balls")

    def periodic_flags(self) -> List[bool]:
        if self.periodic:
            return list(self.periodic)
        return [False] * self.dimension

    def axes(self) -> List[np.ndarray]:
        """Coordinate axes; periodic axes drop the duplicated endpoint"""
        result = []
        for lo, hi, wrap in zip(self.lower, self.upper, self.periodic_flags()):
            count = int(round((hi - lo) / self.h))
            if wrap:
                result.append(lo + self.h * np.arange(count))
            else:
                result.append(lo + self.h * np.arange(count + 1))
        return result

    def mesh(self) -> np.ndarray:
        """Grid points with shape (dimension, n_1, ..., n_d)"""
        return np.array(np.meshgrid(*self.axes(), indexing="ij"))

    def points(self) -> np.ndarray:
        """Grid points flattened to shape (N, dimension)"""
        mesh = self.mesh()
        return mesh.reshape(self.dimension, -1).T

    def stencil_overrun(self, points: np.ndarray, reach: Optional[float] = None) -> np.ndarray:
        """Mask of points within radius + reach of some excluded center"""
        reach = 2.0 * self.h if reach is None else reach
        pts = np.atleast_2d(points)
        mask = np.zeros(len(pts), dtype=bool)
        for ball in self.exclusions:
            dist = np.linalg.norm(pts - np.asarray(ball.center)[None, :], axis=1)
            mask |= dist < ball.radius + reach
        return mask

    def check_stencil(self, points: np.ndarray, reach: Optional[float] = None) -> None:
        """
        Refuse evaluation when a stencil of width `reach` meets an exclusion

        Raises:
            StencilOverrun: if any point is within radius + reach of an excluded center
        """
        reach = 2.0 * self.h if reach is None else reach
        overrun = self.stencil_overrun(points, reach)
        if np.any(overrun):
            raise StencilOverrun(
                f"stencil of width {reach:.3g} overruns an exclusion at {int(np.sum(overrun))} points"
            )


class RateFit(BaseModel):

    """Result of a log-log or semi-log rate fit"""
    exponent: float = Field(..., description="Fitted slope")
    intercept: float = Field(..., description="Fitted intercept")
    r2: float = Field(..., description="Coefficient of determination")
    n_points: int = Field(..., description="Number of sweep points")


# ---------------------------------------------------------------------------
# Tensor helpers
# ---------------------------------------------------------------------------

def _permutation_sign(perm: Tuple[int, ...]) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def alternate(tensor: np.ndarray, degree: int) -> np.ndarray:
    """Antisymmetrize over the first `degree` axes"""
    if degree <= 1:
        return tensor
    total = np.zeros_like(tensor)
    rest = tuple(range(degree, tensor.ndim))
    for perm in itertools.permutations(range(degree)):
        total = total + _permutation_sign(perm) * np.transpose(tensor, perm + rest)
    return total / math.factorial(degree)


def levi_civita(n: int) -> np.ndarray:
    eps = np.zeros((n,) * n)
    for perm in itertools.permutations(range(n)):
        eps[perm] = _permutation_sign(perm)
    return eps


def wedge(alpha: np.ndarray, beta: np.ndarray, k: int, l: int) -> np.ndarray:
    """
    Wedge product of a k-form and an l-form stored as full antisymmetric tensors

    Leading k (resp. l) axes are form indices; trailing axes are broadcast
    sample axes and must agree.
    """
    n = alpha.shape[0] if k > 0 else beta.shape[0]
    a = alpha.reshape(alpha.shape[:k] + (1,) * l + alpha.shape[k:])
    b = beta.reshape((1,) * k + beta.shape)
    coeff = math.factorial(k + l) / (math.factorial(k) * math.factorial(l))
    product = a * b
    if product.shape[: k + l] != (n,) * (k + l):
        raise ValueError("form shapes do not match")
    return coeff * alternate(product, k + l)


def hodge_star(alpha: np.ndarray, k: int, metric: np.ndarray) -> np.ndarray:
    """
    Hodge star of a k-form at a single point for the metric `metric`

    Args:
        alpha: antisymmetric tensor with k axes of size n
        k: form degree
        metric: n x n symmetric positive definite matrix

    Returns:
        (n-k)-form as an antisymmetric tensor
    """
    n = metric.shape[0]
    inverse = np.linalg.inv(metric)
    raised = alpha
    for axis in range(k):
        raised = np.moveaxis(np.tensordot(inverse, raised, axes=([1], [axis])), 0, axis)
    eps = levi_civita(n)
    star = np.tensordot(raised, eps, axes=(list(range(k)), list(range(k))))
    return math.sqrt(np.linalg.det(metric)) * star / math.factorial(k)


# ---------------------------------------------------------------------------
# Grid operators
# ---------------------------------------------------------------------------

def _axis_derivative(values: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    if periodic:
        return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * h)
    return np.gradient(values, h, axis=axis, edge_order=2)


def fd_d(field: np.ndarray, degree: int, grid: ChartGrid) -> np.ndarray:
    """
    Exterior derivative of a form field sampled on a grid

    Args:
        field: array of shape (n,)*degree + grid shape, antisymmetric in form axes
        degree: form degree k
        grid: sampling grid

    Returns:
        (k+1)-form field with the same trailing grid shape; NaN at grid
        points whose stencil reaches an excluded ball

    Raises:
        StencilOverrun: if every grid point reaches an excluded ball
    """
    n = grid.dimension
    flags = grid.periodic_flags()
    overrun = grid.stencil_overrun(grid.points()).reshape(field.shape[degree:])
    if np.all(overrun):
        raise StencilOverrun("every stencil of the grid overruns an exclusion")
    with np.errstate(invalid="ignore", over="ignore"):
        partials = np.stack(
            [_axis_derivative(field, degree + a, grid.h, flags[a]) for a in range(n)],
            axis=0,
        )
        result = (degree + 1) * alternate(partials, degree + 1)
    if np.any(overrun):
        logger.debug(f"fd_d: {int(np.sum(overrun))} of {overrun.size} grid points masked near exclusions")
    result[..., overrun] = np.nan
    return result


def fd_laplacian(values: np.ndarray, grid: ChartGrid) -> np.ndarray:
    """Flat 3-point Laplacian of a scalar grid function on the grid interior"""
    n = grid.dimension
    flags = grid.periodic_flags()
    total = np.zeros_like(values)
    for a in range(n):
        total += (np.roll(values, -1, axis=a) - 2.0 * values + np.roll(values, 1, axis=a)) / grid.h ** 2
    interior = tuple(slice(None) if flags[a] else slice(1, -1) for a in range(n))
    return total[interior]


# ---------------------------------------------------------------------------
# Pointwise operators on callables
# ---------------------------------------------------------------------------

def fd_d_pointwise(form_fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray,
                   degree: int, h: float) -> np.ndarray:
    """
    Exterior derivative of a form evaluator by central differences

    Args:
        form_fn: maps points (m, n) to forms (m,) + (n,)*degree
        points: sample points (m, n)
        degree: form degree
        h: step

    Returns:
        (k+1)-forms with shape (m,) + (n,)*(degree+1)
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[1]
    partials = []
    for a in range(n):
        step = np.zeros(n)
        step[a] = h
        partials.append((form_fn(pts + step) - form_fn(pts - step)) / (2.0 * h))
    # axes: (a, m, i1..ik) -> (a, i1..ik, m)
    stacked = np.stack(partials, axis=0)
    stacked = np.moveaxis(stacked, 1, -1)
    result = (degree + 1) * alternate(stacked, degree + 1)
    return np.moveaxis(result, -1, 0)


def gradient_pointwise(fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, h: float) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[1]
    cols = []
    for a in range(n):
        step = np.zeros(n)
        step[a] = h
        cols.append((fn(pts + step) - fn(pts - step)) / (2.0 * h))
    return np.stack(cols, axis=-1)


def laplacian_pointwise(fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, h: float) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[1]
    centre = fn(pts)
    total = np.zeros_like(centre)
    for a in range(n):
        step = np.zeros(n)
        step[a] = h
        total += (fn(pts + step) - 2.0 * centre + fn(pts - step)) / h ** 2
    return total


def hessian_pointwise(fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, h: float) -> np.ndarray:
    """Second-order central Hessian, shape (m, n, n) (trailing value axes kept)"""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n = pts.shape[1]
    centre = fn(pts)
    hess = np.zeros((pts.shape[0], n, n) + centre.shape[1:], dtype=centre.dtype)
    eye = np.eye(n) * h
    for a in range(n):
        hess[:, a, a] = (fn(pts + eye[a]) - 2.0 * centre + fn(pts - eye[a])) / h ** 2
        for b in range(a + 1, n):
            mixed = (
                fn(pts + eye[a] + eye[b]) - fn(pts + eye[a] - eye[b])
                - fn(pts - eye[a] + eye[b]) + fn(pts - eye[a] - eye[b])
            ) / (4.0 * h ** 2)
            hess[:, a, b] = mixed
            hess[:, b, a] = mixed
    return hess


# ---------------------------------------------------------------------------
# Curvature
# ---------------------------------------------------------------------------

class CurvatureSample(BaseModel):

    """Curvature data at a batch of points"""
    model_config = {"arbitrary_types_allowed": True}

    riemann: np.ndarray = Field(..., description="R_iklm, shape (m, n, n, n, n)")
    ricci: np.ndarray = Field(..., description="R_km, shape (m, n, n)")
    riemann_norm: np.ndarray = Field(..., description="|Rm|_g per point")


def riemann_fd(metric_fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, h: float) -> CurvatureSample:
    """
    Riemann and Ricci tensors of a coordinate metric by finite differences

    Uses R_iklm = 1/2 (g_im,kl + g_kl,im - g_il,km - g_km,il)
    + g_np (G^n_kl G^p_im - G^n_km G^p_il).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    g = metric_fn(pts)
    dg = gradient_pointwise(metric_fn, pts, h)          # dg[m, i, j, a] = d_a g_ij
    ddg = hessian_pointwise(metric_fn, pts, h)          # ddg[m, a, b, i, j] = d_a d_b g_ij
    ginv = np.linalg.inv(g)
    first = 0.5 * (
        np.einsum("mnlk->mnkl", dg) + dg - np.einsum("mkln->mnkl", dg)
    )
    gamma = np.einsum("mpn,mnkl->mpkl", ginv, first)
    second = 0.5 * (
        np.einsum("mkliq->miklq", ddg)
        + np.einsum("miqkl->miklq", ddg)
        - np.einsum("mkqil->miklq", ddg)
        - np.einsum("milkq->miklq", ddg)
    )
    quadratic = (
        np.einsum("mnp,mnkl,mpiq->miklq", g, gamma, gamma)
        - np.einsum("mnp,mnkq,mpil->miklq", g, gamma, gamma)
    )
    riemann = second + quadratic
    ricci = np.einsum("mil,miklq->mkq", ginv, riemann)
    raised = np.einsum("mia,mkb,mlc,mqd,mabcd->miklq", ginv, ginv, ginv, ginv, riemann)
    norm = np.sqrt(np.abs(np.einsum("miklq,miklq->m", riemann, raised)))
    logger.debug(f"riemann_fd: {pts.shape[0]} points, h={h:.3g}, max|Rm|={float(np.max(norm)):.3e}")
    return CurvatureSample(riemann=riemann, ricci=ricci, riemann_norm=norm)


def ricci_residual(metric_fn: Callable[[np.ndarray], np.ndarray], points: np.ndarray, h: float) -> float:
    """Sup over points of the largest Ricci component"""
    sample = riemann_fd(metric_fn, points, h)
    return float(np.max(np.abs(sample.ricci)))


def complex_hessian(potential: Callable[[np.ndarray], np.ndarray], points: np.ndarray, h: float) -> np.ndarray:
    """
    Complex Hessian g_{j kbar} of a Kahler potential on C^2 = R^4

    Coordinates are z1 = x1 + i x2, z2 = x3 + i x4.
    """
    hess = hessian_pointwise(potential, points, h)
    result = np.zeros((hess.shape[0], 2, 2), dtype=complex)
    for j in range(2):
        for k in range(2):
            xj, yj, xk, yk = 2 * j, 2 * j + 1, 2 * k, 2 * k + 1
            result[:, j, k] = 0.25 * (
                hess[:, xj, xk] + hess[:, yj, yk]
                + 1j * (hess[:, xj, yk] - hess[:, yj, xk])
            )
    return result


def kahler_ricci_residual(potential: Callable[[np.ndarray], np.ndarray], points: np.ndarray,
                          h: float, grid: Optional[ChartGrid] = None) -> float:
    """
    Sup of |i d dbar log det g| for the Kahler metric of `potential`

    Args:
        potential: Kahler potential evaluator on points (m, 4)
        points: sample points
        h: stencil step (both nested stencils)
        grid: optional chart whose exclusions are honoured

    Returns:
        Largest component of the Ricci form over the sample
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if grid is not None:
        grid.check_stencil(pts, reach=4.0 * h)

    def log_det(x: np.ndarray) -> np.ndarray:
        det = np.linalg.det(complex_hessian(potential, x, h)).real
        return np.log(det)

    ricci = complex_hessian(log_det, pts, h)
    residual = float(np.max(np.abs(ricci)))
    logger.debug(f"kahler_ricci_residual: h={h:.4g}, residual={residual:.3e}")
    return residual


# ---------------------------------------------------------------------------
# Convergence utilities
# ---------------------------------------------------------------------------

def convergence_ratio(residual_fn: Callable[[float], float], h: float) -> float:
    """Ratio residual(h) / residual(h/2); about 4 for second-order schemes"""
    coarse = residual_fn(h)
    fine = residual_fn(h / 2.0)
    if fine == 0.0:
        return math.inf
    return coarse / fine


def _linear_fit(x: np.ndarray, y: np.ndarray) -> RateFit:
    if len(x) < 2:
        raise InsufficientRange(f"rate fit needs at least two points, got {len(x)}")
    model = LinearRegression()
    model.fit(x.reshape(-1, 1), y)
    r2 = r2_score(y, model.predict(x.reshape(-1, 1))) if len(x) > 2 else 1.0
    return RateFit(
        exponent=float(model.coef_[0]),
        intercept=float(model.intercept_),
        r2=float(r2),
        n_points=int(len(x)),
    )


def fit_power_law(x: np.ndarray, y: np.ndarray) -> RateFit:
    """Fit y ~ C x^p on a log-log scale"""
    return _linear_fit(np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float)))


def fit_semilog(x: np.ndarray, log_y: np.ndarray) -> RateFit:
    """Fit log y ~ a + b x (log_y already in log form)"""
    return _linear_fit(np.asarray(x, dtype=float), np.asarray(log_y, dtype=float))
