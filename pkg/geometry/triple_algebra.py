"""
Definite triples of 2-forms: Q-matrix, renormalized volume, induced metric,
and the hyperkahler error functional
"""
import itertools
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from geometry.errors import DefiniteViolation, EmptyRegion, NearDegenerate

EIGEN_FLOOR = 1e-14
CONDITION_LIMIT = 1e12


def pairing(omega: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """
    Coefficient of omega ^ eta against dx1^dx2^dx3^dx4

    Args:
        omega, eta: antisymmetric arrays of shape (..., 4, 4)

    Returns:
        array of shape (...)
    """
    return (
        omega[..., 0, 1] * eta[..., 2, 3] + omega[..., 2, 3] * eta[..., 0, 1]
        - omega[..., 0, 2] * eta[..., 1, 3] - omega[..., 1, 3] * eta[..., 0, 2]
        + omega[..., 0, 3] * eta[..., 1, 2] + omega[..., 1, 2] * eta[..., 0, 3]
    )


def two_form(entries: Dict[Tuple[int, int], complex], dtype=float) -> np.ndarray:
    """Antisymmetric 4x4 matrix from {(i, j): coefficient of dx_i ^ dx_j}"""
    result = np.zeros((4, 4), dtype=dtype)
    for (i, j), value in entries.items():
        result[i, j] += value
        result[j, i] -= value
    return result


def standard_triple() -> np.ndarray:
    """Flat hyperkahler triple e12+e34, e13-e24, e14+e23 on R^4"""
    return np.array([
        two_form({(0, 1): 1.0, (2, 3): 1.0}),
        two_form({(0, 2): 1.0, (1, 3): -1.0}),
        two_form({(0, 3): 1.0, (1, 2): 1.0}),
    ])


class DefiniteTriple(BaseModel):

    """Three 2-forms at a batch of points plus the reference volume density"""
    model_config = {"arbitrary_types_allowed": True}

    forms: np.ndarray = Field(..., description="Array (m, 3, 4, 4) or (3, 4, 4)")
    dvol0: float = Field(1.0, gt=0, description="Reference volume density against dx1^..^dx4")

    def batched(self) -> np.ndarray:
        forms = np.asarray(self.forms, dtype=float)
        if forms.ndim == 3:
            forms = forms[None]
        return forms


class QData(BaseModel):

    """Q-matrix data at a batch of points"""
    model_config = {"arbitrary_types_allowed": True}

    q: np.ndarray = Field(..., description="Q, shape (m, 3, 3)")
    dvol: np.ndarray = Field(..., description="det(Q)^(1/3) * dvol0 per point")
    q_normalized: np.ndarray = Field(..., description="Q_omega = det(Q)^(-1/3) Q")


def q_matrix(triple: DefiniteTriple) -> QData:
    """
    Compute Q with 1/2 w_i ^ w_j = Q_ij dvol0, the renormalized volume and Q_omega

    Raises:
        DefiniteViolation: if Q is not positive definite at some point
    """
    forms = triple.batched()
    q = 0.5 * pairing(forms[:, :, None], forms[:, None, :]) / triple.dvol0
    eigenvalues = np.linalg.eigvalsh(q)
    if np.any(eigenvalues[:, 0] <= 0.0):
        worst = int(np.argmin(eigenvalues[:, 0]))
        raise DefiniteViolation(
            f"Q not positive definite at sample {worst}: eigenvalues {eigenvalues[worst]}"
        )
    det = np.prod(eigenvalues, axis=1)
    cube_root = np.cbrt(det)
    return QData(
        q=q,
        dvol=cube_root * triple.dvol0,
        q_normalized=q / cube_root[:, None, None],
    )


def _inverse_sqrt(q: np.ndarray) -> np.ndarray:
    values, vectors = np.linalg.eigh(q)
    floor = EIGEN_FLOOR * np.trace(q)
    values = np.maximum(values, floor)
    return (vectors / np.sqrt(values)) @ vectors.T


def metric_from_triple(triple: DefiniteTriple) -> np.ndarray:
    """
    Recover the Riemannian metric for which the triple spans the self-dual forms

    The triple is orthonormalized by Q^(-1/2); J = w1^(-1) w3 is then a
    complex structure and g = -J^T w2 is symmetric positive definite. The
    result is rescaled so that its volume density equals det(Q)^(1/3) dvol0.

    Args:
        triple: definite triple

    Returns:
        Metric matrices of shape (m, 4, 4)

    Raises:
        NearDegenerate: if cond(Q) exceeds 1e12
        DefiniteViolation: if Q or the recovered metric is not positive definite
    """
    forms = triple.batched()
    data = q_matrix(triple)
    metrics = np.zeros((forms.shape[0], 4, 4))
    for idx in range(forms.shape[0]):
        q = data.q[idx]
        condition = np.linalg.cond(q)
        if condition > CONDITION_LIMIT:
            raise NearDegenerate(f"cond(Q) = {condition:.3e} at sample {idx}")
        normal = np.einsum("ij,jab->iab", _inverse_sqrt(q), forms[idx])
        j_map = np.linalg.solve(normal[0], normal[2])
        raw = -j_map.T @ normal[1]
        raw = 0.5 * (raw + raw.T)
        eigenvalues = np.linalg.eigvalsh(raw)
        if eigenvalues[0] <= 0.0:
            raw = -raw
            eigenvalues = -eigenvalues[::-1]
        if eigenvalues[0] <= 0.0:
            raise DefiniteViolation(f"recovered metric indefinite at sample {idx}: {eigenvalues}")
        target = data.dvol[idx]
        metrics[idx] = raw * np.sqrt(target / np.sqrt(np.linalg.det(raw)))
    return metrics


def hodge_star_2form(forms: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """Hodge star of 4x4 antisymmetric forms for a 4x4 metric (single point)"""
    inverse = np.linalg.inv(metric)
    raised = inverse @ forms @ inverse
    sqrt_det = np.sqrt(np.linalg.det(metric))
    star = np.zeros_like(forms)
    for a, b, c, d, sign in _EPSILON_TERMS:
        star[..., a, b] += 0.5 * sign * sqrt_det * raised[..., c, d]
    return star


def _epsilon_terms() -> List[Tuple[int, int, int, int, int]]:
    terms = []
    for perm in itertools.permutations(range(4)):
        inversions = sum(1 for i in range(4) for j in range(i + 1, 4) if perm[i] > perm[j])
        terms.append(perm + ((-1) ** inversions,))
    return terms


_EPSILON_TERMS = _epsilon_terms()


class HKError(BaseModel):

    """Hyperkahler error report over a point set"""
    sup_error: float = Field(..., description="sup ||Q_omega - Id||")
    weighted_sup: float = Field(..., description="sup s^(mu+1) ||Q_omega - Id||")
    holder_seminorm: float = Field(..., description="Lower bound for the weighted Holder seminorm")
    pair_count: int = Field(..., description="Number of sampled pairs behind the seminorm")
    n_points: int = Field(..., description="Number of sample points")


def hk_deviation(triple: DefiniteTriple) -> np.ndarray:
    """Pointwise spectral norm of Q_omega - Id"""
    data = q_matrix(triple)
    deviation = data.q_normalized - np.eye(3)[None]
    return np.linalg.norm(deviation, ord=2, axis=(1, 2))


def hk_error(deviations: np.ndarray, points: np.ndarray,
             weight: Optional[Callable[[np.ndarray], np.ndarray]] = None,
             mu: float = 0.05, alpha: float = 0.5,
             metric: Optional[Callable[[np.ndarray], np.ndarray]] = None,
             max_pairs: int = 2000, seed: int = 0) -> HKError:
    """
    Sup, weighted sup and sampled Holder seminorm of ||Q_omega - Id||

    Args:
        deviations: pointwise ||Q_omega - Id||, or a DefiniteTriple to evaluate
        points: chart coordinates of the samples, shape (m, d)
        weight: regularity-scale evaluator s(x); constant 1 if omitted
        mu: weight exponent, must lie in (0, 1/5)
        alpha: Holder exponent
        metric: chart metric used for segment lengths; Euclidean if omitted
        max_pairs: cap on sampled pairs
        seed: pair-sampling seed

    Returns:
        HKError report

    Raises:
        EmptyRegion: if there are no sample points
    """
    if isinstance(deviations, DefiniteTriple):
        deviations = hk_deviation(deviations)
    deviations = np.asarray(deviations, dtype=float)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if deviations.size == 0 or pts.shape[0] == 0:
        raise EmptyRegion("hk_error called on an empty sample set")
    if not 0.0 < mu < 0.2:
        raise ValueError(f"mu must lie in (0, 1/5), got {mu}")

    s = np.ones(len(deviations)) if weight is None else np.asarray(weight(pts), dtype=float)
    weighted = s ** (mu + 1.0) * deviations

    rng = np.random.default_rng(seed)
    count = len(deviations)
    holder = 0.0
    pairs = 0
    if count >= 2:
        total_pairs = count * (count - 1) // 2
        if total_pairs <= max_pairs:
            first, second = np.triu_indices(count, k=1)
        else:
            first = rng.integers(0, count, size=max_pairs)
            second = rng.integers(0, count, size=max_pairs)
            keep = first != second
            first, second = first[keep], second[keep]
        delta = pts[second] - pts[first]
        if metric is None:
            lengths = np.linalg.norm(delta, axis=1)
        else:
            mid = metric(0.5 * (pts[first] + pts[second]))
            lengths = np.sqrt(np.abs(np.einsum("mi,mij,mj->m", delta, mid, delta)))
        valid = lengths > 0.0
        if np.any(valid):
            scale = np.minimum(s[first], s[second]) ** (mu + 1.0 + alpha)
            quotient = scale * np.abs(deviations[second] - deviations[first]) / lengths ** alpha
            holder = float(np.max(quotient[valid]))
            pairs = int(np.count_nonzero(valid))

    report = HKError(
        sup_error=float(np.max(deviations)),
        weighted_sup=float(np.max(weighted)),
        holder_seminorm=holder,
        pair_count=pairs,
        n_points=count,
    )
    logger.debug(f"hk_error: sup={report.sup_error:.3e}, weighted={report.weighted_sup:.3e}, pairs={pairs}")
    return report


def linearized_deviation(base: np.ndarray, perturbation: np.ndarray) -> np.ndarray:
    """
    First-order Q_omega - Id for base + perturbation when the base is hyperkahler

    Args:
        base: hyperkahler triples (m, 3, 4, 4)
        perturbation: perturbations (m, 3, 4, 4), may be rescaled arbitrarily

    Returns:
        Traceless matrices (m, 3, 3) such that Q_omega - Id = returned + O(|P|^2)
    """
    q0 = 0.5 * pairing(base[:, 0], base[:, 0])
    cross = 0.5 * (
        pairing(base[:, :, None], perturbation[:, None, :])
        + pairing(perturbation[:, :, None], base[:, None, :])
    )
    e = cross / q0[:, None, None]
    trace = np.trace(e, axis1=1, axis2=2)
    return e - trace[:, None, None] / 3.0 * np.eye(3)[None]
