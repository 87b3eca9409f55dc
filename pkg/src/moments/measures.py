"""
Closed-form moments of the reference measures and the brute-force oracles used to validate them.
"""
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from src.conf.config import settings
from src.exceptions import UnsupportedMeasureError
from src.moments.models import BasisIndexer, MomentSequence
from src.schemas import (Dirac, GaussianProduct, MeasureSpec, Mixture, Scaled, UniformBox, UniformCircle,
                         UniformInterval)

logger = logging.getLogger(__name__)


def _interval_moments(a: float, b: float, D: int) -> np.ndarray:
    k = np.arange(D + 1)
    return (b ** (k + 1) - a ** (k + 1)) / ((k + 1) * (b - a))


def _gaussian_moments(D: int) -> np.ndarray:
    m = np.zeros(D + 1)
    m[0] = 1.0
    for k in range(2, D + 1, 2):
        m[k] = (k - 1) * m[k - 2] / 2.0
    return m


def _product_moments(axis_moments: list[np.ndarray], indexer: BasisIndexer) -> np.ndarray:
    return np.array([np.prod([axis_moments[i][e] for i, e in enumerate(alpha)]) for alpha in indexer])


def _circle_moment(a: int, b: int) -> float:
    if a % 2 or b % 2:
        return 0.0
    return float(special.beta((a + 1) / 2, (b + 1) / 2) / np.pi)


def _moment_vector(spec, indexer: BasisIndexer) -> np.ndarray:
    D = indexer.d
    match spec:
        case UniformInterval(a=a, b=b):
            return _interval_moments(a, b, D)[[alpha[0] for alpha in indexer]]
        case UniformBox(bounds=bounds):
            return _product_moments([_interval_moments(a, b, D) for a, b in bounds], indexer)
        case Dirac(point=point):
            x = np.asarray(point, dtype=float)
            return np.array([np.prod(x ** np.asarray(alpha)) for alpha in indexer])
        case GaussianProduct(n=n):
            return _product_moments([_gaussian_moments(D)] * n, indexer)
        case UniformCircle():
            return np.array([_circle_moment(*alpha) for alpha in indexer])
        case Mixture(components=components):
            return sum(c.weight * _moment_vector(c.spec, indexer) for c in components)
        case Scaled(factor=factor, spec=inner):
            return factor * _moment_vector(inner, indexer)
    raise UnsupportedMeasureError(f"no closed form for {type(spec).__name__}")


def describe(spec) -> str:
    """
    Short human readable label of a measure spec.
    """
    match spec:
        case UniformInterval(a=a, b=b):
            return f"uniform[{a:g},{b:g}]"
        case UniformBox(bounds=bounds):
            return "uniform" + "x".join(f"[{a:g},{b:g}]" for a, b in bounds)
        case Dirac(point=point):
            return "dirac(" + ",".join(f"{x:g}" for x in point) + ")"
        case GaussianProduct(n=n):
            return f"gaussian{n}"
        case UniformCircle():
            return "circle"
        case Mixture(components=components):
            return " + ".join(f"{c.weight:g}*{describe(c.spec)}" for c in components)
        case Scaled(factor=factor, spec=inner):
            return f"{factor:g}*({describe(inner)})"
    return type(spec).__name__


def exact_moments(spec: MeasureSpec, D: int) -> MomentSequence:
    """
    Moments of every multi-index up to degree ``D`` from closed forms. Mixtures and scalings go by linearity.

    :param spec: Measure description.
    :type spec: MeasureSpec
    :param D: Maximal total degree.
    :type D: int
    :return: Dense moment sequence labelled with the spec description.
    :rtype: MomentSequence
    """
    indexer = BasisIndexer(spec.dimension, D)
    return MomentSequence(spec.dimension, D, _moment_vector(spec, indexer), describe(spec))


@dataclass(frozen=True)
class QuadratureEstimate:
    value: float
    error: float
    resolution: int


def _midpoints(a: float, b: float, count: int) -> np.ndarray:
    h = (b - a) / count
    return a + h * (np.arange(count) + 0.5)


def _with_halving(rule: Callable[[int], float], resolution: int) -> QuadratureEstimate:
    fine = rule(resolution)
    coarse = rule(max(resolution // 2, 1))
    # midpoint error shrinks 4x when the step halves
    return QuadratureEstimate(fine, abs(fine - coarse) / 3.0, resolution)


def quadrature_oracle(spec: MeasureSpec, alpha, resolution: int | None = None) -> QuadratureEstimate:
    """
    Numerical integral of x^alpha against the measure, independent of the closed forms. Bounded variants use the
    midpoint rule (per axis for boxes, over the angle for the circle); the Gaussian is integrated on a truncation
    window whose tail mass is added to the error estimate.

    :param spec: Measure description.
    :type spec: MeasureSpec
    :param alpha: Exponent of the monomial.
    :type alpha: Sequence[int]
    :param resolution: Number of nodes per axis, ``settings.oracle_resolution_1d`` by default.
    :type resolution: int | None
    :return: Value with error estimate.
    :rtype: QuadratureEstimate
    """
    alpha = tuple(int(e) for e in alpha)
    resolution = resolution or settings.oracle_resolution_1d
    match spec:
        case UniformInterval(a=a, b=b):
            return _with_halving(lambda m: float(np.mean(_midpoints(a, b, m) ** alpha[0])), resolution)
        case UniformBox(bounds=bounds):
            parts = [_with_halving(lambda m, a=a, b=b, e=e: float(np.mean(_midpoints(a, b, m) ** e)), resolution)
                     for (a, b), e in zip(bounds, alpha)]
            value = float(np.prod([p.value for p in parts]))
            error = sum(p.error * abs(value / p.value) if p.value else p.error for p in parts)
            return QuadratureEstimate(value, error, resolution)
        case Dirac(point=point):
            return QuadratureEstimate(float(np.prod(np.asarray(point, dtype=float) ** np.asarray(alpha))), 0.0, 1)
        case GaussianProduct():
            window = 10.0
            tail = 2 * special.erfc(window) * max(1.0, window ** max(alpha))

            def axis(e: int, m: int) -> float:
                x = _midpoints(-window, window, m)
                return float(np.sum(x ** e * np.exp(-x ** 2)) * (2 * window / m) / np.sqrt(np.pi))

            parts = [_with_halving(lambda m, e=e: axis(e, m), resolution) for e in alpha]
            value = float(np.prod([p.value for p in parts]))
            return QuadratureEstimate(value, sum(p.error for p in parts) + tail * len(alpha), resolution)
        case UniformCircle():
            def rule(m: int) -> float:
                theta = _midpoints(0.0, 2 * np.pi, m)
                return float(np.mean(np.cos(theta) ** alpha[0] * np.sin(theta) ** alpha[1]))

            estimate = _with_halving(rule, resolution)
            # trigonometric polynomials are integrated exactly once m exceeds the degree
            return QuadratureEstimate(estimate.value, estimate.error + 1e-15, resolution)
        case Mixture(components=components):
            parts = [(c.weight, quadrature_oracle(c.spec, alpha, resolution)) for c in components]
            return QuadratureEstimate(sum(w * p.value for w, p in parts), sum(w * p.error for w, p in parts),
                                      resolution)
        case Scaled(factor=factor, spec=inner):
            part = quadrature_oracle(inner, alpha, resolution)
            return QuadratureEstimate(factor * part.value, factor * part.error, resolution)
    raise UnsupportedMeasureError(f"no quadrature rule for {type(spec).__name__}")


def truncated_density_moments(f: Callable[[np.ndarray], np.ndarray], lambda_spec: MeasureSpec, gamma: float,
                              alpha, resolution: int | None = None) -> float:
    """
    Brute-force value of the integral of min(gamma, f) x^alpha d lambda on a uniform midpoint grid: the moments of
    the gamma-truncated absolutely continuous part the hierarchy converges to when f exceeds gamma.

    :param f: Density with respect to lambda, evaluated on an array of points of shape (count, n).
    :type f: Callable[[np.ndarray], np.ndarray]
    :param lambda_spec: Uniform interval or box.
    :type lambda_spec: MeasureSpec
    :param gamma: Truncation level.
    :type gamma: float
    :param alpha: Exponent of the monomial.
    :type alpha: Sequence[int]
    :param resolution: Nodes per axis; 1-D and 2-D defaults come from settings.
    :type resolution: int | None
    :return: The truncated moment.
    :rtype: float
    :raises UnsupportedMeasureError: If lambda is not a uniform interval or box.
    """
    match lambda_spec:
        case UniformInterval(a=a, b=b):
            bounds = [(a, b)]
        case UniformBox(bounds=box):
            bounds = list(box)
        case _:
            raise UnsupportedMeasureError(f"cannot discretize {type(lambda_spec).__name__}")
    n = len(bounds)
    if resolution is None:
        resolution = settings.oracle_resolution_1d if n == 1 else settings.oracle_resolution_2d
    axes = [_midpoints(a, b, resolution) for a, b in bounds]
    grid = np.stack([g.reshape(-1) for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    density = np.minimum(gamma, np.asarray(f(grid), dtype=float).reshape(-1))
    monomial = np.prod(grid ** np.asarray(tuple(alpha), dtype=float), axis=1)
    value = float(np.mean(density * monomial))
    logger.debug("truncated density oracle alpha=%s: %.10f on %d^%d nodes", tuple(alpha), value, resolution, n)
    return value
