"""
Reference decompositions with known parts, mu = p nu* + (1 - p) psi*, and gamma = 2p:

    ex1  nu* uniform on [0.1, 0.7], psi* = delta_0.4, lambda Lebesgue on [0, 1], d = 9
    ex2  nu* uniform on [0.1, 0.7], psi* = (delta_0.4 + delta_0.5)/2, lambda Lebesgue on [0, 1], d = 9
    ex3  nu* Gaussian on R^2, psi* = delta_(1,2), lambda = 2 nu*, d = 9
    ex4  nu* Gaussian on R^2, psi* = (delta_(1,2) + delta_(-2,1))/2, lambda = nu*, d = 9
    ex5  nu* Gaussian on R^2 or uniform on [-1,1]^2, psi* uniform on the unit circle, lambda = nu*, d = 7
"""
import logging
from dataclasses import dataclass
from typing import Callable, Literal, Optional

from src.exceptions import UnknownExampleError
from src.moments.measures import exact_moments
from src.schemas import (DecomposeOptions, Dirac, GaussianProduct, GroundTruth, Mixture, MixtureComponent, RunReport,
                         Scaled, UniformBox, UniformCircle, UniformInterval)
from src.services.reports import DecomposeRequest, decompose_and_report

logger = logging.getLogger(__name__)

NuKind = Literal["gaussian", "box"]


def _two_atoms(a, b) -> Mixture:
    return Mixture(components=[MixtureComponent(weight=0.5, spec=Dirac(point=a)),
                               MixtureComponent(weight=0.5, spec=Dirac(point=b))])


def _ex1(p: float, nu_kind: NuKind) -> GroundTruth:
    return GroundTruth(nu_spec=UniformInterval(a=0.1, b=0.7), psi_spec=Dirac(point=[0.4]),
                       lambda_spec=UniformInterval(a=0.0, b=1.0), p=p, gamma=2 * p)


def _ex2(p: float, nu_kind: NuKind) -> GroundTruth:
    return GroundTruth(nu_spec=UniformInterval(a=0.1, b=0.7), psi_spec=_two_atoms([0.4], [0.5]),
                       lambda_spec=UniformInterval(a=0.0, b=1.0), p=p, gamma=2 * p)


def _ex3(p: float, nu_kind: NuKind) -> GroundTruth:
    return GroundTruth(nu_spec=GaussianProduct(n=2), psi_spec=Dirac(point=[1.0, 2.0]),
                       lambda_spec=Scaled(factor=2.0, spec=GaussianProduct(n=2)), p=p, gamma=2 * p)


def _ex4(p: float, nu_kind: NuKind) -> GroundTruth:
    return GroundTruth(nu_spec=GaussianProduct(n=2), psi_spec=_two_atoms([1.0, 2.0], [-2.0, 1.0]),
                       lambda_spec=GaussianProduct(n=2), p=p, gamma=2 * p)


def _ex5(p: float, nu_kind: NuKind) -> GroundTruth:
    nu = GaussianProduct(n=2) if nu_kind == "gaussian" else UniformBox(bounds=[(-1.0, 1.0), (-1.0, 1.0)])
    return GroundTruth(nu_spec=nu, psi_spec=UniformCircle(), lambda_spec=nu, p=p, gamma=2 * p)


@dataclass(frozen=True)
class Example:
    name: str
    build: Callable[[float, NuKind], GroundTruth]
    order: int
    atoms: bool = False
    circle_residual: bool = False


EXAMPLES = {
    "ex1": Example("ex1", _ex1, 9),
    "ex2": Example("ex2", _ex2, 9, atoms=True),
    "ex3": Example("ex3", _ex3, 9),
    "ex4": Example("ex4", _ex4, 9, atoms=True),
    "ex5": Example("ex5", _ex5, 7, circle_residual=True),
}


def get_example(name: str) -> Example:
    try:
        return EXAMPLES[name]
    except KeyError:
        raise UnknownExampleError(f"unknown example {name!r}, expected one of {', '.join(EXAMPLES)}")


def mixture(truth: GroundTruth) -> Mixture:
    return Mixture(components=[MixtureComponent(weight=truth.p, spec=truth.nu_spec),
                               MixtureComponent(weight=1 - truth.p, spec=truth.psi_spec)])


def build_request(name: str, p: float, order: Optional[int] = None, nu_kind: NuKind = "gaussian",
                  options: Optional[DecomposeOptions] = None, atoms: Optional[bool] = None) -> DecomposeRequest:
    """
    Moments of mu and lambda for a reference example, with the exact nu* and psi* moments as references.

    :param name: Example id, ex1 to ex5.
    :type name: str
    :param p: Weight of the absolutely continuous part, in (0, 1).
    :type p: float
    :param order: Relaxation order, the example default when None.
    :type order: int | None
    :param nu_kind: Absolutely continuous part of ex5.
    :type nu_kind: str
    :param options: Solver and conditioning options; monomial basis by default.
    :type options: DecomposeOptions | None
    :param atoms: Overrides the example default for atom extraction.
    :type atoms: bool | None
    :return: The request handed to the decomposition pipeline.
    :rtype: DecomposeRequest
    :raises UnknownExampleError: If the name is not one of the examples.
    """
    example = get_example(name)
    truth = example.build(p, nu_kind)
    d = example.order if order is None else order
    degree = 2 * d
    return DecomposeRequest(
        mu=exact_moments(mixture(truth), degree).relabel("mu"),
        lam=exact_moments(truth.lambda_spec, degree).relabel("lambda"),
        gamma=truth.gamma,
        order=d,
        options=options or DecomposeOptions(),
        atoms=example.atoms if atoms is None else atoms,
        ref_nu=exact_moments(truth.nu_spec, degree),
        ref_psi=exact_moments(truth.psi_spec, degree),
        circle_residual=example.circle_residual,
    )


def reproduce(name: str, p: float, order: Optional[int] = None, nu_kind: NuKind = "gaussian",
              options: Optional[DecomposeOptions] = None, atoms: Optional[bool] = None) -> RunReport:
    """
    Runs one reference example through the same pipeline as ``decompose``.
    """
    request = build_request(name, p, order, nu_kind, options, atoms)
    logger.info("reproducing %s with p=%g, gamma=%g, d=%d", name, p, request.gamma, request.order)
    _, report = decompose_and_report(request)
    return report
