from __future__ import annotations

import math
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.conf.config import settings


class UniformInterval(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["uniform"] = "uniform"
    a: float
    b: float

    @model_validator(mode="after")
    def check_bounds(self):
        if not self.a < self.b:
            raise ValueError(f"interval needs a < b, got [{self.a}, {self.b}]")
        return self

    @property
    def dimension(self) -> int:
        return 1


class UniformBox(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["box"] = "box"
    bounds: list[tuple[float, float]] = Field(min_length=1)

    @field_validator("bounds")
    @classmethod
    def check_bounds(cls, bounds):
        for a, b in bounds:
            if not a < b:
                raise ValueError(f"box side needs a < b, got [{a}, {b}]")
        return bounds

    @property
    def dimension(self) -> int:
        return len(self.bounds)


class Dirac(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["dirac"] = "dirac"
    point: list[float] = Field(min_length=1)

    @property
    def dimension(self) -> int:
        return len(self.point)


class GaussianProduct(BaseModel):
    """
    Normalized Gaussian with density proportional to exp(-|x|^2), variance 1/2 per axis.
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["gaussian"] = "gaussian"
    n: int = Field(ge=1)

    @property
    def dimension(self) -> int:
        return self.n


class UniformCircle(BaseModel):
    """
    Normalized arc length on the unit circle of the plane.
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["circle"] = "circle"

    @property
    def dimension(self) -> int:
        return 2


class MixtureComponent(BaseModel):
    model_config = ConfigDict(frozen=True)

    weight: float = Field(gt=0)
    spec: MeasureSpec


class Mixture(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["mixture"] = "mixture"
    components: list[MixtureComponent] = Field(min_length=1)

    @model_validator(mode="after")
    def check_dimensions(self):
        dims = {c.spec.dimension for c in self.components}
        if len(dims) != 1:
            raise ValueError(f"mixture components live in different dimensions {sorted(dims)}")
        return self

    @property
    def dimension(self) -> int:
        return self.components[0].spec.dimension


class Scaled(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: Literal["scaled"] = "scaled"
    factor: float = Field(gt=0)
    spec: MeasureSpec

    @property
    def dimension(self) -> int:
        return self.spec.dimension


MeasureSpec = Annotated[
    Union[UniformInterval, UniformBox, Dirac, GaussianProduct, UniformCircle, Mixture, Scaled],
    Field(discriminator="kind"),
]

MixtureComponent.model_rebuild()
Mixture.model_rebuild()
Scaled.model_rebuild()


class MeasureDocument(BaseModel):
    """
    Wrapper used to read a measure spec from a JSON file.
    """
    spec: MeasureSpec


class GroundTruth(BaseModel):
    """
    mu = p * nu + (1 - p) * psi with known parts and the reference measure lambda, used by the reproduction harness.
    """
    model_config = ConfigDict(frozen=True)

    nu_spec: MeasureSpec
    psi_spec: MeasureSpec
    lambda_spec: MeasureSpec
    p: float = Field(gt=0, lt=1)
    gamma: float = Field(gt=0)


class MomentEntry(BaseModel):
    alpha: list[int]
    value: float

    @field_validator("alpha")
    @classmethod
    def nonnegative(cls, alpha):
        if any(e < 0 for e in alpha):
            raise ValueError(f"negative exponent in {alpha}")
        return alpha

    @field_validator("value")
    @classmethod
    def finite(cls, value):
        if not math.isfinite(value):
            raise ValueError("moment values must be finite")
        return value


class MomentFile(BaseModel):
    dimension: int = Field(ge=1)
    max_degree: int = Field(ge=0)
    basis: Literal["monomial"] = "monomial"
    label: str = ""
    entries: list[MomentEntry]


class SolverSettings(BaseModel):
    eps_feas: float = Field(default_factory=lambda: settings.eps_feas, gt=0)
    eps_gap: float = Field(default_factory=lambda: settings.eps_gap, gt=0)
    eps_psd: float = Field(default_factory=lambda: settings.eps_psd, gt=0)
    max_iters: int = Field(default_factory=lambda: settings.max_iters, ge=1)
    step_fraction: float = Field(default_factory=lambda: settings.step_fraction, gt=0, lt=1)
    init_scale: float = Field(default_factory=lambda: settings.init_scale, gt=0)
    regularization: float = Field(default_factory=lambda: settings.schur_regularization, ge=0)
    backend: Literal["builtin", "cvxopt"] = Field(default_factory=lambda: settings.solver_backend)


class DecomposeOptions(BaseModel):
    """
    Per-call switches of a decomposition solve; ``condition`` routes the program through the lambda-orthonormal
    basis before solving.
    """
    solver: SolverSettings = Field(default_factory=SolverSettings)
    condition: bool = False
    rank_p: int = Field(default_factory=lambda: settings.rank_threshold_p, ge=1)


class AtomReport(BaseModel):
    points: list[list[float]]
    weights: list[float]
    residual: float
    flat_order: int
    rank: int
    label: str = "candidate atoms"


class MomentRow(BaseModel):
    name: str
    alphas: list[list[int]]
    values: list[float]
    reference: Optional[list[float]] = None
    relative_errors: Optional[list[Optional[float]]] = None


class CertificateReport(BaseModel):
    identity_residual: float
    min_gram_eigenvalue: float
    dual_value: float
    gap: float
    passed: bool


class RunReport(BaseModel):
    gamma: float
    order: int
    tolerances: dict[str, float]
    conditioned: bool = False
    rho_d: float
    rows: list[MomentRow] = []
    atoms: Optional[AtomReport] = None
    notes: list[str] = []
    diagnostics: dict[str, float] = {}
    certificate: Optional[CertificateReport] = None
    solver: dict[str, float | int | str] = {}
