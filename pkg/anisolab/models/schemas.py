"""
Pydantic schemas for experiment configuration and JSON reports.
"""
import math
import re
from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from anisolab.config import settings


# === Enums ===

class GaugeFamily(str, Enum):
    """Closed family of smooth anisotropic gauges."""
    EUCLIDEAN = "euclidean"
    ELLIPSE = "ellipse"
    LP_NORM = "lp_norm"


class DomainKind(str, Enum):
    """Built-in polygonal domains."""
    DISK = "disk"
    SQUARE = "square"
    LSHAPE = "lshape"
    WULFF = "wulff"
    ELLIPSE = "ellipse"
    POLYGON = "polygon"


class Command(str, Enum):
    """Experiment runner commands."""
    SOLVE_TORSION = "solve-torsion"
    SOLVE_EIGEN = "solve-eigen"
    CHECK_POHOZAEV = "check-pohozaev"
    CHECK_BOUNDS = "check-bounds"
    SPACEFORM_REPORT = "spaceform-report"
    WULFF_INFO = "wulff-info"
    SUITE = "suite"


class Verdict(str, Enum):
    """Outcome of a sign-condition nonexistence test."""
    NONEXISTENCE = "NONEXISTENCE"
    INCONCLUSIVE = "INCONCLUSIVE"


# === Gauges ===

class GaugeSpec(BaseModel):
    """An anisotropic norm F; e.g. {"family": "ellipse", "a": 2.0, "b": 1.0}."""
    model_config = ConfigDict(frozen=True)

    family: GaugeFamily = GaugeFamily.EUCLIDEAN
    a: Optional[float] = Field(None, gt=0, description="First ellipse semi-weight")
    b: Optional[float] = Field(None, gt=0, description="Second ellipse semi-weight")
    q: Optional[float] = Field(None, gt=1, description="Exponent of the l^q norm")
    dimension: int = Field(2, ge=2, description="Ambient dimension n")

    @model_validator(mode="after")
    def check_family_parameters(self):
        if self.family == GaugeFamily.ELLIPSE:
            if self.a is None or self.b is None:
                raise ValueError("ellipse gauge requires both a and b")
            if self.dimension != 2:
                raise ValueError("ellipse gauge is defined in dimension 2 only")
        if self.family == GaugeFamily.LP_NORM and self.q is None:
            raise ValueError("lp_norm gauge requires q > 1")
        return self

    @property
    def label(self) -> str:
        if self.family == GaugeFamily.ELLIPSE:
            return f"ellipse({self.a:g},{self.b:g})"
        if self.family == GaugeFamily.LP_NORM:
            return f"lp_norm({self.q:g})"
        return "euclidean"


# === Domains ===

_DISK_NAME = re.compile(r"^unit_disk_(\d+)$")
_WULFF_NAME = re.compile(r"^wulff_(\d+)$")
_SQUARE_NAME = re.compile(r"^square\(\s*([0-9.eE+-]+)\s*\)$")
_ELLIPSE_NAME = re.compile(r"^ellipse\(\s*([0-9.eE+-]+)\s*,\s*([0-9.eE+-]+)\s*,\s*(\d+)\s*\)$")


class DomainSpec(BaseModel):
    """
    Polygonal domain description.

    Accepts either a full object or one of the built-in names
    ``unit_disk_k``, ``square(side)``, ``ellipse(a,b,k)``, ``Lshape`` and ``wulff_k``.
    Ellipse domains are fixed polygons; wulff domains follow the active gauge.
    """
    model_config = ConfigDict(frozen=True)

    kind: DomainKind = DomainKind.DISK
    vertex_count: int = Field(64, ge=3, description="Vertices of disk, ellipse and Wulff polygons")
    side: float = Field(2.0, gt=0, description="Side length of squares")
    radius: float = Field(1.0, gt=0, description="Circumradius of disk polygons")
    semi_axes: Tuple[float, float] = Field((2.0, 1.0), description="Semi-axes of ellipse polygons")
    offset: Tuple[float, float] = (0.0, 0.0)
    vertices: Optional[List[Tuple[float, float]]] = None

    @model_validator(mode="before")
    @classmethod
    def parse_name(cls, value: Any):
        if not isinstance(value, str):
            return value
        name = value.strip()
        match = _DISK_NAME.match(name)
        if match:
            return {"kind": DomainKind.DISK, "vertex_count": int(match.group(1))}
        match = _WULFF_NAME.match(name)
        if match:
            return {"kind": DomainKind.WULFF, "vertex_count": int(match.group(1))}
        match = _SQUARE_NAME.match(name)
        if match:
            return {"kind": DomainKind.SQUARE, "side": float(match.group(1))}
        match = _ELLIPSE_NAME.match(name)
        if match:
            return {
                "kind": DomainKind.ELLIPSE,
                "semi_axes": (float(match.group(1)), float(match.group(2))),
                "vertex_count": int(match.group(3)),
            }
        if name.lower() == "lshape":
            return {"kind": DomainKind.LSHAPE}
        raise ValueError(f"Unknown domain name: {name!r}")

    @model_validator(mode="after")
    def check_vertices(self):
        if self.kind == DomainKind.POLYGON and (not self.vertices or len(self.vertices) < 3):
            raise ValueError("polygon domains need at least three vertices")
        if self.kind == DomainKind.ELLIPSE and min(self.semi_axes) <= 0:
            raise ValueError("ellipse semi-axes must be positive")
        return self

    @property
    def label(self) -> str:
        if self.kind == DomainKind.DISK:
            return f"unit_disk_{self.vertex_count}" if self.radius == 1.0 else f"disk_{self.vertex_count}(R={self.radius:g})"
        if self.kind == DomainKind.SQUARE:
            return f"square({self.side:g})"
        if self.kind == DomainKind.WULFF:
            return f"wulff_{self.vertex_count}"
        if self.kind == DomainKind.ELLIPSE:
            a, b = self.semi_axes
            return f"ellipse({a:g},{b:g},{self.vertex_count})"
        if self.kind == DomainKind.LSHAPE:
            return "Lshape"
        return f"polygon[{len(self.vertices or [])}]"


# === Sources ===

class SourceTerm(BaseModel):
    """One power-law term coef * |x|^{-weight_exp} * |u|^{power-2} u."""
    model_config = ConfigDict(frozen=True)

    coef: float
    weight_exp: float = Field(0.0, ge=0, lt=2)
    power: float = Field(..., gt=1)


class SourceSpec(BaseModel):
    """
    Right-hand side g(x, u) of the weighted Dirichlet problem.

    g = sum_i coef_i |x|^{-alpha_i} |u|^{r_i-2} u + const_term |x|^{-const_weight_exp}
    """
    model_config = ConfigDict(frozen=True)

    terms: List[SourceTerm] = Field(default_factory=list)
    const_term: float = 0.0
    const_weight_exp: float = Field(0.0, ge=0, lt=2)
    weight_b: float = 0.0
    p: float = Field(2.0, ge=2)

    @model_validator(mode="after")
    def check_weight_integrability(self):
        if self.weight_b * self.p >= 2:
            raise ValueError(f"weight exponent b*p must be < 2, got {self.weight_b * self.p:g}")
        return self

    @classmethod
    def constant(cls, value: float = 1.0, p: float = 2.0, weight_b: float = 0.0) -> "SourceSpec":
        """Constant source g = value (the torsion right-hand side when value = 1)."""
        return cls(const_term=value, p=p, weight_b=weight_b)

    @property
    def is_x_independent(self) -> bool:
        return self.const_weight_exp == 0 and all(t.weight_exp == 0 for t in self.terms)

    @property
    def is_pure_constant(self) -> bool:
        return not any(t.coef != 0 for t in self.terms)


class SolverOptions(BaseModel):
    """Per-experiment overrides of the energy-minimization defaults."""
    max_iterations: int = Field(default_factory=lambda: settings.solver_max_iterations, ge=1)
    energy_rtol: float = Field(default_factory=lambda: settings.solver_energy_rtol, gt=0)
    gradient_tol: float = Field(default_factory=lambda: settings.solver_gradient_tol, gt=0)
    accept_tol: float = Field(default_factory=lambda: settings.solver_accept_tol, gt=0)
    newton: bool = Field(default_factory=lambda: settings.solver_newton)
    eigen_max_iterations: int = Field(default_factory=lambda: settings.eigen_max_iterations, ge=1)
    eigen_rtol: float = Field(default_factory=lambda: settings.eigen_rtol, gt=0)


# === Space forms ===

class SpaceformSpec(BaseModel):
    """Geodesic ball of radius theta in the n-dimensional model space of curvature kappa."""
    model_config = ConfigDict(frozen=True)

    n: int = Field(2, ge=2)
    kappa: Literal[-1, 0, 1] = 0
    theta: float = Field(1.0, gt=0)
    grid_points: int = Field(default_factory=lambda: settings.radial_grid_points, ge=1000)
    g_const: float = Field(1.0, ge=0)


class SpaceformSweep(BaseModel):
    """Cartesian sweep over (n, kappa, theta)."""
    n_values: List[int] = Field(default_factory=lambda: [2, 3, 4])
    kappa_values: List[Literal[-1, 0, 1]] = Field(default_factory=lambda: [-1, 0, 1])
    theta_values: List[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0])
    grid_points: int = Field(default_factory=lambda: settings.radial_grid_points, ge=1000)

    @field_validator("n_values")
    @classmethod
    def validate_dimensions(cls, v):
        if not v or min(v) < 2:
            raise ValueError("sweep dimensions must all be >= 2")
        return v


# === Experiment ===

class ExperimentConfig(BaseModel):
    """One experiment file = one run of the laboratory."""
    command: Optional[Command] = None
    gauge: GaugeSpec = Field(default_factory=GaugeSpec)
    domain: DomainSpec = Field(default_factory=DomainSpec)
    p: float = Field(2.0, gt=1)
    b: float = 0.0
    source: Optional[SourceSpec] = None
    target_h: float = Field(0.05, gt=0)
    refine: int = Field(0, ge=0)
    strict: bool = False
    levels: int = Field(default_factory=lambda: settings.level_count, ge=2)
    tolerance_c: float = Field(default_factory=lambda: settings.tolerance_c, ge=0)
    solver: SolverOptions = Field(default_factory=SolverOptions)
    spaceform: Optional[SpaceformSpec] = None
    sweep: Optional[SpaceformSweep] = None
    p_values: List[float] = Field(default_factory=lambda: [2.0, 2.5, 3.0])
    experiments: List[str] = Field(default_factory=list, description="Experiment files of a suite")

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "command": "check-bounds",
                "gauge": {"family": "ellipse", "a": 2.0, "b": 1.0},
                "domain": "unit_disk_64",
                "p": 2.0,
                "target_h": 0.05,
            }
        }
    )

    @model_validator(mode="after")
    def attach_exponents_to_source(self):
        if self.source is not None and (self.source.p != self.p or self.source.weight_b != self.b):
            self.source = self.source.model_copy(update={"p": self.p, "weight_b": self.b})
        return self

    def effective_source(self) -> SourceSpec:
        """Source of the run; defaults to the constant source g = 1."""
        if self.source is not None:
            return self.source
        return SourceSpec.constant(1.0, p=self.p, weight_b=self.b)

    @property
    def effective_target_h(self) -> float:
        return self.target_h / (2 ** self.refine)


# === Reports ===

class WulffInfo(BaseModel):
    """Measures of the Wulff shape K° = {F° <= 1} and of K = {F <= 1}."""
    kappa_n: float = Field(..., gt=0)
    omega_K: float = Field(..., gt=0)
    directions: int


class GaugeHypotheses(BaseModel):
    """Sampled axioms of a gauge and the Hessian hypothesis of the eigenvalue bound."""
    alpha: float
    beta: float
    homogeneity_residual: float
    evenness_residual: float
    min_hessian_eigenvalue: float
    hessian_positive_definite: bool


class MeshStats(BaseModel):
    vertices: int
    triangles: int
    boundary_edges: int
    h_max: float
    area: float


class SolveSummary(BaseModel):
    """Scalar view of a SolveReport for JSON output."""
    kind: str
    gauge: str
    p: float
    energy: float
    grad_norm: float
    residual: float
    iterations: int
    converged: bool
    tolerance: float
    integral: float
    max_value: float
    min_interior: float


class RigidityReport(BaseModel):
    """Both forms of the torsional rigidity and its variational quotient."""
    T_from_u: float
    T_from_energy: float
    variational_quotient: float
    T_power: float
    relative_gap: float
    consistent: bool


class EigenSummary(BaseModel):
    eigenvalue: float
    iterations: int
    rayleigh_history: List[float]
    min_value: float


class PohozaevReport(BaseModel):
    """Both sides of a Pohozaev identity and the residual between them."""
    lhs_term_ug: float
    lhs_term_G: float
    lhs_term_xgradG: float
    rhs_boundary: float
    abs_residual: float
    rel_residual: float

    @property
    def lhs(self) -> float:
        return self.lhs_term_ug + self.lhs_term_G + self.lhs_term_xgradG

    @classmethod
    def from_terms(cls, term_ug: float, term_G: float, term_xgradG: float, rhs: float) -> "PohozaevReport":
        lhs = term_ug + term_G + term_xgradG
        diff = abs(lhs - rhs)
        return cls(
            lhs_term_ug=term_ug,
            lhs_term_G=term_G,
            lhs_term_xgradG=term_xgradG,
            rhs_boundary=rhs,
            abs_residual=diff,
            rel_residual=diff / (abs(lhs) + abs(rhs) + 1e-300),
        )


class BoundaryGradientStats(BaseModel):
    min: float
    max: float
    mean: float


class SerrinReport(BaseModel):
    """Weinberger constant c^2 = (n+2)T/(nV) against the boundary gradient profile."""
    c_sq_pohozaev: float
    ball_radius: float
    boundary_gradient: BoundaryGradientStats


class TermSign(BaseModel):
    kind: Literal["power", "constant"]
    coef: float
    weight_exp: float
    power: Optional[float] = None
    sigma: float
    strict: bool


class NonexistenceReport(BaseModel):
    n: int
    p: float
    b: float
    terms: List[TermSign]
    verdict: Verdict


class SampledPredicate(BaseModel):
    """Pointwise sign condition evaluated on a sample grid."""
    name: str
    max_value: float
    samples: int
    satisfied: bool


class BoundReport(BaseModel):
    """One side-by-side inequality evaluation."""
    theorem: str
    lhs: float
    rhs: float
    slack: float
    satisfied: bool
    tolerance_used: float
    details: Dict[str, float] = Field(default_factory=dict)

    @classmethod
    def build(
        cls,
        theorem: str,
        lhs: float,
        rhs: float,
        orientation: Literal["le", "ge"],
        tolerance: float,
        details: Optional[Dict[str, float]] = None,
    ) -> "BoundReport":
        """orientation 'le' checks lhs <= rhs, 'ge' checks lhs >= rhs."""
        slack = (rhs - lhs) if orientation == "le" else (lhs - rhs)
        if not (math.isfinite(lhs) and math.isfinite(rhs)):
            slack = float("nan")
        return cls(
            theorem=theorem,
            lhs=lhs,
            rhs=rhs,
            slack=slack,
            satisfied=bool(math.isfinite(slack) and slack >= -tolerance),
            tolerance_used=tolerance,
            details=details or {},
        )


class SpaceformRow(BaseModel):
    """One row of a space-form sweep (sweep.csv)."""
    n: int
    kappa: int
    theta: float
    theorem: str
    lhs: float
    rhs: float
    slack: float
    satisfied: bool = True


class SuiteRow(BaseModel):
    """One row of the acceptance matrix (suite.csv)."""
    domain: str
    gauge: str
    p: float
    theorem: str
    lhs: float
    rhs: float
    slack: float
    tolerance: float
    satisfied: bool
    detail: str = ""


class ExperimentReport(BaseModel):
    """Top-level report.json content."""
    command: Command
    theorem: str
    satisfied: bool
    mesh: Optional[MeshStats] = None
    tolerances: Dict[str, float] = Field(default_factory=dict)
    results: Dict[str, Any] = Field(default_factory=dict)
    errors: List[str] = Field(default_factory=list)
