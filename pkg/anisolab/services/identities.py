"""
Pohozaev identities, the Serrin/Weinberger constant and sign-condition
nonexistence predicates.
"""
import logging
from typing import Optional

import numpy as np

from anisolab.config import settings
from anisolab.exceptions import WrongRegime
from anisolab.models.fields import SolveReport, TriMesh
from anisolab.models.schemas import (
    BoundaryGradientStats,
    GaugeFamily,
    GaugeSpec,
    NonexistenceReport,
    PohozaevReport,
    SampledPredicate,
    SerrinReport,
    SourceSpec,
    TermSign,
    Verdict,
)
from anisolab.services.domain_mesh import domain_mesher
from anisolab.services.field_analysis import field_analyzer
from anisolab.services.gauge import gauge_calculus
from anisolab.services.solver import SourceTerms

logger = logging.getLogger(__name__)

DIMENSION = 2


class IdentityChecker:
    """Evaluates both sides of the integral identities on solved fields."""

    # Sample grid of the pointwise sign conditions
    SAMPLE_RANGE = 10.0
    SAMPLE_COUNT = 4001

    def boundary_density(self, report: SolveReport, mesh: TriMesh, g: GaugeSpec, p: float, weight_exp: float) -> np.ndarray:
        """
        |x|^{-bp} F^p(grad u) per boundary edge.

        Each edge uses the constant gradient of its adjacent triangle, a first-order trace.
        """
        edges = mesh.boundary
        density = gauge_calculus.eval_F(g, report.field.gradients[edges.triangles]) ** p
        if weight_exp != 0:
            radius = np.maximum(np.linalg.norm(edges.midpoints, axis=1), settings.weight_clamp_ratio * mesh.h_max)
            density = density * radius ** (-weight_exp)
        return density

    def boundary_flux(self, report: SolveReport, mesh: TriMesh, g: GaugeSpec, p: float, weight_exp: float) -> float:
        """int_{boundary} |x|^{-bp} F^p(grad u) <x, nu> ds."""
        density = self.boundary_density(report, mesh, g, p, weight_exp)
        return domain_mesher.boundary_integral(mesh, lambda e: density * domain_mesher.position_flux(e))

    def pohozaev_residual(
        self,
        report: SolveReport,
        g: GaugeSpec,
        src: SourceSpec,
        mesh: Optional[TriMesh] = None,
    ) -> PohozaevReport:
        """
        Both sides of the weighted anisotropic Pohozaev identity.

        lhs = (1 + b - n/p) int u g(x,u) + n int G(x,u) + int <x, grad_x G(x,u)>
        rhs = (1 - 1/p) int_{boundary} |x|^{-bp} F^p(grad u) <x, nu> ds

        Args:
            report: Solved field of the matching problem
            g: Gauge
            src: Source (carries b and p)
            mesh: Mesh of the field (defaults to the report's mesh)

        Returns:
            PohozaevReport
        """
        mesh = mesh or report.mesh
        p, b, n = src.p, src.weight_b, DIMENSION
        terms = SourceTerms.on_mesh(mesh, src)
        uc = report.field.centroid_values
        A = mesh.areas

        term_ug = (1.0 + b - n / p) * float(np.dot(A, uc * terms.g(uc)))
        term_G = n * float(np.dot(A, terms.G(uc)))
        term_xgradG = float(np.dot(A, terms.x_dot_grad_G(uc)))
        rhs = (1.0 - 1.0 / p) * self.boundary_flux(report, mesh, g, p, b * p)

        result = PohozaevReport.from_terms(term_ug, term_G, term_xgradG, rhs)
        logger.info(f"Pohozaev identity: lhs={result.lhs:.9g}, rhs={rhs:.9g}, rel={result.rel_residual:.3e}")
        return result

    def classic_pohozaev_residual(self, report: SolveReport, mesh: Optional[TriMesh] = None) -> PohozaevReport:
        """
        Classical identity (2-n) int u g(u) + 2n int G(u) = int_{boundary} |grad u|^2 <x, nu> ds.

        Raises:
            WrongRegime: Unless p = 2, b = 0, the gauge is Euclidean and the source
                does not depend on x
        """
        mesh = mesh or report.mesh
        src = report.source
        if report.p != 2 or src.weight_b != 0:
            raise WrongRegime(f"classical Pohozaev identity needs p=2 and b=0, got p={report.p:g}, b={src.weight_b:g}")
        if report.gauge.family != GaugeFamily.EUCLIDEAN:
            raise WrongRegime(f"classical Pohozaev identity needs the Euclidean gauge, got {report.gauge.label}")
        if not src.is_x_independent:
            raise WrongRegime("classical Pohozaev identity needs an x-independent source")

        n = DIMENSION
        terms = SourceTerms.on_mesh(mesh, src)
        uc = report.field.centroid_values
        A = mesh.areas
        term_ug = (2.0 - n) * float(np.dot(A, uc * terms.g(uc)))
        term_G = 2.0 * n * float(np.dot(A, terms.G(uc)))
        rhs = self.boundary_flux(report, mesh, report.gauge, 2.0, 0.0)
        return PohozaevReport.from_terms(term_ug, term_G, 0.0, rhs)

    def serrin_constant(self, report: SolveReport, mesh: Optional[TriMesh] = None) -> SerrinReport:
        """
        Weinberger constant c^2 = (n+2) T / (n |Omega|) and the boundary gradient profile.

        On a ball |grad u| is constant on the boundary and the ball radius is n|c|.
        """
        mesh = mesh or report.mesh
        if report.p != 2 or report.gauge.family != GaugeFamily.EUCLIDEAN:
            raise WrongRegime("Serrin constant is defined for the Euclidean p=2 torsion problem")
        n = DIMENSION
        T = field_analyzer.integrate(report.field)
        c_sq = (n + 2) * T / (n * mesh.area)
        edges = mesh.boundary
        grad_norms = np.sqrt(self.boundary_density(report, mesh, report.gauge, 2.0, 0.0))
        stats = BoundaryGradientStats(
            min=float(grad_norms.min()),
            max=float(grad_norms.max()),
            mean=float(np.dot(grad_norms, edges.lengths) / edges.lengths.sum()),
        )
        return SerrinReport(c_sq_pohozaev=c_sq, ball_radius=n * float(np.sqrt(c_sq)), boundary_gradient=stats)

    # === Nonexistence ===

    def nonexistence_predicate(self, n: int, p: float, b: float, src: SourceSpec) -> NonexistenceReport:
        """
        Sign conditions for nonexistence of positive solutions on star-shaped domains.

        Each power term contributes sigma = coef (1 + b - n/p + (n - alpha)/r); a constant
        term contributes coef (n + 1 + b - n/p - alpha). All must be <= 0 and the last power
        term must be < 0; ties give INCONCLUSIVE.
        """
        base = 1.0 + b - n / p
        signs = []
        for term in src.terms:
            signs.append(
                TermSign(
                    kind="power",
                    coef=term.coef,
                    weight_exp=term.weight_exp,
                    power=term.power,
                    sigma=term.coef * (base + (n - term.weight_exp) / term.power),
                    strict=False,
                )
            )
        if signs:
            signs[-1] = signs[-1].model_copy(update={"strict": True})
        if src.const_term != 0:
            signs.append(
                TermSign(
                    kind="constant",
                    coef=src.const_term,
                    weight_exp=src.const_weight_exp,
                    sigma=src.const_term * (n + base - src.const_weight_exp),
                    strict=False,
                )
            )

        holds = bool(signs) and any(s.strict for s in signs) and all(
            (s.sigma < 0) if s.strict else (s.sigma <= 0) for s in signs
        )
        verdict = Verdict.NONEXISTENCE if holds else Verdict.INCONCLUSIVE
        logger.debug(f"Nonexistence predicate n={n}, p={p:g}, b={b:g}: {verdict.value}")
        return NonexistenceReport(n=n, p=p, b=b, terms=signs, verdict=verdict)

    def _samples(self, positive_only: bool) -> np.ndarray:
        rho = np.linspace(-self.SAMPLE_RANGE, self.SAMPLE_RANGE, self.SAMPLE_COUNT)
        rho = rho[rho != 0]
        return rho[rho > 0] if positive_only else rho

    def trivial_solution_predicate(self, n: int, p: float, b: float, src: SourceSpec) -> SampledPredicate:
        """
        (1 + b - n/p) rho g(rho) + n G(rho) < 0 for sampled rho != 0.

        When it holds the problem with an x-independent source has only the zero
        solution on star-shaped domains.
        """
        if not src.is_x_independent:
            raise WrongRegime("the pointwise nonexistence condition needs an x-independent source")
        rho = self._samples(positive_only=False)
        terms = SourceTerms(src)
        values = (1.0 + b - n / p) * rho * terms.g(rho) + n * terms.G(rho)
        return SampledPredicate(
            name="no nontrivial solution",
            max_value=float(values.max()),
            samples=len(rho),
            satisfied=bool(np.all(values < 0)),
        )

    def classical_predicate(self, n: int, src: SourceSpec) -> SampledPredicate:
        """
        Classical condition (2 - n) u g(u) + 2n G(u) <= 0 for sampled u > 0 (semilinear, n >= 3).
        """
        if n < 3:
            raise WrongRegime(f"classical nonexistence condition needs n >= 3, got n={n}")
        if not src.is_x_independent:
            raise WrongRegime("the classical nonexistence condition needs an x-independent source")
        u = self._samples(positive_only=True)
        terms = SourceTerms(src)
        ug = (2.0 - n) * u * terms.g(u)
        G = 2.0 * n * terms.G(u)
        values = ug + G
        # the critical power gives zero up to rounding of the two terms
        rounding = 1e-12 * (np.abs(ug) + np.abs(G))
        return SampledPredicate(
            name="no positive solution (semilinear)",
            max_value=float(values.max()),
            samples=len(u),
            satisfied=bool(np.all(values <= rounding)),
        )


# Singleton instance
identity_checker = IdentityChecker()
