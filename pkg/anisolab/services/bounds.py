"""
Quantitative inequalities: the eigenvalue-torsion bound, the decay of the
distribution function of the torsion function, and the anisotropic
n-Laplace inequality.
"""
import logging
from typing import List, Optional

import numpy as np

from anisolab.config import settings
from anisolab.exceptions import HypothesisViolated, WrongRegime
from anisolab.models.fields import EigenPair, SolveReport, TriMesh
from anisolab.models.schemas import BoundReport, GaugeSpec, SolverOptions, SourceSpec
from anisolab.services.field_analysis import field_analyzer
from anisolab.services.gauge import gauge_calculus
from anisolab.services.solver import SourceTerms, variational_solver

logger = logging.getLogger(__name__)

DIMENSION = 2

EIGEN_TORSION_THEOREM = "eigenvalue-torsion bound lambda T^(p-1) / |Omega|^(p-1) <= 1 - C T / |Omega|^(1+p/(n(p-1)))"
MU_DECAY_THEOREM = "distribution decay mu(s) <= |Omega| (1 - b s)_+^a, a = n(p-1)/p"
N_LAPLACE_THEOREM = "n-Laplace inequality (int g(u))^(n/(n-1)) >= n^((2n-1)/(n-1)) kappa_n^(1/(n-1)) / (n-1) int G(u)"


class BoundChecker:
    """Evaluates both sides of the inequalities on solved fields."""

    def tolerance(self, h_max: float, strict: bool = False, c: Optional[float] = None) -> float:
        """tolerance_used = C * h_max, zero in strict mode."""
        if strict:
            return 0.0
        return (settings.tolerance_c if c is None else c) * h_max

    @staticmethod
    def eigen_torsion_constant(p: float, kappa_n: float, n: int = DIMENSION) -> float:
        """p^((2p-3)/(p-1)) (n kappa_n^(1/n))^(p/(p-1)) / (n (p-1) (n(p-1) + p))."""
        return (
            p ** ((2 * p - 3) / (p - 1))
            * (n * kappa_n ** (1.0 / n)) ** (p / (p - 1))
            / (n * (p - 1) * (n * (p - 1) + p))
        )

    def check_eigen_torsion_bound(
        self,
        mesh: TriMesh,
        g: GaugeSpec,
        p: float,
        strict: bool = False,
        options: Optional[SolverOptions] = None,
        torsion: Optional[SolveReport] = None,
        eigen: Optional[EigenPair] = None,
        tolerance_c: Optional[float] = None,
    ) -> BoundReport:
        """
        lambda_{p,1} T^{p-1} / |Omega|^{p-1} <= 1 - C T / |Omega|^{1 + p/(n(p-1))}.

        Args:
            mesh: Triangulated domain
            g: Gauge (its Hessian hypothesis is sampled first)
            p: Exponent p >= 2
            strict: Zero tolerance
            options: Solver options
            torsion: Precomputed torsion solve on the same mesh
            eigen: Precomputed eigenpair on the same mesh
            tolerance_c: Override of the tolerance constant C

        Returns:
            BoundReport with orientation lhs <= rhs; details hold the ingredients and
            the two intermediate inequalities of the argument
        """
        hypotheses = gauge_calculus.hypotheses(g, p)
        if not hypotheses.hessian_positive_definite:
            raise HypothesisViolated(
                f"[F^p]_xixi of {g.label} is not positive definite (min eigenvalue "
                f"{hypotheses.min_hessian_eigenvalue:.3e})"
            )
        torsion = torsion or variational_solver.solve_torsion(mesh, g, p, options)
        eigen = eigen or variational_solver.solve_eigen(mesh, g, p, options)

        n = DIMENSION
        area = mesh.area
        kappa = gauge_calculus.wulff_volume(g).kappa_n
        T = field_analyzer.integrate(torsion.field)
        lam = eigen.eigenvalue
        constant = self.eigen_torsion_constant(p, kappa, n)

        lhs = lam * T ** (p - 1) / area ** (p - 1)
        rhs = 1.0 - constant * T / area ** (1.0 + p / (n * (p - 1)))

        v_p = variational_solver.lp_norm_power(mesh, torsion.field.values, p)
        details = {
            "lambda": lam,
            "T": T,
            "area": area,
            "kappa_n": kappa,
            "constant": constant,
            "rayleigh_bound": T / v_p,
            "holder_ratio": T ** p / (area ** (p - 1) * v_p),
        }
        report = BoundReport.build(
            EIGEN_TORSION_THEOREM, lhs, rhs, "le", self.tolerance(mesh.h_max, strict, tolerance_c), details
        )
        logger.info(f"Eigenvalue-torsion bound ({g.label}, p={p:g}): {lhs:.6f} <= {rhs:.6f}: {report.satisfied}")
        return report

    def mu_decay_rate(self, p: float, kappa_n: float, area: float, n: int = DIMENSION) -> float:
        """b = (n kappa_n^(1/n))^(p/(p-1)) p / (n(p-1)) |Omega|^(-1/a)."""
        a = n * (p - 1) / p
        return (n * kappa_n ** (1.0 / n)) ** (p / (p - 1)) * p / (n * (p - 1)) * area ** (-1.0 / a)

    def check_mu_decay(
        self,
        mesh: TriMesh,
        g: GaugeSpec,
        p: float,
        strict: bool = False,
        options: Optional[SolverOptions] = None,
        torsion: Optional[SolveReport] = None,
        levels: Optional[np.ndarray] = None,
        tolerance_c: Optional[float] = None,
    ) -> List[BoundReport]:
        """
        Per-level check mu(s) <= |Omega| (1 - b s)_+^a of the torsion function.

        Returns:
            One BoundReport per level, orientation lhs <= rhs, tolerance C h_max
        """
        torsion = torsion or variational_solver.solve_torsion(mesh, g, p, options)
        n = DIMENSION
        area = mesh.area
        kappa = gauge_calculus.wulff_volume(g).kappa_n
        a = n * (p - 1) / p
        rate = self.mu_decay_rate(p, kappa, area, n)
        profile = field_analyzer.distribution_function(torsion.field, g, levels)
        tolerance = self.tolerance(mesh.h_max, strict, tolerance_c)

        reports = []
        for s, mu in zip(profile.levels, profile.mu):
            bound = area * max(1.0 - rate * s, 0.0) ** a
            reports.append(
                BoundReport.build(MU_DECAY_THEOREM, float(mu), bound, "le", tolerance, {"level": float(s), "decay_rate": rate})
            )
        violated = sum(not r.satisfied for r in reports)
        if violated:
            logger.warning(f"Distribution decay violated at {violated} of {len(reports)} levels")
        return reports

    def check_n_laplace_inequality(
        self,
        mesh: TriMesh,
        g: GaugeSpec,
        src: SourceSpec,
        strict: bool = False,
        options: Optional[SolverOptions] = None,
        solution: Optional[SolveReport] = None,
        tolerance_c: Optional[float] = None,
    ) -> BoundReport:
        """
        (int g(u))^{n/(n-1)} >= n^{(2n-1)/(n-1)} kappa_n^{1/(n-1)} / (n-1) int G(u), n = p = 2.

        Raises:
            WrongRegime: Unless p = 2, b = 0 and the source does not depend on x
            HypothesisViolated: If g is negative somewhere on [0, infinity)
        """
        n = DIMENSION
        if src.p != n or src.weight_b != 0 or not src.is_x_independent:
            raise WrongRegime("the n-Laplace inequality is checked for p = n = 2, b = 0 and g = g(u)")
        terms = SourceTerms(src)
        sample = np.linspace(0.0, 10.0, 1001)
        if np.any(terms.g(sample) < 0):
            raise HypothesisViolated("the n-Laplace inequality needs g(s) >= 0 for s >= 0")

        solution = solution or variational_solver.solve_dirichlet(mesh, g, src, options)
        kappa = gauge_calculus.wulff_volume(g).kappa_n
        source = SourceTerms.on_mesh(mesh, src)
        uc = solution.field.centroid_values
        int_g = float(np.dot(mesh.areas, source.g(uc)))
        int_G = float(np.dot(mesh.areas, source.G(uc)))

        lhs = max(int_g, 0.0) ** (n / (n - 1))
        constant = n ** ((2 * n - 1) / (n - 1)) * kappa ** (1.0 / (n - 1)) / (n - 1)
        rhs = constant * int_G
        report = BoundReport.build(
            N_LAPLACE_THEOREM,
            lhs,
            rhs,
            "ge",
            self.tolerance(mesh.h_max, strict, tolerance_c),
            {"int_g": int_g, "int_G": int_G, "kappa_n": kappa, "constant": constant},
        )
        logger.info(f"n-Laplace inequality ({g.label}): {lhs:.6f} >= {rhs:.6f}: {report.satisfied}")
        return report


# Singleton instance
bound_checker = BoundChecker()
