"""
P1 finite-element solvers for the anisotropic p-Laplacian.

Solves the p-torsion problem, the weighted Dirichlet problem with power-law
sources, and the first Dirichlet eigenpair, all by minimizing the discrete energy
    E(u) = sum_T |T| w_T F^p(grad u) / p - sum_T |T| G(x_T, u_T) - <load, u>
with preconditioned descent, Armijo backtracking and safeguarded Newton steps.
"""
import logging
import math
from typing import List, Optional

import numpy as np
from scipy.sparse import coo_matrix, diags
from scipy.sparse.linalg import factorized, spsolve

from anisolab.config import settings
from anisolab.exceptions import NoConvergence, NonCoerciveSource
from anisolab.models.fields import EigenPair, ScalarField, SolveReport, TriMesh
from anisolab.models.schemas import (
    GaugeSpec,
    RigidityReport,
    SolveSummary,
    SolverOptions,
    SourceSpec,
)
from anisolab.services.field_analysis import field_analyzer
from anisolab.services.gauge import gauge_calculus

logger = logging.getLogger(__name__)


class SourceTerms:
    """Closed forms of g(x, u), its primitive G and derivatives, at triangle centroids."""

    def __init__(self, src: SourceSpec, term_weights=None, const_weight=1.0):
        self.src = src
        self.terms = [t for t in src.terms if t.coef != 0]
        self.term_weights = term_weights if term_weights is not None else [1.0] * len(self.terms)
        self.const_weight = const_weight

    @classmethod
    def on_mesh(cls, mesh: TriMesh, src: SourceSpec) -> "SourceTerms":
        """Weights |x|^{-alpha} evaluated at the triangle centroids."""
        terms = [t for t in src.terms if t.coef != 0]
        return cls(
            src,
            [field_analyzer.radial_weight(mesh, t.weight_exp) for t in terms],
            field_analyzer.radial_weight(mesh, src.const_weight_exp),
        )

    def g(self, u: np.ndarray) -> np.ndarray:
        out = self.src.const_term * self.const_weight
        for term, w in zip(self.terms, self.term_weights):
            out = out + term.coef * w * np.abs(u) ** (term.power - 2) * u
        return out

    def G(self, u: np.ndarray) -> np.ndarray:
        out = self.src.const_term * self.const_weight * u
        for term, w in zip(self.terms, self.term_weights):
            out = out + term.coef / term.power * w * np.abs(u) ** term.power
        return out

    def dg_du(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        for term, w in zip(self.terms, self.term_weights):
            with np.errstate(divide="ignore"):
                slope = term.coef * (term.power - 1) * w * np.abs(u) ** (term.power - 2)
            out = out + np.where(np.isfinite(slope), slope, 0.0)
        return out

    def x_dot_grad_G(self, u: np.ndarray) -> np.ndarray:
        """<x, grad_x G(x, u)> = -sum (coef alpha / r) |x|^-alpha |u|^r - c alpha_c |x|^-alpha_c u."""
        out = -self.src.const_term * self.src.const_weight_exp * self.const_weight * u
        for term, w in zip(self.terms, self.term_weights):
            out = out - term.coef * term.weight_exp / term.power * w * np.abs(u) ** term.power
        return out


class EnergyFunctional:
    """Discrete energy, gradient and Hessian on a fixed mesh."""

    def __init__(
        self,
        mesh: TriMesh,
        gauge: GaugeSpec,
        p: float,
        source: Optional[SourceSpec] = None,
        load: Optional[np.ndarray] = None,
        weight_exp: float = 0.0,
    ):
        self.mesh = mesh
        self.gauge = gauge
        self.p = p
        self.weights = field_analyzer.radial_weight(mesh, weight_exp)
        self.source = SourceTerms.on_mesh(mesh, source) if source is not None else None
        self.load = load
        self.scaled_areas = mesh.areas * self.weights / p

    def _grads(self, u: np.ndarray) -> np.ndarray:
        return np.einsum("tk,tkd->td", u[self.mesh.triangles], self.mesh.shape_gradients)

    def stiffness_energy(self, u: np.ndarray) -> float:
        F = gauge_calculus.eval_F(self.gauge, self._grads(u))
        return float(np.dot(self.scaled_areas, F ** self.p))

    def source_energy(self, u: np.ndarray) -> float:
        total = 0.0
        if self.source is not None:
            uc = u[self.mesh.triangles].mean(axis=1)
            total += float(np.dot(self.mesh.areas, self.source.G(uc)))
        if self.load is not None:
            total += float(np.dot(self.load, u))
        return total

    def energy(self, u: np.ndarray) -> float:
        return self.stiffness_energy(u) - self.source_energy(u)

    def gradient_parts(self, u: np.ndarray):
        """Nodal gradients of the stiffness and source parts of the energy."""
        tri = self.mesh.triangles
        n = self.mesh.node_count
        flux = gauge_calculus.grad_Fp(self.gauge, self.p, self._grads(u))
        local = self.scaled_areas[:, None] * np.einsum("tkd,td->tk", self.mesh.shape_gradients, flux)
        stiffness = np.bincount(tri.reshape(-1), weights=local.reshape(-1), minlength=n)
        source = np.zeros(n)
        if self.source is not None:
            uc = u[tri].mean(axis=1)
            per_node = np.repeat(self.mesh.areas * self.source.g(uc) / 3.0, 3)
            source += np.bincount(tri.reshape(-1), weights=per_node, minlength=n)
        if self.load is not None:
            source += self.load
        return stiffness, source

    def gradient(self, u: np.ndarray) -> np.ndarray:
        stiffness, source = self.gradient_parts(u)
        return stiffness - source

    def hessian(self, u: np.ndarray):
        """Sparse Hessian of the energy (CSR)."""
        tri = self.mesh.triangles
        n = self.mesh.node_count
        H = gauge_calculus.hess_Fp_extended(self.gauge, self.p, self._grads(u))
        S = self.mesh.shape_gradients
        local = self.scaled_areas[:, None, None] * np.einsum("tid,tde,tje->tij", S, H, S)
        if self.source is not None:
            uc = u[tri].mean(axis=1)
            local = local - (self.mesh.areas * self.source.dg_du(uc) / 9.0)[:, None, None]
        rows = np.repeat(tri, 3, axis=1).reshape(-1)
        cols = np.tile(tri, (1, 3)).reshape(-1)
        return coo_matrix((local.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()


class VariationalSolver:
    """
    Energy minimization for the torsion, Dirichlet and eigenvalue problems.

    The preconditioner is the Euclidean Laplacian stiffness matrix on the free
    nodes, factorized once per mesh solve.
    """

    def laplacian(self, mesh: TriMesh):
        S = mesh.shape_gradients
        local = mesh.areas[:, None, None] * np.einsum("tid,tjd->tij", S, S)
        tri = mesh.triangles
        rows = np.repeat(tri, 3, axis=1).reshape(-1)
        cols = np.tile(tri, (1, 3)).reshape(-1)
        n = mesh.node_count
        return coo_matrix((local.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()

    def minimize(
        self,
        functional: EnergyFunctional,
        options: Optional[SolverOptions] = None,
        initial: Optional[np.ndarray] = None,
        kind: str = "dirichlet",
        source: Optional[SourceSpec] = None,
        preconditioner=None,
    ) -> SolveReport:
        """
        Minimize a discrete energy over fields vanishing on the boundary.

        Args:
            functional: Energy to minimize
            options: Tolerances and iteration caps
            initial: Starting nodal values (boundary values are reset to 0)
            kind: Label stored in the report
            source: Source stored in the report
            preconditioner: Factorized Laplacian on the free nodes, reused across calls

        Returns:
            SolveReport of the converged iterate

        Raises:
            NoConvergence: Iteration cap reached or stagnation above the acceptance tolerance
            NonCoerciveSource: Energy or iterates diverge
        """
        opts = options or SolverOptions()
        mesh = functional.mesh
        free = mesh.interior_nodes
        K = self.laplacian(mesh)[free][:, free]
        solve_K = preconditioner or factorized(K.tocsc())
        K_diag = K.diagonal()

        u = np.zeros(mesh.node_count) if initial is None else np.array(initial, dtype=float)
        u[mesh.boundary_nodes] = 0.0
        energy = functional.energy(u)
        history = [energy]
        grad_norm = math.inf
        iterations = 0

        def report(converged: bool) -> SolveReport:
            stiffness, src_part = functional.gradient_parts(u)
            residual = float(
                np.linalg.norm(stiffness[free] - src_part[free])
                / (np.linalg.norm(stiffness[free]) + np.linalg.norm(src_part[free]) + 1e-300)
            )
            return SolveReport(
                field=ScalarField(mesh, u.copy()),
                energy=energy,
                grad_norm=grad_norm,
                iterations=iterations,
                converged=converged,
                tolerance=opts.accept_tol,
                residual=residual,
                gauge=functional.gauge,
                p=functional.p,
                source=source or SourceSpec(p=max(functional.p, 2.0)),
                kind=kind,
                energy_history=history,
            )

        for iterations in range(1, opts.max_iterations + 1):
            g = functional.gradient(u)[free]
            precond = solve_K(g)
            grad_norm = math.sqrt(max(float(np.dot(g, precond)), 0.0))
            if grad_norm < opts.gradient_tol:
                iterations -= 1
                break

            direction = -precond
            used_newton = False
            if opts.newton:
                newton = self._newton_direction(functional, u, free, g, K_diag)
                if newton is not None:
                    direction, used_newton = newton, True

            slope = float(np.dot(g, direction))
            step, trial_energy, trial = self._armijo(functional, u, free, direction, energy, slope)
            if step is None and used_newton:
                direction = -precond
                slope = float(np.dot(g, direction))
                step, trial_energy, trial = self._armijo(functional, u, free, direction, energy, slope)
            if step is None:
                logger.debug(f"Line search stalled at iteration {iterations}")
                break

            decrease = energy - trial_energy
            u, energy = trial, trial_energy
            history.append(energy)
            logger.debug(f"iter {iterations}: E={energy:.12g} |g|={grad_norm:.3e} step={step:.3g}")

            if energy < -settings.divergence_threshold or np.max(np.abs(u)) > 1e10:
                raise NonCoerciveSource(
                    f"energy diverged to {energy:.3e} after {iterations} iterations", report(False)
                )
            if decrease <= opts.energy_rtol * max(abs(energy), 1e-300):
                g = functional.gradient(u)[free]
                grad_norm = math.sqrt(max(float(np.dot(g, solve_K(g))), 0.0))
                break
        else:
            raise NoConvergence(
                f"no convergence after {opts.max_iterations} iterations (|g|={grad_norm:.3e})", report(False)
            )

        if grad_norm > opts.accept_tol:
            raise NoConvergence(
                f"stagnated at |g|={grad_norm:.3e} > {opts.accept_tol:g} after {iterations} iterations",
                report(False),
            )
        logger.debug(f"{kind} solve converged in {iterations} iterations, E={energy:.12g}")
        return report(True)

    def _newton_direction(self, functional, u, free, g, K_diag) -> Optional[np.ndarray]:
        H = functional.hessian(u)[free][:, free]
        diagonal = H.diagonal()
        if not (np.all(np.isfinite(H.data)) and np.all(diagonal > 0)):
            return None
        H = H + diags(settings.newton_shift * K_diag)
        with np.errstate(all="ignore"):
            d = spsolve(H.tocsc(), -g)
        if not np.all(np.isfinite(d)) or float(np.dot(g, d)) >= 0:
            return None
        return d

    def _armijo(self, functional, u, free, direction, energy, slope):
        if not slope < 0:
            return None, energy, u
        step = 1.0
        for _ in range(60):
            trial = u.copy()
            trial[free] += step * direction
            trial_energy = functional.energy(trial)
            if math.isfinite(trial_energy) and trial_energy <= energy + settings.armijo_c * step * slope:
                return step, trial_energy, trial
            step *= settings.armijo_rho
        return None, energy, u

    # === Problems ===

    def solve_torsion(
        self, mesh: TriMesh, g: GaugeSpec, p: float, options: Optional[SolverOptions] = None
    ) -> SolveReport:
        """Minimize (1/p) int F^p(grad v) - int v over fields vanishing on the boundary."""
        source = SourceSpec.constant(1.0, p=p)
        functional = EnergyFunctional(mesh, g, p, source=source)
        result = self.minimize(functional, options, kind="torsion", source=source)
        interior = result.field.values[mesh.interior_nodes]
        if interior.size and interior.min() <= 0:
            logger.warning(f"Torsion field has nonpositive interior values (min={interior.min():.3e})")
        logger.info(
            f"Torsion solve ({g.label}, p={p:g}): T={field_analyzer.integrate(result.field):.9f}, "
            f"{result.iterations} iterations"
        )
        return result

    def solve_dirichlet(
        self,
        mesh: TriMesh,
        g: GaugeSpec,
        src: SourceSpec,
        options: Optional[SolverOptions] = None,
        initial: Optional[np.ndarray] = None,
    ) -> SolveReport:
        """
        Critical point of int (1/p)|x|^{-bp} F^p(grad u) - int G(x, u) with zero boundary values.

        Args:
            mesh: Triangulation
            g: Gauge
            src: Source terms, weight exponent b and p
            options: Solver options
            initial: Optional starting field

        Returns:
            SolveReport
        """
        functional = EnergyFunctional(mesh, g, src.p, source=src, weight_exp=src.weight_b * src.p)
        kind = "torsion" if src.is_pure_constant and src.const_term == 1 and src.weight_b == 0 else "dirichlet"
        result = self.minimize(functional, options, initial=initial, kind=kind, source=src)
        logger.info(f"Dirichlet solve ({g.label}, p={src.p:g}): residual={result.residual:.3e}")
        return result

    # === Eigenvalue ===

    @staticmethod
    def _midpoint_values(mesh: TriMesh, u: np.ndarray) -> np.ndarray:
        tri = u[mesh.triangles]
        return 0.5 * np.stack([tri[:, 0] + tri[:, 1], tri[:, 1] + tri[:, 2], tri[:, 2] + tri[:, 0]], axis=1)

    def lp_norm_power(self, mesh: TriMesh, u: np.ndarray, p: float) -> float:
        """int |u|^p by the edge-midpoint rule (exact for p = 2)."""
        mids = self._midpoint_values(mesh, u)
        return float(np.dot(mesh.areas / 3.0, np.sum(np.abs(mids) ** p, axis=1)))

    def eigen_load(self, mesh: TriMesh, u: np.ndarray, p: float) -> np.ndarray:
        """Nodal load int |u|^{p-2} u phi_i by the edge-midpoint rule."""
        mids = self._midpoint_values(mesh, u)
        f = np.abs(mids) ** (p - 2) * mids * (mesh.areas / 6.0)[:, None]
        # midpoint k sits on edge (k, k+1): each endpoint sees phi = 1/2
        per_node = np.stack([f[:, 0] + f[:, 2], f[:, 0] + f[:, 1], f[:, 1] + f[:, 2]], axis=1)
        return np.bincount(mesh.triangles.reshape(-1), weights=per_node.reshape(-1), minlength=mesh.node_count)

    def rayleigh_quotient(self, mesh: TriMesh, g: GaugeSpec, p: float, u: np.ndarray) -> float:
        field = ScalarField(mesh, u)
        numerator = float(np.dot(mesh.areas, gauge_calculus.eval_F(g, field.gradients) ** p))
        return numerator / self.lp_norm_power(mesh, u, p)

    def solve_eigen(
        self,
        mesh: TriMesh,
        g: GaugeSpec,
        p: float,
        options: Optional[SolverOptions] = None,
        initial: Optional[np.ndarray] = None,
    ) -> EigenPair:
        """
        First Dirichlet eigenpair by inverse iteration.

        Each step minimizes (1/p) int F^p(grad w) - int |u_k|^{p-2} u_k w and sets
        u_{k+1} = w / ||w||_p. The eigenvalue is the Rayleigh quotient at the fixed point.

        Args:
            mesh: Triangulated domain
            g: Gauge
            p: Exponent p > 1
            options: Solver options
            initial: Nonnegative starting field (the torsion function by default)

        Raises:
            NoConvergence: The Rayleigh quotient rose by more than 1e-12 relative, or the
                step cap was reached; the last accepted iterate is attached
        """
        opts = options or SolverOptions()
        free = mesh.interior_nodes
        solve_K = factorized(self.laplacian(mesh)[free][:, free].tocsc())

        if initial is None:
            u = self.solve_torsion(mesh, g, p, opts).field.values
        else:
            u = np.maximum(np.array(initial, dtype=float), 0.0)
            u[mesh.boundary_nodes] = 0.0
        u = u / self.lp_norm_power(mesh, u, p) ** (1.0 / p)
        quotient = self.rayleigh_quotient(mesh, g, p, u)
        history: List[float] = [quotient]
        w = u

        for iteration in range(1, opts.eigen_max_iterations + 1):
            functional = EnergyFunctional(mesh, g, p, load=self.eigen_load(mesh, u, p))
            w = self.minimize(functional, opts, initial=w, kind="eigen-step", preconditioner=solve_K).field.values
            u_next = w / self.lp_norm_power(mesh, w, p) ** (1.0 / p)
            if u_next[free].sum() < 0:
                u_next = -u_next
            if u_next.min() < -1e-12 * u_next.max():
                logger.warning(f"Clipping negative eigenfield values (min={u_next.min():.3e})")
            u_next = np.maximum(u_next, 0.0)
            u_next = u_next / self.lp_norm_power(mesh, u_next, p) ** (1.0 / p)

            new_quotient = self.rayleigh_quotient(mesh, g, p, u_next)
            if new_quotient > quotient * (1 + 1e-12):
                raise NoConvergence(
                    f"Rayleigh quotient increased at step {iteration}: {quotient:.12g} -> {new_quotient:.12g}",
                    EigenPair(quotient, ScalarField(mesh, u), iteration - 1, g, p, history),
                )
            history.append(new_quotient)
            u = u_next
            if abs(new_quotient - quotient) <= opts.eigen_rtol * new_quotient:
                quotient = new_quotient
                logger.info(f"Eigen solve ({g.label}, p={p:g}): lambda={quotient:.9f} after {iteration} steps")
                return EigenPair(
                    eigenvalue=quotient,
                    field=ScalarField(mesh, u),
                    iterations=iteration,
                    gauge=g,
                    p=p,
                    quotient_history=history,
                )
            quotient = new_quotient

        raise NoConvergence(
            f"inverse iteration did not settle after {opts.eigen_max_iterations} steps (lambda={quotient:.9f})",
            EigenPair(quotient, ScalarField(mesh, u), opts.eigen_max_iterations, g, p, history),
        )

    # === Derived quantities ===

    def torsional_rigidity(self, report: SolveReport, g: Optional[GaugeSpec] = None, p: Optional[float] = None) -> RigidityReport:
        """
        Both forms of the torsional rigidity and the variational quotient.

        T_from_u = int v, T_from_energy = int F^p(grad v), and
        (int |v|)^p / int F^p(grad v) which equals T^{p-1} at the torsion function.
        """
        g = g or report.gauge
        p = p or report.p
        field = report.field
        T_u = field_analyzer.integrate(field)
        T_E = float(np.dot(field.mesh.areas, gauge_calculus.eval_F(g, field.gradients) ** p))
        L1 = field_analyzer.integrate(field, np.abs)
        quotient = L1 ** p / T_E if T_E > 0 else 0.0
        T_power = T_u ** (p - 1) if T_u > 0 else 0.0
        gap = abs(T_u - T_E) / T_u if T_u > 0 else 0.0
        consistent = gap <= 0.02 and abs(quotient - T_power) <= 0.02 * max(T_power, 1e-300)
        if not consistent:
            logger.warning(f"Torsional rigidity forms disagree: T_u={T_u:.6g}, T_E={T_E:.6g}")
        return RigidityReport(
            T_from_u=T_u,
            T_from_energy=T_E,
            variational_quotient=quotient,
            T_power=T_power,
            relative_gap=gap,
            consistent=consistent,
        )

    def summary(self, report: SolveReport) -> SolveSummary:
        interior = report.field.values[report.mesh.interior_nodes]
        return SolveSummary(
            kind=report.kind,
            gauge=report.gauge.label,
            p=report.p,
            energy=report.energy,
            grad_norm=report.grad_norm,
            residual=report.residual,
            iterations=report.iterations,
            converged=report.converged,
            tolerance=report.tolerance,
            integral=field_analyzer.integrate(report.field),
            max_value=float(report.field.values.max()),
            min_interior=float(interior.min()) if interior.size else 0.0,
        )


# Singleton instance
variational_solver = VariationalSolver()
