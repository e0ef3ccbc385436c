"""
Experiments Router - one handler per laboratory command.

Handlers build the gauge and domain of an ExperimentConfig, dispatch the
solves and checks, write tables through the ReportWriter and return the
ExperimentReport that becomes report.json.
"""
import logging
import time
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from anisolab.config import settings
from anisolab.exceptions import ConfigError, LabError, NoConvergence, NonCoerciveSource, WrongRegime
from anisolab.models.fields import EigenPair, SolveReport, TriMesh
from anisolab.models.schemas import (
    BoundReport,
    Command,
    EigenSummary,
    ExperimentConfig,
    ExperimentReport,
    GaugeFamily,
    GaugeSpec,
    SolverOptions,
    SpaceformSpec,
)
from anisolab.models.storage import SWEEP_FILE, ReportWriter
from anisolab.services.bounds import EIGEN_TORSION_THEOREM, MU_DECAY_THEOREM, bound_checker
from anisolab.services.domain_mesh import domain_mesher
from anisolab.services.field_analysis import WULFF_THEOREM, field_analyzer
from anisolab.services.gauge import gauge_calculus
from anisolab.services.identities import identity_checker
from anisolab.services.solver import variational_solver
from anisolab.services.spaceform import spaceform_analyzer

logger = logging.getLogger(__name__)

Handler = Callable[[ExperimentConfig, ReportWriter], ExperimentReport]


class CommandRouter:
    """Maps commands to handler functions."""

    def __init__(self, prefix: str = "anisolab"):
        self.prefix = prefix
        self._handlers: Dict[Command, Handler] = {}

    def command(self, command: Command):
        def register(handler: Handler) -> Handler:
            self._handlers[command] = handler
            return handler
        return register

    def resolve(self, command: Command) -> Handler:
        if command not in self._handlers:
            raise ConfigError(f"No handler registered for command '{command.value}'")
        return self._handlers[command]


router = CommandRouter()

THEOREMS = {
    Command.SOLVE_TORSION: "anisotropic p-torsion problem",
    Command.SOLVE_EIGEN: "first Dirichlet eigenvalue of the anisotropic p-Laplacian",
    Command.CHECK_POHOZAEV: "weighted anisotropic Pohozaev identity",
    Command.CHECK_BOUNDS: EIGEN_TORSION_THEOREM,
    Command.SPACEFORM_REPORT: "torsion estimates on geodesic balls of space forms",
    Command.WULFF_INFO: "Wulff shape measures",
    Command.SUITE: "acceptance suite",
}


# =============================================================================
# SHARED PIPELINES
# =============================================================================

def build_mesh(config: ExperimentConfig) -> TriMesh:
    mesh = domain_mesher.build_mesh(config.domain, config.effective_target_h, config.gauge)
    logger.info(
        f"Mesh {config.domain.label}: {mesh.node_count} vertices, {mesh.triangle_count} triangles, "
        f"h_max={mesh.h_max:.4f}"
    )
    return mesh


def level_grid(field_sup: float, count: int) -> np.ndarray:
    return np.linspace(0.0, field_sup, count, endpoint=False)


def worst(reports: List[BoundReport]) -> BoundReport:
    """Report with the smallest slack (NaN counts as worst)."""
    return min(reports, key=lambda r: r.slack if np.isfinite(r.slack) else -np.inf)


def level_summary(reports: List[BoundReport]) -> Dict[str, float]:
    slacks = np.array([r.slack for r in reports])
    return {
        "levels": len(reports),
        "violations": int(sum(not r.satisfied for r in reports)),
        "min_slack": float(np.nanmin(slacks)) if len(slacks) else 0.0,
        "tolerance_used": reports[0].tolerance_used if reports else 0.0,
    }


@dataclass
class BoundRun:
    """Everything check-bounds produces on one mesh."""
    mesh: TriMesh
    torsion: SolveReport
    eigen: EigenPair
    eigen_torsion: BoundReport
    mu_decay: List[BoundReport]
    wulff: List[BoundReport]
    n_laplace: Optional[BoundReport] = None
    skipped: List[str] = dataclass_field(default_factory=list)

    @property
    def satisfied(self) -> bool:
        checks = [self.eigen_torsion, *self.mu_decay, *self.wulff]
        if self.n_laplace is not None:
            checks.append(self.n_laplace)
        return all(r.satisfied for r in checks)


def run_bound_checks(
    mesh: TriMesh,
    gauge: GaugeSpec,
    p: float,
    strict: bool,
    options: SolverOptions,
    tolerance_c: float,
    level_count: int,
    n_laplace_source=None,
) -> BoundRun:
    """Solve torsion and eigen problems once and run every inequality on them."""
    torsion = variational_solver.solve_torsion(mesh, gauge, p, options)
    eigen = variational_solver.solve_eigen(mesh, gauge, p, options)
    levels = level_grid(torsion.field.sup, level_count)
    kappa = gauge_calculus.wulff_volume(gauge).kappa_n

    eigen_torsion = bound_checker.check_eigen_torsion_bound(
        mesh, gauge, p, strict, options, torsion=torsion, eigen=eigen, tolerance_c=tolerance_c
    )
    mu_decay = bound_checker.check_mu_decay(
        mesh, gauge, p, strict, options, torsion=torsion, levels=levels, tolerance_c=tolerance_c
    )
    profile = field_analyzer.distribution_function(torsion.field, gauge, levels)
    wulff = field_analyzer.wulff_check(profile, gauge, mesh.h_max, strict, kappa)

    result = BoundRun(mesh=mesh, torsion=torsion, eigen=eigen, eigen_torsion=eigen_torsion, mu_decay=mu_decay, wulff=wulff)
    if n_laplace_source is not None:
        try:
            result.n_laplace = bound_checker.check_n_laplace_inequality(
                mesh, gauge, n_laplace_source, strict, options, tolerance_c=tolerance_c
            )
        except WrongRegime as e:
            result.skipped.append(f"n-Laplace inequality: {e.detail}")
    return result


# =============================================================================
# HANDLERS
# =============================================================================

@router.command(Command.SOLVE_TORSION)
def solve_torsion(config: ExperimentConfig, writer: ReportWriter) -> ExperimentReport:
    """
    Torsion function, torsional rigidity and the Wulff inequality on its level sets.

    Writes field.csv (nodal values) and levels.csv (mu, P_F, Wulff slack).
    """
    mesh = build_mesh(config)
    report = variational_solver.solve_torsion(mesh, config.gauge, config.p, config.solver)
    rigidity = variational_solver.torsional_rigidity(report)

    profile = field_analyzer.distribution_function(report.field, config.gauge, level_grid(report.field.sup, config.levels))
    wulff = field_analyzer.wulff_check(profile, config.gauge, mesh.h_max, config.strict)
    writer.write_field(report.field)
    writer.write_levels(field_analyzer.with_wulff_slack(profile, wulff))

    return ExperimentReport(
        command=Command.SOLVE_TORSION,
        theorem=THEOREMS[Command.SOLVE_TORSION],
        satisfied=report.converged and all(r.satisfied for r in wulff),
        mesh=domain_mesher.mesh_stats(mesh),
        tolerances={"solver_accept_tol": config.solver.accept_tol, "wulff_tolerance": wulff[0].tolerance_used},
        results={
            "T": rigidity.T_from_u,
            "torsion": variational_solver.summary(report),
            "rigidity": rigidity,
            "wulff": {"theorem": WULFF_THEOREM, **level_summary(wulff)},
            "layer_cake_integral": field_analyzer.layer_cake_integral(profile),
        },
    )


def eigen_summary(pair: EigenPair) -> EigenSummary:
    return EigenSummary(
        eigenvalue=pair.eigenvalue,
        iterations=pair.iterations,
        rayleigh_history=list(pair.quotient_history),
        min_value=float(pair.field.values.min()),
    )


@router.command(Command.SOLVE_EIGEN)
def solve_eigen(config: ExperimentConfig, writer: ReportWriter) -> ExperimentReport:
    mesh = build_mesh(config)
    pair = variational_solver.solve_eigen(mesh, config.gauge, config.p, config.solver)
    writer.write_field(pair.field)
    summary = eigen_summary(pair)
    return ExperimentReport(
        command=Command.SOLVE_EIGEN,
        theorem=THEOREMS[Command.SOLVE_EIGEN],
        satisfied=True,
        mesh=domain_mesher.mesh_stats(mesh),
        tolerances={"eigen_rtol": config.solver.eigen_rtol},
        results={"eigen": summary},
    )


@router.command(Command.CHECK_POHOZAEV)
def check_pohozaev(config: ExperimentConfig, writer: ReportWriter) -> ExperimentReport:
    """
    Pohozaev identity on the Dirichlet solution, plus the sign-condition predicates.

    The classical identity and the Serrin constant are added in the Euclidean
    semilinear regime they are defined for.
    """
    mesh = build_mesh(config)
    src = config.effective_source()
    solution = variational_solver.solve_dirichlet(mesh, config.gauge, src, config.solver)
    writer.write_field(solution.field)

    pohozaev = identity_checker.pohozaev_residual(solution, config.gauge, src, mesh)
    tolerance = bound_checker.tolerance(mesh.h_max, config.strict, config.tolerance_c)
    results = {
        "pohozaev": pohozaev,
        "solution": variational_solver.summary(solution),
        "nonexistence": identity_checker.nonexistence_predicate(2, config.p, config.b, src),
        "star_shape_margin": domain_mesher.star_shape_margin(mesh.polygon),
    }

    classical_regime = (
        config.p == 2 and config.b == 0 and config.gauge.family == GaugeFamily.EUCLIDEAN and src.is_x_independent
    )
    if classical_regime:
        classic = identity_checker.classic_pohozaev_residual(solution, mesh)
        results["classic_pohozaev"] = classic
        if pohozaev.lhs != 0:
            results["classic_to_weighted_ratio"] = classic.lhs / pohozaev.lhs
        if src.is_pure_constant:
            results["serrin"] = identity_checker.serrin_constant(solution, mesh)
    if src.is_x_independent:
        results["trivial_solution_predicate"] = identity_checker.trivial_solution_predicate(2, config.p, config.b, src)

    return ExperimentReport(
        command=Command.CHECK_POHOZAEV,
        theorem=THEOREMS[Command.CHECK_POHOZAEV],
        satisfied=pohozaev.rel_residual <= tolerance,
        mesh=domain_mesher.mesh_stats(mesh),
        tolerances={"rel_residual_tolerance": tolerance, "C": config.tolerance_c},
        results=results,
    )


@router.command(Command.CHECK_BOUNDS)
def check_bounds(config: ExperimentConfig, writer: ReportWriter) -> ExperimentReport:
    """Eigenvalue-torsion bound, distribution decay, Wulff and n-Laplace inequalities."""
    mesh = build_mesh(config)
    run = run_bound_checks(
        mesh,
        config.gauge,
        config.p,
        config.strict,
        config.solver,
        config.tolerance_c,
        config.levels,
        n_laplace_source=config.effective_source() if config.p == 2 else None,
    )
    writer.write_field(run.torsion.field)
    writer.write_table(
        "levels.csv",
        pd.DataFrame(
            {
                "level": [r.details["level"] for r in run.mu_decay],
                "mu": [r.lhs for r in run.mu_decay],
                "mu_bound": [r.rhs for r in run.mu_decay],
                "perim_F": [r.lhs for r in run.wulff],
                "wulff_slack": [r.slack for r in run.wulff],
            }
        ),
    )

    results = {
        "eigen_torsion": run.eigen_torsion,
        "mu_decay": {"theorem": MU_DECAY_THEOREM, **level_summary(run.mu_decay), "worst": worst(run.mu_decay)},
        "wulff": {"theorem": WULFF_THEOREM, **level_summary(run.wulff)},
        "hypotheses": gauge_calculus.hypotheses(config.gauge, config.p),
        "eigenvalue": run.eigen.eigenvalue,
        "T": field_analyzer.integrate(run.torsion.field),
    }
    if run.n_laplace is not None:
        results["n_laplace"] = run.n_laplace

    return ExperimentReport(
        command=Command.CHECK_BOUNDS,
        theorem=THEOREMS[Command.CHECK_BOUNDS],
        satisfied=run.satisfied,
        mesh=domain_mesher.mesh_stats(mesh),
        tolerances={
            "C": config.tolerance_c,
            "h_max": mesh.h_max,
            "eigen_torsion": run.eigen_torsion.tolerance_used,
            "mu_decay": run.mu_decay[0].tolerance_used,
            "wulff": run.wulff[0].tolerance_used,
        },
        results=results,
        errors=run.skipped,
    )


@router.command(Command.SPACEFORM_REPORT)
def spaceform_report(config: ExperimentConfig, writer: ReportWriter) -> ExperimentReport:
    """Radial torsion checks on one geodesic ball, or on every ball of a sweep."""
    if config.sweep is not None:
        rows = spaceform_analyzer.sweep(config.sweep)
        results = {"rows": len(rows), "failed": [r for r in rows if not r.satisfied]}
    else:
        spec = config.spaceform or SpaceformSpec()
        ball = spaceform_analyzer.make_ball(spec)
        sol = spaceform_analyzer.solve_radial_torsion(ball)
        rows = spaceform_analyzer.report_rows(ball, spec.g_const)
        results = {
            "u0": float(sol.u[0]),
            "u_prime_boundary": float(sol.u_prime[-1]),
            "u_double_prime_boundary": float(sol.u_double_prime[-1]),
            "T": sol.T,
            "V": sol.V,
            "A": sol.A,
            "H_boundary": sol.H_boundary,
            "checks": rows,
        }
    writer.write_rows(SWEEP_FILE, rows)
    return ExperimentReport(
        command=Command.SPACEFORM_REPORT,
        theorem=THEOREMS[Command.SPACEFORM_REPORT],
        satisfied=all(r.satisfied for r in rows),
        tolerances={"radial_tolerance": settings.radial_tolerance, "reilly_tolerance": settings.reilly_tolerance},
        results=results,
    )


@router.command(Command.WULFF_INFO)
def wulff_info(config: ExperimentConfig, writer: ReportWriter) -> ExperimentReport:
    info = gauge_calculus.wulff_volume(config.gauge)
    hypotheses = gauge_calculus.hypotheses(config.gauge, max(config.p, 2.0))
    boundary = gauge_calculus.wulff_boundary(config.gauge, settings.wulff_directions)
    writer.write_table("wulff.csv", pd.DataFrame({"x": boundary[:, 0], "y": boundary[:, 1]}))
    return ExperimentReport(
        command=Command.WULFF_INFO,
        theorem=THEOREMS[Command.WULFF_INFO],
        satisfied=True,
        tolerances={"directions": info.directions},
        results={
            "kappa_n": info.kappa_n,
            "wulff": info,
            "hypotheses": hypotheses,
            "bipolar_residual": gauge_calculus.bipolar_residual(config.gauge, boundary[:: max(1, len(boundary) // 64)]),
        },
    )


# =============================================================================
# RUNNER
# =============================================================================

def failure_report(config: ExperimentConfig, error: LabError) -> ExperimentReport:
    """Report of a run that stopped on a LabError; best iterates are kept when attached."""
    results = {}
    best = getattr(error, "report", None)
    if isinstance(best, SolveReport):
        results["best_iterate"] = variational_solver.summary(best)
    elif isinstance(best, EigenPair):
        results["best_iterate"] = eigen_summary(best)
    return ExperimentReport(
        command=config.command,
        theorem=THEOREMS[config.command],
        satisfied=False,
        results=results,
        errors=[f"{type(error).__name__}: {error.detail}"],
    )


def run(config: ExperimentConfig, out_dir: Path) -> int:
    """
    Execute one experiment and write its report files.

    Returns:
        Exit status: 0 when every requested check holds, 1 otherwise

    Raises:
        ConfigError: Propagated so the caller exits with status 2 without a report
    """
    writer = ReportWriter(out_dir)
    handler = router.resolve(config.command)
    logger.info(f"Running {config.command.value} on {config.domain.label} with {config.gauge.label}, p={config.p:g}")

    started = time.perf_counter()
    try:
        report = handler(config, writer)
    except ConfigError:
        raise
    except (NoConvergence, NonCoerciveSource) as e:
        logger.error(f"Solver failure: {e.detail}")
        best = e.report
        if isinstance(best, (SolveReport, EigenPair)):
            writer.write_field(best.field)
        report = failure_report(config, e)
    except LabError as e:
        logger.error(f"{type(e).__name__}: {e.detail}")
        report = failure_report(config, e)
    elapsed = time.perf_counter() - started

    writer.write_report(report)
    writer.write_timing(elapsed, config.command.value)
    logger.info(f"{config.command.value} finished in {elapsed:.2f}s: {'satisfied' if report.satisfied else 'FAILED'}")
    return 0 if report.satisfied else 1
