"""
Suite Router - the acceptance matrix.

Runs every (domain, gauge, p) cell of the standard matrix, the closed-form
oracle rows and the space-form sweep, and collects one SuiteRow per check.
Cells run on a thread pool; rows are assembled in submission order so
suite.csv is deterministic.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np
import pandas as pd

from anisolab.config import settings
from anisolab.exceptions import LabError
from anisolab.middleware.validation import experiment_validator
from anisolab.models.schemas import (
    BoundReport,
    Command,
    DomainSpec,
    ExperimentConfig,
    ExperimentReport,
    GaugeFamily,
    GaugeSpec,
    SourceSpec,
    SourceTerm,
    SpaceformSweep,
    SuiteRow,
    Verdict,
)
from anisolab.models.storage import SUITE_FILE, ReportWriter
from anisolab.routers.experiments import THEOREMS, build_mesh, router, run, run_bound_checks, worst
from anisolab.services.field_analysis import field_analyzer
from anisolab.services.gauge import gauge_calculus
from anisolab.services.identities import identity_checker
from anisolab.services.solver import variational_solver
from anisolab.services.spaceform import spaceform_analyzer

logger = logging.getLogger(__name__)

SUITE_DOMAINS = ["unit_disk_64", "square(2)", "ellipse(2,1,64)"]
SUITE_GAUGES = [
    GaugeSpec(family=GaugeFamily.EUCLIDEAN),
    GaugeSpec(family=GaugeFamily.ELLIPSE, a=2.0, b=1.0),
]

# Mesh size of the closed-form disk oracles
ORACLE_TARGET_H = 0.02

# Bessel zero j_{0,1}
BESSEL_J01 = 2.404825557695773


@dataclass
class SuiteCell:
    """One unit of suite work producing one or more rows."""
    name: str
    task: Callable[[], List[SuiteRow]]


def bound_row(domain: str, gauge: str, p: float, report: BoundReport, detail: str = "") -> SuiteRow:
    return SuiteRow(
        domain=domain,
        gauge=gauge,
        p=p,
        theorem=report.theorem,
        lhs=report.lhs,
        rhs=report.rhs,
        slack=report.slack,
        tolerance=report.tolerance_used,
        satisfied=report.satisfied,
        detail=detail,
    )


def oracle_row(domain: str, gauge: str, p: float, name: str, value: float, expected: float, rel_tol: float) -> SuiteRow:
    """Relative error |value/expected - 1| against rel_tol."""
    error = abs(value / expected - 1.0)
    return SuiteRow(
        domain=domain,
        gauge=gauge,
        p=p,
        theorem=f"oracle: {name}",
        lhs=value,
        rhs=expected,
        slack=rel_tol - error,
        tolerance=rel_tol,
        satisfied=error <= rel_tol,
        detail=f"relative error {error:.3e}",
    )


class SuiteRunner:
    """Builds and executes the acceptance matrix."""

    def __init__(self, config: ExperimentConfig):
        self.config = config

    def _config_for(self, domain: str, gauge: GaugeSpec, p: float, target_h: Optional[float] = None) -> ExperimentConfig:
        update = {"domain": DomainSpec.model_validate(domain), "gauge": gauge, "p": p, "b": 0.0, "source": None}
        if target_h is not None:
            update["target_h"] = min(self.config.target_h, target_h)
        return self.config.model_copy(update=update)

    # === Cells ===

    def matrix_cell(self, domain: str, gauge: GaugeSpec, p: float) -> List[SuiteRow]:
        """Eigenvalue-torsion bound, distribution decay, Wulff and (p = 2) n-Laplace rows."""
        cfg = self._config_for(domain, gauge, p)
        mesh = build_mesh(cfg)
        source = SourceSpec.constant(1.0, p=2.0) if p == 2 else None
        result = run_bound_checks(mesh, gauge, p, cfg.strict, cfg.solver, cfg.tolerance_c, cfg.levels, source)

        mu_worst = worst(result.mu_decay)
        wulff_worst = worst(result.wulff)
        rows = [
            bound_row(domain, gauge.label, p, result.eigen_torsion, f"lambda={result.eigen.eigenvalue:.6g}"),
            bound_row(domain, gauge.label, p, mu_worst, f"worst level s={mu_worst.details['level']:.4g}")
            .model_copy(update={"satisfied": all(r.satisfied for r in result.mu_decay)}),
            bound_row(domain, gauge.label, p, wulff_worst, f"worst level s={wulff_worst.details['level']:.4g}")
            .model_copy(update={"satisfied": all(r.satisfied for r in result.wulff)}),
        ]
        if result.n_laplace is not None:
            margin = result.n_laplace.slack / result.n_laplace.tolerance_used if result.n_laplace.tolerance_used > 0 else math.inf
            rows.append(bound_row(domain, gauge.label, p, result.n_laplace, f"slack/tolerance={margin:.3g}"))
        return rows

    def disk_oracles(self) -> List[SuiteRow]:
        """Closed-form torsion and eigenvalue on the unit disk."""
        euclid = GaugeSpec()
        cfg = self._config_for("unit_disk_64", euclid, 2.0, ORACLE_TARGET_H)
        mesh = build_mesh(cfg)
        torsion = variational_solver.solve_torsion(mesh, euclid, 2.0, cfg.solver)
        eigen = variational_solver.solve_eigen(mesh, euclid, 2.0, cfg.solver)
        torsion3 = variational_solver.solve_torsion(mesh, euclid, 3.0, cfg.solver)
        return [
            oracle_row("unit_disk_64", "euclidean", 2.0, "T = pi/8", field_analyzer.integrate(torsion.field), math.pi / 8, 0.01),
            oracle_row("unit_disk_64", "euclidean", 2.0, "max v = 1/4", torsion.field.sup, 0.25, 0.01),
            oracle_row("unit_disk_64", "euclidean", 2.0, "lambda = j01^2", eigen.eigenvalue, BESSEL_J01 ** 2, 0.01),
            oracle_row(
                "unit_disk_64", "euclidean", 3.0, "T = 2 pi / (7 sqrt 2)",
                field_analyzer.integrate(torsion3.field), 2 * math.pi / (7 * math.sqrt(2)), 0.02,
            ),
        ]

    def pohozaev_oracle(self) -> List[SuiteRow]:
        cfg = self._config_for("unit_disk_64", GaugeSpec(), 2.0, ORACLE_TARGET_H)
        mesh = build_mesh(cfg)
        src = SourceSpec.constant(1.0)
        solution = variational_solver.solve_dirichlet(mesh, cfg.gauge, src, cfg.solver)
        weighted = identity_checker.pohozaev_residual(solution, cfg.gauge, src, mesh)
        classic = identity_checker.classic_pohozaev_residual(solution, mesh)
        return [
            SuiteRow(
                domain="unit_disk_64", gauge="euclidean", p=2.0, theorem=THEOREMS[Command.CHECK_POHOZAEV],
                lhs=weighted.lhs, rhs=weighted.rhs_boundary, slack=0.02 - weighted.rel_residual, tolerance=0.02,
                satisfied=weighted.rel_residual <= 0.02, detail=f"rel_residual {weighted.rel_residual:.3e}",
            ),
            oracle_row("unit_disk_64", "euclidean", 2.0, "classical identity = 2 x weighted", classic.lhs, 2 * weighted.lhs, 1e-9),
        ]

    def anisotropic_oracle(self) -> List[SuiteRow]:
        """Torsion on the Wulff shape of ellipse(2,1) against (1 - F°(x)^2) / 4."""
        gauge = SUITE_GAUGES[1]
        cfg = self._config_for("wulff_64", gauge, 2.0)
        mesh = build_mesh(cfg)
        torsion = variational_solver.solve_torsion(mesh, gauge, 2.0, cfg.solver)
        exact = (1.0 - gauge_calculus.eval_polar(gauge, mesh.vertices) ** 2) / 4.0
        error = float(np.max(np.abs(torsion.field.values - exact)) / np.max(exact))
        return [
            SuiteRow(
                domain="wulff_64", gauge=gauge.label, p=2.0, theorem="oracle: v = (1 - F°(x)^2) / (2n)",
                lhs=error, rhs=0.02, slack=0.02 - error, tolerance=0.02, satisfied=error <= 0.02,
                detail="relative max-norm error",
            )
        ]

    def nonexistence_rows(self) -> List[SuiteRow]:
        """(n, p, b, r) = (3, 2, 0, 8) is covered by the sign condition, (3, 2, 0, 6) is not."""
        rows = []
        for r, expected in ((8.0, Verdict.NONEXISTENCE), (6.0, Verdict.INCONCLUSIVE)):
            src = SourceSpec(terms=[SourceTerm(coef=1.0, weight_exp=0.0, power=r)], p=2.0)
            verdict = identity_checker.nonexistence_predicate(3, 2.0, 0.0, src)
            sigma = verdict.terms[-1].sigma
            rows.append(
                SuiteRow(
                    domain="star-shaped", gauge="euclidean", p=2.0, theorem=f"nonexistence predicate (n=3, r={r:g})",
                    lhs=sigma, rhs=0.0, slack=-sigma, tolerance=0.0, satisfied=verdict.verdict == expected,
                    detail=verdict.verdict.value,
                )
            )
        return rows

    def spaceform_rows(self) -> List[SuiteRow]:
        rows = spaceform_analyzer.sweep(SpaceformSweep())
        return [
            SuiteRow(
                domain=f"ball(n={r.n}, kappa={r.kappa}, theta={r.theta:g})", gauge="riemannian", p=2.0,
                theorem=r.theorem, lhs=r.lhs, rhs=r.rhs, slack=r.slack,
                tolerance=settings.radial_tolerance, satisfied=r.satisfied,
            )
            for r in rows
        ]

    def default_cells(self) -> List[SuiteCell]:
        cells = [
            SuiteCell(f"{domain} / {gauge.label} / p={p:g}", lambda d=domain, g=gauge, q=p: self.matrix_cell(d, g, q))
            for domain in SUITE_DOMAINS
            for gauge in SUITE_GAUGES
            for p in self.config.p_values
        ]
        cells.extend(
            [
                SuiteCell("disk oracles", self.disk_oracles),
                SuiteCell("Pohozaev identity", self.pohozaev_oracle),
                SuiteCell("anisotropic Wulff-shape torsion", self.anisotropic_oracle),
                SuiteCell("nonexistence predicates", self.nonexistence_rows),
                SuiteCell("space forms", self.spaceform_rows),
            ]
        )
        return cells

    def experiment_cells(self, writer: ReportWriter) -> List[SuiteCell]:
        """Cells for the experiment files listed in the suite file; each writes its own subdirectory."""
        def make(path: str) -> SuiteCell:
            def task() -> List[SuiteRow]:
                member = experiment_validator.load(Path(path), strict=self.config.strict)
                status = run(member, writer.out_dir / Path(path).stem)
                return [
                    SuiteRow(
                        domain=member.domain.label, gauge=member.gauge.label, p=member.p,
                        theorem=THEOREMS[member.command], lhs=float(status), rhs=0.0, slack=-float(status),
                        tolerance=0.0, satisfied=status == 0, detail=f"{member.command.value} -> exit {status}",
                    )
                ]
            return SuiteCell(Path(path).stem, task)
        return [make(path) for path in self.config.experiments]

    # === Execution ===

    @staticmethod
    def _guarded(cell: SuiteCell) -> List[SuiteRow]:
        try:
            rows = cell.task()
        except LabError as e:
            logger.error(f"Suite cell {cell.name} failed: {e.detail}")
            return [
                SuiteRow(
                    domain=cell.name, gauge="", p=0.0, theorem="error", lhs=math.nan, rhs=math.nan,
                    slack=math.nan, tolerance=0.0, satisfied=False, detail=f"{type(e).__name__}: {e.detail}",
                )
            ]
        logger.info(f"Suite cell {cell.name}: {sum(r.satisfied for r in rows)}/{len(rows)} rows pass")
        return rows

    def execute(self, cells: List[SuiteCell], workers: Optional[int] = None) -> List[SuiteRow]:
        workers = workers or settings.worker_count
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(self._guarded, cell) for cell in cells]
            results = [f.result() for f in futures]
        return [row for rows in results for row in rows]


def pass_fail_table(rows: List[SuiteRow]) -> str:
    frame = pd.DataFrame.from_records([r.model_dump(mode="json") for r in rows])
    frame["status"] = np.where(frame["satisfied"], "PASS", "FAIL")
    return frame[["status", "domain", "gauge", "p", "theorem", "slack", "detail"]].to_string(index=False)


@router.command(Command.SUITE)
def suite(config: ExperimentConfig, writer: ReportWriter) -> ExperimentReport:
    """Run the acceptance matrix, print the pass/fail table and write suite.csv."""
    runner = SuiteRunner(config)
    cells = runner.experiment_cells(writer) if config.experiments else runner.default_cells()
    logger.info(f"Suite: {len(cells)} cells on {settings.worker_count} workers")
    rows = runner.execute(cells)

    writer.write_rows(SUITE_FILE, rows)
    print(pass_fail_table(rows))

    failed = [r for r in rows if not r.satisfied]
    return ExperimentReport(
        command=Command.SUITE,
        theorem=THEOREMS[Command.SUITE],
        satisfied=not failed,
        tolerances={"C": config.tolerance_c, "target_h": config.effective_target_h},
        results={"rows": len(rows), "passed": len(rows) - len(failed), "failed": failed},
    )
