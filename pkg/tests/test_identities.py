"""Tests for the Pohozaev identities, the Serrin constant and the nonexistence predicates."""
import math

import numpy as np
import pytest

from anisolab.exceptions import NonCoerciveSource, WrongRegime
from anisolab.models.schemas import DomainSpec, SourceSpec, SourceTerm, Verdict
from anisolab.services.domain_mesh import domain_mesher
from anisolab.services.identities import identity_checker
from anisolab.services.solver import variational_solver

TORSION_SOURCE = SourceSpec.constant(1.0)


@pytest.fixture(scope="module")
def fine_disk_torsion(fine_disk_mesh, euclidean):
    return variational_solver.solve_dirichlet(fine_disk_mesh, euclidean, TORSION_SOURCE)


# =============================================================================
# POHOZAEV IDENTITIES
# =============================================================================

def test_disk_torsion_identity(fine_disk_torsion, euclidean):
    report = identity_checker.pohozaev_residual(fine_disk_torsion, euclidean, TORSION_SOURCE)
    # lhs = 0 * int u + 2 int u, rhs = (1/2) int |grad u|^2 <x, nu> = pi / 4
    assert report.lhs_term_ug == pytest.approx(0.0, abs=1e-12)
    assert report.lhs == pytest.approx(math.pi / 4, rel=1e-2)
    assert report.rhs_boundary == pytest.approx(math.pi / 4, rel=3e-2)
    assert report.rel_residual <= 0.02
    assert report.abs_residual == pytest.approx(abs(report.lhs - report.rhs_boundary))


def test_classical_identity_is_twice_the_weighted_one(fine_disk_torsion, euclidean):
    weighted = identity_checker.pohozaev_residual(fine_disk_torsion, euclidean, TORSION_SOURCE)
    classic = identity_checker.classic_pohozaev_residual(fine_disk_torsion)
    assert classic.lhs == pytest.approx(2 * weighted.lhs, rel=1e-9)
    assert classic.rhs_boundary == pytest.approx(2 * weighted.rhs_boundary, rel=1e-9)
    assert classic.lhs == pytest.approx(math.pi / 2, rel=2e-2)


def test_residual_decreases_under_refinement(coarse_disk_mesh, euclidean):
    residuals = []
    for times in range(3):
        mesh = domain_mesher.refine(coarse_disk_mesh, times)
        solution = variational_solver.solve_dirichlet(mesh, euclidean, TORSION_SOURCE)
        residuals.append(identity_checker.pohozaev_residual(solution, euclidean, TORSION_SOURCE).rel_residual)
    assert residuals[0] > residuals[1] > residuals[2]


def test_weighted_operator_identity(fine_disk_mesh, euclidean):
    src = SourceSpec.constant(1.0, weight_b=0.25)
    solution = variational_solver.solve_dirichlet(fine_disk_mesh, euclidean, src)
    report = identity_checker.pohozaev_residual(solution, euclidean, src)
    # (1 + b - n/p) int u + n int u
    assert report.lhs_term_ug == pytest.approx(0.25 / 2.0 * report.lhs_term_G, rel=1e-12)
    assert report.rel_residual <= 0.03


def test_power_source_identity(fine_disk_mesh, euclidean):
    src = SourceSpec(terms=[SourceTerm(coef=-1.0, power=3.0)], const_term=1.0)
    solution = variational_solver.solve_dirichlet(fine_disk_mesh, euclidean, src)
    report = identity_checker.pohozaev_residual(solution, euclidean, src)
    assert report.lhs_term_xgradG == 0.0
    assert report.rel_residual <= 0.02


def test_anisotropic_identity_on_the_wulff_shape(ellipse):
    mesh = domain_mesher.build_mesh(DomainSpec.model_validate("wulff_64"), 0.05, ellipse)
    solution = variational_solver.solve_dirichlet(mesh, ellipse, TORSION_SOURCE)
    report = identity_checker.pohozaev_residual(solution, ellipse, TORSION_SOURCE)
    # 2 int (1 - F°^2) / 4 over {F° <= 1} = pi / 2
    assert report.lhs == pytest.approx(math.pi / 2, rel=2e-2)
    assert report.rel_residual <= 0.03


def test_classical_identity_needs_the_euclidean_regime(disk_mesh, ellipse, euclidean):
    anisotropic = variational_solver.solve_torsion(disk_mesh, ellipse, 2.0)
    with pytest.raises(WrongRegime):
        identity_checker.classic_pohozaev_residual(anisotropic)
    p_torsion = variational_solver.solve_torsion(disk_mesh, euclidean, 3.0)
    with pytest.raises(WrongRegime):
        identity_checker.classic_pohozaev_residual(p_torsion)


# =============================================================================
# SERRIN CONSTANT
# =============================================================================

def test_serrin_constant_on_the_disk(fine_disk_torsion):
    report = identity_checker.serrin_constant(fine_disk_torsion)
    # c^2 = 4 (pi/8) / (2 pi) = 1/4, ball of radius n |c| = 1
    assert report.c_sq_pohozaev == pytest.approx(0.25, rel=1e-2)
    assert report.ball_radius == pytest.approx(1.0, rel=1e-2)
    stats = report.boundary_gradient
    assert stats.min <= stats.mean <= stats.max
    assert stats.mean == pytest.approx(0.5, rel=3e-2)


def test_serrin_constant_needs_p_two(disk_mesh, euclidean):
    with pytest.raises(WrongRegime):
        identity_checker.serrin_constant(variational_solver.solve_torsion(disk_mesh, euclidean, 3.0))


# =============================================================================
# NONEXISTENCE PREDICATES
# =============================================================================

@pytest.mark.parametrize(
    "power, expected",
    [(8.0, Verdict.NONEXISTENCE), (6.0, Verdict.INCONCLUSIVE), (4.0, Verdict.INCONCLUSIVE)],
)
def test_power_sign_condition_in_three_dimensions(power, expected):
    src = SourceSpec(terms=[SourceTerm(coef=1.0, power=power)])
    report = identity_checker.nonexistence_predicate(3, 2.0, 0.0, src)
    assert report.verdict == expected
    assert report.terms[-1].strict
    assert report.terms[-1].sigma == pytest.approx(1.0 - 1.5 + 3.0 / power)


def test_absorbing_power_gives_nonexistence_in_the_plane():
    src = SourceSpec(terms=[SourceTerm(coef=-1.0, power=3.0)])
    report = identity_checker.nonexistence_predicate(2, 2.0, 0.0, src)
    assert report.verdict == Verdict.NONEXISTENCE
    assert report.terms[0].sigma == pytest.approx(-2.0 / 3.0)


def test_negative_weight_exponent_shifts_the_sign():
    src = SourceSpec(terms=[SourceTerm(coef=1.0, power=8.0)], weight_b=-0.5)
    report = identity_checker.nonexistence_predicate(2, 2.0, -0.5, src)
    # 1 - 0.5 - 1 + 2/8 = -0.25
    assert report.terms[0].sigma == pytest.approx(-0.25)
    assert report.verdict == Verdict.NONEXISTENCE


def test_constant_term_alone_is_inconclusive():
    report = identity_checker.nonexistence_predicate(2, 2.0, 0.0, SourceSpec.constant(-1.0))
    assert report.verdict == Verdict.INCONCLUSIVE
    assert report.terms[0].kind == "constant"
    # -1 * (n + 1 + b - n/p - alpha) = -2
    assert report.terms[0].sigma == pytest.approx(-2.0)


def test_positive_constant_term_blocks_the_verdict():
    src = SourceSpec(terms=[SourceTerm(coef=1.0, power=8.0)], const_term=1.0)
    report = identity_checker.nonexistence_predicate(3, 2.0, 0.0, src)
    assert report.verdict == Verdict.INCONCLUSIVE


def test_trivial_solution_predicate():
    absorbing = SourceSpec(terms=[SourceTerm(coef=-1.0, power=2.0)])
    assert identity_checker.trivial_solution_predicate(2, 2.0, 0.0, absorbing).satisfied
    growing = SourceSpec(terms=[SourceTerm(coef=1.0, power=4.0)])
    result = identity_checker.trivial_solution_predicate(2, 2.0, 0.0, growing)
    assert not result.satisfied
    assert result.max_value > 0


def test_trivial_solution_predicate_needs_x_independent_source():
    src = SourceSpec(terms=[SourceTerm(coef=-1.0, weight_exp=1.0, power=2.0)])
    with pytest.raises(WrongRegime):
        identity_checker.trivial_solution_predicate(2, 2.0, 0.0, src)


@pytest.mark.parametrize("power, satisfied", [(6.0, True), (8.0, True), (4.0, False)])
def test_classical_predicate_in_three_dimensions(power, satisfied):
    src = SourceSpec(terms=[SourceTerm(coef=1.0, power=power)])
    assert identity_checker.classical_predicate(3, src).satisfied is satisfied


def test_classical_predicate_needs_three_dimensions():
    with pytest.raises(WrongRegime):
        identity_checker.classical_predicate(2, SourceSpec(terms=[SourceTerm(coef=1.0, power=6.0)]))


# =============================================================================
# SOLVER AND PREDICATE AGREE
# =============================================================================

ABSORBING = SourceTerm(coef=-1.0, power=3.0)

ADVERSARIAL_CONFIGS = [
    ("unit_disk_64", "euclidean", SourceSpec(terms=[ABSORBING]), 0.2),
    ("unit_disk_64", "euclidean", SourceSpec(terms=[SourceTerm(coef=-1.0, power=2.0)]), 0.2),
    ("unit_disk_64", "ellipse", SourceSpec(terms=[SourceTerm(coef=-2.0, power=4.0)]), 0.5),
    ("square(2)", "euclidean", SourceSpec(terms=[SourceTerm(coef=-1.0, weight_exp=1.0, power=3.0)]), 0.2),
    ("Lshape", "euclidean", SourceSpec(terms=[ABSORBING]), 0.2),
    ("unit_disk_64", "euclidean", SourceSpec(terms=[ABSORBING], weight_b=0.25), 0.2),
    ("unit_disk_64", "euclidean", SourceSpec(terms=[SourceTerm(coef=1.0, power=8.0)], weight_b=-0.5), 0.1),
    ("unit_disk_64", "euclidean", SourceSpec(terms=[SourceTerm(coef=1.0, power=8.0)], weight_b=-0.5), 2.0),
    ("unit_disk_64", "ellipse", SourceSpec(terms=[ABSORBING, SourceTerm(coef=-1.0, power=4.0)]), 1.0),
    ("wulff_64", "ellipse", SourceSpec(terms=[ABSORBING]), 0.2),
]


@pytest.mark.parametrize("domain, gauge_name, src, amplitude", ADVERSARIAL_CONFIGS)
def test_nonexistence_verdict_rules_out_positive_solutions(domain, gauge_name, src, amplitude, euclidean, ellipse):
    gauge = ellipse if gauge_name == "ellipse" else euclidean
    verdict = identity_checker.nonexistence_predicate(2, src.p, src.weight_b, src)
    assert verdict.verdict == Verdict.NONEXISTENCE

    mesh = domain_mesher.build_mesh(DomainSpec.model_validate(domain), 0.1, gauge)
    assert domain_mesher.star_shape_margin(mesh.polygon) >= -1e-12
    r2 = np.sum(mesh.vertices ** 2, axis=1)
    initial = amplitude * np.clip(1.0 - r2 / r2.max(), 0.0, None)
    try:
        solution = variational_solver.solve_dirichlet(mesh, gauge, src, initial=initial)
    except NonCoerciveSource:
        return
    assert solution.converged
    assert np.max(np.abs(solution.field.values)) <= 1e-6
