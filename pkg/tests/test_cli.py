"""End-to-end tests of the command-line runner, the experiment validator and the suite."""
import json
import math
from pathlib import Path

import pandas as pd
import pytest

from anisolab.exceptions import ConfigError
from anisolab.main import main
from anisolab.middleware.validation import experiment_validator
from anisolab.models.schemas import Command, ExperimentConfig, GaugeSpec, Verdict
from anisolab.routers.suite import SUITE_DOMAINS, SUITE_GAUGES, SuiteRunner, pass_fail_table


def write_config(tmp_path, payload, name="experiment.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


def read_report(out_dir):
    return json.loads((out_dir / "report.json").read_text(encoding="utf-8"))


# =============================================================================
# VALIDATION
# =============================================================================

def test_command_line_overrides_the_file():
    config = experiment_validator.parse({"command": "solve-eigen", "refine": 0}, Command.SOLVE_TORSION, True, 2)
    assert config.command == Command.SOLVE_TORSION
    assert config.strict
    assert config.effective_target_h == pytest.approx(0.05 / 4)


def test_source_inherits_the_run_exponents():
    config = experiment_validator.parse(
        {"command": "check-pohozaev", "p": 3.0, "source": {"const_term": 1.0}}
    )
    assert config.source.p == 3.0
    assert config.effective_source().const_term == 1.0


@pytest.mark.parametrize(
    "raw",
    [
        {"command": "solve-torsion", "gauge": {"family": "ellipse", "a": 2.0}},
        {"command": "solve-torsion", "p": 1.5},
        {"command": "check-bounds", "b": 1.0},
        {"command": "solve-torsion", "domain": "hexagon"},
        {},
    ],
)
def test_invalid_configurations(raw):
    with pytest.raises(ConfigError) as excinfo:
        experiment_validator.parse(raw)
    assert excinfo.value.exit_status == 2


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError):
        experiment_validator.read(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        experiment_validator.read(bad)
    array = write_config(tmp_path, [1, 2, 3], "array.json")
    with pytest.raises(ConfigError):
        experiment_validator.read(array)


# =============================================================================
# COMMANDS
# =============================================================================

def test_solve_torsion(tmp_path):
    out = tmp_path / "out"
    config = write_config(tmp_path, {"domain": "unit_disk_64", "target_h": 0.05})
    assert main(["solve-torsion", "--config", str(config), "--out", str(out)]) == 0

    report = read_report(out)
    assert report["command"] == "solve-torsion"
    assert report["satisfied"]
    assert 0.97 * math.pi / 8 <= report["results"]["T"] <= 1.03 * math.pi / 8
    assert report["mesh"]["h_max"] <= 0.075

    field = pd.read_csv(out / "field.csv")
    assert len(field) == report["mesh"]["vertices"]
    levels = pd.read_csv(out / "levels.csv")
    assert len(levels) > 0
    assert (out / "timing.json").exists()


def test_wulff_info(tmp_path):
    out = tmp_path / "out"
    config = write_config(tmp_path, {"gauge": {"family": "ellipse", "a": 2.0, "b": 1.0}})
    assert main(["wulff-info", "--config", str(config), "--out", str(out)]) == 0
    report = read_report(out)
    assert report["results"]["kappa_n"] == pytest.approx(2 * math.pi, rel=1e-6)
    assert report["results"]["bipolar_residual"] < 1e-6
    assert (out / "wulff.csv").exists()


def test_spaceform_report(tmp_path):
    out = tmp_path / "out"
    config = write_config(tmp_path, {"spaceform": {"n": 3, "kappa": 1, "theta": 1.0}})
    assert main(["spaceform-report", "--config", str(config), "--out", str(out)]) == 0
    report = read_report(out)
    assert report["satisfied"]
    assert report["results"]["H_boundary"] == pytest.approx(1 / math.tan(1.0), rel=1e-6)
    assert len(pd.read_csv(out / "sweep.csv")) == 5


def test_malformed_gauge_writes_no_report(tmp_path):
    out = tmp_path / "out"
    config = write_config(tmp_path, {"gauge": {"family": "ellipse", "a": 2.0}})
    assert main(["solve-torsion", "--config", str(config), "--out", str(out)]) == 2
    assert not (out / "report.json").exists()


def test_negative_refinement_is_a_config_error(tmp_path):
    assert main(["wulff-info", "--out", str(tmp_path / "out"), "--refine", "-1"]) == 2


def test_solver_failure_still_writes_a_report(tmp_path):
    out = tmp_path / "out"
    config = write_config(tmp_path, {"p": 3.0, "target_h": 0.1, "solver": {"max_iterations": 1}})
    assert main(["solve-torsion", "--config", str(config), "--out", str(out)]) == 1
    report = read_report(out)
    assert not report["satisfied"]
    assert report["errors"][0].startswith("NoConvergence")
    assert "best_iterate" in report["results"]


def test_sphere_radius_beyond_pi_fails_the_run(tmp_path):
    out = tmp_path / "out"
    config = write_config(tmp_path, {"spaceform": {"kappa": 1, "theta": 3.5}})
    assert main(["spaceform-report", "--config", str(config), "--out", str(out)]) == 1
    assert read_report(out)["errors"][0].startswith("InvalidRadius")


# =============================================================================
# SUITE
# =============================================================================

def test_nonexistence_rows():
    rows = SuiteRunner(ExperimentConfig(command=Command.SUITE)).nonexistence_rows()
    assert [r.detail for r in rows] == [Verdict.NONEXISTENCE.value, Verdict.INCONCLUSIVE.value]
    assert all(r.satisfied for r in rows)


@pytest.mark.parametrize("domain", SUITE_DOMAINS)
def test_matrix_cells_with_the_euclidean_gauge(domain):
    rows = SuiteRunner(ExperimentConfig(command=Command.SUITE)).matrix_cell(domain, GaugeSpec(), 2.0)
    assert len(rows) == 4
    assert all(r.satisfied for r in rows)
    assert {r.domain for r in rows} == {domain}


def test_matrix_cell_with_the_ellipse_gauge():
    rows = SuiteRunner(ExperimentConfig(command=Command.SUITE)).matrix_cell("ellipse(2,1,64)", SUITE_GAUGES[1], 2.5)
    assert len(rows) == 3
    assert all(r.satisfied for r in rows)


def test_square_n_laplace_margin_at_the_default_mesh_size():
    rows = SuiteRunner(ExperimentConfig(command=Command.SUITE)).matrix_cell("square(2)", GaugeSpec(), 2.0)
    n_laplace = rows[-1]
    assert n_laplace.lhs == pytest.approx(16.0)
    assert n_laplace.slack >= 4 * n_laplace.tolerance


def test_oracle_rows():
    runner = SuiteRunner(ExperimentConfig(command=Command.SUITE))
    rows = runner.disk_oracles() + runner.pohozaev_oracle() + runner.anisotropic_oracle()
    assert len(rows) == 7
    failed = [r.theorem for r in rows if not r.satisfied]
    assert not failed


def test_pass_fail_table():
    rows = SuiteRunner(ExperimentConfig(command=Command.SUITE)).nonexistence_rows()
    table = pass_fail_table(rows)
    assert "PASS" in table
    assert "FAIL" not in table


def test_suite_of_experiment_files(tmp_path):
    write_config(tmp_path, {"command": "wulff-info"}, "euclid.json")
    write_config(tmp_path, {"command": "spaceform-report"}, "ball.json")
    suite_file = write_config(tmp_path, {"command": "suite", "experiments": ["euclid.json", "ball.json"]}, "suite.json")
    out = tmp_path / "out"

    assert main(["suite", "--config", str(suite_file), "--out", str(out)]) == 0
    suite_rows = pd.read_csv(out / "suite.csv")
    assert len(suite_rows) == 2
    assert suite_rows["satisfied"].all()
    assert read_report(out / "euclid")["results"]["kappa_n"] == pytest.approx(math.pi, rel=1e-6)
    assert (out / "ball" / "sweep.csv").exists()


def test_shipped_experiment_files_validate():
    directory = Path(__file__).resolve().parent.parent / "experiments"
    files = sorted(directory.glob("*.json"))
    assert files
    for path in files:
        config = experiment_validator.load(path)
        assert config.command is not None
        if config.command == Command.SUITE:
            assert all(Path(member).exists() for member in config.experiments)
