"""
Experiment validation middleware.
Parses experiment files and checks command preconditions before dispatch.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError

from anisolab.exceptions import ConfigError
from anisolab.models.schemas import Command, DomainKind, ExperimentConfig, GaugeFamily

logger = logging.getLogger(__name__)


class ExperimentValidator:
    """
    Turns experiment files into validated ExperimentConfig objects.

    Every failure is raised as ConfigError (exit status 2) so that no report is
    written for a configuration the lab cannot run.
    """

    # Commands whose FEM operations assume p >= 2
    FEM_COMMANDS = {
        Command.SOLVE_TORSION,
        Command.SOLVE_EIGEN,
        Command.CHECK_POHOZAEV,
        Command.CHECK_BOUNDS,
    }

    def read(self, path: Path) -> Dict[str, Any]:
        """
        Load the raw JSON document of an experiment file.

        Raises:
            ConfigError: If the file is missing or is not a JSON object
        """
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"Experiment file {path} not found.")
        except json.JSONDecodeError as e:
            raise ConfigError(f"Experiment file {path} is not valid JSON: {e.msg} (line {e.lineno})")
        if not isinstance(raw, dict):
            raise ConfigError(f"Experiment file {path} must contain a JSON object.")
        return raw

    def parse(
        self,
        raw: Dict[str, Any],
        command: Optional[Command] = None,
        strict: Optional[bool] = None,
        refine: Optional[int] = None,
    ) -> ExperimentConfig:
        """
        Build the config; command-line values override the file.

        Args:
            raw: Experiment document
            command: Command from the command line
            strict: --strict flag
            refine: --refine k

        Returns:
            Validated ExperimentConfig
        """
        data = dict(raw)
        if command is not None:
            file_command = data.get("command")
            if file_command is not None and file_command != command.value:
                logger.warning(f"Command line '{command.value}' overrides '{file_command}' from the experiment file")
            data["command"] = command.value
        if strict:
            data["strict"] = True
        if refine is not None:
            data["refine"] = refine

        try:
            config = ExperimentConfig.model_validate(data)
        except ValidationError as e:
            messages = "; ".join(
                f"{'.'.join(str(part) for part in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
            )
            raise ConfigError(f"Invalid experiment configuration: {messages}")

        self.check_preconditions(config)
        return config

    def load(
        self,
        path: Path,
        command: Optional[Command] = None,
        strict: Optional[bool] = None,
        refine: Optional[int] = None,
    ) -> ExperimentConfig:
        raw = self.read(path)
        # suite members are relative to the suite file
        if isinstance(raw.get("experiments"), list):
            base = Path(path).parent
            raw["experiments"] = [str((base / str(member)).resolve()) for member in raw["experiments"]]
        return self.parse(raw, command, strict, refine)

    def check_preconditions(self, config: ExperimentConfig) -> None:
        """
        Command-specific checks the field validators cannot express.

        Raises:
            ConfigError: On the first violated precondition
        """
        if config.command is None:
            raise ConfigError("No command given (set 'command' in the file or on the command line).")

        if config.command in self.FEM_COMMANDS:
            if config.p < 2:
                raise ConfigError(f"{config.command.value} needs p >= 2, got p={config.p:g}")
            if config.gauge.dimension != 2:
                raise ConfigError(f"{config.command.value} runs the planar solver; gauge dimension must be 2")
            if config.b * config.p >= 2:
                raise ConfigError(f"weight exponent b*p={config.b * config.p:g} must stay below 2")

        if config.domain.kind == DomainKind.WULFF and config.gauge.dimension != 2:
            raise ConfigError("Wulff-shape domains need a planar gauge")

        if config.command == Command.WULFF_INFO and config.gauge.dimension != 2:
            raise ConfigError("wulff-info measures planar Wulff shapes only")

        if config.command == Command.CHECK_POHOZAEV and config.source is None:
            logger.info("No source given; checking the identity for the constant source g = 1")

        if config.command == Command.SUITE:
            if any(p < 2 for p in config.p_values):
                raise ConfigError(f"suite exponents must be >= 2, got {config.p_values}")

        if config.gauge.family == GaugeFamily.LP_NORM and config.command == Command.CHECK_BOUNDS and config.gauge.q < 2:
            logger.warning(f"{config.gauge.label} has a singular Hessian; the eigenvalue-torsion hypotheses will fail")


# Singleton instance
experiment_validator = ExperimentValidator()
