# app/config/problem_loader.py
"""TOML problem files into validated ProblemConfig objects"""
import logging
import re
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 backport
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Union

from pydantic import ValidationError

from app.core.exceptions import ConfigError
from app.schemas.perturbation import KernelKind
from app.schemas.problem_config import ProblemConfig
from app.services.ode.coefficients import OperatorCoefficients

logger = logging.getLogger(__name__)

_LINE_PATTERN = re.compile(r"line (\d+)")


def _field_path(loc) -> str:
    return ".".join(str(part) for part in loc)


def parse_problem(data: Dict[str, Any], base_dir: Union[str, Path, None] = None) -> ProblemConfig:
    """Validate a decoded document; raises ConfigError with the offending field path"""
    try:
        config = ProblemConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        path = _field_path(first["loc"])
        raise ConfigError(f"{path}: {first['msg']}", {"field": path}) from exc

    kernel = config.perturbation.kernel
    if kernel is not None and kernel.kind == KernelKind.CSV and base_dir is not None:
        kernel_path = Path(kernel.path)
        if not kernel_path.is_absolute():
            kernel.path = str(Path(base_dir) / kernel_path)

    # coefficient invariants (p(0) = 1, p > 0, continuity) are checked by building them
    OperatorCoefficients.from_spec(config.coefficients)
    return config


def load_problem(path: Union[str, Path]) -> ProblemConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read problem file {path}: {exc.strerror}", {"path": str(path)}) from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        match = _LINE_PATTERN.search(str(exc))
        line = int(match.group(1)) if match else getattr(exc, "lineno", None)
        raise ConfigError(f"{path.name}: {exc}", {"line": line}) from exc

    config = parse_problem(data, base_dir=path.parent)
    logger.info(f"Loaded problem {path.name}: perturbation={config.perturbation.kind.value}, "
                f"epsilons={config.run.epsilons}")
    return config
