"""Schema of the JSON run files read by the command line."""
import json
import math
from typing import List, Optional, Tuple, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from threshold_lab.errors import ConfigurationError
from threshold_lab.spectral.gamma_core import Configuration

ModelT = TypeVar("ModelT", bound=BaseModel)


def _all_finite(values) -> bool:
    return all(math.isfinite(v) for v in values)


class DesignFile(BaseModel):
    """
    Centres only, for the inverse design of strengths.

    Attributes:
        centres (List[Tuple[float, float]]): Planar centres y_j.
    """
    model_config = ConfigDict(extra="ignore")

    centres: List[Tuple[float, float]] = Field(min_length=1, description="Planar centres [[x, y], ...].")

    @field_validator("centres")
    @classmethod
    def _finite_centres(cls, centres):
        if not all(_all_finite(c) for c in centres):
            raise ValueError("centres must be finite")
        return centres


class RunConfig(DesignFile):
    """
    A point-interaction configuration plus an optional tolerance override.

    Attributes:
        centres (List[Tuple[float, float]]): Planar centres y_j.
        alphas (List[float]): Strengths α_j, one per centre.
        tolerance (float, optional): Relative singular-value tolerance in (0, 1).
    """
    model_config = ConfigDict(extra="forbid")

    alphas: List[float] = Field(min_length=1, description="Strengths α_j, one per centre.")
    tolerance: Optional[float] = Field(default=None, gt=0.0, lt=1.0, description="Singular-value tolerance.")

    @field_validator("alphas")
    @classmethod
    def _finite_alphas(cls, alphas):
        if not _all_finite(alphas):
            raise ValueError("alphas must be finite")
        return alphas

    @model_validator(mode="after")
    def _matching_lengths(self):
        if len(self.alphas) != len(self.centres):
            raise ValueError(f"{len(self.centres)} centres but {len(self.alphas)} alphas")
        return self

    def to_configuration(self) -> Configuration:
        return Configuration(self.centres, self.alphas)


def load_run_config(file_path: str, model: Type[ModelT] = RunConfig) -> ModelT:
    """
    Parse and validate a JSON run file.

    Raises:
        ConfigurationError: On unreadable files, malformed JSON (with line and
            column) and schema violations.
    """
    try:
        with open(file_path) as handle:
            text = handle.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read {file_path}: {exc.strerror}") from exc
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{file_path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return model.model_validate(payload)
    except ValidationError as exc:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or 'file'}: {err['msg']}" for err in exc.errors())
        raise ConfigurationError(f"{file_path}: {problems}") from exc
