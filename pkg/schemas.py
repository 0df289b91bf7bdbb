"""
Experiment Config Schemas
Pydantic models of the JSON experiment file and the loader that reports syntax errors by line/column
"""
import json
import math
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from errors import ConfigError
from fields import (
    AffineField,
    ConstantField,
    ExpressionField,
    MatrixField,
    PolynomialField,
    VectorField,
    ZeroField,
)
from jets import JetSystem
from magnus import MatrixLieSetup
from paths import FbmSpec, PathGrid, sample_fbm, smooth_path

ExperimentKind = Literal["solve", "expand", "bound", "magnus", "mc-l2", "compare"]


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FieldConfig(StrictModel):
    """One vector field V_i; `kind` selects which of the other keys are read"""
    kind: Literal["zero", "constant", "linear", "affine", "polynomial", "matrix", "expression"]
    values: Optional[List[float]] = None
    matrix: Optional[List[List[float]]] = None
    offset: Optional[List[float]] = None
    terms: Optional[List[List[Tuple[float, List[int]]]]] = None
    generator: Optional[List[List[float]]] = None
    expressions: Optional[List[str]] = None

    @model_validator(mode="after")
    def check_payload(self):
        required = {
            "constant": "values",
            "linear": "matrix",
            "affine": "matrix",
            "polynomial": "terms",
            "matrix": "generator",
            "expression": "expressions",
        }.get(self.kind)
        if required and getattr(self, required) is None:
            raise ValueError(f"field kind '{self.kind}' needs '{required}'")
        if self.kind == "expression":
            # parse now so syntax errors surface at validation time
            try:
                ExpressionField(self.expressions)
            except ConfigError as err:
                raise ValueError(f"{err} (column {err.column})") from None
        return self

    def build(self, dimension: int) -> VectorField:
        if self.kind == "zero":
            return ZeroField(dimension)
        if self.kind == "constant":
            return ConstantField(self.values)
        if self.kind in ("linear", "affine"):
            return AffineField(self.matrix, self.offset if self.kind == "affine" else None)
        if self.kind == "polynomial":
            return PolynomialField(self.terms)
        if self.kind == "matrix":
            return MatrixField(self.generator)
        return ExpressionField(self.expressions)


class SystemConfig(StrictModel):
    """fields[0] is the drift V_0; fields[i] is driven by component i"""
    x0: List[float]
    fields: List[FieldConfig]
    C: Optional[float] = Field(default=None, gt=0, description="analyticity radius; omitted means infinite")

    @field_validator("fields")
    @classmethod
    def needs_drift(cls, value):
        if len(value) < 1:
            raise ValueError("a system needs at least the drift field V_0")
        return value

    @property
    def dimension(self) -> int:
        return len(self.x0)

    @property
    def drive_count(self) -> int:
        return len(self.fields) - 1

    def build(self) -> JetSystem:
        fields = [f.build(self.dimension) for f in self.fields]
        radius = math.inf if self.C is None else self.C
        return JetSystem(self.dimension, fields, np.array(self.x0), radius)


class LieConfig(StrictModel):
    """Generators as row-major nested lists; drift defaults to zero"""
    generators: List[List[List[float]]]
    drift: Optional[List[List[float]]] = None

    def build(self) -> MatrixLieSetup:
        drift = None if self.drift is None else np.array(self.drift)
        return MatrixLieSetup([np.array(a) for a in self.generators], drift)


class PathSourceConfig(StrictModel):
    kind: Literal["fbm", "file", "smooth"]
    hurst: Optional[float] = Field(default=None, gt=0.5, lt=1.0)
    dimension: Optional[int] = Field(default=None, ge=1)
    horizon: Optional[float] = Field(default=None, gt=0)
    grid_size: Optional[int] = Field(default=None, ge=2)
    seed: int = Field(default=0, ge=0, lt=2**64)
    method: Literal["cholesky", "circulant"] = "cholesky"
    beta_hint: Optional[float] = Field(default=None, gt=0.5, le=1.0)
    file: Optional[str] = None
    family: Optional[Literal["linear", "quadratic", "sine"]] = None
    scales: Optional[List[float]] = None

    @model_validator(mode="after")
    def check_source(self):
        if self.kind == "fbm":
            missing = [k for k in ("hurst", "dimension", "horizon", "grid_size") if getattr(self, k) is None]
            if missing:
                raise ValueError(f"fbm path source needs {', '.join(missing)}")
        elif self.kind == "file":
            if self.file is None:
                raise ValueError("file path source needs 'file'")
            if not Path(self.file).is_file():
                raise ValueError(f"referenced file '{self.file}' does not exist")
        else:
            missing = [k for k in ("family", "scales", "horizon", "grid_size") if getattr(self, k) is None]
            if missing:
                raise ValueError(f"smooth path source needs {', '.join(missing)}")
        return self

    def fbm_spec(self) -> FbmSpec:
        if self.kind != "fbm":
            raise ConfigError("this experiment needs an fbm path source")
        return FbmSpec(self.hurst, self.dimension, self.horizon, self.grid_size,
                       self.seed, self.beta_hint, self.method)

    def build(self) -> PathGrid:
        if self.kind == "fbm":
            return sample_fbm(self.fbm_spec())
        hint = 1.0 if self.beta_hint is None else self.beta_hint
        if self.kind == "file":
            return PathGrid.from_csv(self.file, hint)
        return smooth_path(self.family, self.scales, self.horizon, self.grid_size, hint)

    @property
    def drive_count(self) -> Optional[int]:
        if self.kind == "fbm":
            return self.dimension
        if self.kind == "smooth":
            return len(self.scales)
        return None

    def seeds(self) -> List[int]:
        return [self.seed] if self.kind == "fbm" else []


class ParametersConfig(StrictModel):
    """
    Numeric parameters. M and gamma left out are fitted from the coefficient table;
    t left out means the path horizon.
    """
    alpha: float = 0.25
    gamma: Optional[float] = None
    M: Optional[float] = Field(default=None, ge=0)
    r: float = Field(default=2.0, gt=1.0)
    N: int = Field(default=4, ge=1)
    k_max: int = Field(default=4, ge=1)
    t: Optional[float] = Field(default=None, gt=0)
    time_points: int = Field(default=5, ge=1)
    tolerance: Optional[float] = Field(default=None, gt=0)
    max_iter: int = Field(default=50, ge=1)
    split: bool = False
    scheme: Literal["trapezoid", "left"] = "trapezoid"

    @field_validator("alpha")
    @classmethod
    def alpha_range(cls, value):
        if not 0.0 < value < 0.5:
            raise ValueError(f"alpha must lie in (0, 1/2), got {value}")
        return value

    @model_validator(mode="after")
    def gamma_range(self):
        if self.gamma is not None and not 0.0 <= self.gamma < 1.0 - 2.0 * self.alpha:
            raise ValueError(f"gamma must lie in [0, 1 - 2 alpha) = [0, {1 - 2 * self.alpha}), got {self.gamma}")
        return self


class MonteCarloConfig(StrictModel):
    replicates: int = Field(default=10_000, ge=1)
    words: List[List[int]] = Field(default_factory=lambda: [[1], [1, 1]])
    confidence: float = Field(default=0.99, gt=0, lt=1)
    t: Optional[float] = Field(default=None, gt=0)
    orders: List[int] = Field(default_factory=lambda: list(range(2, 11)))

    @field_validator("words")
    @classmethod
    def letters_positive(cls, value):
        for word in value:
            if not word:
                raise ValueError("words must be nonempty")
            if any(letter < 1 for letter in word):
                raise ValueError(f"word {word} uses the drift letter 0; Monte Carlo words have letters >= 1")
        return value


class ExperimentConfig(StrictModel):
    experiment: ExperimentKind
    path: PathSourceConfig
    system: Optional[SystemConfig] = None
    lie: Optional[LieConfig] = None
    parameters: ParametersConfig = Field(default_factory=ParametersConfig)
    monte_carlo: Optional[MonteCarloConfig] = None
    output_dir: Optional[str] = None
    plot: bool = False

    @model_validator(mode="after")
    def sections_for_experiment(self):
        if self.experiment in ("solve", "expand", "bound", "compare") and self.system is None:
            raise ValueError(f"experiment '{self.experiment}' needs a 'system' section")
        if self.experiment == "magnus" and self.lie is None:
            raise ValueError("experiment 'magnus' needs a 'lie' section")
        if self.experiment == "mc-l2":
            if self.path.kind != "fbm":
                raise ValueError("experiment 'mc-l2' needs an fbm path source")
            if self.monte_carlo is None:
                self.monte_carlo = MonteCarloConfig()
            for word in self.monte_carlo.words:
                if max(word) > self.path.dimension:
                    raise ValueError(f"word {word} uses letters beyond the fbm dimension {self.path.dimension}")
        drives = self.path.drive_count
        if self.system is not None and drives is not None and self.system.drive_count != drives:
            raise ValueError(
                f"system has {self.system.drive_count} driven fields but the path has {drives} components"
            )
        if self.lie is not None and drives is not None and len(self.lie.generators) != drives:
            raise ValueError(f"{len(self.lie.generators)} generators for a path with {drives} components")
        return self

    def seeds(self) -> List[int]:
        if self.experiment == "mc-l2" and self.monte_carlo is not None:
            return list(range(self.path.seed, self.path.seed + self.monte_carlo.replicates))
        return self.path.seeds()


def _validation_message(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"])
        message = item["msg"].removeprefix("Value error, ")
        parts.append(f"{location}: {message}" if location else message)
    return "; ".join(parts)


def parse_config(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"invalid JSON: {err.msg}", line=err.lineno, column=err.colno) from None
    return validate_config(data)


def validate_config(data) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigError(_validation_message(err)) from None


def load_config(filename) -> ExperimentConfig:
    path = Path(filename)
    if not path.is_file():
        raise ConfigError(f"config file '{filename}' does not exist")
    return parse_config(path.read_text(encoding="utf-8"))
