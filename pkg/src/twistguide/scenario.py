"""Scenario configuration: a single JSON document per run."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, PositiveInt, model_validator

from .cross_section import Shape, shape_from_dict
from .curve_geometry import Bump, CurvatureProfile, make_profile
from .errors import ConfigurationError

TASKS = ("ground_pair", "lambda", "spectrum", "hardy", "sweep", "injectivity", "constants")

_SHAPE_FIELDS = {
    "rectangle": ("width", "height"),
    "disk": ("r",),
    "ellipse": ("rx", "ry"),
    "polygon": ("vertices",),
}


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BumpSpec(_Model):
    kind: Literal["cos2", "poly"] = "cos2"
    amplitude: float
    center: float = 0.0
    width: PositiveFloat

    def build(self) -> Bump:
        return Bump(self.kind, self.amplitude, self.center, self.width)


class ShapeSpec(_Model):
    shape: Literal["rectangle", "disk", "ellipse", "polygon"]
    width: Optional[PositiveFloat] = None
    height: Optional[PositiveFloat] = None
    r: Optional[PositiveFloat] = None
    rx: Optional[PositiveFloat] = None
    ry: Optional[PositiveFloat] = None
    vertices: Optional[list[tuple[float, float]]] = None
    center: tuple[float, float] = (0.0, 0.0)

    @model_validator(mode="after")
    def _fields_present(self):
        for name in _SHAPE_FIELDS[self.shape]:
            if getattr(self, name) is None:
                raise ValueError(f"{self.shape} requires field '{name}'")
        if self.shape == "polygon" and len(self.vertices) < 3:
            raise ValueError("polygon requires at least three vertices")
        return self

    def build(self) -> Shape:
        return shape_from_dict(self.model_dump(exclude_none=True))


class ProfileSpec(_Model):
    kappa1: list[BumpSpec] = Field(default_factory=list)
    kappa2: list[BumpSpec] = Field(default_factory=list)
    theta: list[BumpSpec] = Field(default_factory=list)
    theta_is_rate: bool = False
    support: Optional[tuple[float, float]] = None
    ds: PositiveFloat = 1e-3

    def build(self) -> CurvatureProfile:
        return make_profile([b.build() for b in self.kappa1], [b.build() for b in self.kappa2],
                            [b.build() for b in self.theta], ds=self.ds,
                            theta_is_rate=self.theta_is_rate, support=self.support)

    @property
    def empty(self) -> bool:
        return not (self.kappa1 or self.kappa2 or self.theta)


class Scenario(_Model):
    name: str = Field(min_length=1)
    task: Literal["ground_pair", "lambda", "spectrum", "hardy", "sweep", "injectivity", "constants"]
    cross_section: ShapeSpec
    delta: PositiveFloat = 0.05
    boundary: Literal["ghost", "zero"] = "ghost"
    profile: ProfileSpec = Field(default_factory=ProfileSpec)
    sigma: Optional[list[BumpSpec]] = None
    L: PositiveFloat = 15.0
    L_values: Optional[list[PositiveFloat]] = None
    ds: PositiveFloat = 0.05
    ends: Literal["dirichlet", "transparent"] = "transparent"
    modes: Optional[PositiveInt] = 40
    s0: float = 0.0
    deltas: Optional[list[PositiveFloat]] = None
    k_values: Optional[list[NonNegativeFloat]] = None
    mode: Literal["bend", "bend_torsion"] = "bend"
    n_eigen: PositiveInt = 5
    trials: PositiveInt = 1000
    output_dir: Optional[str] = None

    @model_validator(mode="after")
    def _task_inputs(self):
        if self.task == "sweep" and not self.k_values:
            raise ValueError("task 'sweep' requires field 'k_values'")
        if self.task == "sweep" and not self.profile.kappa1:
            raise ValueError("task 'sweep' requires field 'profile.kappa1'")
        if self.task == "injectivity" and self.profile.empty:
            raise ValueError("task 'injectivity' requires field 'profile'")
        if self.task in ("hardy", "constants") and not self.sigma and self.profile.empty:
            raise ValueError(f"task '{self.task}' requires field 'sigma' or 'profile'")
        return self

    @property
    def truncations(self) -> list[float]:
        return list(self.L_values) if self.L_values else [self.L]

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def parse_scenario(text: str, source: str = "<config>") -> Scenario:
    """Parse and validate; errors name the line/column or the offending field."""
    from pydantic import ValidationError

    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        parts = []
        for err in exc.errors():
            loc = ".".join(str(x) for x in err["loc"]) or "<root>"
            parts.append(f"{loc}: {err['msg']}")
        raise ConfigurationError(f"{source}: invalid scenario; " + "; ".join(parts)) from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(encoding="utf-8"), str(path))
