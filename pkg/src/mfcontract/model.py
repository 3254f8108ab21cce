"""Model parameters, time grids and deterministic curves.

Every other module consumes a :class:`MeanFieldModel`.  Instances are frozen
and validated on construction, so holding one means the parameter ranges
already hold.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Callable, Mapping

import numpy as np

try:  # Python >= 3.11
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

# absolute threshold for the removable singularities of the closed forms
BRANCH_TOL = 1e-12
DEFAULT_STEPS = 1000


class ValidationError(ValueError):
    """A parameter violates its admissible range."""


class UnsupportedModelError(ValueError):
    """The requested operation is not defined for these parameters."""


@dataclass(frozen=True)
class MeanFieldModel:
    """Parameters of the quadratic-drift, power-cost mean-field model.

    Drift of the output is ``a + alpha*x + beta1*E[X] + beta2*E[a] - gamma*Var(X)``,
    the effort cost is ``c*|a|**n/n`` and the initial law is Gaussian with
    mean ``m0`` and variance ``v0`` (Dirac when ``v0 == 0``).
    """

    alpha: float = 0.0
    beta1: float = 0.0
    beta2: float = 0.0
    gamma: float = 0.0
    sigma: float = 1.0
    c: float = 1.0
    n: float = 2.0
    T: float = 1.0
    R0: float = 0.0
    m0: float = 0.0
    v0: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
                raise ValidationError(f"{f.name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ValidationError(f"{f.name} must be finite")
            object.__setattr__(self, f.name, float(value))
        if not 0.0 <= self.alpha < 0.5:
            raise ValidationError("alpha must lie in [0, 0.5)")
        for name in ("beta1", "beta2", "gamma"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be nonnegative")
        if self.sigma <= 0:
            raise ValidationError("sigma must be positive")
        if self.c <= 0:
            raise ValidationError("c must be positive")
        if self.n <= 1:
            raise ValidationError("n must exceed 1")
        # T = 0 is accepted as the degenerate empty horizon
        if self.T < 0:
            raise ValidationError("T must be nonnegative")
        if self.v0 < 0:
            raise ValidationError("v0 must be nonnegative")

    @property
    def kappa(self) -> float:
        return self.alpha + self.beta1

    def with_(self, **changes) -> "MeanFieldModel":
        return replace(self, **changes)


@dataclass(frozen=True)
class RiskAversePenalties:
    """Mean-variance penalties on Var(X_T), Var(xi) and Var(X_T - xi)."""

    lambdaX: float = 0.0
    lambdaXi: float = 0.0
    lambdaXXi: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = float(getattr(self, f.name))
            if not math.isfinite(value) or value < 0:
                raise ValidationError(f"{f.name} must be a finite nonnegative number")
            object.__setattr__(self, f.name, value)

    @property
    def is_zero(self) -> bool:
        return self.lambdaX == 0 and self.lambdaXi == 0 and self.lambdaXXi == 0


def validate(raw: Mapping[str, float]) -> MeanFieldModel:
    """Build a model from a mapping, rejecting unknown keys."""
    known = {f.name for f in fields(MeanFieldModel)}
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"unknown model keys: {sorted(unknown)}")
    return MeanFieldModel(**dict(raw))


def validate_penalties(raw: Mapping[str, float]) -> RiskAversePenalties:
    known = {f.name for f in fields(RiskAversePenalties)}
    unknown = set(raw) - known
    if unknown:
        raise ValidationError(f"unknown penalty keys: {sorted(unknown)}")
    return RiskAversePenalties(**dict(raw))


def kappa(model: MeanFieldModel) -> float:
    return model.alpha + model.beta1


def branch(model: MeanFieldModel) -> str:
    """Which closed-form branch of the value function applies.

    One of ``"kappa0"`` (alpha = beta1 = 0), ``"alpha0"`` (alpha = 0 < beta1),
    ``"alpha_eq_beta1"`` (alpha = beta1 > 0, i.e. 2*alpha = kappa) or ``"generic"``.
    """
    if abs(model.alpha) <= BRANCH_TOL:
        return "kappa0" if abs(model.kappa) <= BRANCH_TOL else "alpha0"
    if abs(model.alpha - model.beta1) <= BRANCH_TOL:
        return "alpha_eq_beta1"
    return "generic"


def read_document(path: str | Path) -> dict:
    """Parse a TOML or JSON document (chosen by suffix, JSON otherwise)."""
    path = Path(path)
    text = path.read_bytes()
    if path.suffix.lower() == ".toml":
        return tomllib.loads(text.decode("utf-8"))
    return json.loads(text)


def load_model(path: str | Path) -> MeanFieldModel:
    return validate(read_document(path))


@dataclass(frozen=True)
class TimeGrid:
    T: float
    steps: int = DEFAULT_STEPS

    def __post_init__(self):
        if self.T < 0 or not math.isfinite(self.T):
            raise ValidationError("grid horizon must be finite and nonnegative")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ValidationError("grid needs at least one step")
        object.__setattr__(self, "steps", int(self.steps))

    @property
    def dt(self) -> float:
        return self.T / self.steps

    @property
    def points(self) -> np.ndarray:
        t = np.arange(self.steps + 1) * self.dt
        t[-1] = self.T
        return t


@dataclass(frozen=True)
class DeterministicCurve:
    """Scalar function sampled on a grid.

    Evaluation uses ``func`` when an exact evaluator is attached and falls
    back to piecewise-linear interpolation of ``values`` otherwise.
    """

    grid: TimeGrid
    values: np.ndarray
    func: Callable[[np.ndarray], np.ndarray] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.steps + 1,):
            raise ValueError("curve values must have one entry per grid point")
        if not np.all(np.isfinite(values)):
            raise ValueError("curve values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: TimeGrid, func) -> "DeterministicCurve":
        return cls(grid, np.asarray(func(grid.points), dtype=float), func)

    def __call__(self, t):
        if self.func is not None:
            return self.func(t)
        return np.interp(t, self.grid.points, self.values)


@dataclass(frozen=True)
class GaussianLaw:
    mean: float
    variance: float

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)
