"""Signs of central-difference sensitivities compared with the published tables."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .closed_form import a_star_function, contract_spec, principal_value, risk_averse_solution
from .model import MeanFieldModel, RiskAversePenalties, TimeGrid

BASELINE = MeanFieldModel(alpha=0.25, beta1=0.1, beta2=0.5, gamma=0.2, sigma=1.0, c=1.0, n=2.0, T=1.0, R0=0.0)
PENALTY_BASELINE = RiskAversePenalties(lambdaX=0.1, lambdaXi=0.1, lambdaXXi=0.1)
STEP = 1e-3
ZERO_TOL = 1e-6

UP, DOWN, FLAT = "+", "-", "0"

# published signs; "share" moves beta1 up and alpha down with kappa fixed
TABLE = {
    "contract_mean": {"c": DOWN, "alpha": UP, "beta1": UP, "beta2": UP, "gamma": FLAT, "share": FLAT},
    "contract_variance": {"c": FLAT, "alpha": UP, "beta1": UP, "beta2": UP, "gamma": FLAT, "share": FLAT},
    "fixed_salary": {"c": DOWN, "alpha": DOWN, "beta1": DOWN, "beta2": DOWN, "gamma": UP, "share": DOWN},
    "effort": {"c": DOWN, "alpha": UP, "beta1": UP, "beta2": UP, "gamma": FLAT, "share": FLAT},
    "principal_gain": {"c": DOWN, "alpha": UP, "beta1": UP, "beta2": UP, "gamma": DOWN, "share": UP},
}
# rows that must match; the fixed-salary row is only reported
REQUIRED = ("contract_mean", "contract_variance", "effort", "principal_gain")

PENALTY_TABLE = {
    "effort": {"lambdaX": FLAT, "lambdaXi": DOWN, "lambdaXXi": DOWN},
    "contract_mean": {"lambdaX": FLAT, "lambdaXi": DOWN, "lambdaXXi": DOWN},
    "contract_variance": {"lambdaX": FLAT, "lambdaXi": DOWN, "lambdaXXi": DOWN},
}

QUANTITIES = {
    "contract_mean": lambda m: contract_spec(m).law.mean,
    "contract_variance": lambda m: contract_spec(m).law.variance,
    "fixed_salary": lambda m: contract_spec(m).delta,
    "effort": lambda m: float(a_star_function(m)(0.0)),
    "principal_gain": lambda m: float(principal_value(0.0, m.m0, m.R0, m.v0, m)),
}


def sign(x: float, tol: float = ZERO_TOL) -> str:
    return FLAT if abs(x) <= tol else (UP if x > 0 else DOWN)


def derivative(quantity, model: MeanFieldModel, parameter: str, h: float = STEP) -> float:
    if parameter == "share":
        lo = model.with_(alpha=model.alpha + h, beta1=model.beta1 - h)
        hi = model.with_(alpha=model.alpha - h, beta1=model.beta1 + h)
    else:
        v = getattr(model, parameter)
        lo, hi = model.with_(**{parameter: v - h}), model.with_(**{parameter: v + h})
    return (quantity(hi) - quantity(lo)) / (2 * h)


def degenerate_baseline(parameter: str, base: MeanFieldModel = BASELINE) -> MeanFieldModel:
    """The baseline with every drift parameter zero except the one being moved."""
    zero = base.with_(alpha=0.0, beta1=0.0, beta2=0.0, gamma=0.0)
    if parameter == "share":
        return zero.with_(alpha=base.alpha, beta1=base.beta1)
    if parameter == "c":
        return zero
    return zero.with_(**{parameter: getattr(base, parameter)})


@dataclass(frozen=True)
class Cell:
    quantity: str
    parameter: str
    baseline: str
    derivative: float
    sign: str
    expected: str
    required: bool

    @property
    def match(self) -> bool:
        return self.sign == self.expected

    def to_dict(self) -> dict:
        return {"quantity": self.quantity, "parameter": self.parameter, "baseline": self.baseline,
                "derivative": self.derivative, "sign": self.sign, "expected": self.expected,
                "match": self.match, "required": self.required}


def sensitivity_table(model: MeanFieldModel = BASELINE) -> list[Cell]:
    """Every (quantity, parameter) cell of the risk-neutral table.

    The fixed salary is differentiated at the degenerate baselines where
    all other drift parameters vanish, as the published table states;
    the other rows use ``model``.
    """
    cells = []
    for q, row in TABLE.items():
        for p, expected in row.items():
            if q == "fixed_salary":
                base, label = degenerate_baseline(p, model), "others_zero"
            else:
                base, label = model, "baseline"
            d = derivative(QUANTITIES[q], base, p)
            required = q in REQUIRED and p != "share"
            cells.append(Cell(q, p, label, float(d), sign(d), expected, required))
    return cells


def _penalty_quantities(model, penalties, grid):
    policy, spec = risk_averse_solution(model, penalties, grid)
    return {"effort": float(policy.a_star.values[0]), "contract_mean": spec.law.mean,
            "contract_variance": spec.law.variance}


def penalty_table(model: MeanFieldModel = BASELINE, penalties: RiskAversePenalties = PENALTY_BASELINE,
                  h: float = STEP, steps: int = 50) -> list[Cell]:
    """Signs against the mean-variance penalties (effort at ``t = 0``)."""
    grid = TimeGrid(model.T, steps)
    cells = []
    for p in ("lambdaX", "lambdaXi", "lambdaXXi"):
        v = getattr(penalties, p)
        lo = _penalty_quantities(model, RiskAversePenalties(**{**penalties.__dict__, p: v - h}), grid)
        hi = _penalty_quantities(model, RiskAversePenalties(**{**penalties.__dict__, p: v + h}), grid)
        for q, row in PENALTY_TABLE.items():
            d = (hi[q] - lo[q]) / (2 * h)
            cells.append(Cell(q, p, "penalty_baseline", float(d), sign(d), row[p], False))
    return cells


def summary(cells) -> dict:
    required = [c for c in cells if c.required]
    mism = [c.to_dict() for c in cells if not c.match]
    return {"required_cells": len(required), "required_matched": sum(c.match for c in required),
            "passed": all(c.match for c in required), "mismatches": mism}


def effort_curve_monotone(model: MeanFieldModel, penalties: RiskAversePenalties, name: str,
                          h: float = 0.05, steps: int = 50) -> bool:
    """Whether the risk-averse effort is pointwise nonincreasing in one penalty."""
    grid = TimeGrid(model.T, steps)
    base, _ = risk_averse_solution(model, penalties, grid)
    moved = RiskAversePenalties(**{**penalties.__dict__, name: getattr(penalties, name) + h})
    up, _ = risk_averse_solution(model, moved, grid)
    return bool(np.all(up.a_star.values <= base.a_star.values + 1e-10))
