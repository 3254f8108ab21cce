"""Explicitly solvable mean-field Principal-Agent contracting: closed forms,
particle simulation, HJB verification and N-player convergence."""
from .model import (BRANCH_TOL, DeterministicCurve, GaussianLaw, MeanFieldModel, RiskAversePenalties, TimeGrid,
                    UnsupportedModelError, ValidationError, branch, kappa, load_model, validate)
from .hamiltonian import cost, drift_b, g_star, maximize_h, optimal_effort, principal_H, risk_averse_h
from .closed_form import (ContractSpec, MomentCurves, PolicyPair, contract_spec, moment_curves, optimal_policy,
                          principal_value, risk_averse_solution)

__all__ = [
    "BRANCH_TOL", "DeterministicCurve", "GaussianLaw", "MeanFieldModel", "RiskAversePenalties", "TimeGrid",
    "UnsupportedModelError", "ValidationError", "branch", "kappa", "load_model", "validate",
    "cost", "drift_b", "g_star", "maximize_h", "optimal_effort", "principal_H", "risk_averse_h",
    "ContractSpec", "MomentCurves", "PolicyPair", "contract_spec", "moment_curves", "optimal_policy",
    "principal_value", "risk_averse_solution",
]
