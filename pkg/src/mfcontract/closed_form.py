"""Closed-form optimal contract, efforts, moments and Principal value.

The Gaussian law of the optimal contract is computed from its integral
representation ``Y_T = R0 + int c(a*) du + int z* sigma dW``:

    mean     = R0 + int_0^T c |a*_u|^n / n du
    variance = sigma^2 int_0^T |z*_u|^2 du

The constants printed alongside the theorem are available through
:func:`printed_contract_law` and :func:`printed_delta` for comparison only.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, simpson

from .hamiltonian import cost, effort_from_z, maximize_h, principal_H
from .model import (BRANCH_TOL, DeterministicCurve, GaussianLaw, MeanFieldModel,
                    RiskAversePenalties, TimeGrid, branch)

QUAD_RTOL = 1e-10


def expm1_ratio(x, t):
    """``(exp(x t) - 1) / x`` with its limit ``t`` at ``x = 0``."""
    t = np.asarray(t, dtype=float)
    if abs(x) <= BRANCH_TOL:
        return t.copy() if t.ndim else float(t)
    return np.expm1(x * t) / x


def integrate(func, a: float, b: float) -> float:
    if b <= a:
        return 0.0
    val, _ = quad(func, a, b, epsabs=0.0, epsrel=QUAD_RTOL, limit=200)
    return float(val)


@dataclass(frozen=True)
class PolicyPair:
    z_star: DeterministicCurve
    a_star: DeterministicCurve
    kind: str = "optimal"  # "optimal" (risk-neutral closed form) or "risk_averse"


@dataclass(frozen=True)
class MomentCurves:
    """Mean ``f`` and second moment ``g`` of the state under the optimal measure."""

    f: DeterministicCurve
    g: DeterministicCurve

    def variance(self, t):
        return self.g(t) - self.f(t) ** 2

    @property
    def variance_values(self) -> np.ndarray:
        return self.g.values - self.f.values ** 2


@dataclass(frozen=True)
class ContractSpec:
    delta: float
    law: GaussianLaw
    z_star: DeterministicCurve

    def to_dict(self) -> dict:
        return {"delta": float(self.delta), "mean": float(self.law.mean), "variance": float(self.law.variance)}


def _grid(model: MeanFieldModel, grid: TimeGrid | None) -> TimeGrid:
    return grid if grid is not None else TimeGrid(model.T)


def z_star_function(model: MeanFieldModel):
    k, T, scale = model.kappa, model.T, 1.0 + model.beta2
    return lambda t: scale * np.exp(k * (T - np.asarray(t, dtype=float)))


def a_star_function(model: MeanFieldModel):
    z = z_star_function(model)
    return lambda t: effort_from_z(z(t), model)


def optimal_policy(model: MeanFieldModel, grid: TimeGrid | None = None) -> PolicyPair:
    grid = _grid(model, grid)
    z = DeterministicCurve.from_function(grid, z_star_function(model))
    a = DeterministicCurve.from_function(grid, a_star_function(model))
    return PolicyPair(z, a, "optimal")


def state_variance(model: MeanFieldModel, t):
    """``Var(X_t)``; independent of the (deterministic) effort."""
    t = np.asarray(t, dtype=float)
    return model.v0 * np.exp(2 * model.alpha * t) + model.sigma ** 2 * expm1_ratio(2 * model.alpha, t)


def closed_form_mean(model: MeanFieldModel, t):
    """``f(t) = E[X_t]`` under the Theorem-5.1 policy, branch by branch."""
    t = np.asarray(t, dtype=float)
    a, k, n, g, s2, V0 = model.alpha, model.kappa, model.n, model.gamma, model.sigma ** 2, model.v0
    # effort term: (1+beta2) int_0^t e^{k(t-u)} A e^{-k u/(n-1)} du
    A = ((1.0 + model.beta2) * np.exp(k * model.T) / model.c) ** (1.0 / (n - 1.0))
    effort = (1.0 + model.beta2) * A * np.exp(k * t) * expm1_ratio(-k * n / (n - 1.0), t)
    kind = branch(model)
    if kind == "generic":
        lam1 = model.m0 + g * s2 / (k * (2 * a - k)) + g * V0 / (2 * a - k)
        lam3 = -g * s2 / (2 * a * (2 * a - k)) - g * V0 / (2 * a - k)
        lam4 = -g * s2 / (2 * a * k)
        out = lam1 * np.exp(k * t) + effort + lam3 * np.exp(2 * a * t) + lam4
        # the lambdas cancel at t = 0 only up to rounding
        return np.where(t == 0.0, model.m0, out)
    if kind == "alpha_eq_beta1":
        penalty = (V0 + s2 / k) * t * np.exp(k * t) - s2 * np.expm1(k * t) / k ** 2
    elif kind == "alpha0":
        penalty = V0 * np.expm1(k * t) / k + s2 * (np.expm1(k * t) - k * t) / k ** 2
    else:  # kappa0
        penalty = V0 * t + s2 * t ** 2 / 2.0
    return model.m0 * np.exp(k * t) + effort - g * penalty


def rk4_moments(model: MeanFieldModel, a_func, grid: TimeGrid, substeps: int = 1):
    """RK4 integration of the (mean, second moment) ODE pair on ``grid``."""
    a_, k, g, s2, b2 = model.alpha, model.kappa, model.gamma, model.sigma ** 2, model.beta2

    def rhs(t, y):
        f, m2 = y
        fp = (1.0 + b2) * float(a_func(t)) + k * f - g * (m2 - f * f)
        return np.array([fp, 2 * a_ * m2 + 2 * f * (fp - a_ * f) + s2])

    t_pts = grid.points
    out = np.empty((grid.steps + 1, 2))
    y = np.array([model.m0, model.m0 ** 2 + model.v0])
    out[0] = y
    h = grid.dt / substeps
    for i in range(grid.steps):
        t = t_pts[i]
        for _ in range(substeps):
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        out[i + 1] = y
    return out[:, 0], out[:, 1]


def moment_curves(model: MeanFieldModel, policy: PolicyPair | None = None,
                  grid: TimeGrid | None = None, method: str = "auto") -> MomentCurves:
    """Moments of the controlled state.

    ``method`` is ``"closed"``, ``"rk4"`` or ``"auto"``; the closed form only
    exists for the risk-neutral optimal policy, so ``auto`` falls back to
    RK4 for any other policy.
    """
    if policy is None:
        policy = optimal_policy(model, grid)
    grid = policy.a_star.grid if grid is None else grid
    if method == "auto":
        method = "closed" if policy.kind == "optimal" else "rk4"
    if method == "closed":
        if policy.kind != "optimal":
            raise ValueError("closed-form moments need the risk-neutral optimal policy")

        def f_func(t):
            return closed_form_mean(model, t)

        def g_func(t):
            return closed_form_mean(model, t) ** 2 + state_variance(model, t)

        return MomentCurves(DeterministicCurve.from_function(grid, f_func),
                            DeterministicCurve.from_function(grid, g_func))
    if method == "rk4":
        f, g = rk4_moments(model, policy.a_star, grid)
        return MomentCurves(DeterministicCurve(grid, f), DeterministicCurve(grid, g))
    raise ValueError(f"unknown method {method!r}")


def _law(model: MeanFieldModel, z_func, a_func) -> GaussianLaw:
    mean = model.R0 + integrate(lambda u: float(cost(a_func(u), model)), 0.0, model.T)
    var = model.sigma ** 2 * integrate(lambda u: float(z_func(u)) ** 2, 0.0, model.T)
    return GaussianLaw(mean, var)


def expected_variable_part(model: MeanFieldModel, f_func) -> float:
    """``E[beta1(1+beta2) int e^{k(T-t)} X_t dt + (1+beta2)(X_T - e^{kT} X_0)]``."""
    k, T, b = model.kappa, model.T, 1.0 + model.beta2
    integral = integrate(lambda t: np.exp(k * (T - t)) * float(f_func(t)), 0.0, T)
    return model.beta1 * b * integral + b * (float(f_func(T)) - np.exp(k * T) * model.m0)


def contract_spec(model: MeanFieldModel, grid: TimeGrid | None = None) -> ContractSpec:
    grid = _grid(model, grid)
    law = _law(model, z_star_function(model), a_star_function(model))
    delta = law.mean - expected_variable_part(model, lambda t: closed_form_mean(model, t))
    return ContractSpec(delta, law, DeterministicCurve.from_function(grid, z_star_function(model)))


def contract_payment(model: MeanFieldModel, delta: float, t: np.ndarray, x_paths: np.ndarray) -> np.ndarray:
    """Pathwise contract ``delta + beta1(1+beta2) int e^{k(T-t)} X dt + (1+beta2)(X_T - e^{kT} X_0)``.

    ``x_paths`` has one row per path sampled at ``t``; the time integral
    uses the trapezoidal rule.
    """
    k, T, b = model.kappa, model.T, 1.0 + model.beta2
    weights = np.exp(k * (T - t))
    integral = np.trapezoid(x_paths * weights, t, axis=-1) if len(t) > 1 else 0.0
    return delta + model.beta1 * b * integral + b * (x_paths[..., -1] - np.exp(k * T) * x_paths[..., 0])


def printed_contract_law(model: MeanFieldModel) -> GaussianLaw:
    """Gaussian parameters exactly as displayed with the theorem (reference only).

    The displayed variance writes ``(1+beta^2)^2``; it is read as ``(1+beta2)^2``.
    """
    n, k, T = model.n, model.kappa, model.T
    mean = model.R0 + (1 + model.beta2) ** (n / (n - 1)) / (n * model.c) * np.expm1(n / (n - 1) * k * T)
    var = model.sigma ** 2 * (1 + model.beta2) ** 2 * np.expm1(2 * k * T)
    return GaussianLaw(float(mean), float(var))


def printed_delta(model: MeanFieldModel) -> float:
    """Fixed salary as printed in the proof (valid only for alpha > 0, alpha != beta1)."""
    a, b1, b2, n, c, T, g = model.alpha, model.beta1, model.beta2, model.n, model.c, model.T, model.gamma
    k, s2, V0, f0 = model.kappa, model.sigma ** 2, model.v0, model.m0
    if branch(model) != "generic":
        raise ValueError("printed fixed salary divides by alpha - beta1 and kappa")
    p = n / (n - 1)
    first = (1 + b2 - 1 / n) * (1 + b2) ** p / (n * k * c ** (1 / (n - 1))) * np.expm1(k * p * T)
    bracket = (T * b1 * (f0 + g * s2 / (k * (a - b1)) + g * V0 / (a - b1))
               + 0.5 * g * s2 * (-np.expm1(-k * T)) / k ** 2
               - g * a * (s2 / (2 * a) + V0) / (a - b1) ** 2 * np.expm1((a - b1) * T)
               + (1 + b2) * (n - 1) * b1 / (n * c ** (1 / (n - 1)) * k) * np.exp(k * T / (n - 1))
               * (T - (n - 1) / (n * k) * (-np.expm1(-p * k * T))))
    return float(model.R0 - first - (1 + b2) * np.exp(k * T) * bracket)


def _variance_weights(model: MeanFieldModel, tau):
    """``I1 = int_0^tau e^{k(tau-s)} e^{2 alpha s} ds`` and
    ``I2 = int_0^tau e^{k(tau-s)} (e^{2 alpha s} - 1)/(2 alpha) ds``."""
    a, k = model.alpha, model.kappa
    kind = branch(model)
    if kind == "generic":
        I1 = (np.exp(2 * a * tau) - np.exp(k * tau)) / (2 * a - k)
        I2 = (I1 - np.expm1(k * tau) / k) / (2 * a)
    elif kind == "alpha_eq_beta1":
        I1 = tau * np.exp(k * tau)
        I2 = (I1 - np.expm1(k * tau) / k) / (2 * a)
    elif kind == "alpha0":
        I1 = np.expm1(k * tau) / k
        I2 = (np.expm1(k * tau) - k * tau) / k ** 2
    else:
        I1 = tau
        I2 = tau ** 2 / 2.0
    return I1, I2


def principal_value(t, m1, m2, var1, model: MeanFieldModel):
    """Principal's value at time ``t`` for a state law with output mean ``m1``,
    output variance ``var1`` and continuation-utility mean ``m2``."""
    n, c, k = model.n, model.c, model.kappa
    tau = model.T - np.asarray(t, dtype=float)
    p = n / (n - 1.0)
    effort_part = ((1 + model.beta2) ** p / c ** (1.0 / (n - 1.0)) * (1.0 - 1.0 / n)
                   * expm1_ratio(k * p, tau))
    I1, I2 = _variance_weights(model, tau)
    penalty = model.gamma * (var1 * I1 + model.sigma ** 2 * I2)
    return effort_part + m1 * np.exp(k * tau) - m2 - penalty


def risk_averse_effort_n2(t, model: MeanFieldModel, penalties: RiskAversePenalties):
    """Closed-form optimal effort of the mean-variance problem for quadratic cost."""
    if model.n != 2:
        raise ValueError("closed form only for n = 2")
    s2, c = model.sigma ** 2, model.c
    D = 1.0 + 2.0 * (penalties.lambdaXi + penalties.lambdaXXi) * c * s2
    tau = model.T - np.asarray(t, dtype=float)
    return ((1 + model.beta2) / (c * D) * np.exp(model.kappa * tau)
            + 2 * penalties.lambdaXXi * s2 / D * np.exp(model.alpha * tau))


def risk_averse_z_function(model: MeanFieldModel, penalties: RiskAversePenalties):
    if penalties.is_zero:
        return z_star_function(model)

    def z(t):
        t = np.asarray(t, dtype=float)
        return np.vectorize(lambda u: maximize_h(float(u), model, penalties).z, otypes=[float])(t)

    return z


def risk_averse_solution(model: MeanFieldModel, penalties: RiskAversePenalties,
                         grid: TimeGrid | None = None):
    """Policy and contract of the mean-variance Principal.

    Returns ``(PolicyPair, ContractSpec)``.  With all penalties zero this is
    the risk-neutral solution.
    """
    grid = _grid(model, grid)
    if penalties.is_zero:
        return optimal_policy(model, grid), contract_spec(model, grid)
    z_func = risk_averse_z_function(model, penalties)
    z_curve = DeterministicCurve.from_function(grid, z_func)
    a_curve = DeterministicCurve(grid, effort_from_z(z_curve.values, model))
    policy = PolicyPair(z_curve, a_curve, "risk_averse")
    law = _law(model, z_func, lambda u: effort_from_z(z_func(u), model))
    # xi = delta - alpha int z X dt + int z dX; its mean part is int z (f' - alpha f) dt
    moments = moment_curves(model, policy, grid, method="rk4")
    b2, b1, g = 1 + model.beta2, model.beta1, model.gamma

    t = grid.points
    z, a = z_curve.values, a_curve.values
    integrand = z * (b2 * a + b1 * moments.f.values - g * state_variance(model, t))
    # the RK4 mean lives on the grid, so integrate there (Simpson, O(dt^4))
    delta = law.mean - (float(simpson(integrand, x=t)) if model.T > 0 else 0.0)
    return policy, ContractSpec(delta, law, z_curve)


def risk_averse_objective(model: MeanFieldModel, penalties: RiskAversePenalties, policy: PolicyPair,
                          contract: ContractSpec, grid: TimeGrid | None = None) -> float:
    """``E[X_T - xi] - lX Var(X_T) - lXi Var(xi) - lXXi Var(X_T - xi)`` for a deterministic policy.

    ``xi = delta - alpha int z X dt + int z dX`` carries the noise ``sigma int z dW``,
    so ``Cov(X_T, xi) = sigma^2 int e^{alpha(T-s)} z_s ds``.
    """
    grid = _grid(model, grid)
    moments = moment_curves(model, policy, grid, method="rk4" if policy.kind != "optimal" else "auto")
    var_x = float(state_variance(model, model.T))
    var_xi = contract.law.variance
    t = grid.points
    cov = model.sigma ** 2 * float(simpson(np.exp(model.alpha * (model.T - t)) * policy.z_star.values, x=t)) \
        if model.T > 0 else 0.0
    mean_gain = float(moments.f.values[-1]) - contract.law.mean
    return (mean_gain - penalties.lambdaX * var_x - penalties.lambdaXi * var_xi
            - penalties.lambdaXXi * (var_x + var_xi - 2 * cov))
