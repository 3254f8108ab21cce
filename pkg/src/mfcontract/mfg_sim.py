"""Particle simulation of the mean-field equilibrium and Monte Carlo estimators."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from . import rng
from .closed_form import ContractSpec, MomentCurves, PolicyPair, expm1_ratio
from .hamiltonian import cost
from .model import DeterministicCurve, GaussianLaw, MeanFieldModel, RiskAversePenalties, TimeGrid, ValidationError

MODES = ("analytic", "particle")
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class MissingIncrementsError(ValueError):
    """An operation needs the Brownian increments that were not stored."""


@dataclass(frozen=True)
class SimConfig:
    particles: int
    grid: TimeGrid
    seed: int = 42
    meanfield_mode: str = "analytic"
    workers: int = 1

    def __post_init__(self):
        if int(self.particles) != self.particles or self.particles < 2:
            raise ValidationError("particles must be an integer >= 2")
        if self.meanfield_mode not in MODES:
            raise ValidationError(f"meanfield_mode must be one of {MODES}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")

    @classmethod
    def for_model(cls, model: MeanFieldModel, particles: int = 100_000, steps: int = 200, **kw) -> "SimConfig":
        return cls(particles, TimeGrid(model.T, steps), **kw)


@dataclass(frozen=True)
class ParticleEnsemble:
    grid: TimeGrid
    x_paths: np.ndarray
    y_paths: np.ndarray | None
    realized_mean: DeterministicCurve
    realized_second_moment: DeterministicCurve
    effort: DeterministicCurve
    noise: np.ndarray | None  # standard normals; column 0 drives the initial state
    seed: int
    exact: bool

    @property
    def particles(self) -> int:
        return self.x_paths.shape[0]


@dataclass(frozen=True)
class Estimate:
    value: float
    standard_error: float
    particles: int
    seed: int

    def to_dict(self) -> dict:
        return {"value": self.value, "standard_error": self.standard_error,
                "particles": self.particles, "seed": self.seed}


def step_integrals(grid: TimeGrid, func, rate: float = 0.0) -> np.ndarray:
    """``int_{t_k}^{t_{k+1}} exp(rate (t_{k+1} - s)) func(s) ds`` for every step (Gauss-Legendre)."""
    t = grid.points
    half = grid.dt / 2.0
    s = t[:-1, None] + half * (1.0 + _GL_X)[None, :]
    vals = np.asarray(func(s), dtype=float) * np.exp(rate * (t[1:, None] - s))
    return half * vals @ _GL_W


def _law_terms(model: MeanFieldModel, policy: PolicyPair, moments: MomentCurves):
    """Deterministic part of the drift: (1+beta2) a*(s) + beta1 f(s) - gamma Var(s)."""
    def func(s):
        return ((1.0 + model.beta2) * policy.a_star(s) + model.beta1 * moments.f(s)
                - model.gamma * moments.variance(s))
    return func


def _initial(model: MeanFieldModel, noise_col: np.ndarray) -> np.ndarray:
    return model.m0 + math.sqrt(model.v0) * noise_col


def _exact_paths(model, grid, x0, xi, source_func):
    """Exact transitions of dX = (alpha X + source(t)) dt + sigma dW."""
    src = step_integrals(grid, source_func, rate=model.alpha)
    decay = math.exp(model.alpha * grid.dt)
    sd = model.sigma * math.sqrt(expm1_ratio(2 * model.alpha, grid.dt))
    x = np.empty((x0.shape[0], grid.steps + 1))
    x[:, 0] = x0
    for k in range(grid.steps):
        x[:, k + 1] = decay * x[:, k] + src[k] + sd * xi[:, k]
    return x


def _euler_paths(model, grid, x0, xi, source_values):
    dt, sq = grid.dt, model.sigma * math.sqrt(grid.dt)
    x = np.empty((x0.shape[0], grid.steps + 1))
    x[:, 0] = x0
    for k in range(grid.steps):
        xk = x[:, k]
        x[:, k + 1] = xk + (model.alpha * xk + source_values[k]) * dt + sq * xi[:, k]
    return x


def _interacting_paths(model, grid, x0, xi, a_values):
    dt, sq = grid.dt, model.sigma * math.sqrt(grid.dt)
    x = np.empty((x0.shape[0], grid.steps + 1))
    x[:, 0] = x0
    for k in range(grid.steps):
        xk = x[:, k]
        mean, var = xk.mean(), xk.var()
        drift = (1.0 + model.beta2) * a_values[k] + model.alpha * xk + model.beta1 * mean - model.gamma * var
        x[:, k + 1] = xk + drift * dt + sq * xi[:, k]
    return x


def _ensemble(grid, x, policy, noise, seed, exact):
    mean = DeterministicCurve(grid, x.mean(axis=0))
    second = DeterministicCurve(grid, np.einsum("ij,ij->j", x, x) / x.shape[0])
    effort = DeterministicCurve(grid, policy.a_star(grid.points))
    return ParticleEnsemble(grid, x, None, mean, second, effort, noise, seed, exact)


def simulate_equilibrium(model: MeanFieldModel, policy: PolicyPair, moments: MomentCurves,
                         sim: SimConfig) -> ParticleEnsemble:
    """Simulate the output of ``sim.particles`` agents playing ``policy``.

    In ``analytic`` mode the law of the state enters the drift through the
    deterministic ``moments``; transitions are exact when ``gamma == 0`` and
    Euler-Maruyama otherwise.  In ``particle`` mode the drift uses the
    running empirical mean and variance of the ensemble (Euler-Maruyama).
    """
    grid = sim.grid
    noise = rng.normals(sim.seed, "equilibrium", sim.particles, grid.steps + 1, workers=sim.workers)
    x0, xi = _initial(model, noise[:, 0]), noise[:, 1:]
    t = grid.points
    if sim.meanfield_mode == "particle":
        x = _interacting_paths(model, grid, x0, xi, policy.a_star(t[:-1]))
        exact = False
    elif model.gamma == 0:
        x = _exact_paths(model, grid, x0, xi, _law_terms(model, policy, moments))
        exact = True
    else:
        x = _euler_paths(model, grid, x0, xi, _law_terms(model, policy, moments)(t[:-1]))
        exact = False
    return _ensemble(grid, x, policy, noise, sim.seed, exact)


def fixed_point_meanfield(model: MeanFieldModel, policy: PolicyPair, sim: SimConfig,
                          tol: float = 1e-3, max_iter: int = 50, damping: float = 0.5) -> MomentCurves:
    """Damped Picard iteration on the (mean, variance) curves of the state.

    Each iteration freezes the current curves in the drift, simulates the
    ensemble with the same Brownian draws, and blends the empirical curves
    into the iterate.  Raises :class:`ConvergenceError` after ``max_iter``
    iterations without a sup-norm change below ``tol``.
    """
    if sim.meanfield_mode != "particle":
        raise ValueError("fixed_point_meanfield needs meanfield_mode='particle'")
    grid = sim.grid
    noise = rng.normals(sim.seed, "fixed_point", sim.particles, grid.steps + 1, workers=sim.workers)
    x0, xi = _initial(model, noise[:, 0]), noise[:, 1:]
    a_vals = policy.a_star(grid.points[:-1])
    mean = np.full(grid.steps + 1, model.m0)
    var = np.full(grid.steps + 1, model.v0)
    change = math.inf
    for it in range(1, max_iter + 1):
        src = (1.0 + model.beta2) * a_vals + model.beta1 * mean[:-1] - model.gamma * var[:-1]
        x = _euler_paths(model, grid, x0, xi, src)
        new_mean, new_var = x.mean(axis=0), x.var(axis=0)
        change = max(np.max(np.abs(new_mean - mean)), np.max(np.abs(new_var - var)))
        mean = damping * mean + (1 - damping) * new_mean
        var = damping * var + (1 - damping) * new_var
        if change <= tol:
            return MomentCurves(DeterministicCurve(grid, mean), DeterministicCurve(grid, var + mean ** 2))
    raise ConvergenceError(f"mean-field fixed point did not converge in {max_iter} iterations "
                           f"(last sup-norm change {change:.3e} > tol {tol:.1e})", change, max_iter)


def simulate_continuation_utility(ensemble: ParticleEnsemble, model: MeanFieldModel, policy: PolicyPair,
                                  moments: MomentCurves | None = None):
    """Agent continuation utility along the ensemble; returns ``(ensemble, xi)``.

    Under the optimal measure the utility increment is ``c(a*) dt + z* sigma dW``
    with deterministic integrands, so each step is sampled from its exact
    Gaussian law using the ensemble's stored normals.
    """
    if ensemble.noise is None:
        raise MissingIncrementsError("ensemble was built without Brownian increments")
    grid = ensemble.grid
    cost_inc = step_integrals(grid, lambda s: cost(policy.a_star(s), model))
    noise_sd = model.sigma * np.sqrt(step_integrals(grid, lambda s: policy.z_star(s) ** 2))
    y = np.empty_like(ensemble.x_paths)
    y[:, 0] = model.R0
    np.cumsum(cost_inc[None, :] + noise_sd[None, :] * ensemble.noise[:, 1:], axis=1, out=y[:, 1:])
    y[:, 1:] += model.R0
    return replace(ensemble, y_paths=y), y[:, -1].copy()


def theorem_contract_payment(model: MeanFieldModel, delta: float, t: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``delta + beta1(1+beta2) int e^{k(T-t)} X dt + (1+beta2)(X_T - e^{kT} X_0)`` per path."""
    k, b = model.kappa, 1.0 + model.beta2
    w = np.exp(k * (model.T - t))
    integral = np.trapezoid(x * w, t, axis=-1) if len(t) > 1 else 0.0
    return delta + model.beta1 * b * integral + b * (x[..., -1] - np.exp(k * model.T) * x[..., 0])


def contract_payment(model: MeanFieldModel, contract: ContractSpec, t: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``delta - alpha int z X dt + int z dX`` per path, trapezoidal in both integrals.

    Valid for any deterministic sensitivity curve ``contract.z_star``.
    """
    z = contract.z_star(t)
    if len(t) < 2:
        return np.full(x.shape[:-1], contract.delta)
    dx = np.diff(x, axis=-1)
    stoch = dx @ (0.5 * (z[:-1] + z[1:]))
    drift = np.trapezoid(x * z, t, axis=-1)
    return contract.delta - model.alpha * drift + stoch


def agent_utility(model: MeanFieldModel, effort_curve, moments: MomentCurves, contract: ContractSpec,
                  sim: SimConfig, policy: PolicyPair) -> Estimate:
    """Utility ``E[xi - int c(effort)]`` of one agent deviating to ``effort_curve``.

    The population law (state moments and the equilibrium effort ``policy``)
    stays frozen at equilibrium while the deviating agent's output is
    simulated exactly under its own drift.
    """
    grid = sim.grid
    noise = rng.normals(sim.seed, "agent", sim.particles, grid.steps + 1, workers=sim.workers)
    x0, xi = _initial(model, noise[:, 0]), noise[:, 1:]

    def source(s):
        return (effort_curve(s) + model.beta2 * policy.a_star(s) + model.beta1 * moments.f(s)
                - model.gamma * moments.variance(s))

    x = _exact_paths(model, grid, x0, xi, source)
    total_cost = float(np.sum(step_integrals(grid, lambda s: cost(effort_curve(s), model))))
    samples = contract_payment(model, contract, grid.points, x) - total_cost
    return Estimate(float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(samples.size)),
                    sim.particles, sim.seed)


def principal_objective(ensemble: ParticleEnsemble, xi: np.ndarray, model: MeanFieldModel,
                        penalties: RiskAversePenalties | None = None) -> Estimate:
    """Monte Carlo estimate of ``E[X_T - xi]`` minus the variance penalties.

    The standard error uses the influence function of the penalized
    estimator, so it accounts for the sample variances too.
    """
    xT = ensemble.x_paths[:, -1]
    gain = xT - xi
    infl = gain.copy()
    if penalties is not None:
        for lam, s in ((penalties.lambdaX, xT), (penalties.lambdaXi, xi), (penalties.lambdaXXi, gain)):
            if lam:
                infl = infl - lam * (s - s.mean()) ** 2
    m = gain.size
    value = float(infl.mean())
    se = float(infl.std(ddof=1) / math.sqrt(m))
    return Estimate(value, se, m, ensemble.seed)


def gaussian_check(samples: np.ndarray, law: GaussianLaw | None = None) -> dict:
    """Skewness, excess kurtosis (with large-sample SEs) and a KS test."""
    m = samples.size
    mean, std = samples.mean(), samples.std(ddof=1)
    ref = law if law is not None else GaussianLaw(float(mean), float(std ** 2))
    ks = stats.kstest(samples, "norm", args=(ref.mean, math.sqrt(ref.variance)))
    return {
        "mean": float(mean),
        "mean_se": float(std / math.sqrt(m)),
        "variance": float(std ** 2),
        "variance_se": float(std ** 2 * math.sqrt(2.0 / (m - 1))),
        "skewness": float(stats.skew(samples)),
        "skewness_se": math.sqrt(6.0 / m),
        "excess_kurtosis": float(stats.kurtosis(samples)),
        "kurtosis_se": math.sqrt(24.0 / m),
        "ks_statistic": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
    }
