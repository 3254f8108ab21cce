"""N-player version of the model (beta2 = gamma = 0, quadratic cost).

Under the optimal efforts the average ``m = S/N`` of the outputs is an
Ornstein-Uhlenbeck process with rate ``kappa`` driven by the average Brownian
motion, and each deviation ``X^i - m`` is an OU process with rate ``alpha``
driven by ``W^i - mean(W)``.  The two are independent, so both are sampled
with exact Gaussian transitions.  Only ``tracked`` players are stored; the
other ``N - tracked`` players enter through the law of their sum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import rng
from .closed_form import a_star_function, contract_spec, expm1_ratio, state_variance, closed_form_mean
from .mfg_sim import MissingIncrementsError, step_integrals
from .model import DeterministicCurve, MeanFieldModel, TimeGrid, UnsupportedModelError, ValidationError

SLOPE_RANGE = (-0.8, -0.2)


@dataclass(frozen=True)
class NPlayerConfig:
    N: int
    games: int
    seed: int
    grid: TimeGrid
    tracked: int | None = None  # players stored per game; None means all N

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValidationError("N must be an integer >= 1")
        if int(self.games) != self.games or self.games < 1:
            raise ValidationError("games must be an integer >= 1")
        if self.tracked is not None and not 1 <= self.tracked <= self.N:
            raise ValidationError("tracked must lie in [1, N]")

    @property
    def k(self) -> int:
        return self.N if self.tracked is None else int(self.tracked)


@dataclass(frozen=True)
class NPlayerPaths:
    x: np.ndarray  # games x tracked x (steps+1)
    average: np.ndarray  # games x (steps+1), the full average S^N/N
    grid: TimeGrid
    N: int
    increments: bool = True
    contracts: np.ndarray | None = None  # games x tracked


def _check(model: MeanFieldModel):
    if model.beta2 != 0 or model.gamma != 0:
        raise UnsupportedModelError("the N-player model needs beta2 = 0 and gamma = 0")
    if model.n != 2:
        raise UnsupportedModelError("the N-player model needs quadratic cost (n = 2)")


def interaction_matrix(N: int, model: MeanFieldModel) -> np.ndarray:
    """``B^N = alpha I + (beta1/N) 1 1^T``."""
    if model.beta2 != 0 or model.gamma != 0:
        raise UnsupportedModelError("the N-player model needs beta2 = 0 and gamma = 0")
    return model.alpha * np.eye(N) + model.beta1 / N * np.ones((N, N))


def nplayer_policy(model: MeanFieldModel, grid: TimeGrid | None = None):
    """Diagonal sensitivity ``e^{kappa(T-t)}`` and the common effort ``z/c``."""
    _check(model)
    grid = grid if grid is not None else TimeGrid(model.T)
    k, T, c = model.kappa, model.T, model.c

    def z(t):
        return np.exp(k * (T - np.asarray(t, dtype=float)))

    return (DeterministicCurve.from_function(grid, z),
            DeterministicCurve.from_function(grid, lambda t: z(t) / c))


def _exact(model: MeanFieldModel, cfg: NPlayerConfig) -> NPlayerPaths:
    grid, N, k, M = cfg.grid, cfg.N, cfg.k, cfg.games
    S = grid.steps
    rest = N - k
    # columns: initial (k players + rest sum), then per step (k + rest sum + average)
    cols = (k + 1) + S * (k + 2)
    z = rng.normals(cfg.seed, "nplayer", M, cols)
    sv0 = math.sqrt(model.v0)
    psi = z[:, :k]
    psi_sum = psi.sum(axis=1) + math.sqrt(rest) * z[:, k]
    x0 = model.m0 + sv0 * psi
    m = np.empty((M, S + 1))
    e = np.empty((M, k, S + 1))
    m[:, 0] = model.m0 + sv0 * psi_sum / N
    e[:, :, 0] = x0 - m[:, :1]

    dt, kap, a = grid.dt, model.kappa, model.alpha
    src = step_integrals(grid, lambda s: np.exp(kap * (model.T - s)) / model.c, rate=kap)
    decay_m, decay_e = math.exp(kap * dt), math.exp(a * dt)
    sd_m = model.sigma / math.sqrt(N) * math.sqrt(expm1_ratio(2 * kap, dt))
    sd_e = model.sigma * math.sqrt(expm1_ratio(2 * a, dt))
    noise = z[:, k + 1:].reshape(M, S, k + 2)
    for j in range(S):
        u = noise[:, j, :k]
        u_rest = math.sqrt(rest) * noise[:, j, k]
        ubar = (u.sum(axis=1) + u_rest) / N
        e[:, :, j + 1] = decay_e * e[:, :, j] + sd_e * (u - ubar[:, None])
        m[:, j + 1] = decay_m * m[:, j] + src[j] + sd_m * noise[:, j, k + 1]
    return NPlayerPaths(m[:, None, :] + e, m, grid, N)


def _euler(model: MeanFieldModel, cfg: NPlayerConfig) -> NPlayerPaths:
    if cfg.k != cfg.N:
        raise ValueError("Euler mode simulates every player; leave tracked unset")
    grid, N, M, S = cfg.grid, cfg.N, cfg.games, cfg.grid.steps
    z = rng.normals(cfg.seed, "nplayer", M, N * (S + 1)).reshape(M, S + 1, N)
    x = np.empty((M, N, S + 1))
    x[:, :, 0] = model.m0 + math.sqrt(model.v0) * z[:, 0]
    t, dt = grid.points, grid.dt
    sq = model.sigma * math.sqrt(dt)
    for j in range(S):
        xj = x[:, :, j]
        a_t = math.exp(model.kappa * (model.T - t[j])) / model.c
        drift = a_t + model.alpha * xj + model.beta1 * xj.mean(axis=1, keepdims=True)
        x[:, :, j + 1] = xj + drift * dt + sq * z[:, j + 1]
    return NPlayerPaths(x, x.mean(axis=1), grid, N)


def simulate_nplayer(model: MeanFieldModel, config: NPlayerConfig, mode: str = "exact") -> NPlayerPaths:
    """Simulate ``config.games`` independent N-player games under the optimal efforts.

    ``mode="exact"`` uses the two-level OU transitions; ``mode="euler"``
    runs the joint N-dimensional Euler scheme as a cross-check.
    """
    _check(model)
    if mode == "exact":
        return _exact(model, config)
    if mode == "euler":
        return _euler(model, config)
    raise ValueError("mode must be 'exact' or 'euler'")


def nplayer_contract(paths: NPlayerPaths, model: MeanFieldModel) -> np.ndarray:
    """Contract of every stored player, ``games x tracked``.

    ``R0 - int e^{2k(T-t)}/(2c) dt - int e^{k(T-t)} (B^N X)^i dt + int e^{k(T-t)} dX^i``
    with trapezoidal weights in both time and stochastic integrals.
    """
    _check(model)
    if not paths.increments:
        raise MissingIncrementsError("paths were stored without their increments")
    t = paths.grid.points
    if model.T == 0:
        return np.full(paths.x.shape[:2], model.R0)
    z = np.exp(model.kappa * (model.T - t))
    fixed = float(np.sum(step_integrals(paths.grid, lambda s: np.exp(2 * model.kappa * (model.T - s)) / (2 * model.c))))
    bx = model.alpha * paths.x + model.beta1 * paths.average[:, None, :]
    drift = np.trapezoid(bx * z, t, axis=-1)
    stoch = np.diff(paths.x, axis=-1) @ (0.5 * (z[:-1] + z[1:]))
    return model.R0 - fixed - drift + stoch


def nplayer_value(t, x, y, model: MeanFieldModel) -> float:
    """Principal's value ``e^{k tau} mean(x) + (e^{2k tau} - 1)/(4 k c) - mean(y)``."""
    _check(model)
    tau = model.T - float(t)
    k = model.kappa
    return float(math.exp(k * tau) * np.mean(x) + expm1_ratio(2 * k, tau) / (2 * model.c) - np.mean(y))


def nplayer_pde_residual(model: MeanFieldModel, N: int, t_points, xbar_points, h: float = 1e-4) -> float:
    """Max residual of the reduced N-player PDE for the value's x-part, by central differences.

    ``-f_t - B^N x . grad f - sigma^2/2 tr(hess f) - sup_z {z/c . grad f - |z|^2/(2cN)} = 0``;
    the sup is attained at ``z = N grad f`` with value ``N |grad f|^2 / (2c)``.
    """
    _check(model)
    B = interaction_matrix(N, model)
    zero = np.zeros(N)

    def f(t, x):
        return nplayer_value(t, x, zero, model)

    worst = 0.0
    for t in t_points:
        for xb in xbar_points:
            x = np.full(N, float(xb))
            # the closed form extends smoothly past [0, T], so central differences apply at the ends
            ft = (f(t + h, x) - f(t - h, x)) / (2 * h)
            grad = np.empty(N)
            lap = 0.0
            f0 = f(t, x)
            for i in range(N):
                ei = np.zeros(N)
                ei[i] = h
                fp, fm = f(t, x + ei), f(t, x - ei)
                grad[i] = (fp - fm) / (2 * h)
                lap += (fp - 2 * f0 + fm) / h ** 2
            sup = N * float(grad @ grad) / (2 * model.c)
            res = -ft - float((B @ x) @ grad) - 0.5 * model.sigma ** 2 * lap - sup
            worst = max(worst, abs(res))
    return worst


def w1(a: np.ndarray, b: np.ndarray) -> float:
    """Wasserstein-1 distance between two empirical measures on the line."""
    return float(stats.wasserstein_distance(a, b))


def mean_field_law(model: MeanFieldModel, quantity: str = "contract"):
    """Mean-field law of the contract or of the terminal output."""
    if quantity == "contract":
        return contract_spec(model).law
    if quantity == "state":
        from .model import GaussianLaw
        return GaussianLaw(float(closed_form_mean(model, model.T)), float(state_variance(model, model.T)))
    raise ValueError("quantity must be 'contract' or 'state'")


def _reference(law, seed: int, samples: int, offset: int) -> np.ndarray:
    return law.mean + law.std * rng.normals(seed, "reference", samples, 1, start=offset)[:, 0]


@dataclass(frozen=True)
class ConvergenceRow:
    N: int
    samples: int
    w1: float
    w1_noise_floor: float

    def to_dict(self) -> dict:
        return {"N": self.N, "samples": self.samples, "w1": self.w1, "w1_noise_floor": self.w1_noise_floor}


def convergence_experiment(model: MeanFieldModel, Ns, games: int, seed: int = 42, steps: int = 200,
                           quantity: str = "contract"):
    """W1 distance between player 1's pooled samples and the mean-field law, per N.

    Each N uses ``games`` games (one sample of player 1 per game) and is
    compared with an equal-size sample drawn from the mean-field Gaussian
    law; the noise floor is W1 between two independent such samples.
    """
    _check(model)
    law = mean_field_law(model, quantity)
    grid = TimeGrid(model.T, steps)
    ref = _reference(law, seed, games, 0)
    floor = w1(ref, _reference(law, seed, games, games))
    rows = []
    for N in Ns:
        cfg = NPlayerConfig(int(N), games, seed, grid, tracked=1)
        paths = simulate_nplayer(model, cfg)
        if quantity == "contract":
            sample = nplayer_contract(paths, model)[:, 0]
        else:
            sample = paths.x[:, 0, -1]
        rows.append(ConvergenceRow(int(N), games, w1(sample, ref), floor))
    return rows


def trend_verdict(rows, slope_range=SLOPE_RANGE) -> dict:
    """Strict decrease of W1 in N and the log-log least-squares slope."""
    Ns = np.array([r.N for r in rows], dtype=float)
    ws = np.array([r.w1 for r in rows])
    decreasing = bool(np.all(np.diff(ws) < 0))
    slope = float(np.polyfit(np.log(Ns), np.log(ws), 1)[0]) if len(rows) > 1 else float("nan")
    in_range = bool(slope_range[0] <= slope <= slope_range[1])
    return {"strictly_decreasing": decreasing, "slope": slope, "slope_in_range": in_range,
            "passed": decreasing and in_range}


def effort_match(model: MeanFieldModel, grid: TimeGrid | None = None) -> bool:
    """Whether the N-player effort equals the mean-field effort on the grid, exactly."""
    grid = grid if grid is not None else TimeGrid(model.T)
    _, a = nplayer_policy(model, grid)
    return bool(np.array_equal(a.values, a_star_function(model)(grid.points)))
