"""Agent and Principal Hamiltonians and their one-dimensional maximization."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import MeanFieldModel, RiskAversePenalties

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
MAX_DOUBLINGS = 60


class BracketError(RuntimeError):
    """The coercivity bracket could not be established."""


@dataclass(frozen=True)
class EffortMax:
    effort: float
    value: float


@dataclass(frozen=True)
class HMax:
    z: float
    value: float


def drift_b(x, mean_x, mean_effort, var_x, a, model: MeanFieldModel):
    return a + model.alpha * x + model.beta1 * mean_x + model.beta2 * mean_effort - model.gamma * var_x


def cost(a, model: MeanFieldModel):
    return model.c * np.abs(a) ** model.n / model.n


def effort_from_z(z, model: MeanFieldModel):
    """Maximizer ``(|z|/c)**(1/(n-1))`` of ``a -> z*a - cost(a)`` on ``a >= 0``."""
    return (np.abs(z) / model.c) ** (1.0 / (model.n - 1.0))


def _foc_effort(z: float, model: MeanFieldModel) -> float:
    # root of d/da [z a - c a^n / n] = z - c a^(n-1) on [0, inf)
    target = abs(z)
    if target == 0.0:
        return 0.0
    hi = 1.0
    while model.c * hi ** (model.n - 1.0) < target:
        hi *= 2.0
    return brentq(lambda a: model.c * a ** (model.n - 1.0) - target, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def optimal_effort(z: float, model: MeanFieldModel, x=0.0, mean_x=0.0, mean_effort=0.0, var_x=0.0,
                   check: bool = False) -> EffortMax:
    """Agent's best effort for sensitivity ``z`` and the maximized Hamiltonian.

    With ``check=True`` the closed form is compared against a root-find of
    the first-order condition and an ``AssertionError`` is raised on
    disagreement beyond 1e-10.
    """
    a = float(effort_from_z(z, model))
    if check:
        root = _foc_effort(z, model)
        if abs(root - a) > 1e-10 * max(1.0, abs(a)):
            raise AssertionError(f"first-order condition root {root!r} disagrees with closed form {a!r}")
    value = float(g_star(z, x, mean_x, mean_effort, var_x, model))
    return EffortMax(a, value)


def g_star(z, x, mean_x, mean_effort, var_x, model: MeanFieldModel):
    n, c = model.n, model.c
    state = model.alpha * x + model.beta1 * mean_x + model.beta2 * mean_effort - model.gamma * var_x
    return np.abs(z) ** (n / (n - 1.0)) / c ** (1.0 / (n - 1.0)) * (1.0 - 1.0 / n) + z * state


def principal_H(u, z, model: MeanFieldModel):
    n, c = model.n, model.c
    absz = np.abs(z)
    return ((1.0 + model.beta2) * (absz / c) ** (1.0 / (n - 1.0)) * np.exp(model.kappa * (model.T - u))
            - absz ** (n / (n - 1.0)) / (c ** (1.0 / (n - 1.0)) * n))


def risk_averse_h(u, z, model: MeanFieldModel, penalties: RiskAversePenalties):
    s2 = model.sigma ** 2
    lam = penalties.lambdaXi + penalties.lambdaXXi
    return (principal_H(u, z, model) - lam * s2 * np.abs(z) ** 2
            + 2.0 * penalties.lambdaXXi * s2 * z * np.exp(model.alpha * (model.T - u)))


def risk_averse_h_prime(u, z, model: MeanFieldModel, penalties: RiskAversePenalties):
    """Derivative of ``risk_averse_h`` in ``z`` for ``z > 0``."""
    n, c, s2 = model.n, model.c, model.sigma ** 2
    p = 1.0 / (n - 1.0)
    return ((1.0 + model.beta2) * p * z ** (p - 1.0) / c ** p * np.exp(model.kappa * (model.T - u))
            - z ** p / (c ** p * (n - 1.0))
            - 2.0 * (penalties.lambdaXi + penalties.lambdaXXi) * s2 * z
            + 2.0 * penalties.lambdaXXi * s2 * np.exp(model.alpha * (model.T - u)))


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-12, max_iter: int = 500):
    """Maximize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    x1 = hi - INV_PHI * (hi - lo)
    x2 = lo + INV_PHI * (hi - lo)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - INV_PHI * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + INV_PHI * (hi - lo)
            f2 = f(x2)
        if not lo < x1 < x2 < hi:
            break  # interval below floating resolution
    # endpoints are candidates too (boundary maxima)
    best = max(((x1, f1), (x2, f2), (lo, f(lo)), (hi, f(hi))), key=lambda p: p[1])
    return best


def coercivity_bracket(f, start: float = 1.0) -> float:
    """Double ``zmax`` from ``start`` until ``f`` decreases at the right end."""
    zmax = start
    for _ in range(MAX_DOUBLINGS):
        if f(zmax) < f(zmax / 2.0):
            return zmax
        zmax *= 2.0
    raise BracketError("h is not decreasing at any tested right end; parameters look non-coercive")


def maximize_h(u: float, model: MeanFieldModel, penalties: RiskAversePenalties | None = None) -> HMax:
    """Maximize ``risk_averse_h(u, .)`` over ``z >= 0``.

    Golden-section search on a doubling bracket, followed by one Newton
    step on ``h'`` for quadratic cost and a bracketed root of ``h'``
    otherwise (golden section alone only resolves the argmax to ~1e-8).
    """
    penalties = penalties or RiskAversePenalties()

    def h(z):
        return float(risk_averse_h(u, z, model, penalties))

    zmax = coercivity_bracket(h)
    z, val = golden_section_max(h, 0.0, zmax)
    if z > 0:
        if model.n == 2.0:
            s2 = model.sigma ** 2
            second = -1.0 / model.c - 2.0 * (penalties.lambdaXi + penalties.lambdaXXi) * s2
            z_new = z - float(risk_averse_h_prime(u, z, model, penalties)) / second
        else:
            z_new = _refine_stationary(u, z, zmax, model, penalties)
        if z_new > 0 and h(z_new) >= val - 1e-14 * max(1.0, abs(val)):
            z = z_new
            val = h(z)
    return HMax(z, val)


def _refine_stationary(u, z, zmax, model, penalties):
    def dh(x):
        return float(risk_averse_h_prime(u, x, model, penalties))

    width = max(1e-9, 1e-7 * z)
    lo, hi = max(z - width, z * 0.5), min(z + width, zmax)
    try:
        if dh(lo) > 0 > dh(hi):
            return brentq(dh, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    except (ValueError, FloatingPointError):
        pass
    return z
