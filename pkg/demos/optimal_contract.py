"""Optimal contract of the sensitivity-table baseline and a Monte Carlo check of its law.

    python demos/optimal_contract.py
"""
import numpy as np

from mfcontract import closed_form as cf
from mfcontract import mfg_sim
from mfcontract.model import MeanFieldModel

m = MeanFieldModel(alpha=0.25, beta1=0.1, beta2=0.5, gamma=0.2)
sim = mfg_sim.SimConfig.for_model(m, particles=50_000, steps=200, seed=42)
policy = cf.optimal_policy(m, sim.grid)
spec = cf.contract_spec(m, sim.grid)

print(f"kappa = {m.kappa:.2f}")
for t in (0.0, 0.5, 1.0):
    print(f"  t = {t:.1f}: z* = {float(policy.z_star(t)):.4f}, a* = {float(policy.a_star(t)):.4f}")
print(f"fixed salary delta = {spec.delta:.5f}")
print(f"contract law: mean {spec.law.mean:.5f}, variance {spec.law.variance:.5f}")

moments = cf.moment_curves(m, policy, sim.grid)
ens = mfg_sim.simulate_equilibrium(m, policy, moments, sim)
ens, xi = mfg_sim.simulate_continuation_utility(ens, m, policy, moments)
g = mfg_sim.gaussian_check(xi, spec.law)
print(f"Monte Carlo (M = {sim.particles}): mean {g['mean']:.5f} +- {g['mean_se']:.5f}, "
      f"variance {g['variance']:.5f} +- {g['variance_se']:.5f}")

est = mfg_sim.principal_objective(ens, xi, m)
v0 = float(cf.principal_value(0.0, m.m0, m.R0, m.v0, m))
print(f"Principal: Monte Carlo {est.value:.5f} +- {est.standard_error:.5f}, closed form {v0:.5f}")

# a constant effort shift lowers the agent's utility below the reservation level R0 = 0
for shift in (0.0, 0.2, -0.2):
    curve = lambda s, d=shift: np.maximum(policy.a_star(s) + d, 0.0)
    u = mfg_sim.agent_utility(m, curve, moments, spec, sim, policy)
    print(f"  effort shift {shift:+.1f}: agent utility {u.value:+.4f} +- {u.standard_error:.4f}")
