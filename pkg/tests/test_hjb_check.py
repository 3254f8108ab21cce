import numpy as np
import pytest

from mfcontract import hjb_check
from mfcontract.model import MeanFieldModel

SMALL = dict(t_points=np.linspace(0, 1, 4), m1_points=np.array([-1.0, 0.5]), V1_points=np.array([0.0, 1.0]))


@pytest.mark.parametrize("gamma,tol", [(0.0, 1e-5), (0.2, 1e-4)])
def test_residual_small(gamma, tol):
    m = MeanFieldModel(alpha=0.25, beta1=0.1, beta2=0.5, gamma=gamma)
    rf = hjb_check.hjb_residual(m, **SMALL)
    assert rf.max_residual <= tol
    assert rf.max_argsup_deviation <= 1e-6


def test_perturbation_detected(baseline):
    rf = hjb_check.hjb_residual(baseline, functional=hjb_check.value_functional(baseline, 0.01), **SMALL)
    assert rf.max_residual > 1e-3


def test_lifted_derivatives_against_discrete_oracle(baseline):
    f = hjb_check.value_functional(baseline)
    gen = np.random.default_rng(0)
    samples = np.column_stack([1.0 + 0.8 * gen.standard_normal(10_000), np.zeros(10_000)])
    m1, V1 = samples[:, 0].mean(), samples[:, 0].var()
    d = hjb_check.lifted_derivatives(f, 0.3, m1, 0.0, V1)
    grad, hess = hjb_check.discrete_lift_oracle(f, 0.3, samples, 7)
    assert grad == pytest.approx(d.dRho(samples[7]), rel=1e-4, abs=1e-6)
    assert hess == pytest.approx(d.dxdRho(samples[7]), rel=1e-4, abs=1e-6)


def test_partial_uses_richardson():
    f = hjb_check.MomentFunctional(lambda t, m1, m2, V1: np.sin(t) * m1 ** 3)
    assert f.partial("m1", 0.7, 1.3, 0, 0) == pytest.approx(3 * np.sin(0.7) * 1.3 ** 2, rel=1e-10)


def test_feedback_gap_gamma_zero_nonpositive(baseline_g0):
    assert hjb_check.feedback_gap(baseline_g0) <= 1e-8
