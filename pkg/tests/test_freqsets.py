"""Measure-estimation tests against exact strip/triangle geometry, union
majorants, scaling in the zone width, and the summability check."""
import math

import numpy as np
import pytest

from resonorm.errors import ConfigError
from resonorm.freqsets import (
    SummabilityResult,
    ZoneSpec,
    excluded_set_measure,
    summability_check,
    union_majorant,
    zone_measure_mc,
)
from resonorm.gevrey import ApproximationFunction, power_log_delta


def test_strip_measure_exact():
    # l = 2, k = (1,0), beta = 0.1: P(|w1| <= 0.1) = 0.1 on the unit square
    spec = ZoneSpec(k=(1, 0), beta=0.1)
    est, ci = zone_measure_mc(spec, l=2, samples=200_000, seed=11)
    assert abs(est - 0.1) <= 3 * ci


def test_triangle_measure_exact():
    # k = (1,1), beta = 0.1: area {w1 + w2 <= 0.1} = 0.005
    spec = ZoneSpec(k=(1, 1), beta=0.1)
    est, ci = zone_measure_mc(spec, l=2, samples=400_000, seed=13)
    assert abs(est - 0.005) <= 3 * ci


def test_zero_width_zone():
    spec = ZoneSpec(k=(1, 0), beta=0.0)
    est, ci = zone_measure_mc(spec, l=2, samples=20_000, seed=17)
    assert est == 0.0


def test_seed_determinism():
    spec = ZoneSpec(k=(2, -1), beta=0.05)
    a = zone_measure_mc(spec, l=2, samples=50_000, seed=23)
    b = zone_measure_mc(spec, l=2, samples=50_000, seed=23)
    assert a == b


def test_matrix_conditions_shrink_zone():
    delta = power_log_delta(a=2.0, alpha=2.0)
    M = np.diag([1.0, 1.0])
    plain = ZoneSpec(k=(1, 0), beta=0.3)
    fancy = ZoneSpec(k=(1, 0), beta=0.3, M=M, gamma=0.05, delta=delta)
    e1, _ = zone_measure_mc(plain, l=2, samples=100_000, seed=29)
    e2, _ = zone_measure_mc(fancy, l=2, samples=100_000, seed=29)
    assert e2 <= e1


def test_excluded_set_zero_gamma():
    delta = power_log_delta(a=3.0, alpha=2.0)
    est, ci, maj = excluded_set_measure(0.0, delta, Kmax=4, l=2, d=2,
                                        samples=20_000, seed=3)
    assert est == 0.0 and maj == 0.0


def test_excluded_set_majorant_and_convergent_sum():
    # Delta(t) = (1+t)^3, d = 2: partial sums of sum m/(1+m)^3 stay < 1.7
    delta = power_log_delta(a=3.0, alpha=2.0)
    s = sum(m / (1.0 + m) ** 3 for m in range(1, 200_000))
    assert s < 1.7
    gamma1 = 2e-3
    est, ci, maj = excluded_set_measure(gamma1, delta, Kmax=6, l=2, d=2,
                                        samples=200_000, seed=5)
    assert est <= maj + 3 * ci
    assert maj < 1.0


def test_excluded_set_linear_in_gamma1():
    delta = power_log_delta(a=3.0, alpha=2.0)
    gamma1 = 2e-3
    kw = dict(delta=delta, Kmax=6, l=2, d=2, samples=400_000, seed=7)
    e1, ci1, _ = excluded_set_measure(gamma1, **kw)
    e2, ci2, _ = excluded_set_measure(2 * gamma1, **kw)
    assert 1.6 <= e2 / e1 <= 2.4


def test_excluded_set_monotone():
    delta = power_log_delta(a=3.0, alpha=2.0)
    kw = dict(delta=delta, l=2, d=2, samples=100_000, seed=9)
    e_small, _, _ = excluded_set_measure(1e-3, Kmax=4, **kw)
    e_big, _, _ = excluded_set_measure(4e-3, Kmax=4, **kw)
    e_more_k, _, _ = excluded_set_measure(1e-3, Kmax=8, **kw)
    assert e_small <= e_big
    assert e_small <= e_more_k


# ---------------------------------------------------------------------------
# summability
# ---------------------------------------------------------------------------

def test_summability_known_series():
    # d = 1, Delta = (1+m)^2: sum 1/(1+m)^2 = pi^2/6 - 1
    delta = power_log_delta(a=2.0, alpha=2.0)
    res = summability_check(delta, d=1, tol=1e-9)
    assert res.converges
    want = math.pi ** 2 / 6.0 - 1.0
    assert abs(res.estimate - want) <= 1e-6


def test_summability_subexponential():
    delta = ApproximationFunction(alpha=2.0, fn=lambda t: math.exp(math.sqrt(t)),
                                  log_fn=lambda t: math.sqrt(t))
    res = summability_check(delta, d=2, tol=1e-12)
    assert res.converges
    assert res.tail_bound < 1e-6 * res.partial


def test_summability_divergent():
    delta = power_log_delta(a=1.0, alpha=2.0)      # m/(1+m) does not decay
    res = summability_check(delta, d=2, tol=1e-9, m_cap=20_000)
    assert not res.converges


def test_majorant_formula():
    delta = power_log_delta(a=3.0, alpha=2.0)
    maj = union_majorant(1e-3, delta, Kmax=3, d=1)
    want = sum(2 * 2.0 * (1e-3 / (1.0 + m) ** 3) / m for m in range(1, 4))
    assert maj == pytest.approx(want, rel=1e-12)
