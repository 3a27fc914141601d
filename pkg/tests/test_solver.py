import math

import numpy as np
import pytest

from ouremote.channel import ServiceModel
from ouremote.errors import BracketFailure, DomainError, NonConvergence
from ouremote.policy import OptimalThreshold, Periodic, ZeroWait, threshold_v
from ouremote.process import OuParams, default_exit_dt, mse_lower_bound
from ouremote.solver import (
    CycleBatch,
    CycleRecord,
    _check_monotone,
    beta_residual,
    discount_integral,
    simulate_cycles,
    solve_beta,
)

ONE = ServiceModel.constant(1.0)
STABLE = OuParams(0.5)
WIENER = OuParams(0.0)


def test_zero_wait_wiener_cycles():
    c = simulate_cycles(ZeroWait(), WIENER, ONE, 20000, seed=1)
    assert np.all(c.duration == 1.0)
    # error over [1, 2] after the sample: E[int_1^2 s ds] = 1.5
    est = c.mse()
    assert abs(est.value - 1.5) < 4 * est.se


def test_threshold_cycles_exit_at_barrier():
    v = 1.0
    c = simulate_cycles(OptimalThreshold(v), STABLE, ONE, 5000, seed=2)
    eps = 5 * math.sqrt(default_exit_dt(v, STABLE))
    assert np.all(np.abs(c.exit_value) >= v - eps)
    assert np.all(c.duration > 0) and np.all(c.err_integral >= 0)
    assert np.all(c.discount_integral > 0)
    assert np.all(c.discount_integral <= c.duration * (1 + 1e-12))


def test_cycle_records():
    c = simulate_cycles(Periodic(2.0), STABLE, ServiceModel.exponential(1.0), 100, seed=3)
    assert len(c) == 100
    recs = list(c)
    assert isinstance(recs[0], CycleRecord)
    assert recs[5].duration == c.duration[5]
    # periodic waits until S_i + T unless the service already took longer
    assert np.allclose(c.wait, np.maximum(2.0 - c.y, 0.0))


def test_cycles_deterministic_and_worker_independent():
    pol = OptimalThreshold(0.8)
    a = simulate_cycles(pol, STABLE, ServiceModel.lognormal(1.0), 3000, seed=4, batch=512)
    b = simulate_cycles(pol, STABLE, ServiceModel.lognormal(1.0), 3000, seed=4, batch=512,
                        workers=4)
    for k in ("duration", "err_integral", "discount_integral"):
        assert np.array_equal(getattr(a, k), getattr(b, k))
    c = simulate_cycles(pol, STABLE, ServiceModel.lognormal(1.0), 3000, seed=5, batch=512)
    assert not np.array_equal(a.duration, c.duration)


def test_cycles_max_duration():
    with pytest.raises(NonConvergence):
        simulate_cycles(OptimalThreshold(20.0), STABLE, ONE, 10, seed=6, max_duration=5.0)
    with pytest.raises(DomainError):
        simulate_cycles(ZeroWait(), STABLE, ONE, 0, seed=6)


def test_discount_integral():
    assert discount_integral(1.0, 2.0, WIENER) == 2.0
    val = discount_integral(1.0, 2.0, STABLE)
    assert val == pytest.approx(math.exp(-1) * (1 - math.exp(-2)))
    assert discount_integral(1.0, 2.0, OuParams(1e-4)) == pytest.approx(2.0, rel=1e-3)


def test_beta_residual_identity():
    c = simulate_cycles(OptimalThreshold(1.0), STABLE, ONE, 2000, seed=7)
    beta = c.err_integral.mean() / c.duration.mean()
    assert beta_residual(beta, c).value == pytest.approx(0.0, abs=1e-12)
    assert beta_residual(beta, c).se > 0


def test_residual_at_lower_bound_is_nonnegative():
    mse_y = mse_lower_bound(ONE, STABLE)
    c = simulate_cycles(ZeroWait(), STABLE, ONE, 20000, seed=8)
    r = beta_residual(mse_y, c)
    assert r.value > -2 * r.se


def test_residual_near_stationary_variance_is_negative():
    mse_y = mse_lower_bound(ONE, STABLE)
    beta = 0.99
    v = threshold_v(beta, STABLE, mse_y)
    c = simulate_cycles(OptimalThreshold(v, beta), STABLE, ONE, 2000, seed=9)
    r = beta_residual(beta, c)
    assert r.value + 3 * r.se < 0


def test_check_monotone():
    assert _check_monotone([(1.0, 0.5, 0.01), (2.0, 0.1, 0.01), (3.0, -0.2, 0.01)]) <= 0
    assert _check_monotone([(1.0, 0.0, 0.01), (2.0, 0.5, 0.01)]) > 4


@pytest.fixture(scope="module")
def stable_solution():
    return solve_beta(STABLE, ONE, seed=11, workers=4)


def test_solve_stable(stable_solution):
    sol = stable_solution
    assert 1 - math.exp(-1) < sol.beta < 1.0
    assert sol.v == pytest.approx(threshold_v(sol.beta, STABLE, sol.mse_y), rel=1e-14)
    # the validation cycles reproduce beta (fixed-point identity)
    d = sol.diagnostics
    assert abs(d["validation_mse"] - sol.beta) < 3 * d["validation_se"]
    assert abs(sol.residual) < 3 * d["residual_se"]
    assert d["monotone_worst_z"] <= 4.0
    assert sol.to_dict()["n_cycles"] == 20000


def test_solve_stable_beats_baselines(stable_solution):
    sol = stable_solution
    zw = simulate_cycles(ZeroWait(), STABLE, ONE, 20000, seed=12).mse()
    assert sol.beta <= zw.value + 2 * math.hypot(zw.se, sol.ci_halfwidth / 1.96)


def test_solve_deterministic():
    kw = dict(seed=3, n_search=500, n_final=2000, tol_rel=1e-2)
    a = solve_beta(OuParams(0.0), ONE, workers=1, **kw)
    b = solve_beta(OuParams(0.0), ONE, workers=3, **kw)
    assert a.beta == b.beta and a.v == b.v
    assert a.v == pytest.approx(math.sqrt(3 * (a.beta - 1.0)), rel=1e-14)
    assert a.diagnostics["doublings"] >= 1


def test_solve_unstable_constant():
    p = OuParams(-0.2)
    mse_y = (math.exp(0.4) - 1) / 0.4
    sol = solve_beta(p, ONE, seed=5, n_search=1000, n_final=5000, tol_rel=5e-3)
    assert sol.mse_y == pytest.approx(mse_y, rel=1e-14)
    assert mse_y < sol.beta < math.inf
    assert abs(sol.diagnostics["validation_mse"] - sol.beta) < 3 * sol.diagnostics["validation_se"]


def test_bracket_failure_reports_endpoints():
    # an understated lower bound is fine, an overstated one must be rejected
    with pytest.raises(BracketFailure) as err:
        solve_beta(STABLE, ONE, seed=1, n_search=500, mse_y=0.95)
    assert err.value.lo == 0.95
    assert err.value.residual_lo < 0
