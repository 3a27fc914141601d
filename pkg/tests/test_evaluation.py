import math

import numpy as np
import pytest

from ouremote.channel import NoiseModel, ServiceModel
from ouremote.errors import DomainError
from ouremote.evaluation import (
    long_run_mse,
    mse_upper_bound,
    noise_term_lemma1,
    path_discount_integral,
    service_laplace,
    simulate_long_run,
)
from ouremote.policy import OptimalThreshold, Periodic, ZeroWait
from ouremote.process import OuParams
from ouremote.solver import PolicySolution, simulate_cycles
from ouremote.stats import combined_se

ONE = ServiceModel.constant(1.0)
STABLE = OuParams(0.5)
WIENER = OuParams(0.0)
NOISE = NoiseModel(0.1, 0.1)


def _solution(beta, v):
    return PolicySolution(beta=beta, v=v, n_cycles=0, residual=0.0, ci_halfwidth=0.0)


def test_long_run_matches_cycle_ratio_wiener_zero_wait():
    lr = simulate_long_run(ZeroWait(), WIENER, ONE, horizon=20000, seed=1, workers=4)
    cy = simulate_cycles(ZeroWait(), WIENER, ONE, 20000, seed=1).mse()
    assert lr.mse_clean.value == pytest.approx(cy.value, rel=0.02)
    assert lr.n_cycles >= 1000


def test_noise_gap_wiener():
    lr = simulate_long_run(ZeroWait(), WIENER, ONE, NOISE, horizon=20000, seed=2, workers=4)
    gap = lr.noise_gap
    assert abs(gap.value - 0.2) < 2 * gap.se


def test_long_run_noiseless_equals_clean():
    lr = simulate_long_run(Periodic(1.5), STABLE, ONE, horizon=2000, seed=3)
    assert lr.mse_noisy.value == lr.mse_clean.value
    assert lr.noise_gap.value == 0.0
    assert long_run_mse(Periodic(1.5), STABLE, ONE, horizon=2000, seed=3).value == lr.mse_clean.value


def test_huge_threshold_approaches_stationary_variance():
    lr = simulate_long_run(OptimalThreshold(50.0), STABLE, ONE, horizon=8000, seed=4)
    m = lr.mse_clean
    assert m.value < 1.0
    assert m.value > 0.9


def test_long_run_worker_independent():
    pol = OptimalThreshold(1.0)
    a = simulate_long_run(pol, STABLE, ONE, NOISE, horizon=1000, seed=5, n_traj=8)
    b = simulate_long_run(pol, STABLE, ONE, NOISE, horizon=1000, seed=5, n_traj=8, workers=4)
    assert a.mse_noisy.value == b.mse_noisy.value and a.mse_clean.value == b.mse_clean.value


def test_long_run_needs_two_trajectories():
    with pytest.raises(DomainError):
        simulate_long_run(ZeroWait(), STABLE, ONE, n_traj=1)


def test_lemma_small_threshold_limit():
    lap = math.exp(-1.0)
    expect = lap * (1 - lap)  # (1/2theta) E[e^{-2theta Y}](1 - E[e^{-2theta Y'}])
    assert noise_term_lemma1(0.0, STABLE, ONE, n=1000).value == pytest.approx(expect, rel=1e-12)
    assert noise_term_lemma1(1e-6, STABLE, ONE, n=1000).value == pytest.approx(expect, rel=1e-9)


def test_lemma_large_threshold_limit():
    assert noise_term_lemma1(100.0, STABLE, ONE, n=1000).value == pytest.approx(math.exp(-1.0))
    v = noise_term_lemma1(10.0, STABLE, ONE, n=10**5).value
    assert v == pytest.approx(math.exp(-1.0), rel=1e-6)


def test_lemma_rejects_non_stable():
    with pytest.raises(DomainError):
        noise_term_lemma1(1.0, WIENER, ONE)
    with pytest.raises(DomainError):
        noise_term_lemma1(1.0, OuParams(-0.2), ONE)


def test_lemma_matches_path_simulation():
    v = 1.04
    lem = noise_term_lemma1(v, STABLE, ONE, n=10**6, seed=6)
    path = path_discount_integral(v, STABLE, ONE, n=10**5, seed=6, workers=4)
    assert abs(lem.value - path.value) < 3 * combined_se(lem.se, path.se)


def test_service_laplace():
    assert service_laplace(ONE, 1.0) == pytest.approx(math.exp(-1.0))
    y = ServiceModel.lognormal(0.5)
    assert service_laplace(y, 1.0, n=10**6) == pytest.approx(
        service_laplace(y, 1.0, n=10**6, seed=1), rel=2e-3)


def test_discount_continuity_near_wiener():
    c = simulate_cycles(OptimalThreshold(1.0), OuParams(1e-4), ONE, 20000, seed=7)
    assert c.discount_integral.mean() == pytest.approx(c.duration.mean(), rel=0.01)


def test_upper_bound_without_noise_is_exact():
    rep = mse_upper_bound(_solution(0.747, 1.04), STABLE, ONE, NoiseModel(), n=2000, seed=8,
                          lemma_draws=1000, horizon=500.0)
    assert rep.mse_upper_formula == rep.mse_no_noise
    assert rep.noise_term == 0.0


def test_upper_bound_ordering_stable():
    rep = mse_upper_bound(_solution(0.747, 1.04), STABLE, ONE, NOISE, n=20000, seed=9,
                          horizon=20000.0, workers=4)
    assert 0 < rep.noise_term <= 0.2
    assert rep.mse_upper_formula - rep.mse_no_noise == pytest.approx(rep.noise_term)
    assert rep.mse_lower == pytest.approx(1 - math.exp(-1))
    assert rep.mse_lower <= rep.mse_no_noise + 2 * rep.se_no_noise
    assert rep.mse_no_noise <= rep.mse_upper_formula
    assert rep.mse_upper_formula <= rep.mse_no_noise + 0.2
    # the paired simulated gap agrees with the formula term
    assert abs(rep.noise_gap_sim - rep.noise_term) < 3 * combined_se(rep.se_noise_gap_sim,
                                                                     rep.se_noise_term)
    d = rep.to_dict()
    assert set(d) >= {"mse_lower", "mse_no_noise", "mse_with_noise_sim", "mse_upper_formula"}


def test_upper_bound_matches_noisy_simulation_lognormal():
    svc = ServiceModel.lognormal(1.0)
    rep = mse_upper_bound(_solution(0.675, 1.145), STABLE, svc, NOISE, n=40000, seed=10,
                          workers=4)
    se = combined_se(rep.se_upper_formula, rep.se_with_noise_sim)
    assert abs(rep.mse_upper_formula - rep.mse_with_noise_sim) < 3 * se


def test_upper_bound_wiener_uses_path_discount():
    rep = mse_upper_bound(_solution(4 / 3, 1.0), WIENER, ONE, NOISE, n=5000, seed=11,
                          horizon=2000.0)
    # at theta = 0 the discount is 1, so the whole noise variance is added
    assert rep.noise_term == pytest.approx(0.2, rel=1e-12)
