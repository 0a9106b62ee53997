import math
import random
from fractions import Fraction

import numpy as np
import pytest

from elitelab.bitstring import BitString
from elitelab.lab import (
    TrialPlan,
    TrialRecord,
    estimate_las_vegas,
    estimate_monte_carlo,
    exact_binomial_ci,
    final_phase_length,
    jump_final_phase_reference,
    loop_fraction,
    markov_mc_bound,
    rls_onemax_expectation,
    run_trials,
    trial_seed,
)
from elitelab.model import ConfigError, RunOutcome
from elitelab.problems import OneMax

# independent oracle (numpy pmf times harmonic numbers, cross-checked against a
# linear solve of the absorbing chain); excludes the initial query
RLS_ONEMAX_64 = 259.2475982813327


def rec(i, q, success=True, looped=False):
    return TrialRecord(i, i, q, success, not success, looped)


def test_las_vegas_plain_mean():
    est = estimate_las_vegas([rec(0, 10), rec(1, 20), rec(2, 30)])
    assert est.mean == 20 and not est.is_lower_bound and est.censored_count == 0
    assert est.ci_low < 20 < est.ci_high


def test_las_vegas_censored_is_lower_bound():
    est = estimate_las_vegas([rec(0, 10), rec(1, 100, success=False)])
    assert est.mean == 55 and est.is_lower_bound and est.censored_count == 1


def test_las_vegas_credits_budget_to_looped_runs():
    est = estimate_las_vegas([rec(0, 10), rec(1, 3, success=False, looped=True)], budget=100)
    assert est.mean == 55


def test_empty_inputs_rejected():
    with pytest.raises(ValueError):
        estimate_las_vegas([])
    with pytest.raises(ValueError):
        estimate_monte_carlo([], 0.1)


def test_monte_carlo_quantile():
    recs = [rec(i, 10 * (i + 1)) for i in range(10)]
    assert estimate_monte_carlo(recs, 0.1).T == 90
    assert estimate_monte_carlo(recs, 0.5).T == 50
    assert estimate_monte_carlo(recs, 0.95).T == 10
    est = estimate_monte_carlo(recs, 0.1)
    assert est.achieved and est.achieved_success_fraction == 0.9


def test_monte_carlo_not_achieved():
    recs = [rec(0, 5), rec(1, 100, success=False)]
    est = estimate_monte_carlo(recs, 0.4, budget=100)
    assert not est.achieved and est.not_achieved_flag and est.T == 100
    assert est.achieved_success_fraction == 0.5


def test_monte_carlo_monotone_in_p():
    rng = random.Random(0)
    recs = [rec(i, rng.randint(1, 10**4)) for i in range(500)]
    ts = [estimate_monte_carlo(recs, p).T for p in np.linspace(0.01, 0.99, 60)]
    assert all(a >= b for a, b in zip(ts, ts[1:]))


def test_markov_bound():
    assert markov_mc_bound(100, 0.5, 0.25) == 300
    assert markov_mc_bound(100, 0.5, 0) == 200
    assert markov_mc_bound(0, 0.3, 0.1) == 0
    with pytest.raises(ValueError):
        markov_mc_bound(10, 0.2, 0.2)


def test_markov_bound_dominates_quantile_on_two_mode_runtimes():
    # with probability pE the run hits a slow mode; conditioned on the fast
    # mode the mean is T, and the (1-p)-quantile stays below the bound
    gen = np.random.default_rng(4)
    pE, p = 0.1, 0.3
    slow = gen.random(20_000) < pE
    fast_times = gen.exponential(50, size=20_000)
    runtimes = np.where(slow, 10**6, fast_times).astype(int) + 1
    recs = [rec(i, int(q)) for i, q in enumerate(runtimes)]
    T = float(runtimes[~slow].mean())
    assert estimate_monte_carlo(recs, p).T <= markov_mc_bound(T, p, pE)


def test_final_phase_reference():
    assert jump_final_phase_reference(16, 2)[0] == 560
    assert jump_final_phase_reference(6, 1, 0.1) == (15, 0.1)
    assert jump_final_phase_reference(6, 1, 2)[1] == 1
    with pytest.raises(ValueError):
        jump_final_phase_reference(6, 0)


def test_exact_ci():
    lo, hi = exact_binomial_ci(0, 10)
    assert lo == 0 and 0.3 < hi < 0.31
    lo, hi = exact_binomial_ci(5, 10)
    assert lo < 0.5 < hi


def test_rls_expectation_oracle():
    assert rls_onemax_expectation(1) == Fraction(1, 2)
    assert rls_onemax_expectation(4) == Fraction(269, 48)
    assert float(rls_onemax_expectation(64)) == pytest.approx(RLS_ONEMAX_64, rel=1e-12)


def test_seed_mixing_is_stable_and_distinct():
    assert trial_seed(7, 0) == trial_seed(7, 0)
    seeds = {trial_seed(7, i) for i in range(1000)}
    assert len(seeds) == 1000
    assert all(0 <= s < 2**64 for s in seeds)
    assert trial_seed(8, 0) != trial_seed(7, 0)


def test_run_trials_deterministic_and_job_independent():
    plan = TrialPlan("rls", "doubleonemax", 12, budget=5000, master_seed=42)
    a = run_trials(plan, 40)
    b = run_trials(plan, 40)
    c = run_trials(plan, 40, jobs=3)
    assert a == b == c
    assert [r.trial_index for r in c] == list(range(40))


def test_trial_is_reproducible_in_isolation():
    plan = TrialPlan("opo-ea", "jump", 10, budget=10**4, master_seed=1, k=1)
    full = run_trials(plan, 10)
    from elitelab.lab import _run_chunk

    assert _run_chunk(plan, [7]) == [full[7]]


def test_budget_one_censored():
    plan = TrialPlan("rls", "onemax", 8, budget=1, instance=OneMax(BitString.ones(8)))
    recs = run_trials(plan, 20)
    assert all(r.censored and r.queries == 1 for r in recs if not r.success)
    assert any(r.censored for r in recs)


def test_invalid_plans():
    with pytest.raises(ConfigError):
        run_trials(TrialPlan("rls", "hiddenpath", 30, budget=10), 1)
    with pytest.raises(ConfigError):
        run_trials(TrialPlan("rls", "onemax", 8, budget=10), 0)
    with pytest.raises(ConfigError):
        run_trials(TrialPlan("jump-mixed", "jump", 16, budget=10, k=2, fitness_view="comparison"), 1)
    with pytest.raises(ConfigError):
        run_trials(TrialPlan("rls", "onemax", 8, budget=0), 1)


def test_loop_fraction():
    assert loop_fraction([rec(0, 3, False, True), rec(1, 5)]) == 0.5


def test_final_phase_length():
    out = RunOutcome(50, 50, True, False, 100, improvements=((1, 3), (10, 13), (50, 16)))
    assert final_phase_length(out, 13) == 40
    jumped = RunOutcome(50, 50, True, False, 100, improvements=((1, 3), (50, 16)))
    assert final_phase_length(jumped, 13) is None


def test_record_invariant():
    with pytest.raises(ValueError):
        TrialRecord(0, 0, 1, True, True, False)
    assert math.isclose(estimate_las_vegas([rec(0, 4)]).ci_low, 4)
