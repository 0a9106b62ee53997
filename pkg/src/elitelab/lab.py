"""Batch trials and runtime estimators (Las Vegas mean, Monte Carlo quantile)."""

from __future__ import annotations

import math
import os
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import stats

from .algorithms import make_policy
from .model import ConfigError, RunOutcome, run_game
from .problems import Problem, sample_instance, validate_family

Z95 = 1.959963984540054


@dataclass(frozen=True)
class TrialRecord:
    trial_index: int
    seed: int
    queries: int
    success: bool
    censored: bool
    looped: bool
    outcome: RunOutcome | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.censored and self.success:
            raise ValueError("a censored trial cannot be a success")


@dataclass(frozen=True)
class LasVegasEstimate:
    mean: float
    ci_low: float
    ci_high: float
    censored_count: int
    is_lower_bound: bool


@dataclass(frozen=True)
class MonteCarloEstimate:
    p: float
    T: int
    achieved_success_fraction: float
    achieved: bool

    @property
    def not_achieved_flag(self) -> bool:
        return not self.achieved


def trial_seed(master_seed: int, trial_index: int) -> int:
    """Unsigned 64-bit seed for one trial, mixed from the master seed."""
    ss = np.random.SeedSequence([int(master_seed) & (2**64 - 1), int(trial_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class TrialPlan:
    """Everything needed to replay one batch of trials."""

    algorithm: str
    family: str
    n: int
    budget: int
    master_seed: int = 0
    k: int | None = None
    fitness_view: str | None = None
    tie_policy: str = "prefer_offspring"
    instance: Problem | None = None
    keep_outcomes: bool = False
    accelerate: bool = True

    def validate(self):
        """Build policy and mode, raising :class:`ConfigError` on any mismatch."""
        if self.budget < 1:
            raise ConfigError(f"budget must be positive, got {self.budget}")
        try:
            validate_family(self.family, self.n, {"k": self.k})
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.instance is not None and (self.instance.family, self.instance.n) != (self.family, self.n):
            raise ConfigError("fixed instance does not match the requested family and n")
        policy = make_policy(self.algorithm, self.k)
        mode = policy.default_mode(self.fitness_view, self.tie_policy)
        policy.check_mode(mode)
        probe = self.instance or sample_instance(self.family, self.n, {"k": self.k}, random.Random(0))
        policy.check_instance(probe)
        return policy, mode


def _run_chunk(plan: TrialPlan, indices: Sequence[int]) -> list[TrialRecord]:
    policy, mode = plan.validate()
    out = []
    for i in indices:
        seed = trial_seed(plan.master_seed, i)
        rng = random.Random(seed)
        inst = plan.instance or sample_instance(plan.family, plan.n, {"k": plan.k}, rng)
        res = run_game(policy, inst, mode, plan.budget, rng, accelerate=plan.accelerate)
        out.append(TrialRecord(
            trial_index=i,
            seed=seed,
            queries=res.queries_to_optimum if res.success else res.total_queries,
            success=res.success,
            censored=not res.success,
            looped=res.looped,
            outcome=res if plan.keep_outcomes else None,
        ))
    return out


def run_trials(plan: TrialPlan, trials: int, jobs: int = 1) -> list[TrialRecord]:
    """Run ``trials`` independent trials; the result does not depend on ``jobs``.

    Each trial gets a fresh instance drawn from the family (unless the plan
    fixes one) using its own derived seed, so trial ``i`` is reproducible in
    isolation.
    """
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    plan.validate()
    jobs = max(1, min(jobs or os.cpu_count() or 1, trials))
    if jobs == 1:
        return _run_chunk(plan, range(trials))
    chunks = [range(s, trials, jobs) for s in range(jobs)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_run_chunk, [plan] * jobs, chunks))
    return sorted((r for part in parts for r in part), key=lambda r: r.trial_index)


def estimate_las_vegas(records: Sequence[TrialRecord], budget: int | None = None) -> LasVegasEstimate:
    """Mean runtime; censored trials make the mean a lower bound.

    Censored trials contribute their recorded queries, or ``budget`` when
    given (a looped run stops before its budget is spent).
    """
    if not records:
        raise ValueError("no records to estimate from")
    q = np.array([budget if (r.censored and budget is not None) else r.queries for r in records], dtype=float)
    mean = float(q.mean())
    half = Z95 * float(q.std(ddof=1)) / math.sqrt(len(q)) if len(q) > 1 else 0.0
    censored = sum(r.censored for r in records)
    return LasVegasEstimate(mean, mean - half, mean + half, censored, censored > 0)


def estimate_monte_carlo(records: Sequence[TrialRecord], p: float, budget: int | None = None) -> MonteCarloEstimate:
    """Smallest T with at least a (1-p) fraction of trials successful within T queries."""
    if not records:
        raise ValueError("no records to estimate from")
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    total = len(records)
    budget = budget if budget is not None else max(r.queries for r in records)
    # exact arithmetic so that e.g. p=0.1 over 10 trials needs exactly 9
    need = math.ceil((1 - Fraction(p).limit_denominator(10**9)) * total)
    hits = sorted(r.queries for r in records if r.success and r.queries <= budget)
    if len(hits) < need:
        return MonteCarloEstimate(p, budget, len(hits) / total, False)
    T = hits[need - 1]
    return MonteCarloEstimate(p, T, sum(h <= T for h in hits) / total, True)


def markov_mc_bound(T: float, p: float, p_event: float) -> float:
    """Las Vegas-to-Monte Carlo conversion: ``(1 - p_event) * T / (p - p_event)``."""
    if T < 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    if not 0 <= p_event < p < 1:
        raise ValueError(f"need 0 <= p_event < p < 1, got p={p}, p_event={p_event}")
    return (1 - p_event) * T / (p - p_event)


def jump_final_phase_reference(n: int, d: int, alpha: float = 0.0) -> tuple[int, float]:
    """Reference values for the last jump: (C(n, d+1), min(alpha, 1))."""
    if not 0 < d <= n / 2:
        raise ValueError(f"need 0 < d <= n/2, got d={d}, n={n}")
    if alpha < 0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    return math.comb(n, d + 1), min(alpha, 1.0)


def loop_fraction(records: Sequence[TrialRecord]) -> float:
    if not records:
        raise ValueError("no records")
    return sum(r.looped for r in records) / len(records)


def success_fraction(records: Sequence[TrialRecord]) -> float:
    if not records:
        raise ValueError("no records")
    return sum(r.success for r in records) / len(records)


def exact_binomial_ci(successes: int, trials: int, level: float = 0.95) -> tuple[float, float]:
    """Clopper-Pearson interval for a success fraction."""
    ci = stats.binomtest(successes, trials).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def final_phase_length(outcome: RunOutcome, threshold: int) -> int | None:
    """Queries from the first population fitness >= ``threshold`` to the optimum.

    None if the run failed or never held a non-optimal point at the threshold.
    """
    if not outcome.success:
        return None
    for q, best in outcome.improvements:
        if best >= threshold:
            if q >= outcome.queries_to_optimum:
                return None
            return outcome.queries_to_optimum - q
    return None


def rls_onemax_expectation(n: int) -> Fraction:
    """Exact mean RLS runtime on OneMax from a uniform start, excluding the initial query.

    With m wrong bits the wait for the next improvement is geometric with
    mean n/m, so the total is ``n * H_m`` averaged over m ~ Bin(n, 1/2).
    """
    harmonic = [Fraction(0)]
    for m in range(1, n + 1):
        harmonic.append(harmonic[-1] + Fraction(1, m))
    return sum(Fraction(math.comb(n, m), 2**n) * n * harmonic[m] for m in range(n + 1))
