"""The (mu + lambda) elitist black-box game.

:func:`run_game` is the referee: it owns the hidden instance, hands the
algorithm nothing but a :class:`PopulationView`, counts every evaluation and
applies selection. Algorithms are :class:`Policy` objects.

Stall acceleration
------------------
Trapped elitist runs can burn millions of rejected rounds. For (1+1)
policies flagged ``stationary`` (proposal law fixed while the parent is
fixed), rounds between two state changes are i.i.d., so after
``STALL_THRESHOLD`` consecutive no-change rounds the referee jumps straight to
the next state change:

* if the policy exposes a finite ``step_law``, the referee computes the exact
  per-round change probability ``q`` and draws the waiting time from
  Geometric(q); ``q == 0`` means the state is absorbing and the budget is
  spent at once;
* otherwise it evaluates i.i.d. proposals from ``sample_block`` in vectorized
  blocks and stops at the first state change.

Both paths reproduce the sequential process in distribution (not draw for
draw). Pass ``accelerate=False`` or ``record=True`` to force one round at a
time.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bitstring import BitString

VIEWS = ("absolute", "ranking", "comparison")
TIE_POLICIES = ("prefer_offspring", "prefer_parent", "uniform_random")
OUTCOMES = ("worse", "equal", "better")

STALL_THRESHOLD = 64
BLOCK_START = 256
BLOCK_MAX = 1 << 16


class ConfigError(ValueError):
    """Policy, mode and instance do not fit together."""


@dataclass(frozen=True)
class ModelMode:
    mu: int = 1
    lam: int = 1
    fitness_view: str = "comparison"
    elitist: bool = True
    unbiased: bool = True
    tie_policy: str = "prefer_offspring"

    def __post_init__(self):
        if self.mu < 1 or self.lam < 1:
            raise ConfigError(f"mu and lambda must be positive, got mu={self.mu}, lambda={self.lam}")
        if self.fitness_view not in VIEWS:
            raise ConfigError(f"unknown fitness view {self.fitness_view!r}")
        if self.fitness_view == "comparison" and (self.mu, self.lam) != (1, 1):
            raise ConfigError("comparison view is only defined for mu = lambda = 1")
        if self.tie_policy not in TIE_POLICIES:
            raise ConfigError(f"unknown tie policy {self.tie_policy!r}")


@dataclass(frozen=True, slots=True)
class PopulationView:
    """Everything an algorithm may look at: members plus one kind of fitness info."""

    members: tuple[BitString, ...]
    fitness: tuple[int, ...] | None = None
    ranks: tuple[int, ...] | None = None
    comparison: str | None = None

    @property
    def n(self) -> int:
        return self.members[0].n

    def key(self):
        info = self.fitness if self.fitness is not None else self.ranks
        if info is None:
            pairs = sorted((m.value, 0) for m in self.members)
        else:
            pairs = sorted((m.value, i) for m, i in zip(self.members, info))
        return tuple(pairs), self.comparison


@dataclass(frozen=True)
class RunOutcome:
    queries_to_optimum: int | None
    total_queries: int
    success: bool
    looped: bool
    budget: int
    final_population: tuple[BitString, ...] = ()
    final_fitness: tuple[int, ...] = ()
    # (query index, best population fitness) at every strict increase
    improvements: tuple[tuple[int, int], ...] = ()
    trace: tuple[tuple[BitString, int], ...] | None = field(default=None, repr=False)

    @property
    def censored(self) -> bool:
        return not self.success


def rank_population(fitnesses: Sequence[int]) -> tuple[int, ...]:
    """Dense ranks, 1 = best; equal fitness <=> equal rank."""
    if len(fitnesses) == 0:
        raise ValueError("cannot rank an empty population")
    distinct = sorted(set(fitnesses), reverse=True)
    pos = {f: r for r, f in enumerate(distinct, start=1)}
    return tuple(pos[f] for f in fitnesses)


def compare(child: int, parent: int) -> str:
    if child > parent:
        return "better"
    return "equal" if child == parent else "worse"


def _elitist_indices(fits: Sequence[int], n_parents: int, mu: int, tie_policy: str,
                     rng: random.Random | None) -> list[int]:
    if tie_policy == "prefer_offspring":
        key = lambda i: (-fits[i], -i)  # noqa: E731
    elif tie_policy == "prefer_parent":
        key = lambda i: (-fits[i], i)  # noqa: E731
    else:
        rng = rng or random.Random()
        noise = [rng.random() for _ in fits]
        key = lambda i: (-fits[i], noise[i])  # noqa: E731
    return sorted(sorted(range(len(fits)), key=key)[:mu])


def elitist_select(parents: Sequence[tuple[BitString, int]], offspring: Sequence[tuple[BitString, int]],
                   mu: int, tie_policy: str = "prefer_offspring",
                   rng: random.Random | None = None) -> list[BitString]:
    """Truncation selection: the ``mu`` fitness-best of parents and offspring.

    Only the order among equal-fitness candidates at the cut depends on
    ``tie_policy``.
    """
    if tie_policy not in TIE_POLICIES:
        raise ConfigError(f"unknown tie policy {tie_policy!r}")
    union = list(parents) + list(offspring)
    if mu > len(union):
        raise ValueError(f"cannot keep {mu} of {len(union)} candidates")
    idx = _elitist_indices([f for _, f in union], len(parents), mu, tie_policy, rng)
    return [union[i][0] for i in idx]


class Policy:
    """Base class for algorithms playing :func:`run_game`.

    Subclasses override :meth:`propose` and, for non-elitist acceptance,
    :meth:`select`. Policies must be stateless: all run state lives in the
    referee, so everything a policy knows comes through its arguments.
    """

    id = "policy"
    mu = 1
    lam = 1
    views: tuple[str, ...] = VIEWS
    default_view = "comparison"
    elitist = True
    unbiased = True
    deterministic = False
    stationary = False

    def default_mode(self, fitness_view: str | None = None, tie_policy: str = "prefer_offspring") -> ModelMode:
        return ModelMode(self.mu, self.lam, fitness_view or self.default_view, self.elitist, self.unbiased,
                         tie_policy)

    def check_mode(self, mode: ModelMode) -> None:
        if (mode.mu, mode.lam) != (self.mu, self.lam):
            raise ConfigError(f"{self.id} is a ({self.mu}+{self.lam}) policy, mode is ({mode.mu}+{mode.lam})")
        if mode.fitness_view not in self.views:
            raise ConfigError(f"{self.id} supports views {self.views}, not {mode.fitness_view!r}")
        if mode.elitist and not self.elitist:
            raise ConfigError(f"{self.id} uses non-elitist acceptance, mode requires elitist selection")
        if mode.unbiased and not self.unbiased:
            raise ConfigError(f"{self.id} is not unbiased, mode requires unbiased variation")

    def check_instance(self, instance) -> None:
        pass

    def initialize(self, view: PopulationView, n: int, rng: random.Random) -> BitString:
        return BitString.random(n, rng)

    def propose(self, view: PopulationView, rng: random.Random):
        """Return ``(offspring, tags)``: ``lam`` points, tags may be None."""
        raise NotImplementedError

    def select(self, union: PopulationView, tags, rng: random.Random) -> list[int]:
        """Indices into ``union.members`` forming the next population."""
        raise NotImplementedError

    # acceleration hooks, (1+1) stationary policies only
    def step_law(self, view: PopulationView):
        """Finite proposal law ``(children uint64, probs, tags)`` or None."""
        return None

    def sample_block(self, view: PopulationView, count: int, gen: np.random.Generator):
        """``count`` i.i.d. proposals ``(children uint64, tags)`` or None."""
        return None

    def accept_mask(self, view: PopulationView, child_fitness: np.ndarray, tags) -> np.ndarray:
        """Vectorized :meth:`select` for non-elitist (1+1) policies."""
        raise NotImplementedError


class _Referee:
    def __init__(self, policy, instance, mode, budget, rng, gen, record):
        self.policy = policy
        self.instance = instance
        self.mode = mode
        self.budget = budget
        self.rng = rng
        self.gen = gen
        self.n = instance.n
        self.opt = instance.optimal_value
        self.queries = 0
        self.first_opt: int | None = None
        self.trace = [] if record else None
        self.pop: list[BitString] = []
        self.fits: list[int] = []
        self.comparison: str | None = None
        self.best: int | None = None
        self.improvements: list[tuple[int, int]] = []
        self.looped = False

    def evaluate(self, x: BitString) -> int:
        if x.n != self.n:
            raise ValueError(f"policy produced a point of length {x.n}, instance has n={self.n}")
        self.queries += 1
        f = self.instance.evaluate_value(x.value)
        if self.trace is not None:
            self.trace.append((x, f))
        if f == self.opt and self.first_opt is None:
            self.first_opt = self.queries
        return f

    @property
    def done(self) -> bool:
        return self.first_opt is not None or self.queries >= self.budget

    def view(self, members=None, fits=None, comparison=None) -> PopulationView:
        members = self.pop if members is None else members
        fits = self.fits if fits is None else fits
        vw = self.mode.fitness_view
        if vw == "absolute":
            return PopulationView(tuple(members), fitness=tuple(fits))
        if vw == "ranking":
            return PopulationView(tuple(members), ranks=rank_population(fits) if fits else ())
        return PopulationView(tuple(members), comparison=comparison)

    def note_population(self) -> None:
        top = max(self.fits)
        if self.best is None or top > self.best:
            self.best = top
            self.improvements.append((self.queries, top))

    def outcome(self) -> RunOutcome:
        return RunOutcome(
            queries_to_optimum=self.first_opt,
            total_queries=self.queries,
            success=self.first_opt is not None,
            looped=self.looped,
            budget=self.budget,
            final_population=tuple(self.pop),
            final_fitness=tuple(self.fits),
            improvements=tuple(self.improvements),
            trace=tuple(self.trace) if self.trace is not None else None,
        )


def _tie_accept(tie_policy: str) -> float:
    return {"prefer_offspring": 1.0, "prefer_parent": 0.0, "uniform_random": 0.5}[tie_policy]


def run_game(policy: Policy, instance, mode: ModelMode | None = None, budget: int = 10**6,
             rng: random.Random | int | None = None, *, record: bool = False,
             accelerate: bool = True) -> RunOutcome:
    """Play ``policy`` against ``instance`` until the optimum is evaluated or
    ``budget`` evaluations are spent.

    ``rng`` may be a seed or a ``random.Random``; the outcome is a function
    of (policy, instance, mode, budget, seed) only. Configuration errors are
    raised before the first evaluation.
    """
    mode = mode or policy.default_mode()
    if budget < 1:
        raise ConfigError(f"budget must be positive, got {budget}")
    policy.check_mode(mode)
    policy.check_instance(instance)
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    gen = np.random.default_rng(rng.getrandbits(64))
    ref = _Referee(policy, instance, mode, budget, rng, gen, record)
    mu, lam = mode.mu, mode.lam
    elitist = mode.elitist or policy.elitist

    # adaptive initialization, one point at a time
    for _ in range(mu):
        x = policy.initialize(ref.view(), instance.n, rng)
        f = ref.evaluate(x)
        ref.pop.append(x)
        ref.fits.append(f)
        if ref.done:
            ref.note_population()
            return ref.outcome()
    ref.note_population()

    # a deterministic policy under deterministic selection that sees the same
    # state twice without an acceptance in between will cycle forever
    seen: set | None = set() if policy.deterministic and mode.tie_policy != "uniform_random" else None
    fast = (accelerate and not record and policy.stationary and (mu, lam) == (1, 1) and instance.n <= 64)
    stall = 0
    while True:
        view = ref.view(comparison=ref.comparison)
        if seen is not None:
            key = view.key()
            if key in seen:
                ref.looped = True
                return ref.outcome()
            seen.add(key)

        if fast and stall >= STALL_THRESHOLD:
            if not _fast_forward(ref, view, elitist):
                return ref.outcome()
            stall = 0
            continue

        offspring, tags = policy.propose(view, rng)
        if len(offspring) != lam:
            raise ValueError(f"{policy.id} proposed {len(offspring)} offspring, expected {lam}")
        child_fits = []
        for y in offspring:
            child_fits.append(ref.evaluate(y))
            if ref.done:
                break
        if ref.done:
            return ref.outcome()

        members = ref.pop + list(offspring)
        fits = ref.fits + child_fits
        if elitist:
            keep = _elitist_indices(fits, mu, mu, mode.tie_policy, rng)
        else:
            comp = compare(child_fits[0], ref.fits[0]) if mode.fitness_view == "comparison" else None
            keep = policy.select(ref.view(members, fits, comp), tags, rng)
            if len(keep) != mu or len(set(keep)) != mu:
                raise ValueError(f"{policy.id} selected {keep}, expected {mu} distinct indices")
        before = [m.value for m in ref.pop]
        if mode.fitness_view == "comparison":
            ref.comparison = compare(child_fits[0], ref.fits[0])
        ref.pop = [members[i] for i in keep]
        ref.fits = [fits[i] for i in keep]
        ref.note_population()
        changed = [m.value for m in ref.pop] != before
        if changed and seen is not None:
            seen.clear()
        if fast:
            stall = 0 if changed else stall + 1


def _fast_forward(ref: _Referee, view: PopulationView, elitist: bool) -> bool:
    """Advance a stalled (1+1) run to its next state change.

    Returns False when the run ended (budget spent or optimum evaluated).
    """
    policy, inst = ref.policy, ref.instance
    parent = ref.pop[0].value
    fp = ref.fits[0]
    tie = _tie_accept(ref.mode.tie_policy)

    def accept_prob(fits, tags):
        if elitist:
            return np.where(fits > fp, 1.0, np.where(fits == fp, tie, 0.0))
        return policy.accept_mask(view, fits, tags).astype(float)

    law = policy.step_law(view)
    if law is not None:
        children, probs, tags = law
        fits = inst.evaluate_array(children)
        acc = accept_prob(fits, tags)
        w = np.where(fits == ref.opt, probs, np.where(children != np.uint64(parent), probs * acc, 0.0))
        q = float(w.sum())
        remaining = ref.budget - ref.queries
        if q <= 0.0:
            ref.queries = ref.budget
            return False
        wait = int(ref.gen.geometric(min(q, 1.0)))
        if wait > remaining:
            ref.queries = ref.budget
            return False
        ref.queries += wait - 1
        i = int(ref.gen.choice(len(w), p=w / q))
        accepted = bool(fits[i] != ref.opt or acc[i] > 0)
        return _commit(ref, int(children[i]), int(fits[i]), accepted)

    size = BLOCK_START
    while True:
        remaining = ref.budget - ref.queries
        m = min(size, remaining)
        block = policy.sample_block(view, m, ref.gen)
        if block is None:
            raise RuntimeError(f"{policy.id} is stationary but offers neither step_law nor sample_block")
        children, tags = block
        fits = inst.evaluate_array(children)
        p = accept_prob(fits, tags)
        acc = p >= 1.0
        partial = (p > 0.0) & (p < 1.0)
        if partial.any():
            acc |= partial & (ref.gen.random(m) < p)
        event = (fits == ref.opt) | (acc & (children != np.uint64(parent)))
        hits = np.flatnonzero(event)
        if len(hits) == 0:
            ref.queries += m
            if ref.queries >= ref.budget:
                return False
            size = min(2 * size, BLOCK_MAX)
            continue
        i = int(hits[0])
        ref.queries += i
        return _commit(ref, int(children[i]), int(fits[i]), bool(acc[i]))


def _commit(ref: _Referee, child: int, f: int, accepted: bool) -> bool:
    ref.queries += 1
    if f == ref.opt and ref.first_opt is None:
        ref.first_opt = ref.queries
    if ref.mode.fitness_view == "comparison":
        ref.comparison = compare(f, ref.fits[0])
    if accepted:
        ref.pop = [BitString(ref.n, child)]
        ref.fits = [f]
        ref.note_population()
    return not ref.done
