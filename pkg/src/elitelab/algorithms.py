"""Algorithm policies for :func:`elitelab.model.run_game` and their registry.

Every proposal goes through a :class:`~elitelab.operators.UnaryUnbiasedOperator`
(or a uniform sample) except for ``stuck-demo``, which is deliberately biased.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .bitstring import BitString, hamming
from .model import ConfigError, Policy, PopulationView
from .operators import (
    complement_operator,
    mixed_jump_mutation,
    one_bit_flip,
    standard_bit_mutation,
    uniform_resample,
)

_one_bit = lru_cache(maxsize=None)(one_bit_flip)
_sbm = lru_cache(maxsize=None)(standard_bit_mutation)
_mixed = lru_cache(maxsize=None)(mixed_jump_mutation)
_complement = lru_cache(maxsize=None)(complement_operator)
_uniform = lru_cache(maxsize=None)(uniform_resample)


def _not_worse(union: PopulationView, parent: int = 0, child: int = -1) -> bool:
    """Whether the child is at least as good as the parent, from any view."""
    if union.fitness is not None:
        return union.fitness[child] >= union.fitness[parent]
    if union.ranks is not None:
        return union.ranks[child] <= union.ranks[parent]
    return union.comparison != "worse"


class RLS(Policy):
    """Randomized local search: flip one uniformly chosen bit, keep if not worse."""

    id = "rls"
    stationary = True

    def propose(self, view, rng):
        x = view.members[0]
        return [_one_bit(x.n).apply(x, rng)], None

    def step_law(self, view):
        x = view.members[0]
        n = x.n
        children = np.uint64(x.value) ^ np.left_shift(np.uint64(1), np.arange(n, dtype=np.uint64))
        return children, np.full(n, 1.0 / n), None


class OnePlusOneEA(Policy):
    """(1+1) EA with standard bit mutation at rate 1/n."""

    id = "opo-ea"
    stationary = True

    def propose(self, view, rng):
        x = view.members[0]
        return [_sbm(x.n).apply(x, rng)], None

    def sample_block(self, view, count, gen):
        x = view.members[0]
        return np.uint64(x.value) ^ _sbm(x.n).sample_masks(count, gen), None


def restart_probability(n: int) -> float:
    """Per-round restart probability 1/(10 n ln n), capped at 1."""
    if n < 2:
        raise ConfigError("rls-restart needs n >= 2")
    return min(1.0, 1.0 / (10 * n * math.log(n)))


class RLSWithRestarts(Policy):
    """RLS that occasionally replaces its point by a fresh uniform sample.

    The restart sample is evaluated like any other offspring, so it costs
    one query.
    """

    id = "rls-restart"
    elitist = False

    def check_instance(self, instance):
        restart_probability(instance.n)

    def propose(self, view, rng):
        x = view.members[0]
        if rng.random() < restart_probability(x.n):
            return [_uniform(x.n).apply(x, rng)], "restart"
        return [_one_bit(x.n).apply(x, rng)], "flip"

    def select(self, union, tags, rng):
        return [1] if tags == "restart" or _not_worse(union) else [0]


class HiddenPathFollower(Policy):
    """Non-elitist (1+1) walker for the hidden-path family (absolute fitness).

    Above fitness n it climbs like RLS. At the local optimum (fitness 2n) it
    jumps to the complement, which is the start of the path. Below n it only
    accepts steps that raise fitness by exactly one, or the optimum.
    """

    id = "path-follow"
    views = ("absolute",)
    default_view = "absolute"
    elitist = False

    def check_instance(self, instance):
        if getattr(instance, "family", None) != "hiddenpath":
            raise ConfigError(f"{self.id} only runs on hiddenpath instances")

    def propose(self, view, rng):
        x = view.members[0]
        if view.fitness[0] == 2 * x.n:
            return [_complement(x.n).apply(x, rng)], "jump"
        return [_one_bit(x.n).apply(x, rng)], "flip"

    def select(self, union, tags, rng):
        n = union.n
        fx, fy = union.fitness
        if tags == "jump":
            return [1]
        if fx >= n:
            return [1] if fy >= fx else [0]
        return [1] if fy == fx + 1 or fy == 2 * n + 1 else [0]


class TwoPlusOnePathFollower(Policy):
    """(2+1) ranking-based walker for the hidden-path family.

    The population is read as an upper member ``a`` and a lower member ``c``
    (by rank); the offspring is always a one-bit flip of ``c``. Only ranks
    and distances between members are used, never fitness values.

    * descent: while ``a`` and ``c`` are neighbours, a worse offspring
      replaces ``a`` (the pair walks downhill and ends at the path start,
      usually with an anchor of the lowest off-path fitness);
    * path step: an offspring ranked strictly between ``c`` and ``a``
      replaces ``c``; with a correct anchor this is exactly the next path point;
    * anchor repair (probability 1/n): for neighbouring ``a``, ``c``, an
      offspring above ``a`` replaces ``a``;
    * escape (probability 1/n^3): for non-neighbouring ``a``, ``c``, the pair
      restarts its descent from ``c``.

    The optimum outranks every member, so it is evaluated but never accepted.
    """

    id = "path-follow-2p1"
    mu = 2
    views = ("ranking", "absolute")
    default_view = "ranking"
    elitist = False

    def check_instance(self, instance):
        if getattr(instance, "family", None) != "hiddenpath":
            raise ConfigError(f"{self.id} only runs on hiddenpath instances")

    @staticmethod
    def _levels(view) -> list:
        # larger is better regardless of view
        if view.fitness is not None:
            return list(view.fitness)
        return [-r for r in view.ranks]

    def _order(self, view) -> tuple[int, int]:
        lv = self._levels(view)
        return (1, 0) if lv[1] > lv[0] else (0, 1)

    def initialize(self, view, n, rng):
        if not view.members:
            return BitString.random(n, rng)
        return _one_bit(n).apply(view.members[0], rng)

    def propose(self, view, rng):
        _, ic = self._order(view)
        c = view.members[ic]
        return [_one_bit(c.n).apply(c, rng)], None

    def select(self, union, tags, rng):
        ia, ic = self._order(union)
        lv = self._levels(union)
        la, lc, ly = lv[ia], lv[ic], lv[2]
        n = union.n
        adjacent = hamming(union.members[ia], union.members[ic]) == 1
        if adjacent and ly < lc:
            return [ic, 2]
        if lc < ly < la:
            return [ia, 2]
        if adjacent and ly > la and rng.random() < 1 / n:
            return [2, ic]
        if not adjacent and rng.random() < 1 / n**3:
            return [ic, 2]
        return [0, 1]


class JumpMixedSolver(Policy):
    """Elitist (1+1) solver for Jump_k: mixed jump mutation, accept if not worse."""

    id = "jump-mixed"
    views = ("absolute", "ranking")
    default_view = "absolute"
    stationary = True

    def __init__(self, k: int):
        if k < 0:
            raise ConfigError(f"jump size must be nonnegative, got k={k}")
        self.k = k

    def check_instance(self, instance):
        if getattr(instance, "family", None) != "jump":
            raise ConfigError(f"{self.id} only runs on jump instances")
        if instance.k != self.k:
            raise ConfigError(f"{self.id} configured for k={self.k}, instance has k={instance.k}")

    def propose(self, view, rng):
        x = view.members[0]
        return [_mixed(x.n, self.k).apply(x, rng)], None

    def sample_block(self, view, count, gen):
        x = view.members[0]
        return np.uint64(x.value) ^ _mixed(x.n, self.k).sample_masks(count, gen), None


class StuckDemo(Policy):
    """Deterministic elitist policy that can cycle forever.

    Starts at the all-zeros string and always proposes the current point with
    position 1 flipped.
    """

    id = "stuck-demo"
    views = ("comparison",)
    unbiased = False
    deterministic = True

    def initialize(self, view, n, rng):
        return BitString.zeros(n)

    def propose(self, view, rng):
        return [view.members[0].flip(1)], None


POLICIES = {
    "rls": RLS,
    "rls-restart": RLSWithRestarts,
    "opo-ea": OnePlusOneEA,
    "path-follow": HiddenPathFollower,
    "path-follow-2p1": TwoPlusOnePathFollower,
    "jump-mixed": JumpMixedSolver,
    "stuck-demo": StuckDemo,
}


def make_policy(policy_id: str, k: int | None = None) -> Policy:
    """Instantiate a registered policy; ``k`` is required by ``jump-mixed`` only."""
    try:
        cls = POLICIES[policy_id]
    except KeyError:
        raise ConfigError(f"unknown algorithm {policy_id!r}; expected one of {', '.join(POLICIES)}") from None
    if cls is JumpMixedSolver:
        if k is None:
            raise ConfigError("jump-mixed needs the jump parameter k")
        return cls(int(k))
    return cls()


# convenience constructors
def rls() -> Policy:
    return RLS()


def rls_with_restarts() -> Policy:
    return RLSWithRestarts()


def one_plus_one_ea() -> Policy:
    return OnePlusOneEA()


def hidden_path_follower() -> Policy:
    return HiddenPathFollower()


def two_plus_one_path_follower() -> Policy:
    return TwoPlusOnePathFollower()


def jump_mixed_solver(k: int) -> Policy:
    return JumpMixedSolver(k)


def stuck_demo() -> Policy:
    return StuckDemo()


def describe(policy: Policy) -> str:
    mode = policy.default_mode()
    kind = "elitist" if policy.elitist else "non-elitist"
    views = ",".join(policy.views)
    return f"{policy.id:16s} ({mode.mu}+{mode.lam}) {kind:11s} views={views}"
