"""Unary unbiased mutation operators in radial form.

A unary unbiased operator is fully described by its distribution over flip
counts: draw ``c`` from the radial law, then flip a uniformly random
``c``-subset of positions. Weights are kept as exact fractions so that
:func:`verify_unbiased` can work without tolerances.
"""

from __future__ import annotations

import bisect
import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .bitstring import BitString

MAX_EXHAUSTIVE_N = 12


def _as_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class UnaryUnbiasedOperator:
    """Radial law over flip counts ``0..n``."""

    n: int
    radial: tuple[Fraction, ...]
    name: str = "radial"
    _cdf: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        radial = tuple(_as_fraction(w) for w in self.radial)
        if len(radial) != self.n + 1:
            raise ValueError(f"radial law needs n+1={self.n + 1} weights, got {len(radial)}")
        if any(w < 0 for w in radial):
            raise ValueError("radial weights must be nonnegative")
        if sum(radial) != 1:
            raise ValueError(f"radial weights must sum to 1, got {sum(radial)}")
        object.__setattr__(self, "radial", radial)
        object.__setattr__(self, "_cdf", tuple(itertools.accumulate(float(w) for w in radial)))

    def flip_count(self, rng: random.Random) -> int:
        c = bisect.bisect_right(self._cdf, rng.random() * self._cdf[-1])
        return min(c, self.n)

    def apply(self, x: BitString, rng: random.Random) -> BitString:
        if x.n != self.n:
            raise ValueError(f"operator built for n={self.n}, got point of length {x.n}")
        return BitString(self.n, x.value ^ self.sample_mask(rng))

    def sample_mask(self, rng: random.Random) -> int:
        """Integer whose set bits are the positions to flip."""
        n = self.n
        c = self.flip_count(rng)
        if c == 0:
            return 0
        if c == 1:
            return 1 << rng.randrange(n)
        if c == n:
            return (1 << n) - 1
        m = 0
        for i in rng.sample(range(n), c):
            m |= 1 << i
        return m

    def sample_masks(self, count: int, gen: np.random.Generator) -> np.ndarray:
        """Vectorized :meth:`sample_mask` for ``n <= 64``; returns ``uint64``."""
        n = self.n
        if n > 64:
            raise ValueError("vectorized sampling needs n <= 64")
        probs = np.array([float(w) for w in self.radial])
        cs = gen.choice(n + 1, size=count, p=probs / probs.sum())
        return masks_with_counts(n, cs, gen)

    def prob(self, x: BitString, y: BitString) -> Fraction:
        d = (x.value ^ y.value).bit_count()
        return self.radial[d] / math.comb(self.n, d)

    def exact_law(self, x: BitString) -> dict[int, Fraction]:
        """Exact output distribution from ``x`` (enumerates all 2^n points)."""
        return {y: self.radial[(x.value ^ y).bit_count()] / math.comb(self.n, (x.value ^ y).bit_count())
                for y in range(1 << self.n)}

    def support_counts(self) -> list[int]:
        return [c for c, w in enumerate(self.radial) if w]


def _full(n: int) -> int:
    return (1 << n) - 1


def masks_with_counts(n: int, cs: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """Uniform random ``n``-bit masks, row ``i`` having exactly ``cs[i]`` set bits."""
    out = np.zeros(len(cs), dtype=np.uint64)
    full = np.uint64(_full(n))
    for c in np.unique(cs):
        c = int(c)
        rows = np.nonzero(cs == c)[0]
        if c == 0:
            continue
        if c == n:
            out[rows] = full
            continue
        comp = c > n // 2
        k = n - c if comp else c
        if k * (k - 1) <= 2 * n:
            masks = _small_subsets(n, k, len(rows), gen)
        else:
            keys = gen.random((len(rows), n))
            idx = np.argpartition(keys, k - 1, axis=1)[:, :k]
            masks = np.bitwise_or.reduce(np.left_shift(np.uint64(1), idx.astype(np.uint64)), axis=1)
        out[rows] = masks ^ full if comp else masks
    return out


def _small_subsets(n: int, k: int, m: int, gen: np.random.Generator) -> np.ndarray:
    # rejection on ordered draws with repetition; conditioned on distinctness
    # the resulting set is a uniform k-subset
    out = np.zeros(m, dtype=np.uint64)
    todo = np.arange(m)
    while len(todo):
        pos = gen.integers(0, n, size=(len(todo), k)).astype(np.uint64)
        masks = np.bitwise_or.reduce(np.left_shift(np.uint64(1), pos), axis=1)
        ok = np.bitwise_count(masks) == k
        out[todo[ok]] = masks[ok]
        todo = todo[~ok]
    return out


def point_mass(n: int, c: int, name: str | None = None) -> UnaryUnbiasedOperator:
    if not 0 <= c <= n:
        raise ValueError(f"flip count {c} outside 0..{n}")
    w = [Fraction(0)] * (n + 1)
    w[c] = Fraction(1)
    return UnaryUnbiasedOperator(n, tuple(w), name or f"flip-{c}")


def one_bit_flip(n: int) -> UnaryUnbiasedOperator:
    if n < 1:
        raise ValueError("n must be >= 1")
    return point_mass(n, 1, "one-bit-flip")


def complement_operator(n: int) -> UnaryUnbiasedOperator:
    return point_mass(n, n, "complement")


def binomial_radial(n: int, rate: Fraction) -> tuple[Fraction, ...]:
    return tuple(math.comb(n, c) * rate**c * (1 - rate) ** (n - c) for c in range(n + 1))


def uniform_resample(n: int) -> UnaryUnbiasedOperator:
    if n < 1:
        raise ValueError("n must be >= 1")
    return UnaryUnbiasedOperator(n, binomial_radial(n, Fraction(1, 2)), "uniform-resample")


def standard_bit_mutation(n: int, rate=None) -> UnaryUnbiasedOperator:
    """Flip each bit independently with probability ``rate`` (default 1/n)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rate = Fraction(1, n) if rate is None else _as_fraction(rate)
    # n = 1 with the default rate degenerates to a certain flip
    if not (0 < rate < 1 or (rate == 1 and n == 1)):
        raise ValueError(f"rate must lie in (0, 1), got {rate}")
    return UnaryUnbiasedOperator(n, binomial_radial(n, rate), f"standard-bit-mutation({rate})")


def mixed_jump_mutation(n: int, k: int) -> UnaryUnbiasedOperator:
    """Equal mixture of a uniform sample, a one-bit flip and a (k+1)-bit flip."""
    if n < 2 or not 0 <= k <= n // 2 - 1:
        raise ValueError(f"mixed jump mutation needs 0 <= k <= n/2 - 1, got k={k}, n={n}")
    third = Fraction(1, 3)
    w = [third * b for b in binomial_radial(n, Fraction(1, 2))]
    w[1] += third
    w[k + 1] += third
    return UnaryUnbiasedOperator(n, tuple(w), f"mixed-jump(k={k})")


class ExplicitOperator:
    """Operator given by an arbitrary exact law; used to test the verifier."""

    def __init__(self, n: int, law: Callable[[BitString], dict[int, Fraction]], name: str):
        self.n = n
        self._law = law
        self.name = name

    def exact_law(self, x: BitString) -> dict[int, Fraction]:
        return self._law(x)


def flip_first_position(n: int) -> ExplicitOperator:
    """Deliberately biased: always flips position 1."""
    return ExplicitOperator(n, lambda x: {x.flip(1).value: Fraction(1)}, "flip-position-1")


@dataclass
class UnbiasednessReport:
    name: str
    n: int
    unbiased: bool
    by_distance: dict[int, Fraction]
    counterexample: tuple[str, str, str] | None = None

    def __str__(self) -> str:
        status = "ok" if self.unbiased else "BIASED"
        line = f"{self.name} n={self.n}: {status}"
        if self.counterexample:
            x, y, why = self.counterexample
            line += f" (x={x}, y={y}: {why})"
        return line


def verify_unbiased(op, n: int | None = None) -> UnbiasednessReport:
    """Exhaustively check that ``Pr[op(x) = y]`` depends only on ``hamming(x, y)``.

    Works on anything exposing ``exact_law(x) -> {y_value: Fraction}``.
    All arithmetic is exact.
    """
    n = op.n if n is None else n
    if n != op.n:
        raise ValueError(f"operator is defined for n={op.n}, asked to verify n={n}")
    if n > MAX_EXHAUSTIVE_N:
        raise ValueError(f"exhaustive verification limited to n <= {MAX_EXHAUSTIVE_N}, got {n}")
    name = getattr(op, "name", type(op).__name__)
    table: dict[int, Fraction] = {}
    for xv in range(1 << n):
        x = BitString(n, xv)
        law = op.exact_law(x)
        total = sum(law.values(), Fraction(0))
        if total != 1:
            return UnbiasednessReport(name, n, False, table, (str(x), "*", f"law sums to {total}"))
        for yv in range(1 << n):
            p = law.get(yv, Fraction(0))
            d = (xv ^ yv).bit_count()
            seen = table.setdefault(d, p)
            if seen != p:
                y = BitString(n, yv)
                return UnbiasednessReport(
                    name, n, False, table, (str(x), str(y), f"Pr={p} but {seen} elsewhere at distance {d}")
                )
    return UnbiasednessReport(name, n, True, table)


def default_registry() -> dict[str, Callable[[int], list]]:
    """Operators checked by ``verify-operators``: name -> (n -> operators)."""
    return {
        "one-bit-flip": lambda n: [one_bit_flip(n)],
        "uniform-resample": lambda n: [uniform_resample(n)],
        "standard-bit-mutation": lambda n: [standard_bit_mutation(n)],
        "mixed-jump": lambda n: [mixed_jump_mutation(n, k) for k in range(n // 2)],
        "complement": lambda n: [complement_operator(n)],
    }


def exact_hit_probability(op: UnaryUnbiasedOperator, distance: int) -> Fraction:
    """Probability of producing one specific point at the given distance."""
    return op.radial[distance] / math.comb(op.n, distance)


def flip_count_frequencies(op: UnaryUnbiasedOperator, samples: int, rng: random.Random,
                           start: BitString | None = None) -> list[int]:
    x = start or BitString.zeros(op.n)
    counts = [0] * (op.n + 1)
    for _ in range(samples):
        counts[(op.apply(x, rng).value ^ x.value).bit_count()] += 1
    return counts

