import math
import random
from fractions import Fraction

import numpy as np
import pytest
from scipy import stats

from elitelab.bitstring import BitString
from elitelab.operators import (
    default_registry,
    exact_hit_probability,
    flip_count_frequencies,
    flip_first_position,
    masks_with_counts,
    mixed_jump_mutation,
    one_bit_flip,
    standard_bit_mutation,
    uniform_resample,
    verify_unbiased,
)

ALPHA = 1e-3


def _chi2_ok(observed, probs):
    probs = np.asarray(probs, dtype=float)
    keep = probs > 0
    observed = np.asarray(observed)
    assert observed[~keep].sum() == 0
    if keep.sum() == 1:
        return True  # point mass: nothing left to test
    exp = probs[keep] * observed.sum()
    return stats.chisquare(observed[keep], exp).pvalue > ALPHA


@pytest.mark.parametrize("n", range(2, 9))
def test_registry_is_unbiased(n):
    for name, build in default_registry().items():
        for op in build(n):
            rep = verify_unbiased(op)
            assert rep.unbiased, str(rep)


def test_biased_operator_is_caught():
    rep = verify_unbiased(flip_first_position(4))
    assert not rep.unbiased
    assert rep.counterexample is not None
    assert "BIASED" in str(rep)


def test_radial_validation():
    with pytest.raises(ValueError):
        standard_bit_mutation(4, Fraction(3, 2))
    with pytest.raises(ValueError):
        mixed_jump_mutation(16, 8)
    assert standard_bit_mutation(1).radial == (0, 1)


def test_mixed_jump_hit_probability():
    # one specific point at distance k+1 = 3 from the parent, n = 16
    op = mixed_jump_mutation(16, 2)
    p = exact_hit_probability(op, 3)
    assert p == Fraction(1, 3) / 560 + Fraction(1, 3) / 2**16


@pytest.mark.parametrize("make", [one_bit_flip, uniform_resample, standard_bit_mutation,
                                  lambda n: mixed_jump_mutation(n, 3)])
def test_flip_counts_match_radial_law(make):
    n = 12
    op = make(n)
    counts = flip_count_frequencies(op, 100_000, random.Random(5), BitString.random(n, random.Random(1)))
    assert _chi2_ok(counts, [float(w) for w in op.radial])


@pytest.mark.parametrize("make", [uniform_resample, standard_bit_mutation, lambda n: mixed_jump_mutation(n, 5)])
def test_vectorized_masks_match_radial_law(make):
    n = 40
    op = make(n)
    masks = op.sample_masks(100_000, np.random.default_rng(3))
    counts = np.bincount(np.bitwise_count(masks).astype(int), minlength=n + 1)
    assert _chi2_ok(counts, [float(w) for w in op.radial])


@pytest.mark.parametrize("c", [1, 2, 3, 9, 20, 31, 32])
def test_fixed_count_masks_are_uniform_over_positions(c):
    n = 32
    masks = masks_with_counts(n, np.full(50_000, c), np.random.default_rng(c))
    assert np.all(np.bitwise_count(masks) == c)
    per_pos = [int(np.count_nonzero(masks & np.uint64(1 << i))) for i in range(n)]
    if 0 < c < n:
        assert _chi2_ok(per_pos, [1 / n] * n)


def test_two_subsets_uniform_small_n():
    # all C(5,2) = 10 subsets equally likely
    masks = masks_with_counts(5, np.full(50_000, 2), np.random.default_rng(9))
    vals, counts = np.unique(masks, return_counts=True)
    assert len(vals) == math.comb(5, 2)
    assert _chi2_ok(counts, [0.1] * 10)


def test_apply_output_law_is_exact_at_small_n():
    op = mixed_jump_mutation(4, 1)
    x = BitString.from_str("0110")
    law = op.exact_law(x)
    assert sum(law.values()) == 1
    rng = random.Random(2)
    draws = [op.apply(x, rng).value for _ in range(60_000)]
    obs = np.bincount(draws, minlength=16)
    assert _chi2_ok(obs, [float(law[v]) for v in range(16)])


def test_verifier_size_limit():
    with pytest.raises(ValueError):
        verify_unbiased(one_bit_flip(13))
