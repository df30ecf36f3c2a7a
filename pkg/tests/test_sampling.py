import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from sepdev import (Configuration, Profile, SeedSpec, sample_canonical, sample_equilibrium,
                    sample_perturbed, sample_product, scaling_sequence)
from sepdev.sampling import initial_log_likelihood_ratio, perturbed_marginals, sample_product_many

COSINE = Profile.cosine(0.5, 0.25)


def test_half_profile_mean_occupancy():
    c = sample_product(10_000, 0.5, SeedSpec(1))
    assert abs(c.count / 10_000 - 0.5) <= 3 * 0.5 / 100


def test_cosine_profile_site_zero_frequency():
    hits = sum(sample_product(10_000, COSINE, SeedSpec(2, r))[0] for r in range(10_000))
    assert abs(hits / 10_000 - 0.75) <= 3 * math.sqrt(0.1875 / 10_000)


def test_centred_count_variance_matches_bernoulli_sum():
    n, R = 200, 20_000
    p = COSINE(np.arange(n) / n)
    exact = float(np.sum(p * (1 - p)))
    sums = np.concatenate([(block - p).sum(axis=1) for block in
                           sample_product_many(n, COSINE, R, SeedSpec(3))])
    se = exact * math.sqrt(2.0 / (R - 1))
    assert abs(sums.var(ddof=1) - exact) <= 3 * se


def test_product_rejects_profile_outside_open_interval():
    with pytest.raises(ValueError, match="site 0"):
        sample_product(8, Profile.cosine(0.5, 0.5), SeedSpec(0))


def test_equilibrium_matches_constant_product_profile():
    s = SeedSpec(11, 4)
    assert sample_equilibrium(64, 0.5, s) == sample_product(64, 0.5, s)


def test_equilibrium_pair_statistic():
    alpha, n, R = 0.3, 64, 4000
    pairs = np.array([np.mean(o * np.roll(o, -1)) for o in
                      (sample_equilibrium(n, alpha, SeedSpec(5, r)).occupancy.astype(float)
                       for r in range(R))])
    assert abs(pairs.mean() - alpha ** 2) <= 3 * pairs.std(ddof=1) / math.sqrt(R)


def test_equilibrium_count_is_binomial():
    n, alpha, R = 16, 0.4, 20_000
    counts = np.array([sample_equilibrium(n, alpha, SeedSpec(6, r)).count for r in range(R)])
    observed = np.bincount(counts, minlength=n + 1)
    expected = R * stats.binom.pmf(np.arange(n + 1), n, alpha)
    # pool the sparse tails so every cell has a usable expectation
    keep = expected >= 5
    obs = np.append(observed[keep], observed[~keep].sum())
    exp = np.append(expected[keep], expected[~keep].sum())
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_equilibrium_rejects_bad_alpha():
    for a in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            sample_equilibrium(8, a, SeedSpec(0))


def test_canonical_is_uniform_on_four_sites():
    R = 60_000
    seen = {}
    for r in range(R):
        b = sample_canonical(4, 2, SeedSpec(7, r)).bits()
        seen[b] = seen.get(b, 0) + 1
    assert len(seen) == math.comb(4, 2)
    se = math.sqrt((1 / 6) * (5 / 6) / R)
    for count in seen.values():
        assert abs(count / R - 1 / 6) <= 3 * se


def test_canonical_matches_conditioned_equilibrium():
    n, k = 8, 3
    all_states = ["".join(b) for b in itertools.product("01", repeat=n) if b.count("1") == k]
    index = {b: i for i, b in enumerate(all_states)}
    canon = np.zeros(len(all_states))
    cond = np.zeros(len(all_states))
    for r in range(40_000):
        canon[index[sample_canonical(n, k, SeedSpec(8, r)).bits()]] += 1
    r = 0
    while cond.sum() < 20_000:
        c = sample_equilibrium(n, 0.4, SeedSpec(9, r))
        r += 1
        if c.count == k:
            cond[index[c.bits()]] += 1
    table = np.vstack([canon, cond])
    assert stats.chi2_contingency(table).pvalue > 1e-3


@given(st.integers(min_value=2, max_value=60), st.data())
@settings(max_examples=40, deadline=None)
def test_canonical_count_is_exact(n, data):
    k = data.draw(st.integers(min_value=1, max_value=n - 1))
    assert sample_canonical(n, k, SeedSpec(n, k)).count == k


def test_canonical_rejects_out_of_range():
    for k in (0, 8):
        with pytest.raises(ValueError):
            sample_canonical(8, k, SeedSpec(0))


def test_perturbed_with_zero_tilt_is_the_product_sample():
    s = SeedSpec(12, 1)
    assert sample_perturbed(128, COSINE, 0.0, 40.0, s) == sample_product(128, COSINE, s)


def test_perturbed_marginals_are_three_quarters():
    n = 256
    a = scaling_sequence(n)
    assert np.allclose(perturbed_marginals(n, 0.5, 1.0, a), 0.75, atol=1e-15, rtol=0)
    R = 400
    freq = np.mean([sample_perturbed(n, 0.5, 1.0, a, SeedSpec(13, r)).occupancy.mean() for r in range(R)])
    assert abs(freq - 0.75) <= 3 * math.sqrt(0.1875 / (n * R))


def test_perturbed_rejects_escaping_marginal():
    with pytest.raises(ValueError, match="1.1"):
        sample_perturbed(10, 0.9, 1.0, 2.0, SeedSpec(0))


def test_likelihood_ratio_integrates_to_one():
    n, a = 6, 1.0
    g = Profile.cosine(0.0, 1.0)
    q = perturbed_marginals(n, COSINE, g, a)
    total = 0.0
    for b in itertools.product((0, 1), repeat=n):
        eta = np.array(b)
        prob_g = float(np.prod(np.where(eta == 1, q, 1 - q)))
        total += prob_g * math.exp(initial_log_likelihood_ratio(Configuration(eta), COSINE, g, a))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_same_seed_same_configuration():
    s = SeedSpec(99, 3, lane=1)
    assert sample_product(500, COSINE, s) == sample_product(500, COSINE, s)
    assert sample_product(500, COSINE, s) != sample_product(500, COSINE, SeedSpec(99, 4, lane=1))


def test_scaling_sequence():
    assert scaling_sequence(256) == pytest.approx(64.0)
    assert scaling_sequence(1024, 0.5) == pytest.approx(32.0)
