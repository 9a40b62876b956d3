from itertools import combinations

import numpy as np
import pytest

from jelsurvey.designs import (
    SurveySample,
    calibration_weights,
    draw_sample,
    generate_population,
    inclusion_probabilities,
    make_rng,
    model_sigma,
    pps_draw,
    rao_sampford_draw,
    srswor_draw,
)
from jelsurvey.errors import (
    DegenerateAuxiliary,
    DegenerateDesign,
    InfeasibleDesign,
    InputError,
    InvalidCorrelation,
    NonConvergence,
    PositivityViolation,
)


def sampford_design(pi):
    """Exact Sampford probabilities p(s) by enumeration of all n-subsets."""
    pi = np.asarray(pi, dtype=float)
    n = int(round(pi.sum()))
    odds = pi / (1 - pi)
    probs = {}
    for s in combinations(range(pi.size), n):
        s = list(s)
        probs[tuple(s)] = np.prod(odds[s]) * np.sum(1 - pi[s])
    total = sum(probs.values())
    return {s: p / total for s, p in probs.items()}


@pytest.mark.parametrize("rho, sigma", [(0.5, np.sqrt(3.0)), (0.3, np.sqrt(1 / 0.09 - 1))])
def test_sigma_from_correlation(rho, sigma):
    assert model_sigma(rho) == pytest.approx(sigma, rel=1e-14)
    assert model_sigma(0.3) == pytest.approx(3.1797, abs=1e-4)


def test_sigma_vanishes_as_rho_tends_to_one():
    assert model_sigma(1 - 1e-12) < 1e-5
    with pytest.raises(InvalidCorrelation):
        generate_population(10, rho=1.0)
    with pytest.raises(InvalidCorrelation):
        generate_population(10, rho=0.0)


def test_population_model_and_determinism():
    a = generate_population(5000, 1.0, 1.0, 0.5, 2.0, seed=9)
    b = generate_population(5000, 1.0, 1.0, 0.5, 2.0, seed=9)
    np.testing.assert_array_equal(a.y, b.y)
    assert a.x.min() > 2.0
    assert a.x_bar == pytest.approx(a.x.mean(), rel=1e-12)
    # realized correlation close to the target on a large population
    assert np.corrcoef(a.x, a.y)[0, 1] == pytest.approx(0.5, abs=0.03)
    c = generate_population(5000, 1.0, 1.0, 0.5, 2.0, seed=10)
    assert not np.array_equal(a.y, c.y)


def test_inclusion_probability_examples():
    np.testing.assert_allclose(inclusion_probabilities(np.ones(10), 3), 0.3)
    np.testing.assert_allclose(inclusion_probabilities([1, 2, 3, 4], 2), [0.2, 0.4, 0.6, 0.8])
    np.testing.assert_allclose(inclusion_probabilities([10, 1, 1], 2), [1.0, 0.5, 0.5])


def test_inclusion_probabilities_repeated_capping():
    pi = inclusion_probabilities([100, 50, 1, 1, 1, 1], 4)
    assert pi.sum() == pytest.approx(4, abs=1e-10)
    assert pi.max() <= 1.0
    np.testing.assert_allclose(pi[:2], 1.0)
    with pytest.raises(InfeasibleDesign):
        inclusion_probabilities([1, 2], 3)


def test_sampford_enumeration_reproduces_pi():
    pi = np.array([0.2, 0.4, 0.6, 0.8])
    design = sampford_design(pi)
    incl = np.zeros(4)
    for s, p in design.items():
        incl[list(s)] += p
    np.testing.assert_allclose(incl, pi, atol=1e-12)


@pytest.mark.parametrize("method", ["poisson", "multinomial"])
@pytest.mark.parametrize("pi", [[0.5] * 4, [0.2, 0.4, 0.6, 0.8]])
def test_sampford_inclusion_frequencies(method, pi):
    pi = np.asarray(pi)
    rng = make_rng(2024)
    reps = 20_000
    counts = np.zeros(4)
    for _ in range(reps):
        s = rao_sampford_draw(pi, rng, method)
        assert s.size == 2 and np.unique(s).size == 2
        counts[s] += 1
    se = np.sqrt(pi * (1 - pi) / reps)
    assert np.all(np.abs(counts / reps - pi) <= 3 * se)


@pytest.mark.parametrize("method", ["poisson", "multinomial"])
def test_sampford_sample_distribution_matches_design(method):
    # chi-square goodness of fit of whole-sample frequencies against the exact design
    from scipy import stats

    pi = inclusion_probabilities([1, 2, 3, 4, 5], 2)
    design = sampford_design(pi)
    keys = list(design)
    rng = make_rng(77)
    reps = 20_000
    counts = dict.fromkeys(keys, 0)
    for _ in range(reps):
        counts[tuple(rao_sampford_draw(pi, rng, method))] += 1
    obs = np.array([counts[k] for k in keys])
    exp = reps * np.array([design[k] for k in keys])
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_sampford_rejects_certainty_units():
    with pytest.raises(DegenerateDesign):
        rao_sampford_draw([1.0, 0.5, 0.5], 0)
    with pytest.raises(InputError):
        rao_sampford_draw([0.3, 0.3, 0.3], 0)


def test_pps_draw_handles_certainty_units():
    pi = inclusion_probabilities([10, 1, 1, 1], 2)
    for seed in range(20):
        s = pps_draw(pi, seed)
        assert 0 in s and s.size == 2


def test_multinomial_attempt_cap():
    pi = inclusion_probabilities(np.arange(1.0, 201.0), 60)
    with pytest.raises(NonConvergence):
        rao_sampford_draw(pi, 0, "multinomial", max_attempts=50)


def test_draws_are_deterministic_and_fixed_size():
    pi = inclusion_probabilities(np.arange(1.0, 301.0), 40)
    a = [rao_sampford_draw(pi, make_rng(5, r)) for r in range(20)]
    b = [rao_sampford_draw(pi, make_rng(5, r)) for r in range(20)]
    for s, t in zip(a, b):
        np.testing.assert_array_equal(s, t)
        assert s.size == 40 and np.unique(s).size == 40


def test_srswor():
    np.testing.assert_array_equal(srswor_draw(3, 3, 0), [0, 1, 2])
    rng = make_rng(1)
    reps = 30_000
    counts = {}
    for _ in range(reps):
        key = tuple(srswor_draw(4, 2, rng))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == 6
    se = np.sqrt((1 / 6) * (5 / 6) / reps)
    for c in counts.values():
        assert abs(c / reps - 1 / 6) <= 3 * se
    singles = np.bincount([srswor_draw(5, 1, rng)[0] for _ in range(reps)], minlength=5) / reps
    assert np.all(np.abs(singles - 0.2) <= 3 * np.sqrt(0.16 / reps))
    with pytest.raises(InfeasibleDesign):
        srswor_draw(3, 4, 0)


def test_calibration_examples():
    np.testing.assert_allclose(calibration_weights([1.0, 1.0], [0.0, 2.0], 1.5), [0.5, 1.5])
    d = np.array([1.0, 2.0, 3.0])
    x = np.array([1.0, 4.0, 2.0])
    already = (d / d.sum()) @ x
    np.testing.assert_allclose(calibration_weights(d, x, already), d, rtol=1e-14)
    with pytest.raises(DegenerateAuxiliary):
        calibration_weights([1.0, 2.0], [3.0, 3.0], 4.0)
    with pytest.raises(PositivityViolation):
        calibration_weights([1.0, 1.0, 1.0], [0.0, 1.0, 2.0], 1.95)


def test_calibration_exactness_random():
    rng = np.random.default_rng(8)
    for _ in range(200):
        n = rng.integers(5, 60)
        d = rng.uniform(1, 10, n)
        x = rng.exponential(size=(n, 2)) + 1
        target = (d / d.sum()) @ x + rng.normal(scale=0.05, size=2)
        try:
            w = calibration_weights(d, x, target)
        except PositivityViolation:
            continue
        wt = w / w.sum()
        np.testing.assert_allclose(wt @ x, target, rtol=1e-10)
        assert w.sum() == pytest.approx(d.sum(), rel=1e-12)


def test_draw_sample_invariants():
    pop = generate_population(400, rho=0.5, seed=3)
    s = draw_sample(pop, 30, 11)
    assert s.n == 30 and np.unique(s.indices).size == 30
    np.testing.assert_allclose(s.d, 1 / s.pi, rtol=1e-12)
    np.testing.assert_allclose((s.w / s.w.sum()) @ s.x, pop.x_bar, rtol=1e-8)
    srs = draw_sample(pop, 30, 11, design="srswor")
    np.testing.assert_allclose(srs.pi, 30 / 400)


def test_sample_validation():
    with pytest.raises(InputError):
        SurveySample(np.ones(3), np.array([0.5, 0.5]))
    with pytest.raises(InputError):
        SurveySample(np.ones(2), np.array([0.5, 0.5]), indices=np.array([1, 1]))
    with pytest.raises(InputError):
        SurveySample.from_weights(np.ones(2), [0.5, 2.0])
