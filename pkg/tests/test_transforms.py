"""Normal-scores and latent-threshold transform behavior."""

import numpy as np
from scipy.special import ndtri

from longfuse.dataset import ColumnKind
from longfuse.transforms import LatentThresholds, NormalScores, fit_transform


def test_round_trip_is_exact_on_observed_values(rng):
    v = rng.normal(3.0, 2.0, size=200)
    t = NormalScores.fit(v)
    back = t.inverse(t.forward(v))
    assert np.array_equal(back, v)


def test_scores_are_standard_normal_quantiles():
    v = np.array([10.0, 20.0, 30.0, 40.0])
    t = NormalScores.fit(v)
    expected = ndtri(np.array([1, 2, 3, 4]) / 5.0)
    assert np.allclose(t.forward(v), expected, rtol=1e-14)


def test_ties_share_average_rank_scores():
    v = np.array([1.0, 2.0, 2.0, 3.0])
    t = NormalScores.fit(v)
    scores = t.forward(v)
    assert scores[1] == scores[2]
    # the tied pair occupies ranks 2 and 3, so it gets the 2.5/5 quantile
    assert np.isclose(scores[1], ndtri(2.5 / 5.0), rtol=1e-14)


def test_forward_is_monotone_and_clamped(rng):
    v = rng.normal(size=50)
    t = NormalScores.fit(v)
    grid = np.linspace(v.min() - 5, v.max() + 5, 301)
    out = t.forward(grid)
    assert np.all(np.diff(out) >= 0)
    # beyond the observed range the transform stays at the edge scores
    assert out[0] == t.forward(np.array([v.min()]))[0]
    assert out[-1] == t.forward(np.array([v.max()]))[0]


def test_inverse_maps_extreme_latents_to_observed_range(rng):
    v = rng.normal(size=50)
    t = NormalScores.fit(v)
    vals = t.inverse(np.array([-40.0, 40.0]))
    assert vals[0] == v.min()
    assert vals[1] == v.max()


def test_imputed_values_never_leave_the_observed_range(rng):
    v = rng.lognormal(size=80)
    t = NormalScores.fit(v)
    vals = t.inverse(rng.normal(size=5000) * 4)
    assert vals.min() >= v.min()
    assert vals.max() <= v.max()


def test_binary_threshold_splits_at_observed_frequency():
    v = np.array([0.0, 0.0, 0.0, 1.0])
    t = LatentThresholds.fit(v)
    cut = ndtri(0.75)
    assert t.inverse(np.array([cut - 1e-9]))[0] == 0.0
    assert t.inverse(np.array([cut + 1e-9]))[0] == 1.0


def test_ordinal_round_trip_recovers_levels(rng):
    v = rng.integers(0, 4, size=300).astype(float)
    t = LatentThresholds.fit(v)
    assert np.array_equal(t.inverse(t.forward(v)), v)


def test_ordinal_inverse_output_is_always_an_observed_level(rng):
    v = np.array([0.0, 1.0, 1.0, 3.0])
    t = LatentThresholds.fit(v)
    latent = rng.normal(size=1000) * 3
    assert set(np.unique(t.inverse(latent))) <= {0.0, 1.0, 3.0}


def test_ordinal_level_shares_track_observed_frequencies(rng):
    v = np.concatenate([np.zeros(70), np.ones(20), np.full(10, 2.0)])
    t = LatentThresholds.fit(v)
    draws = t.inverse(rng.normal(size=200_000))
    shares = np.array([(draws == k).mean() for k in (0.0, 1.0, 2.0)])
    assert np.allclose(shares, [0.7, 0.2, 0.1], atol=0.01)


def test_fit_transform_dispatches_on_kind(rng):
    cont = fit_transform(rng.normal(size=20), ColumnKind.CONTINUOUS)
    assert isinstance(cont, NormalScores)
    binary = fit_transform(np.array([0.0, 1.0, 1.0]), ColumnKind.BINARY)
    assert isinstance(binary, LatentThresholds)


def test_constant_column_degenerates_to_a_point_mass():
    t = NormalScores.fit(np.full(10, 7.0))
    assert t.inverse(np.array([-3.0, 0.0, 3.0])).tolist() == [7.0, 7.0, 7.0]
