import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ionbath.detection import (
    PRESETS,
    CountRecord,
    DetectionModel,
    NonInvertibleError,
    Uncertainty,
    binomial_interval,
    forward_model,
    invert,
    invert_detailed,
    preset,
    propagate_correction_error,
    sample_counts,
)


def test_forward_examples():
    ideal = PRESETS["ideal"]
    x = np.linspace(0, 1, 11)
    np.testing.assert_array_equal(forward_model(x, ideal), x)
    assert forward_model(1.0, DetectionModel(0.98, 0.07)) == pytest.approx(0.98, abs=1e-15)
    assert forward_model(0.0, DetectionModel(0.81, 0.03)) == pytest.approx(0.03, abs=1e-15)


def test_round_trip_random_models():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        lo, hi = np.sort(rng.uniform(0, 1, 2))
        if hi - lo < 1e-3:
            continue
        m = DetectionModel(hi, lo)
        p = rng.uniform()
        assert invert(forward_model(p, m), m) == pytest.approx(p, abs=1e-12)


def test_invert_limits_and_clamping():
    m = PRESETS["yb174_f2_bath"]
    assert invert(0.03, m) == pytest.approx(0.0, abs=1e-15)
    c = invert_detailed(0.01, m)
    assert c.value == 0.0 and c.out_of_range and c.raw < 0
    c = invert_detailed(np.array([0.5, 0.9]), m)
    assert list(c.out_of_range) == [False, True]
    assert c.value[1] == 1.0


def test_noninvertible_models_rejected():
    with pytest.raises(NonInvertibleError):
        DetectionModel(0.5, 0.5)
    with pytest.raises(NonInvertibleError):
        DetectionModel(0.2, 0.6)
    with pytest.raises(ValueError):
        DetectionModel(1.2, 0.0)
    with pytest.raises(KeyError):
        preset("nope")


def test_hyperfine_steady_state_correction():
    # a true F=1 population of 0.163 observed through the 171Yb+ efficiencies
    m = PRESETS["yb171_hyperfine"]
    observed_dark = forward_model(1 - 0.163, m)
    assert 1 - invert(observed_dark, m) == pytest.approx(0.163, abs=1e-12)
    assert 1 - observed_dark == pytest.approx(0.02 + 0.163 * 0.91, abs=1e-12)


def test_binomial_interval_examples():
    lo, hi = binomial_interval(CountRecord(20, 0))
    assert lo == 0.0 and hi > 0
    lo, hi = binomial_interval(CountRecord(3000, 1500))
    assert (hi - lo) / 2 == pytest.approx(math.sqrt(0.25 / 3000), rel=0.01)
    a = binomial_interval(CountRecord(50, 13))
    b = binomial_interval(CountRecord(50, 37))
    assert a[0] == pytest.approx(1 - b[1], abs=1e-14)
    assert a[1] == pytest.approx(1 - b[0], abs=1e-14)
    with pytest.raises(ValueError):
        binomial_interval(CountRecord(10, 11))


def test_binomial_interval_wilson_closed_form():
    # Wilson at 95%: closed form written out independently
    n, k, z = 100, 30, 1.959963984540054
    p = k / n
    centre = (k + z * z / 2) / (n + z * z)
    half = z * math.sqrt(n) / (n + z * z) * math.sqrt(p * (1 - p) + z * z / (4 * n))
    lo, hi = binomial_interval(CountRecord(n, k), 0.95)
    assert lo == pytest.approx(centre - half, rel=1e-12)
    assert hi == pytest.approx(centre + half, rel=1e-12)


@pytest.mark.parametrize("p", [0.05, 0.3, 0.6])
def test_wilson_one_sigma_coverage(p):
    rng = np.random.default_rng(123)
    n = 3000
    hits = 0
    reps = 4000
    for k in rng.binomial(n, p, reps):
        lo, hi = binomial_interval(CountRecord(n, int(k)))
        hits += lo <= p <= hi
    assert 0.66 <= hits / reps <= 0.71


def test_propagation_reduces_to_binomial():
    m = DetectionModel(0.9, 0.1)
    p, s = propagate_correction_error(CountRecord(1000, 400), m, (0.0, 0.0))
    assert p == pytest.approx(0.375)
    assert s == pytest.approx(math.sqrt(0.4 * 0.6 / 1000) / 0.8, rel=1e-12)
    p, s = propagate_correction_error(CountRecord(1000, 400), PRESETS["ideal"])
    assert p == 0.4
    assert s == pytest.approx(math.sqrt(0.24 / 1000), rel=1e-12)


def resampled_sigma(rec, model, rng, n=200_000):
    pd = rng.binomial(rec.n_trials, rec.n_dark / rec.n_trials, n) / rec.n_trials
    eta_d = model.eta_dark_given_down + model.sigma_down.sample(rng, n)
    eta_u = model.eta_dark_given_up + model.sigma_up.sample(rng, n)
    return np.std((pd - eta_u) / (eta_d - eta_u))


def test_propagation_against_resampling_oracle():
    rng = np.random.default_rng(2024)
    m = PRESETS["yb174_f2_bath"]
    rec = CountRecord(3000, 1800)
    _, s = propagate_correction_error(rec, m)
    oracle = resampled_sigma(rec, m, rng)
    assert s == pytest.approx(oracle, rel=0.10)


def test_one_sided_uncertainty_is_half_normal():
    u = Uncertainty(0.01, one_sided=True)
    x = u.sample(np.random.default_rng(1), 200_000)
    assert np.all(x >= 0)
    assert np.std(x) == pytest.approx(u.std, rel=0.01)
    assert u.std == pytest.approx(0.01 * math.sqrt(1 - 2 / math.pi))


@given(st.floats(0, 1), st.integers(1, 5000))
def test_sample_counts_in_range(p, n):
    k = sample_counts(p, n, PRESETS["yb171_hyperfine"], np.random.default_rng(0))
    assert 0 <= k <= n
