import math

import numpy as np
import pytest

from ionbath import constants as const
from ionbath.detection import CountRecord
from ionbath.ramsey import (
    RamseySettings,
    absolute_shift,
    contrast_decay,
    fringe_probability,
    scan_to_csv,
    shift_bound,
    simulate_fringe_scan,
    simulate_ramsey_mc,
)


def test_fringe_examples():
    s = RamseySettings(contrast=1.0)
    assert fringe_probability(0.0, s) == pytest.approx(1.0)
    assert s.fringe_period == pytest.approx(37.037, abs=1e-3)
    d = np.linspace(-100, 100, 17)
    np.testing.assert_allclose(fringe_probability(d, RamseySettings(contrast=0.0)), 0.5)
    # one period later the fringe repeats
    s = RamseySettings(contrast=0.55, phase=0.4, center=3.0)
    np.testing.assert_allclose(fringe_probability(d + s.fringe_period, s), fringe_probability(d, s), atol=1e-12)


def test_contrast_decay_examples():
    assert contrast_decay(0.0, 0.55, 1.4) == 0.55
    assert contrast_decay(2.0, 0.55, 2.0) == pytest.approx(0.55 / math.e)
    assert contrast_decay(1.4, 0.55, 1.4) == pytest.approx(0.2023, abs=1e-4)
    assert contrast_decay(5.0, 0.55, math.inf) == 0.55
    s = RamseySettings(decoherence_rate=1 / 1.4)
    assert fringe_probability(0.0, s, exposure=1.4) == pytest.approx(0.5 + 0.5 * 0.55 / math.e)


def test_mc_zero_rate_keeps_contrast():
    est = simulate_ramsey_mc(RamseySettings(), 0.0, 3.0, 1000)
    assert est.contrast == 0.55 and est.stderr == 0.0


@pytest.mark.parametrize("exposure", [0.5, 1.4, 3.0])
def test_mc_matches_survival_probability(exposure):
    rate = 1 / 1.4
    est = simulate_ramsey_mc(RamseySettings(), rate, exposure, 100_000, seed=5)
    # survival of a Poisson(exposure) train thinned with probability rate
    assert abs(est.contrast - 0.55 * math.exp(-rate * exposure)) < 3 * est.stderr


def test_mc_ground_rate_adds_and_is_deterministic():
    a = simulate_ramsey_mc(RamseySettings(), 0.4, 2.0, 50_000, seed=1, rate_ground=0.3)
    assert abs(a.contrast - 0.55 * math.exp(-0.7 * 2.0)) < 3 * a.stderr
    assert a == simulate_ramsey_mc(RamseySettings(), 0.4, 2.0, 50_000, seed=1, rate_ground=0.3)
    with pytest.raises(ValueError):
        simulate_ramsey_mc(RamseySettings(), 0.8, 1.0, 10, rate_ground=0.3)


def test_shift_bound_examples():
    assert absolute_shift(4e-11) == pytest.approx(0.504, rel=1e-12)
    assert shift_bound(0.0) == 0.0
    assert shift_bound(absolute_shift(3.3e-11)) == pytest.approx(3.3e-11, rel=1e-14)
    assert absolute_shift(1e-10, const.GHz_to_J(6.8)) == pytest.approx(0.68)


def test_fringe_scan_and_csv():
    d = np.linspace(-50, 50, 11)
    scan = simulate_fringe_scan(d, RamseySettings(), 200, np.random.default_rng(0))
    assert len(scan) == 11 and isinstance(scan[0][1], CountRecord)
    text = scan_to_csv(scan, comments=["x"])
    lines = text.splitlines()
    assert lines[1] == "detuning_hz,n_trials,n_dark,p_dark,stderr"
    assert len(lines) == 13
