"""Ramsey interferometry on the 171Yb+ clock transition.

The ion starts in |0,0>, a pi/2 pulse opens the superposition, the ion
waits ``wait_time`` in the bath and a second pi/2 pulse closes the
interferometer. Pulses are instantaneous. Any spin-changing collision
during the exposure destroys the coherence of that run completely;
elastic forward scattering leaves it untouched.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from . import constants as const
from .collisions import DEFAULT_BLOCK_SIZE, block_rng
from .detection import CountRecord, DetectionModel, PRESETS, forward_model

DEFAULT_WAIT_TIME = 27e-3
DEFAULT_CONTRAST = 0.55
CLOCK_FREQUENCY = 12.6e9


@dataclass(frozen=True)
class RamseySettings:
    """Ramsey sequence parameters.

    ``wait_time`` in s, ``contrast`` is the collision-free visibility,
    ``phase`` in rad and ``decoherence_rate`` in 1/t_L.
    """

    wait_time: float = DEFAULT_WAIT_TIME
    contrast: float = DEFAULT_CONTRAST
    phase: float = 0.0
    decoherence_rate: float = 0.0
    center: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.contrast <= 1.0:
            raise ValueError("contrast must lie in [0, 1]")
        if not self.wait_time > 0:
            raise ValueError("wait_time must be positive")
        if self.decoherence_rate < 0:
            raise ValueError("decoherence_rate must be >= 0")

    @property
    def fringe_period(self):
        """Detuning period of the fringes in Hz."""
        return 1.0 / self.wait_time

    @property
    def T2(self):
        return 1.0 / self.decoherence_rate if self.decoherence_rate > 0 else math.inf


def fringe_probability(delta, settings: RamseySettings, exposure=0.0):
    """Probability to find the ion in F=1 at detuning ``delta`` (Hz).

    ``exposure`` is the bath interaction time in t_L; the contrast is
    reduced by ``exp(-decoherence_rate * exposure)``.
    """
    C = contrast_decay(exposure, settings.contrast, settings.T2)
    arg = 2.0 * math.pi * (np.asarray(delta, dtype=float) - settings.center) * settings.wait_time
    out = 0.5 + 0.5 * C * np.cos(arg + settings.phase)
    return out if out.ndim else float(out)


def contrast_decay(t, C0, T2):
    """C0 exp(-t / T2); ``T2 = inf`` means no decay."""
    if not T2 > 0:
        raise ValueError("T2 must be positive")
    out = C0 * np.exp(-np.asarray(t, dtype=float) / T2)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ContrastEstimate:
    exposure: float
    contrast: float
    stderr: float
    survival: float
    n: int


def simulate_ramsey_mc(settings: RamseySettings, rate_excited, exposure, N, seed=0,
                       rate_ground=0.0, block_size=DEFAULT_BLOCK_SIZE):
    """Monte Carlo estimate of the Ramsey contrast after ``exposure`` t_L.

    Langevin collisions arrive at unit rate (time in t_L). A collision
    hits the superposition spin-changingly with probability
    ``rate_excited + rate_ground`` (rates of |1,0> and |0,0> in 1/t_L,
    their sum at most 1). A run keeps its coherence only if no such
    collision happened.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    p_hit = rate_excited + rate_ground
    if not 0.0 <= p_hit <= 1.0:
        raise ValueError("total spin-changing rate must lie in [0, 1] per t_L")
    survivors = 0
    for b in range(math.ceil(N / block_size)):
        n = min(block_size, N - b * block_size)
        rng = block_rng(seed, b)
        k = rng.poisson(exposure, n)
        hits = rng.binomial(k, p_hit)
        survivors += int(np.count_nonzero(hits == 0))
    s = survivors / N
    return ContrastEstimate(exposure, settings.contrast * s,
                            settings.contrast * math.sqrt(s * (1 - s) / N), s, N)


def simulate_fringe_scan(detunings, settings: RamseySettings, n_trials, rng, exposure=0.0,
                         detection: DetectionModel = PRESETS["ideal"]):
    """Binomial dark counts for a fringe scan.

    Dark means |0,0>, so the dark probability is the detection forward
    model applied to ``1 - fringe_probability``.
    """
    p_bright = fringe_probability(detunings, settings, exposure)
    p_dark = forward_model(1.0 - np.asarray(p_bright), detection)
    k = rng.binomial(n_trials, p_dark)
    return [(float(d), CountRecord(int(n_trials), int(x))) for d, x in zip(np.atleast_1d(detunings), k)]


def scan_to_csv(scan, comments=()):
    """CSV with columns detuning_hz, n_trials, n_dark, p_dark, stderr."""
    buf = io.StringIO()
    for c in comments:
        buf.write(f"# {c}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["detuning_hz", "n_trials", "n_dark", "p_dark", "stderr"])
    for d, rec in scan:
        p = rec.n_dark / rec.n_trials
        w.writerow([repr(float(d)), rec.n_trials, rec.n_dark, repr(p),
                    repr(math.sqrt(p * (1 - p) / rec.n_trials))])
    return buf.getvalue()


def shift_bound(resolution_hz, E_hfs=const.GHz_to_J(12.6)):
    """Fractional shift bound ``resolution / (E_hfs / h)``."""
    if resolution_hz < 0 or not E_hfs > 0:
        raise ValueError("need resolution >= 0 and E_hfs > 0")
    return resolution_hz / const.J_to_Hz(E_hfs)


def absolute_shift(fractional, E_hfs=const.GHz_to_J(12.6)):
    """Absolute frequency (Hz) of a fractional shift of the clock transition."""
    if fractional < 0 or not E_hfs > 0:
        raise ValueError("need fractional >= 0 and E_hfs > 0")
    return fractional * const.J_to_Hz(E_hfs)
