"""State detection: true spin populations <-> observed dark fractions.

The lower qubit state (``down``: the Zeeman ``m_J=-1/2`` level or the
hyperfine ``|0,0>``) is the one that should appear dark. A
:class:`DetectionModel` holds the two probabilities of registering
"dark": ``eta_dark_given_down`` for a true dark state and
``eta_dark_given_up`` for a true bright state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats

ONE_SIGMA = float(stats.norm.cdf(1.0) - stats.norm.cdf(-1.0))


class NonInvertibleError(ValueError):
    pass


@dataclass(frozen=True)
class Uncertainty:
    """1-sigma uncertainty of an efficiency.

    ``one_sided=True`` stands for a bound such as ``0.00 + 0.01``; it is
    treated as a half-normal distribution of scale ``sigma`` pointing
    upwards.
    """

    sigma: float = 0.0
    one_sided: bool = False

    @property
    def std(self):
        if self.one_sided:
            return self.sigma * np.sqrt(1.0 - 2.0 / np.pi)
        return self.sigma

    def sample(self, rng, size):
        z = rng.standard_normal(size) * self.sigma
        return np.abs(z) if self.one_sided else z


@dataclass(frozen=True)
class DetectionModel:
    eta_dark_given_down: float = 1.0
    eta_dark_given_up: float = 0.0
    sigma_down: Uncertainty = Uncertainty()
    sigma_up: Uncertainty = Uncertainty()

    def __post_init__(self):
        if not 0.0 <= self.eta_dark_given_up <= 1.0 or not 0.0 <= self.eta_dark_given_down <= 1.0:
            raise ValueError("efficiencies must lie in [0, 1]")
        if not self.eta_dark_given_down > self.eta_dark_given_up:
            raise NonInvertibleError(
                "eta_dark_given_down must exceed eta_dark_given_up for the "
                "correction to be invertible")

    @property
    def span(self):
        return self.eta_dark_given_down - self.eta_dark_given_up

    def forward(self, p_down):
        return forward_model(p_down, self)

    def invert(self, p_dark):
        return invert(p_dark, self)


#: Efficiency tables for the named measurement configurations.
PRESETS = {
    "ideal": DetectionModel(1.0, 0.0),
    "yb174_f2_bath": DetectionModel(0.81, 0.03, Uncertainty(0.01), Uncertainty(0.01)),
    "yb174_f1_bath": DetectionModel(0.90, 0.00, Uncertainty(0.01), Uncertainty(0.01, one_sided=True)),
    "yb171_hyperfine": DetectionModel(0.98, 0.07, Uncertainty(0.01), Uncertainty(0.03)),
}


def preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown detection preset {name!r}; choose from {sorted(PRESETS)}") from None


class CountRecord(NamedTuple):
    n_trials: int
    n_dark: int

    @property
    def p_dark(self):
        return self.n_dark / self.n_trials

    @property
    def p_bright(self):
        return 1.0 - self.p_dark

    def validate(self):
        if self.n_trials < 1 or not 0 <= self.n_dark <= self.n_trials:
            raise ValueError(f"invalid count record {tuple(self)}")
        return self


class Correction(NamedTuple):
    value: np.ndarray | float
    raw: np.ndarray | float
    out_of_range: np.ndarray | bool


def forward_model(p_down, model: DetectionModel):
    """Observed dark probability for a true ``down`` population ``p_down``."""
    p = np.asarray(p_down, dtype=float)
    out = model.eta_dark_given_down * p + model.eta_dark_given_up * (1.0 - p)
    return out if out.ndim else float(out)


def invert_detailed(p_dark_obs, model: DetectionModel) -> Correction:
    """Efficiency-corrected ``down`` population, with the unclamped value kept."""
    raw = (np.asarray(p_dark_obs, dtype=float) - model.eta_dark_given_up) / model.span
    value = np.clip(raw, 0.0, 1.0)
    flag = (raw < 0) | (raw > 1)
    if raw.ndim == 0:
        return Correction(float(value), float(raw), bool(flag))
    return Correction(value, raw, flag)


def invert(p_dark_obs, model: DetectionModel):
    return invert_detailed(p_dark_obs, model).value


def _z(confidence):
    return float(stats.norm.ppf(0.5 + confidence / 2.0))


def binomial_interval(rec: CountRecord, confidence=ONE_SIGMA):
    """Wilson score interval for the dark probability of ``rec``.

    The default level is one standard deviation (about 68.3 %).
    """
    n, k = CountRecord(*rec).validate()
    z = _z(confidence)
    p = k / n
    denom = 1.0 + z**2 / n
    centre = (p + z**2 / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z**2 / (4 * n**2)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def propagate_correction_error(rec: CountRecord, model: DetectionModel, uncertainties=None):
    """Corrected ``p_down`` and its first-order 1-sigma error.

    Binomial error of the dark fraction and the efficiency uncertainties
    are combined in quadrature. ``uncertainties`` is a pair
    ``(sigma_down, sigma_up)`` of :class:`Uncertainty` or floats and
    defaults to the ones stored on ``model``. The returned value is not
    clamped.
    """
    n, k = CountRecord(*rec).validate()
    if uncertainties is None:
        u_down, u_up = model.sigma_down, model.sigma_up
    else:
        u_down, u_up = (u if isinstance(u, Uncertainty) else Uncertainty(u) for u in uncertainties)
    pd = k / n
    D = model.span
    p_down = (pd - model.eta_dark_given_up) / D
    d_pd = 1.0 / D
    d_up = (pd - model.eta_dark_given_down) / D**2
    d_down = -(pd - model.eta_dark_given_up) / D**2
    var = (d_pd**2 * pd * (1 - pd) / n
           + d_up**2 * u_up.std**2
           + d_down**2 * u_down.std**2)
    return p_down, float(np.sqrt(var))


def sample_counts(p_down, n_trials, model: DetectionModel, rng):
    """Draw dark counts for true populations ``p_down`` (binomial readout)."""
    return rng.binomial(n_trials, forward_model(p_down, model))
