"""Fitting relaxation curves, Ramsey fringes and contrast decays.

All count data are fitted in observed space: the model population is
passed through the detection forward model and compared with the raw
dark fractions. Weights are binomial variances evaluated at the model
prediction and refreshed between least-squares passes (iteratively
reweighted least squares).

The optimiser is a small damped Gauss-Newton (Levenberg-Marquardt)
loop with box constraints enforced by projection.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .detection import PRESETS, CountRecord, DetectionModel, ONE_SIGMA, forward_model, invert
from .rates import HYPERFINE_LABELS, FourLevelRates, TwoLevelRates, decompose_rates, n_level_evolution

#: Relative systematic uncertainty of all times in t_L (absolute density calibration).
TIME_SYSTEMATIC = 0.40

MAX_ITER = 200
XTOL = 1e-10
FD_STEP = 1e-6


class FitError(RuntimeError):
    """The optimiser did not converge; ``last`` holds the final iterate."""

    def __init__(self, msg, last=None):
        super().__init__(msg)
        self.last = last


class DegeneracyError(FitError):
    """The Jacobian is singular; ``combination`` names the unidentifiable direction."""

    def __init__(self, msg, combination, last=None):
        super().__init__(msg, last)
        self.combination = combination


class FitWarning(UserWarning):
    pass


# Data containers -------------------------------------------------------------

@dataclass
class MeasurementSet:
    """Count records at increasing abscissae (time in t_L or detuning in Hz).

    ``channel`` names the state whose population reads out as dark:
    ``"down"`` for the plain qubit measurement, or one of the hyperfine
    labels for Zeeman-resolved data (a pi pulse swaps that state with
    |0,0> before detection).
    """

    x: np.ndarray
    records: list
    x_name: str = "t_over_tL"
    channel: str = "down"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.records = [CountRecord(int(n), int(k)).validate() for n, k in self.records]
        if self.x.ndim != 1 or len(self.x) != len(self.records):
            raise ValueError("x and records must have the same length")
        if self.x_name == "t_over_tL":
            if np.any(self.x < 0) or np.any(np.diff(self.x) <= 0):
                raise ValueError("times must be >= 0 and strictly increasing")

    @classmethod
    def from_arrays(cls, x, n_trials, n_dark, **kw):
        n_trials = np.broadcast_to(n_trials, np.shape(x))
        return cls(x, list(zip(n_trials, n_dark)), **kw)

    @property
    def n_trials(self):
        return np.array([r.n_trials for r in self.records], dtype=float)

    @property
    def n_dark(self):
        return np.array([r.n_dark for r in self.records], dtype=float)

    @property
    def p_dark(self):
        return self.n_dark / self.n_trials

    def __len__(self):
        return len(self.records)

    def resampled(self, rng):
        """Parametric binomial resample of every record."""
        k = rng.binomial(self.n_trials.astype(np.int64), self.p_dark)
        return MeasurementSet(self.x, list(zip(self.n_trials.astype(int), k)), self.x_name,
                              self.channel, dict(self.metadata))

    def to_csv(self, comments=()):
        buf = io.StringIO()
        for c in comments:
            buf.write(f"# {c}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.x_name, "n_trials", "n_dark"])
        for x, r in zip(self.x, self.records):
            w.writerow([repr(float(x)), r.n_trials, r.n_dark])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, **kw):
        lines = [l for l in text.splitlines() if l.strip() and not l.lstrip().startswith("#")]
        reader = csv.DictReader(lines)
        fields = reader.fieldnames or []
        x_name = next((f for f in ("t_over_tL", "detuning_hz") if f in fields), None)
        if x_name is None or not {"n_trials", "n_dark"} <= set(fields):
            raise ValueError(f"expected columns t_over_tL|detuning_hz,n_trials,n_dark; got {fields}")
        rows = list(reader)
        x = [float(r[x_name]) for r in rows]
        recs = [(int(r["n_trials"]), int(r["n_dark"])) for r in rows]
        return cls(x, recs, x_name=x_name, **kw)


@dataclass
class FitResult:
    model: str
    names: list
    values: np.ndarray
    covariance: np.ndarray
    reduced_chi_square: float
    residuals: np.ndarray
    n_iterations: int
    flags: list = field(default_factory=list)
    fixed: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __getitem__(self, name):
        if name in self.fixed:
            return self.fixed[name]
        return float(self.values[self.names.index(name)])

    def sigma(self, name):
        if name in self.fixed:
            return 0.0
        i = self.names.index(name)
        return float(np.sqrt(max(self.covariance[i, i], 0.0)))

    def cov(self, a, b):
        if a in self.fixed or b in self.fixed:
            return 0.0
        return float(self.covariance[self.names.index(a), self.names.index(b)])

    @property
    def params(self):
        d = dict(zip(self.names, map(float, self.values)))
        d.update(self.fixed)
        return d

    def to_dict(self):
        return {
            "model": self.model,
            "parameter_order": list(self.names),
            "parameters": {n: {"value": self[n], "sigma": self.sigma(n)} for n in self.names},
            "fixed": {k: float(v) for k, v in self.fixed.items()},
            "covariance": np.asarray(self.covariance).tolist(),
            "reduced_chi_square": _json_float(self.reduced_chi_square),
            "residuals": np.asarray(self.residuals).tolist(),
            "n_iterations": int(self.n_iterations),
            "flags": list(self.flags),
            "metadata": self.metadata,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _json_float(v):
    v = float(v)
    return v if math.isfinite(v) else None


# Optimiser ------------------------------------------------------------------

def _fd_jacobian(f, x, lower, upper):
    J = []
    for i in range(len(x)):
        h = FD_STEP * max(abs(x[i]), 1e-3)
        xp, xm = x.copy(), x.copy()
        xp[i] = min(x[i] + h, upper[i])
        xm[i] = max(x[i] - h, lower[i])
        J.append((f(xp) - f(xm)) / (xp[i] - xm[i]))
    return np.array(J).T


def levenberg_marquardt(f, x0, y, weights, jac=None, lower=None, upper=None,
                        max_iter=MAX_ITER, xtol=XTOL, history=None):
    """Damped Gauss-Newton for ``sum(weights * (f(x) - y)**2)`` with box bounds.

    Returns ``(x, n_iterations)``. ``history``, if a list, receives the
    objective value after every accepted step. Raises :class:`FitError`
    after ``max_iter`` iterations without convergence.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = len(x)
    lower = np.full(n, -np.inf) if lower is None else np.asarray(lower, float)
    upper = np.full(n, np.inf) if upper is None else np.asarray(upper, float)
    x = np.clip(x, lower, upper)
    sw = np.sqrt(weights)
    jac = jac or (lambda z: _fd_jacobian(f, z, lower, upper))

    def cost_of(z):
        r = sw * (f(z) - y)
        return r, float(r @ r)

    r, cost = cost_of(x)
    if history is not None:
        history.append(cost)
    lam = 1e-3
    for it in range(1, max_iter + 1):
        J = sw[:, None] * jac(x)
        g = J.T @ r
        A = J.T @ J
        d = np.maximum(np.diag(A), 1e-12 * max(np.diag(A).max(initial=0.0), 1e-300))
        # parameters pinned at a bound with the descent direction pointing out stay fixed
        free = ~(((x <= lower) & (g > 0)) | ((x >= upper) & (g < 0)))
        if not free.any():
            return x, it
        Af = A[np.ix_(free, free)]
        while True:
            step = np.zeros(n)
            M = Af + lam * np.diag(d[free])
            try:
                step[free] = np.linalg.solve(M, -g[free])
            except np.linalg.LinAlgError:
                step[free] = np.linalg.lstsq(M, -g[free], rcond=None)[0]
            x_new = np.clip(x + step, lower, upper)
            r_new, cost_new = cost_of(x_new)
            if np.isfinite(cost_new) and cost_new <= cost:
                break
            lam *= 4.0
            if lam > 1e16:
                return x, it
        dx = x_new - x
        x, r, cost = x_new, r_new, cost_new
        if history is not None:
            history.append(cost)
        lam = max(lam / 3.0, 1e-12)
        if np.all(np.abs(dx) <= xtol * (np.abs(x) + xtol)) or cost == 0.0:
            return x, it
    raise FitError(f"no convergence after {max_iter} iterations", last=x)


def _covariance(J, weights, names, tol=1e-10):
    """``(J^T W J)^-1``; raises :class:`DegeneracyError` when singular."""
    Jw = np.sqrt(weights)[:, None] * J
    _, s, vt = np.linalg.svd(Jw, full_matrices=False)
    if s.size == 0 or s[-1] <= tol * s[0]:
        v = vt[-1]
        big = np.argsort(-np.abs(v))
        combo = {names[i]: float(v[i]) for i in big if abs(v[i]) > 0.1}
        raise DegeneracyError(
            "singular Jacobian: the combination "
            + " + ".join(f"{c:+.3g}*{k}" for k, c in combo.items())
            + " is not constrained by the data", combo)
    return (vt.T / s**2) @ vt


def _bounded_covariance(J, weights, names, x, lower, upper):
    """Covariance with parameters sitting on a bound held fixed.

    A parameter pinned at a bound is not free to move in the direction the
    data pull it, so the remaining uncertainties are conditional on its
    value (the usual active-set treatment). Pinned entries get zero
    variance; their unconstrained sigma, where defined, is returned as a
    one-sided scale. Returns ``(cov, pinned, one_sided)``.
    """
    x = np.asarray(x, float)
    at = (x <= np.asarray(lower, float)) | (x >= np.asarray(upper, float))
    pinned = [names[i] for i in np.flatnonzero(at)]
    if not pinned:
        return _covariance(J, weights, names), [], {}
    free = ~at
    cov = np.zeros((len(x), len(x)))
    if free.any():
        cov[np.ix_(free, free)] = _covariance(J[:, free], weights, [n for n, f in zip(names, free) if f])
    one_sided = {}
    try:
        full = _covariance(J, weights, names)
        one_sided = {n: float(np.sqrt(full[i, i])) for i, n in enumerate(names) if at[i]}
    except DegeneracyError:
        pass
    return cov, pinned, one_sided


def _apply_bounds_info(res, pinned, one_sided):
    res.flags.extend(f"at_bound:{n}" for n in pinned)
    if one_sided:
        res.metadata["one_sided_sigma"] = one_sided
    return res


def _binomial_weights(p, n):
    p = np.clip(p, 0.5 / n, 1.0 - 0.5 / n)
    return n / (p * (1.0 - p))


def _fit_counts(model, names, x0, lower, upper, data_p, n, f, jac=None, fixed=None,
                max_reweight=20, history=None):
    """IRLS wrapper: binomial weights at the model prediction, refreshed per pass."""
    x = np.asarray(x0, float)
    w = _binomial_weights(f(x), n)
    total_it = 0
    for _ in range(max_reweight):
        x_new, it = levenberg_marquardt(f, x, data_p, w, jac, lower, upper, history=history)
        total_it += it
        w_new = _binomial_weights(f(x_new), n)
        done = np.all(np.abs(x_new - x) <= 1e-9 * (np.abs(x) + 1e-9))
        x, w = x_new, w_new
        if done:
            break
    return _result_at(model, names, x, data_p, n, f, jac, lower, upper, fixed, total_it)


def _result_at(model, names, x, data_p, n, f, jac, lower, upper, fixed=None, n_iterations=0):
    w = _binomial_weights(f(x), n)
    J = jac(x) if jac else _fd_jacobian(f, x, lower, upper)
    cov, pinned, one_sided = _bounded_covariance(J, w, names, x, lower, upper)
    res = np.sqrt(w) * (f(x) - data_p)
    dof = len(data_p) - len(x)
    chi2 = float(res @ res) / dof if dof > 0 else math.nan
    out = FitResult(model, list(names), x, cov, chi2, res, n_iterations, fixed=dict(fixed or {}))
    return _apply_bounds_info(out, pinned, one_sided)


# Relaxation ---------------------------------------------------------------

def two_level_curve(t, p0, p_inf, T1):
    e = np.exp(-np.asarray(t, float) / T1)
    return p_inf + (p0 - p_inf) * e


def _initial_two_level(t, p_up):
    tail = max(2, len(t) // 4)
    p_inf = float(np.clip(np.mean(p_up[-tail:]), 0.0, 1.0))
    p0 = float(np.clip(p_up[0], 0.0, 1.0))
    dev = np.abs(p_up - p_inf)
    keep = dev > max(0.1 * abs(p0 - p_inf), 1e-6)
    keep[0] = True
    T1 = (t[-1] - t[0]) / 3.0 if t[-1] > t[0] else 1.0
    if keep.sum() >= 2:
        slope = np.polyfit(t[keep], np.log(dev[keep] + 1e-12), 1)[0]
        if slope < 0:
            T1 = -1.0 / slope
    return np.array([p0, p_inf, T1])


def _detection(detection):
    if detection is None:
        return PRESETS["ideal"]
    if isinstance(detection, str):
        return PRESETS[detection]
    return detection


def fit_relaxation(data, model="two-level", detection=None, **kw):
    """Fit a relaxation curve; returns T1, p0, p_inf (or four-level rates).

    ``data`` is a :class:`MeasurementSet` for the two-level model, or a
    sequence / dict of channel-tagged sets for the four-level model.
    Two-level populations refer to the *bright* state ``up``; the dark
    fraction is ``forward(1 - p_up)``.
    """
    det = _detection(detection)
    if model in ("two-level", "two_level"):
        return _fit_two_level(data, det, **kw)
    if model in ("four-level", "four_level"):
        return _fit_four_level(data, det, **kw)
    raise ValueError(f"unknown model {model!r}")


def _fit_two_level(data: MeasurementSet, det: DetectionModel, history=None):
    t = data.x
    if len(np.unique(t)) < 4:
        raise ValueError("two-level fit needs at least 4 distinct time points")
    span = det.span

    def f(x):
        return forward_model(1.0 - two_level_curve(t, *x), det)

    def jac(x):
        p0, p_inf, T1 = x
        e = np.exp(-t / T1)
        dp = np.column_stack([e, 1.0 - e, (p0 - p_inf) * e * t / T1**2])
        return -span * dp

    p_up = 1.0 - invert(data.p_dark, det)
    x0 = _initial_two_level(t, p_up)
    res = _fit_counts("two-level", ["p0", "p_inf", "T1"], x0, [0.0, 0.0, 1e-9],
                      [1.0, 1.0, np.inf], data.p_dark, data.n_trials, f, jac, history=history)
    res.metadata.update(data.metadata)
    res.metadata["time_systematic_relative"] = TIME_SYSTEMATIC
    return res


def fit_corrected_two_level(data: MeasurementSet, detection):
    """Correct-then-fit variant: invert the detection model first, then fit
    the bright population with binomial weights rescaled by the detection
    span. Used to cross-check the observed-space fit."""
    det = _detection(detection)
    t = data.x
    p_up = 1.0 - invert(data.p_dark, det)

    def f(x):
        return two_level_curve(t, *x)

    def jac(x):
        p0, p_inf, T1 = x
        e = np.exp(-t / T1)
        return np.column_stack([e, 1.0 - e, (p0 - p_inf) * e * t / T1**2])

    n_eff = data.n_trials
    x0 = _initial_two_level(t, p_up)
    x = x0
    for _ in range(20):
        pd = forward_model(1.0 - f(x), det)
        w = _binomial_weights(pd, n_eff) * det.span**2
        x_new, _ = levenberg_marquardt(f, x, p_up, w, jac, [0, 0, 1e-9], [1, 1, np.inf])
        done = np.all(np.abs(x_new - x) <= 1e-9 * (np.abs(x) + 1e-9))
        x = x_new
        if done:
            break
    names = ["p0", "p_inf", "T1"]
    cov, pinned, one_sided = _bounded_covariance(jac(x), w, names, x, [0, 0, 1e-9], [1, 1, np.inf])
    res = np.sqrt(w) * (f(x) - p_up)
    dof = len(t) - 3
    out = FitResult("two-level-corrected", names, x, cov,
                    float(res @ res) / dof if dof > 0 else math.nan, res, 0)
    return _apply_bounds_info(out, pinned, one_sided)


def channel_population(pops, channel):
    """Population read out as dark for a Zeeman-resolved channel."""
    if channel in ("down", "|0,0>"):
        return pops[:, 0]
    if channel in HYPERFINE_LABELS:
        return pops[:, HYPERFINE_LABELS.index(channel)]
    raise ValueError(f"unknown channel {channel!r}")


def _fit_four_level(data, det: DetectionModel, x0=None, steady_p1=None, history=None):
    sets = list(data.values()) if isinstance(data, dict) else list(data)
    if isinstance(data, dict):
        for ch, s in data.items():
            s.channel = ch
    times = np.unique(np.concatenate([s.x for s in sets]))
    if len(times) < 8:
        raise ValueError("four-level fit needs at least 8 distinct time points")
    names = list(FourLevelRates.NAMES)
    fixed = {}
    if steady_p1 is not None:
        names.remove("pump")

    def rates_of(x):
        d = dict(zip(names, x))
        if steady_p1 is not None:
            d["pump"] = FourLevelRates.pump_for_steady_p1(d["decay"], steady_p1)
        return FourLevelRates(**{k: max(v, 0.0) for k, v in d.items()})

    idx = [np.searchsorted(times, s.x) for s in sets]

    def f(x):
        pops = n_level_evolution(rates_of(x).rate_matrix(), np.array([0.0, 0.0, 1.0, 0.0]), times)
        return np.concatenate([forward_model(channel_population(pops, s.channel)[i], det)
                               for s, i in zip(sets, idx)])

    if x0 is None:
        x0 = np.array([0.3, 0.3, 0.3, 0.05, 0.3, 0.02])
    x0 = np.asarray(x0, float)
    if steady_p1 is not None and len(x0) == 6:
        x0 = np.delete(x0, 5)
    y = np.concatenate([s.p_dark for s in sets])
    n = np.concatenate([s.n_trials for s in sets])
    k = len(names)
    res = _fit_counts("four-level", names, x0, np.zeros(k), np.full(k, np.inf), y, n, f,
                      history=history)
    if steady_p1 is not None:
        res.fixed["pump"] = rates_of(res.values).pump
        res.metadata["steady_p1"] = steady_p1
    res.metadata["time_systematic_relative"] = TIME_SYSTEMATIC
    return res


# Ramsey -----------------------------------------------------------------------

def _fringe_bright(d, C, nu0, period, phase):
    return 0.5 + 0.5 * C * np.cos(2 * np.pi * (d - nu0) / period + phase)


def _as_scan(scan):
    if isinstance(scan, MeasurementSet):
        return scan
    d, recs = zip(*scan)
    order = np.argsort(d)
    return MeasurementSet(np.asarray(d)[order], [recs[i] for i in order], x_name="detuning_hz")


def fit_fringe(scan, detection=None, phase=0.0, period_guess=None):
    """Fit contrast, centre frequency and period of a Ramsey fringe scan.

    The phase offset is a known property of the sequence and is held at
    ``phase``; with it free, phase and centre frequency are degenerate.
    The centre is reported within half a period of zero detuning.
    """
    data = _as_scan(scan)
    det = _detection(detection)
    d = data.x
    if len(d) < 6:
        raise ValueError("fringe fit needs at least 6 points")
    span_hz = d.max() - d.min()
    p_bright = 1.0 - invert(data.p_dark, det)
    if period_guess is None:
        period_guess = _periodogram_period(d, p_bright, span_hz)
    if span_hz < period_guess * (1 - 1e-9):
        raise ValueError("scan must span at least one fringe period")
    C0, nu0 = _linear_phase_init(d, p_bright, period_guess, phase)
    s = det.span

    def f(x):
        return forward_model(1.0 - _fringe_bright(d, *x, phase), det)

    def jac(x):
        C, nu0, P = x
        arg = 2 * np.pi * (d - nu0) / P + phase
        c, sn = np.cos(arg), np.sin(arg)
        dC = 0.5 * c
        dnu = 0.5 * C * sn * 2 * np.pi / P
        dP = 0.5 * C * sn * 2 * np.pi * (d - nu0) / P**2
        return -s * np.column_stack([dC, dnu, dP])

    names = ["contrast", "center_hz", "period_hz"]
    # periods below the sampling Nyquist limit or far beyond the scan are not resolvable
    spacing = np.diff(d)
    lower = [0.0, -np.inf, 2.0 * float(np.min(spacing[spacing > 0]))]
    upper = [1.0, np.inf, 2.0 * span_hz]
    # a free period and centre find some structure in pure noise, so a low
    # SNR also shows as a small chi-square gain over a flat line
    flat = np.full_like(data.p_dark, np.sum(data.n_dark) / np.sum(data.n_trials))
    chi2_flat = float(_binomial_weights(flat, data.n_trials) @ (data.p_dark - flat) ** 2)
    gain_needed = stats.chi2.ppf(0.95, 3)
    flags = []
    try:
        res = _fit_counts("fringe", names, [C0, nu0, period_guess], lower, upper,
                          data.p_dark, data.n_trials, f, jac, fixed={"phase": phase})
    except FitError as exc:
        if exc.last is None:
            raise
        # on a flat scan the period wanders along a near-flat valley; report the last iterate
        res = _result_at("fringe", names, exc.last, data.p_dark, data.n_trials, f, jac,
                         lower, upper, {"phase": phase}, MAX_ITER)
        if chi2_flat - float(res.residuals @ res.residuals) >= gain_needed:
            raise
        flags.append("not_converged")
    P = res["period_hz"]
    wrapped = (res["center_hz"] + P / 2) % P - P / 2
    res.values[1] = wrapped
    gain = chi2_flat - float(res.residuals @ res.residuals)
    if res["contrast"] < 2.0 * res.sigma("contrast") or gain < gain_needed:
        flags.insert(0, "low_snr")
        warnings.warn("fringe contrast is consistent with zero", FitWarning)
    res.flags.extend(flags)
    res.metadata["wait_time_s"] = 1.0 / P
    return res


def _periodogram_period(d, y, span_hz):
    diffs = np.diff(np.sort(d))
    nyquist = 0.5 / np.min(diffs[diffs > 0])
    freqs = np.linspace(1.0 / span_hz, nyquist, 4000)
    best, best_f = np.inf, freqs[0]
    for fr in freqs:
        A = np.column_stack([np.ones_like(d), np.cos(2 * np.pi * fr * d), np.sin(2 * np.pi * fr * d)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        r = y - A @ coef
        if r @ r < best:
            best, best_f = r @ r, fr
    return 1.0 / best_f


def _linear_phase_init(d, y, period, phase):
    """Contrast and centre from a linear fit of the fringe at fixed period."""
    w = 2 * np.pi / period
    A = np.column_stack([np.ones_like(d), np.cos(w * d), np.sin(w * d)])
    (_, a, b), *_ = np.linalg.lstsq(A, y - 0.5, rcond=None)
    # 0.5 C cos(w d - w nu0 + phase) = a cos(w d) + b sin(w d)
    C = float(np.clip(2 * np.hypot(a, b), 1e-3, 1.0))
    theta = math.atan2(-b, a)  # = phase - w nu0
    nu0 = (phase - theta) / w
    nu0 = (nu0 + period / 2) % period - period / 2
    return C, nu0


def frequency_shift(fit_a: FitResult, fit_b: FitResult):
    """Centre-frequency difference of two fringe fits and its 1-sigma error."""
    shift = fit_b["center_hz"] - fit_a["center_hz"]
    return shift, math.hypot(fit_a.sigma("center_hz"), fit_b.sigma("center_hz"))


def fit_contrast_decay(points, C0_fixed=None):
    """Fit ``C0 exp(-t / T2)`` to (t_over_tL, contrast, sigma) points."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("points must be (t, contrast, sigma) triples")
    t, c, s = pts.T
    if len(t) < 2:
        raise ValueError("need at least 2 points")
    if np.any(s <= 0):
        raise ValueError("sigma must be positive for every point")
    flags = []
    order = np.argsort(t)
    if np.all(np.diff(c[order]) > 0):
        flags.append("increasing_contrast")
        warnings.warn("contrast increases with time", FitWarning)
    w = 1.0 / s**2
    pos = c > 0
    if pos.sum() >= 2 and np.ptp(t[pos]) > 0:
        slope, icpt = np.polyfit(t[pos], np.log(c[pos]), 1, w=np.sqrt(w[pos]) * c[pos])
        T2_0 = -1.0 / slope if slope < 0 else np.ptp(t)
        C0_0 = math.exp(icpt)
    else:
        T2_0, C0_0 = max(np.ptp(t), 1.0), max(c.max(), 1e-3)

    if C0_fixed is None:
        names = ["C0", "T2"]

        def f(x):
            return x[0] * np.exp(-t / x[1])

        def jac(x):
            e = np.exp(-t / x[1])
            return np.column_stack([e, x[0] * e * t / x[1] ** 2])

        x0, lo, hi = [C0_0, T2_0], [0.0, 1e-12], [1.0, np.inf]
        fixed = {}
    else:
        names = ["T2"]

        def f(x):
            return C0_fixed * np.exp(-t / x[0])

        def jac(x):
            e = np.exp(-t / x[0])
            return (C0_fixed * e * t / x[0] ** 2)[:, None]

        x0, lo, hi = [T2_0], [1e-12], [np.inf]
        fixed = {"C0": C0_fixed}
    try:
        x, it = levenberg_marquardt(f, x0, c, w, jac, lo, hi)
    except FitError as exc:
        # growing contrast pushes T2 towards infinity; report where the fit stopped
        if "increasing_contrast" not in flags:
            raise
        x, it = exc.last, MAX_ITER
        flags.append("not_converged")
    pinned, one_sided = [], {}
    try:
        cov, pinned, one_sided = _bounded_covariance(jac(x), w, names, x, lo, hi)
    except DegeneracyError:
        if "increasing_contrast" not in flags:
            raise
        J = np.sqrt(w)[:, None] * jac(x)
        cov = np.linalg.pinv(J.T @ J)
        flags.append("degenerate")
    res = np.sqrt(w) * (f(x) - c)
    dof = len(t) - len(x)
    out = FitResult("contrast-decay", names, x, cov,
                    float(res @ res) / dof if dof > 0 else math.nan, res, it, flags, fixed,
                    {"time_systematic_relative": TIME_SYSTEMATIC})
    return _apply_bounds_info(out, pinned, one_sided)


# Rate decomposition -------------------------------------------------------------

@dataclass(frozen=True)
class RateDecomposition:
    """Spin-exchange / spin-relaxation split with first-order uncertainties.

    ``se_T1`` and ``sr_T1`` are the rates in units of 1/T1 (i.e. the
    dimensionless coefficients); ``rates`` holds absolute rates in 1/t_L.
    """

    rates: TwoLevelRates
    se_T1: float
    se_T1_sigma: float
    sr_T1: float
    sr_T1_sigma: float
    down_se_sigma: float
    sr_sigma: float


def derive_rate_decomposition(fit, stretched=True):
    """Apply :func:`decompose_rates` to a fit holding T1 and p_inf.

    ``fit`` is a :class:`FitResult` or a mapping with keys ``T1``,
    ``p_inf`` and optional ``T1_sigma``, ``p_inf_sigma``, ``cov``.
    """
    if isinstance(fit, FitResult):
        T1, p = fit["T1"], fit["p_inf"]
        sT, sp, c = fit.sigma("T1"), fit.sigma("p_inf"), fit.cov("T1", "p_inf")
    else:
        T1, p = fit["T1"], fit["p_inf"]
        sT, sp, c = fit.get("T1_sigma", 0.0), fit.get("p_inf_sigma", 0.0), fit.get("cov", 0.0)
    rates = decompose_rates(T1, p, stretched)
    cov = np.array([[sp**2, c], [c, sT**2]])  # (p_inf, T1)
    g_se = np.array([2.0 / T1, -(2 * p - 1) / T1**2])
    g_sr = np.array([-1.0 / T1, -(1 - p) / T1**2])
    return RateDecomposition(
        rates=rates,
        se_T1=2 * p - 1,
        se_T1_sigma=2 * sp,
        sr_T1=1 - p,
        sr_T1_sigma=sp,
        down_se_sigma=float(np.sqrt(max(g_se @ cov @ g_se, 0.0))),
        sr_sigma=float(np.sqrt(max(g_sr @ cov @ g_sr, 0.0))),
    )


# Bootstrap --------------------------------------------------------------------

@dataclass
class BootstrapSummary:
    names: list
    samples: np.ndarray
    point: dict
    n_failed: int
    confidence: float

    def std(self, name):
        return float(np.std(self.samples[:, self.names.index(name)], ddof=1)) if len(self.samples) > 1 else 0.0

    def interval(self, name):
        a = (1 - self.confidence) / 2
        col = self.samples[:, self.names.index(name)]
        return float(np.quantile(col, a)), float(np.quantile(col, 1 - a))

    def mean(self, name):
        return float(np.mean(self.samples[:, self.names.index(name)]))


def bootstrap(data, fitter, n_resamples=200, seed=0, confidence=ONE_SIGMA, max_failure=0.2):
    """Parametric binomial bootstrap of a fit.

    Every record is redrawn from ``Binomial(n_trials, n_dark / n_trials)``;
    resample ``i`` uses ``SeedSequence(seed, spawn_key=(i,))``.
    """
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    point = fitter(data)
    samples, failed = [], 0
    for i in range(n_resamples):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i,)))
        try:
            r = fitter(data.resampled(rng))
        except (FitError, ValueError, np.linalg.LinAlgError):
            failed += 1
            continue
        samples.append([r[n] for n in point.names])
    if failed > max_failure * n_resamples:
        raise FitError(f"{failed} of {n_resamples} bootstrap fits failed")
    return BootstrapSummary(list(point.names), np.array(samples), point.params, failed, confidence)
