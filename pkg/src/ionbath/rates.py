"""Population kinetics of the ion spin.

Times and rates in this module are expressed in Langevin units: time in
t_L and rates in 1/t_L. Conversion to seconds happens at the interfaces.

Conventions
-----------
Each state carries an *out* rate. For the two-level qubit the steady
state of the upper level is ``gamma_out_down / (gamma_out_up +
gamma_out_down)``, i.e. the rate that feeds ``|up>`` is the decay of
``|down>``.

A :class:`RateMatrix` stores ``rates[i, j]`` = rate of the transition
``j -> i``. Its generator ``M`` has columns summing to zero so that
``dp/dt = M p``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.sparse.csgraph import connected_components

SE = "SE"
SR = "SR"
_TAGS = (SE, SR)

UP = "up"
DOWN = "down"

#: Hyperfine states of the 171Yb+ ground level, ordered as used by the
#: four-level model.
HYPERFINE_LABELS = ("|0,0>", "|1,-1>", "|1,0>", "|1,1>")


class InconsistentDataError(ValueError):
    """Measured quantities cannot come from the assumed channel structure."""


class NoSteadyStateError(ValueError):
    pass


class MultipleSteadyStatesError(NoSteadyStateError):
    def __init__(self, classes):
        self.classes = classes
        super().__init__(f"generator has {len(classes)} closed classes: {classes}")


class GeneratorError(ValueError):
    """Matrix is not a valid rate-equation generator."""


# Two-level model ----------------------------------------------------------

@dataclass(frozen=True)
class TwoLevelRates:
    """Out-rates of |up> and |down>, each split into spin exchange and relaxation."""

    up_se: float = 0.0
    up_sr: float = 0.0
    down_se: float = 0.0
    down_sr: float = 0.0

    def __post_init__(self):
        for name in ("up_se", "up_sr", "down_se", "down_sr"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @classmethod
    def from_totals(cls, gamma_out_up, gamma_out_down):
        """Rates without a SE/SR split (everything booked as relaxation)."""
        return cls(up_sr=gamma_out_up, down_sr=gamma_out_down)

    @property
    def gamma_out_up(self):
        return self.up_se + self.up_sr

    @property
    def gamma_out_down(self):
        return self.down_se + self.down_sr

    @property
    def total(self):
        return self.gamma_out_up + self.gamma_out_down

    @property
    def T1(self):
        return 1.0 / self.total if self.total > 0 else math.inf

    @property
    def steady_state(self):
        return two_level_steady_state(self)

    def scaled(self, factor):
        return TwoLevelRates(self.up_se * factor, self.up_sr * factor,
                             self.down_se * factor, self.down_sr * factor)

    def to_rate_matrix(self):
        """Embed as a two-state :class:`RateMatrix` with labels (up, down)."""
        rm = RateMatrix.empty([UP, DOWN])
        # down <- up
        rm = rm.with_rate(UP, DOWN, self.up_se, SE).with_rate(UP, DOWN, self.up_sr, SR)
        rm = rm.with_rate(DOWN, UP, self.down_se, SE).with_rate(DOWN, UP, self.down_sr, SR)
        return rm


def two_level_steady_state(rates: TwoLevelRates):
    total = rates.total
    if not total > 0:
        raise NoSteadyStateError("both out-rates are zero")
    return rates.gamma_out_down / total


def two_level_evolution(p_up0, rates: TwoLevelRates, t):
    """Closed-form p_up(t) for the two-level rate equations.

    Accepts scalar or array ``t``.
    """
    if not 0.0 <= p_up0 <= 1.0:
        raise ValueError(f"p_up0 must be a probability, got {p_up0}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    total = rates.total
    if total == 0:
        out = np.full_like(t, p_up0)
    else:
        p_inf = rates.gamma_out_down / total
        decay = np.exp(-t * total)
        out = p_up0 * decay + p_inf * (1.0 - decay)
    return out if out.ndim else float(out)


def decompose_rates(T1, p_up_inf, stretched=True):
    """Split a measured (T1, p_up_inf) into SE and SR rates.

    Valid for a stretched bath (|2,2>_a at energies well above the Zeeman
    splitting) where the up state cannot exchange (``up_se = 0``) and the
    relaxation rates of both states are equal. Returned rates are in the
    unit of ``1/T1``'s time unit.
    """
    if not stretched:
        raise ValueError("decomposition is only determined for a stretched bath")
    if not T1 > 0:
        raise ValueError(f"T1 must be positive, got {T1}")
    if not 0.0 <= p_up_inf <= 1.0:
        raise ValueError(f"p_up_inf must be a probability, got {p_up_inf}")
    if p_up_inf < 0.5:
        raise InconsistentDataError(
            f"p_up_inf={p_up_inf} < 0.5 implies a negative spin-exchange rate "
            "for a stretched bath")
    sr = (1.0 - p_up_inf) / T1
    return TwoLevelRates(up_se=0.0, up_sr=sr, down_se=(2.0 * p_up_inf - 1.0) / T1, down_sr=sr)


# Channel rules ------------------------------------------------------------

def _zeeman_m(label):
    return {UP: 0.5, DOWN: -0.5}[label]


def _parse_state(state):
    """Return (F, m) for a hyperfine tuple/label or (None, m) for Zeeman labels."""
    if isinstance(state, str):
        if state in (UP, DOWN):
            return None, _zeeman_m(state)
        s = state.strip("|>").split(",")
        if len(s) == 2:
            return _check_fm(int(s[0]), int(s[1]))
        raise ValueError(f"unknown state label {state!r}")
    F, m = state
    return _check_fm(int(F), int(m))


def _check_fm(F, m):
    if F < 0 or abs(m) > F:
        raise ValueError(f"invalid quantum numbers |F={F}, m={m}>")
    return F, m


def state_label(state):
    if isinstance(state, str):
        _parse_state(state)
        return state
    F, m = _check_fm(*state)
    return f"|{F},{m}>"


@dataclass(frozen=True)
class Channel:
    ion_from: str
    ion_to: str
    atom_to: tuple[int, int]
    suppressed: bool


@dataclass(frozen=True)
class ChannelRuleSet:
    """Spin-exchange bookkeeping for an ion in a bath of one atomic state.

    ``channels`` lists every m_F-conserving exchange; those that would
    promote the atom from F=1 to F=2 are flagged ``suppressed``.
    """

    ion_states: tuple[str, ...]
    atom_state: tuple[int, int]
    channels: tuple[Channel, ...] = field(default_factory=tuple)

    def allowed(self, ion_from, ion_to):
        return any(c.ion_from == ion_from and c.ion_to == ion_to and not c.suppressed
                   for c in self.channels)

    def products(self, ion_from):
        """Allowed (ion_to, atom_to) outcomes starting from ``ion_from``."""
        return [(c.ion_to, c.atom_to) for c in self.channels
                if c.ion_from == ion_from and not c.suppressed]

    def se_allowed(self, ion_from):
        return bool(self.products(ion_from))


def build_rule_set(ion_states, atom_state):
    """Enumerate spin-exchange channels by total m_F conservation.

    An exchange changes the atom's state and leaves the projection sum
    unchanged. F=1 -> F=2 promotion of the atom costs the atomic
    hyperfine energy and is marked suppressed. Atomic F is restricted to
    the alkali ground-state values 1 and 2.
    """
    Fa, ma = _check_fm(*atom_state)
    labels = tuple(state_label(s) for s in ion_states)
    parsed = [_parse_state(s) for s in labels]
    channels = []
    for (la, (_, m_from)) in zip(labels, parsed):
        for (lb, (_, m_to)) in zip(labels, parsed):
            if la == lb:
                continue
            ma_new = ma - (m_to - m_from)
            if ma_new != int(ma_new):
                continue
            ma_new = int(ma_new)
            for F_new in (2, 1):
                if abs(ma_new) > F_new or (F_new, ma_new) == (Fa, ma):
                    continue
                channels.append(Channel(la, lb, (F_new, ma_new), suppressed=F_new > Fa))
    return ChannelRuleSet(labels, (Fa, ma), tuple(channels))


# N-level model ------------------------------------------------------------

class RateMatrix:
    """Transition rates between labelled states, each tagged SE or SR.

    ``se[i, j]`` and ``sr[i, j]`` hold the rate of ``j -> i`` for the
    two mechanisms. Instances are treated as immutable; ``with_rate``
    returns a copy.
    """

    def __init__(self, labels, se=None, sr=None):
        self.labels = tuple(labels)
        n = len(self.labels)
        if len(set(self.labels)) != n:
            raise GeneratorError("duplicate labels")
        self.se = np.zeros((n, n)) if se is None else np.array(se, dtype=float)
        self.sr = np.zeros((n, n)) if sr is None else np.array(sr, dtype=float)
        for a in (self.se, self.sr):
            if a.shape != (n, n):
                raise GeneratorError(f"rate array must be {n}x{n}")
            if np.any(np.diag(a) != 0):
                raise GeneratorError("diagonal rates must be zero")
            if np.any(a < 0) or not np.all(np.isfinite(a)):
                raise GeneratorError("rates must be finite and >= 0")
        self.se.setflags(write=False)
        self.sr.setflags(write=False)

    @classmethod
    def empty(cls, labels):
        return cls(labels)

    @classmethod
    def from_generator(cls, M, labels=None, tag=SR):
        M = np.asarray(M, dtype=float)
        validate_generator(M)
        n = M.shape[0]
        labels = labels if labels is not None else [str(i) for i in range(n)]
        off = M - np.diag(np.diag(M))
        return cls(labels, se=off if tag == SE else None, sr=off if tag == SR else None)

    @property
    def n_states(self):
        return len(self.labels)

    def index(self, label):
        return self.labels.index(label)

    def with_rate(self, src, dst, value, tag=SR):
        if tag not in _TAGS:
            raise ValueError(f"tag must be one of {_TAGS}")
        i, j = self.index(dst), self.index(src)
        se, sr = self.se.copy(), self.sr.copy()
        (se if tag == SE else sr)[i, j] = value
        return RateMatrix(self.labels, se, sr)

    @property
    def rates(self):
        return self.se + self.sr

    @property
    def generator(self):
        R = self.rates
        return R - np.diag(R.sum(axis=0))

    def out_rates(self):
        return self.rates.sum(axis=0)

    def scaled(self, factor):
        return RateMatrix(self.labels, self.se * factor, self.sr * factor)

    def __eq__(self, other):
        return (isinstance(other, RateMatrix) and self.labels == other.labels
                and np.array_equal(self.se, other.se) and np.array_equal(self.sr, other.sr))

    def __repr__(self):
        return f"RateMatrix(labels={self.labels})"

    # serialisation

    def to_dict(self):
        entries = []
        for tag, arr in ((SE, self.se), (SR, self.sr)):
            for i, j in zip(*np.nonzero(arr)):
                entries.append([self.labels[j], self.labels[i], float(arr[i, j]), tag])
        entries.sort(key=lambda e: (self.index(e[0]), self.index(e[1]), e[3]))
        return {"labels": list(self.labels), "rates": entries}

    @classmethod
    def from_dict(cls, d):
        rm = cls(d["labels"])
        se, sr = rm.se.copy(), rm.sr.copy()
        for src, dst, value, tag in d["rates"]:
            if tag not in _TAGS:
                raise ValueError(f"unknown tag {tag!r}")
            (se if tag == SE else sr)[rm.index(dst), rm.index(src)] = value
        return cls(rm.labels, se, sr)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def validate_generator(M, atol=1e-12):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise GeneratorError("generator must be square")
    off = M - np.diag(np.diag(M))
    if np.any(off < 0):
        raise GeneratorError("off-diagonal rates must be >= 0")
    scale = max(1.0, float(np.abs(M).max(initial=0.0)))
    if np.any(np.abs(M.sum(axis=0)) > atol * scale):
        raise GeneratorError("columns of the generator must sum to zero")
    return M


def _as_generator(M):
    return M.generator if isinstance(M, RateMatrix) else validate_generator(M)


def _clean(p):
    p = np.where(p < 0, 0.0, p)
    return p / p.sum(axis=-1, keepdims=True)


def n_level_evolution(M, p0, t):
    """Propagate ``p0`` by ``exp(M t)``.

    ``M`` is a :class:`RateMatrix` or a generator array; ``t`` may be a
    scalar (returns a vector) or a 1-D array (returns one row per time).
    """
    G = _as_generator(M)
    p0 = np.asarray(p0, dtype=float)
    if p0.shape != (G.shape[0],):
        raise ValueError("p0 has the wrong length")
    if np.any(p0 < 0) or abs(p0.sum() - 1.0) > 1e-12:
        raise ValueError("p0 must be a normalised probability vector")
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(ts < 0):
        raise ValueError("t must be >= 0")
    out = np.array([expm(G * ti) @ p0 for ti in ts])
    out = _clean(out)
    return out[0] if np.ndim(t) == 0 else out


def n_level_evolution_ode(M, p0, t, rtol=1e-12, atol=1e-14):
    """Reference propagation with an adaptive explicit Runge-Kutta integrator."""
    from scipy.integrate import solve_ivp

    G = _as_generator(M)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    order = np.argsort(ts)
    sol = solve_ivp(lambda _, p: G @ p, (0.0, float(ts.max(initial=0.0))), np.asarray(p0, float),
                    method="DOP853", t_eval=ts[order], rtol=rtol, atol=atol)
    out = np.empty((len(ts), G.shape[0]))
    out[order] = sol.y.T
    return out[0] if np.ndim(t) == 0 else out


def closed_classes(M):
    """Closed communicating classes of the chain (lists of state indices)."""
    G = _as_generator(M)
    n = G.shape[0]
    adj = (G.T > 0) & ~np.eye(n, dtype=bool)  # adj[j, i]: j -> i
    _, comp = connected_components(adj.astype(int), directed=True, connection="strong")
    classes = []
    for c in np.unique(comp):
        members = np.flatnonzero(comp == c)
        leaves = adj[np.ix_(members, np.flatnonzero(comp != c))].any()
        if not leaves:
            classes.append(members.tolist())
    return classes


def n_level_steady_state(M):
    """Unique stationary distribution of the generator.

    Raises :class:`MultipleSteadyStatesError` when the chain has more than
    one closed class (the answer would depend on the initial state).
    """
    G = _as_generator(M)
    classes = closed_classes(G)
    if len(classes) != 1:
        labels = M.labels if isinstance(M, RateMatrix) else None
        named = [[labels[i] for i in c] for c in classes] if labels else classes
        raise MultipleSteadyStatesError(named)
    cls = classes[0]
    sub = G[np.ix_(cls, cls)]
    k = len(cls)
    A = np.vstack([sub, np.ones(k)])
    b = np.zeros(k + 1)
    b[-1] = 1.0
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    p = np.zeros(G.shape[0])
    p[cls] = x
    return _clean(p)


def relaxation_rates(M, tol=1e-9):
    """Distinct nonzero relaxation rates (``-Re`` of generator eigenvalues), ascending."""
    ev = np.linalg.eigvals(_as_generator(M))
    rates = np.sort(-ev.real)
    rates = rates[rates > tol]
    distinct = []
    for r in rates:
        if not distinct or r - distinct[-1] > tol * max(1.0, r):
            distinct.append(float(r))
    return distinct


# Four-level hyperfine model -------------------------------------------------

@dataclass(frozen=True)
class FourLevelRates:
    """Parameterisation of the 171Yb+ four-level model (rates in 1/t_L).

    transfer_plus, transfer_minus
        |1,0> -> |1,+1> and |1,0> -> |1,-1>.
    transfer_back
        |1,+-1> -> |1,0>.
    transfer_cross
        |1,+1> <-> |1,-1>.
    decay
        |1,m> -> |0,0>, shared by all m.
    pump
        |0,0> -> |1,m>, per m (driven by the bath's released energy).
    """

    transfer_plus: float = 0.0
    transfer_minus: float = 0.0
    transfer_back: float = 0.0
    transfer_cross: float = 0.0
    decay: float = 0.0
    pump: float = 0.0

    NAMES = ("transfer_plus", "transfer_minus", "transfer_back",
             "transfer_cross", "decay", "pump")

    def __post_init__(self):
        for n in self.NAMES:
            if getattr(self, n) < 0:
                raise ValueError(f"{n} must be >= 0")

    @classmethod
    def from_array(cls, x):
        return cls(*[float(v) for v in x])

    def as_array(self):
        return np.array([getattr(self, n) for n in self.NAMES])

    @property
    def steady_p1(self):
        """Steady F=1 probability, 3 pump / (3 pump + decay)."""
        denom = 3.0 * self.pump + self.decay
        return 3.0 * self.pump / denom if denom > 0 else math.nan

    @staticmethod
    def pump_for_steady_p1(decay, p1):
        """Pump rate that fixes the steady F=1 probability at ``p1``."""
        return decay * p1 / (3.0 * (1.0 - p1))

    def rate_matrix(self):
        g, m, z, p = HYPERFINE_LABELS
        rm = RateMatrix.empty(HYPERFINE_LABELS)
        rm = (rm.with_rate(z, p, self.transfer_plus).with_rate(z, m, self.transfer_minus)
              .with_rate(p, z, self.transfer_back).with_rate(m, z, self.transfer_back)
              .with_rate(p, m, self.transfer_cross).with_rate(m, p, self.transfer_cross))
        for s in (m, z, p):
            rm = rm.with_rate(s, g, self.decay).with_rate(g, s, self.pump)
        return rm


def two_timescale_fit_model(params: FourLevelRates, t, p0=None):
    """Populations of the four hyperfine states vs time.

    Starts from |1,0> unless ``p0`` is given. Returns an array with one
    column per entry of :data:`HYPERFINE_LABELS`.
    """
    if p0 is None:
        p0 = np.array([0.0, 0.0, 1.0, 0.0])
    return n_level_evolution(params.rate_matrix(), p0, np.atleast_1d(t))
