"""Collision-by-collision Monte Carlo of the ion spin and kinetic energy.

Every Langevin collision can change the ion spin (spin exchange or
spin relaxation, with fixed per-collision probabilities) and changes its
kinetic energy: elastic momentum transfer removes the fraction
``kappa = 2 m_a m_i / (m_a + m_i)**2`` on average, and a hyperfine flip
of the bath atom (probability ``epsilon``) deposits
``E_a_hfs m_a / (m_a + m_i)``. Collisions outside the Langevin channel
are treated as inert.

Random streams
--------------
Trajectories are simulated in fixed blocks of ``block_size``. Block ``b``
draws from ``SeedSequence(base_seed, spawn_key=(b,))``, so results depend
only on ``(base_seed, N, block_size)`` and never on the number of workers.
A block holding a single trajectory consumes random numbers exactly like
:func:`run_trajectory`.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import constants as const
from .physics import RB87_HFS, RB87_MASS_U, YB171_MASS_U
from .rates import SE, SR, ChannelRuleSet, RateMatrix, TwoLevelRates, UP, DOWN

DEFAULT_FLOOR = const.mK_to_J(20.0)
DEFAULT_BLOCK_SIZE = 4096


class NoFiniteTemperatureError(ValueError):
    pass


def default_epsilon(atom_state):
    """Hyperfine-flip probability per collision: 1 for F=2 baths, 0 for F=1."""
    return 1.0 if atom_state[0] == 2 else 0.0


def cooling_fraction(m_a, m_i):
    """Mean fractional energy loss per elastic collision, 2 m_a m_i / (m_a + m_i)^2."""
    return 2.0 * m_a * m_i / (m_a + m_i) ** 2


def heating_per_flip(m_a, m_i, E_a_hfs):
    """Kinetic energy the ion takes from one atomic hyperfine flip."""
    return E_a_hfs * m_a / (m_a + m_i)


def steady_energy_analytic(epsilon, m_a, m_i, E_a_hfs):
    """Fixed point of the mean-energy recursion: eps E_a_hfs (m_a + m_i) / (2 m_i)."""
    if not (m_a > 0 and m_i > 0):
        raise ValueError("masses must be positive")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    return epsilon * E_a_hfs * (m_a + m_i) / (2.0 * m_i)


def mean_energy_after(n, E0, epsilon, m_a, m_i, E_a_hfs):
    """Mean energy after ``n`` collisions of the floor-free recursion."""
    kappa = cooling_fraction(m_a, m_i)
    E_inf = steady_energy_analytic(epsilon, m_a, m_i, E_a_hfs)
    return E_inf + (E0 - E_inf) * (1.0 - kappa) ** n


def spin_temperature(p1, E_hfs=const.GHz_to_J(12.6)):
    """Spin temperature (K) of a steady hyperfine population.

    Solves ``p1 / p0 = 3 exp(-E_hfs / (k_B T_s))`` with ``p0 = 1 - p1``.
    """
    if not p1 > 0:
        raise ValueError(f"p1 must be positive, got {p1}")
    if p1 >= 0.75:
        raise NoFiniteTemperatureError(
            f"p1={p1} >= 3/4 has no finite positive spin temperature")
    return (E_hfs / const.k_B) / math.log(3.0 * (1.0 - p1) / p1)


# Configuration -------------------------------------------------------------

@dataclass(frozen=True)
class BranchingConfig:
    """Per-collision outcome probabilities and energy bookkeeping.

    ``se_probs[i, j]`` / ``sr_probs[i, j]`` are the probabilities that a
    Langevin collision takes the ion from state ``j`` to state ``i`` by
    spin exchange / spin relaxation. Masses are in u, energies in J.
    ``langevin_rate`` sets the time unit: 1.0 means times in t_L.
    """

    labels: tuple[str, ...]
    se_probs: np.ndarray
    sr_probs: np.ndarray
    epsilon: float = 0.0
    energy_floor: float = DEFAULT_FLOOR
    atom_mass: float = RB87_MASS_U
    ion_mass: float = YB171_MASS_U
    atom_hfs: float = RB87_HFS
    langevin_rate: float = 1.0
    sampled_angles: bool = False
    rule_set: ChannelRuleSet | None = field(default=None, compare=False)

    def __post_init__(self):
        n = len(self.labels)
        se = np.array(self.se_probs, dtype=float)
        sr = np.array(self.sr_probs, dtype=float)
        for a in (se, sr):
            if a.shape != (n, n):
                raise ValueError(f"probability arrays must be {n}x{n}")
            if np.any(np.diag(a) != 0) or np.any(a < 0):
                raise ValueError("probabilities must be >= 0 with zero diagonal")
        if np.any((se + sr).sum(axis=0) > 1.0 + 1e-12):
            raise ValueError("total spin-changing probability per collision exceeds 1")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.energy_floor < 0:
            raise ValueError("energy_floor must be >= 0")
        if not self.langevin_rate > 0:
            raise ValueError("langevin_rate must be positive")
        if self.rule_set is not None:
            for i, j in zip(*np.nonzero(se)):
                if not self.rule_set.allowed(self.labels[j], self.labels[i]):
                    raise ValueError(
                        f"spin exchange {self.labels[j]} -> {self.labels[i]} is not allowed")
        se.setflags(write=False)
        sr.setflags(write=False)
        object.__setattr__(self, "se_probs", se)
        object.__setattr__(self, "sr_probs", sr)
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_rule_set(cls, rule_set: ChannelRuleSet, p_se, p_sr, **kw):
        """SE with probability ``p_se`` on every allowed channel, SR with ``p_sr`` to every other state."""
        if not (0 <= p_se <= 1 and 0 <= p_sr <= 1 and p_se + p_sr <= 1):
            raise ValueError("need p_se, p_sr in [0, 1] with p_se + p_sr <= 1")
        labels = rule_set.ion_states
        n = len(labels)
        se = np.zeros((n, n))
        sr = np.zeros((n, n))
        for j, a in enumerate(labels):
            for i, b in enumerate(labels):
                if i == j:
                    continue
                sr[i, j] = p_sr
                if rule_set.allowed(a, b):
                    se[i, j] = p_se
        return cls(labels, se, sr, rule_set=rule_set, **kw)

    @classmethod
    def from_rate_matrix(cls, rm: RateMatrix, langevin_rate=1.0, **kw):
        """Per-collision probabilities ``rate / langevin_rate`` for every channel."""
        return cls(rm.labels, rm.se / langevin_rate, rm.sr / langevin_rate,
                   langevin_rate=langevin_rate, **kw)

    @classmethod
    def from_two_level(cls, rates: TwoLevelRates, **kw):
        """Two-level qubit with rates in units of the Langevin rate."""
        return cls.from_rate_matrix(rates.to_rate_matrix(), **kw)

    @property
    def n_states(self):
        return len(self.labels)

    @property
    def kappa(self):
        return cooling_fraction(self.atom_mass, self.ion_mass)

    @property
    def heat_per_flip(self):
        return heating_per_flip(self.atom_mass, self.ion_mass, self.atom_hfs)

    @property
    def steady_energy(self):
        return steady_energy_analytic(self.epsilon, self.atom_mass, self.ion_mass, self.atom_hfs)

    def induced_rate_matrix(self):
        """Rate matrix with rate = langevin_rate x probability per channel."""
        g = self.langevin_rate
        return RateMatrix(self.labels, self.se_probs * g, self.sr_probs * g)

    def _outcome_table(self):
        # column j of the table: cumulative probs of [SE to 0..n-1, SR to 0..n-1]
        p = np.concatenate([self.se_probs, self.sr_probs], axis=0)
        return np.cumsum(p.T, axis=1)


@dataclass(frozen=True)
class TrajectoryState:
    spin: str
    E_kin: float
    t: float = 0.0
    collision_count: int = 0


# Core stepping --------------------------------------------------------------

def _draw(rng, n, cfg: BranchingConfig):
    wait = rng.exponential(1.0 / cfg.langevin_rate, n)
    u = rng.random(n)
    flip = rng.random(n) < cfg.epsilon
    cos = rng.uniform(-1.0, 1.0, n) if cfg.sampled_angles else None
    return wait, u, flip, cos


def _apply(spin, E, u, flip, cos, cfg: BranchingConfig, table):
    n_states = cfg.n_states
    k = (u[:, None] >= table[spin]).sum(axis=1)
    changed = k < 2 * n_states
    target = np.where(changed, k % n_states, spin)
    if cfg.rule_set is not None:
        via_se = changed & (k < n_states)
        if np.any(via_se):
            ok = cfg.se_probs[target[via_se], spin[via_se]] > 0
            if not np.all(ok):
                raise AssertionError("sampled a disallowed spin-exchange channel")
    loss = cfg.kappa if cos is None else cfg.kappa * (1.0 - cos)
    E_new = E * (1.0 - loss) + np.where(flip, cfg.heat_per_flip, 0.0)
    return target, np.maximum(cfg.energy_floor, E_new)


def step_collision(state: TrajectoryState, cfg: BranchingConfig, rng) -> TrajectoryState:
    """Advance one trajectory by one Langevin collision."""
    spin = np.array([cfg.labels.index(state.spin)])
    wait, u, flip, cos = _draw(rng, 1, cfg)
    s, E = _apply(spin, np.array([state.E_kin]), u, flip, cos, cfg, cfg._outcome_table())
    return TrajectoryState(cfg.labels[int(s[0])], float(E[0]), state.t + float(wait[0]),
                           state.collision_count + 1)


def run_trajectory(init: TrajectoryState, cfg: BranchingConfig, horizon, rng):
    """Timeline of states up to ``horizon`` (the initial state first)."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if init.E_kin < cfg.energy_floor:
        init = replace(init, E_kin=cfg.energy_floor)
    timeline = [init]
    state = init
    while True:
        state = step_collision(state, cfg, rng)
        if state.t > horizon:
            return timeline
        timeline.append(state)


def block_rng(base_seed, block):
    return np.random.default_rng(np.random.SeedSequence(base_seed, spawn_key=(block,)))


# Ensembles -----------------------------------------------------------------

@dataclass
class EnsembleStats:
    times: np.ndarray
    labels: tuple[str, ...]
    populations: np.ndarray
    population_stderr: np.ndarray
    mean_energy: np.ndarray
    energy_stderr: np.ndarray
    n_trajectories: int
    base_seed: int
    block_size: int
    langevin_rate: float = 1.0

    def population(self, label):
        return self.populations[:, self.labels.index(label)]

    def to_rows(self):
        header = (["t_over_tL"] + [f"p_{l}" for l in self.labels] + ["mean_Ekin_mK"]
                  + [f"stderr_p_{l}" for l in self.labels] + ["stderr_Ekin_mK"])
        rows = []
        for g, t in enumerate(self.times):
            rows.append([t * self.langevin_rate, *self.populations[g], const.J_to_mK(self.mean_energy[g]),
                         *self.population_stderr[g], const.J_to_mK(self.energy_stderr[g])])
        return header, rows

    def to_csv(self, comments=()):
        buf = io.StringIO()
        for c in comments:
            buf.write(f"# {c}\n")
        header, rows = self.to_rows()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
        return buf.getvalue()

    def to_dict(self):
        return {
            "labels": list(self.labels),
            "t_over_tL": (self.times * self.langevin_rate).tolist(),
            "populations": self.populations.tolist(),
            "population_stderr": self.population_stderr.tolist(),
            "mean_Ekin_mK": const.J_to_mK(self.mean_energy).tolist(),
            "stderr_Ekin_mK": const.J_to_mK(self.energy_stderr).tolist(),
            "n_trajectories": self.n_trajectories,
            "base_seed": self.base_seed,
            "block_size": self.block_size,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _simulate_block(args):
    init, cfg, grid, n, base_seed, block = args
    rng = block_rng(base_seed, block)
    table = cfg._outcome_table()
    S, G = cfg.n_states, len(grid)
    spin = np.full(n, cfg.labels.index(init.spin))
    E = np.full(n, max(init.E_kin, cfg.energy_floor))
    t = np.full(n, float(init.t))
    counts = np.zeros((G + 1, S), dtype=np.int64)
    e_sum = np.zeros(G + 1)
    e_sq = np.zeros(G + 1)
    active = np.arange(n)
    horizon = grid[-1]
    while active.size:
        wait, u, flip, cos = _draw(rng, active.size, cfg)
        t_now = t[active]
        t_next = t_now + wait
        lo = np.searchsorted(grid, t_now, side="left")
        hi = np.searchsorted(grid, t_next, side="left")
        s_now, E_now = spin[active], E[active]
        np.add.at(counts, (lo, s_now), 1)
        np.add.at(counts, (hi, s_now), -1)
        np.add.at(e_sum, lo, E_now)
        np.add.at(e_sum, hi, -E_now)
        np.add.at(e_sq, lo, E_now**2)
        np.add.at(e_sq, hi, -E_now**2)
        s_new, E_new = _apply(s_now, E_now, u, flip, cos, cfg, table)
        spin[active], E[active], t[active] = s_new, E_new, t_next
        active = active[t_next <= horizon]
    # difference arrays make the energy sums slightly order dependent; the
    # order is fixed by the block, so results stay reproducible
    return np.cumsum(counts, axis=0)[:G], np.cumsum(e_sum)[:G], np.cumsum(e_sq)[:G]


def run_ensemble(init: TrajectoryState, cfg: BranchingConfig, times, N, base_seed=0,
                 block_size=DEFAULT_BLOCK_SIZE, workers=1):
    """Simulate ``N`` independent trajectories and sample them on ``times``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    grid = np.asarray(times, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] < init.t:
        raise ValueError("times must be a strictly increasing grid starting at or after init.t")
    sizes = [min(block_size, N - b * block_size) for b in range(math.ceil(N / block_size))]
    jobs = [(init, cfg, grid, n, base_seed, b) for b, n in enumerate(sizes)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_simulate_block, jobs))
    else:
        results = [_simulate_block(j) for j in jobs]
    counts = sum(r[0] for r in results)
    e_sum = np.zeros(len(grid))
    e_sq = np.zeros(len(grid))
    for r in results:
        e_sum += r[1]
        e_sq += r[2]
    pops = counts / N
    mean_E = e_sum / N
    var_E = np.maximum(e_sq / N - mean_E**2, 0.0)
    denom = max(N - 1, 1)
    return EnsembleStats(
        times=grid,
        labels=cfg.labels,
        populations=pops,
        population_stderr=np.sqrt(pops * (1 - pops) / denom),
        mean_energy=mean_E,
        energy_stderr=np.sqrt(var_E * N / denom / N),
        n_trajectories=N,
        base_seed=base_seed,
        block_size=block_size,
        langevin_rate=cfg.langevin_rate,
    )


def zeeman_stretched_config(rates: TwoLevelRates, **kw):
    """Two-level Zeeman qubit in a |2,2> bath with the given rates (1/t_L)."""
    from .rates import build_rule_set

    rules = build_rule_set([UP, DOWN], (2, 2))
    rm = rates.to_rate_matrix()
    return BranchingConfig(rm.labels, rm.se, rm.sr, rule_set=rules, **kw)
