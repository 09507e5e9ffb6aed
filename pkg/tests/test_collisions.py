import math

import numpy as np
import pytest

from ionbath import constants as const
from ionbath.collisions import (
    BranchingConfig,
    NoFiniteTemperatureError,
    TrajectoryState,
    block_rng,
    cooling_fraction,
    mean_energy_after,
    run_ensemble,
    run_trajectory,
    spin_temperature,
    steady_energy_analytic,
    step_collision,
    zeeman_stretched_config,
)
from ionbath.physics import RB87_HFS
from ionbath.rates import DOWN, UP, TwoLevelRates, build_rule_set, decompose_rates, two_level_evolution

HFS_68 = const.GHz_to_J(6.8)


def test_kappa_arithmetic():
    assert cooling_fraction(87, 171) == pytest.approx(2 * 87 * 171 / 258**2, rel=1e-15)
    assert cooling_fraction(87, 171) == pytest.approx(0.4470, abs=5e-5)
    assert cooling_fraction(5, 5) == 0.5


def test_steady_energy_examples():
    assert steady_energy_analytic(0.0, 87, 171, HFS_68) == 0.0
    E = steady_energy_analytic(1.0, 87, 171, HFS_68)
    # h 6.8 GHz / k_B = 326.3 mK, times 258 / 342
    assert const.J_to_mK(E) == pytest.approx(326.35 * 258 / 342, rel=1e-3)
    assert const.J_to_mK(E) == pytest.approx(246, abs=1)
    assert abs(const.J_to_mK(E) / 240 - 1) < 0.03
    assert steady_energy_analytic(0.3, 50, 50, HFS_68) == pytest.approx(0.3 * HFS_68)
    with pytest.raises(ValueError):
        steady_energy_analytic(1.5, 87, 171, HFS_68)


def test_mean_energy_recursion_oracle():
    # iterate E_{n+1} = (1 - kappa) E_n + eps E_hfs m_a/(m_a+m_i) directly
    E = const.mK_to_J(5.0)
    k = cooling_fraction(87, 171)
    for n in range(1, 30):
        E = (1 - k) * E + 0.7 * HFS_68 * 87 / 258
        assert mean_energy_after(n, const.mK_to_J(5.0), 0.7, 87, 171, HFS_68) == pytest.approx(E, rel=1e-12)


def test_spin_temperature_examples():
    Ts = spin_temperature(0.163) * 1e3
    assert Ts == pytest.approx(221, abs=0.5)
    # direct evaluation: (h 12.6 GHz / k_B) / ln(3 * 0.837 / 0.163)
    assert Ts == pytest.approx(604.7 / math.log(3 * 0.837 / 0.163), rel=1e-3)
    assert spin_temperature(1e-9) < 0.05
    assert spin_temperature(0.75 - 1e-9) > 1e6
    with pytest.raises(NoFiniteTemperatureError):
        spin_temperature(0.8)
    # inverts the defining relation
    T = spin_temperature(0.3)
    assert 0.3 / 0.7 == pytest.approx(3 * math.exp(-const.GHz_to_J(12.6) / (const.k_B * T)), rel=1e-12)


def geometric_cfg(**kw):
    return BranchingConfig((UP, DOWN), np.zeros((2, 2)), np.zeros((2, 2)), **kw)


def test_pure_cooling_geometric():
    cfg = geometric_cfg(epsilon=0.0, energy_floor=const.mK_to_J(1.0))
    rng = np.random.default_rng(0)
    s = TrajectoryState(UP, const.mK_to_J(100.0))
    k = cfg.kappa
    for n in range(1, 15):
        s = step_collision(s, cfg, rng)
        assert const.J_to_mK(s.E_kin) == pytest.approx(max(1.0, 100.0 * (1 - k) ** n), rel=1e-12)
        assert s.collision_count == n


def test_stretched_up_protected():
    r = decompose_rates(2.5, 0.609)
    cfg = zeeman_stretched_config(TwoLevelRates(up_se=0.0, up_sr=0.0, down_se=r.down_se, down_sr=r.down_sr))
    tl = run_trajectory(TrajectoryState(UP, 1e-30), cfg, 200.0, np.random.default_rng(5))
    assert len(tl) > 100
    assert {s.spin for s in tl} == {UP}


def test_disallowed_exchange_rejected():
    rules = build_rule_set([UP, DOWN], (2, 2))
    se = np.array([[0.0, 0.0], [0.2, 0.0]])  # up -> down by SE is forbidden
    with pytest.raises(ValueError):
        BranchingConfig((UP, DOWN), se, np.zeros((2, 2)), rule_set=rules)
    with pytest.raises(ValueError):
        BranchingConfig((UP, DOWN), np.zeros((2, 2)), np.array([[0, 0.7], [0.6, 0]]) * 2)


def test_horizon_before_first_collision():
    cfg = geometric_cfg(langevin_rate=1e-9)
    init = TrajectoryState(UP, 1.0)
    assert run_trajectory(init, cfg, 1.0, np.random.default_rng(1)) == [init]


def test_collision_count_is_poisson():
    cfg = geometric_cfg()
    rng = np.random.default_rng(2)
    counts = [run_trajectory(TrajectoryState(UP, 1.0), cfg, 7.0, rng)[-1].collision_count
              for _ in range(2000)]
    se = math.sqrt(7.0 / 2000)
    assert abs(np.mean(counts) - 7.0) < 3 * se


def test_identical_seeds_identical_timelines():
    cfg = zeeman_stretched_config(decompose_rates(2.5, 0.609), epsilon=1.0, sampled_angles=True)
    a = run_trajectory(TrajectoryState(DOWN, 1e-25), cfg, 10.0, np.random.default_rng(9))
    b = run_trajectory(TrajectoryState(DOWN, 1e-25), cfg, 10.0, np.random.default_rng(9))
    assert a == b


def test_single_trajectory_ensemble_matches_run_trajectory():
    cfg = zeeman_stretched_config(decompose_rates(2.5, 0.609), epsilon=1.0)
    init = TrajectoryState(DOWN, const.mK_to_J(0.5))
    grid = np.linspace(0.0, 6.0, 31)
    stats = run_ensemble(init, cfg, grid, 1, base_seed=42)
    tl = run_trajectory(init, cfg, grid[-1], block_rng(42, 0))
    times = np.array([s.t for s in tl])
    for g, t in enumerate(grid):
        s = tl[np.searchsorted(times, t, side="right") - 1]
        assert stats.population(s.spin)[g] == 1.0
        assert stats.mean_energy[g] == pytest.approx(s.E_kin, rel=1e-12)


def test_ensemble_matches_closed_form():
    r = decompose_rates(2.5, 0.609)
    cfg = zeeman_stretched_config(r)
    grid = np.linspace(0.0, 10.0, 11)
    stats = run_ensemble(TrajectoryState(DOWN, 1e-25), cfg, grid, 100_000, base_seed=1)
    ref = two_level_evolution(0.0, r, grid)
    p = stats.population(UP)
    se = np.maximum(stats.population_stderr[:, 0], 1e-12)
    assert np.all(np.abs(p - ref) <= 5 * se)
    steady = run_ensemble(TrajectoryState(DOWN, 1e-25), cfg, [40.0], 100_000, base_seed=2)
    assert steady.population(UP)[0] == pytest.approx(0.609, abs=4 * math.sqrt(0.609 * 0.391 / 100_000))


def test_ensemble_independent_of_workers_and_reproducible():
    cfg = zeeman_stretched_config(decompose_rates(2.5, 0.609), epsilon=1.0, sampled_angles=True)
    grid = np.linspace(0.0, 5.0, 6)
    init = TrajectoryState(DOWN, const.mK_to_J(1.0))
    a = run_ensemble(init, cfg, grid, 5000, base_seed=3, block_size=1000, workers=1)
    b = run_ensemble(init, cfg, grid, 5000, base_seed=3, block_size=1000, workers=3)
    assert a.to_csv() == b.to_csv()
    assert a.to_json() == b.to_json()
    c = run_ensemble(init, cfg, grid, 5000, base_seed=4, block_size=1000)
    assert c.to_csv() != a.to_csv()


def test_mean_mode_energy_matches_finite_horizon_expectation():
    # In mean mode E after n collisions is deterministic; averaging the
    # recursion over Poisson(t) counts gives the exact ensemble mean.
    cfg = geometric_cfg(epsilon=1.0, energy_floor=0.0, atom_hfs=RB87_HFS)
    E0 = const.mK_to_J(0.5)
    t = 3.0
    stats = run_ensemble(TrajectoryState(UP, E0), cfg, np.array([0.0, t]), 20_000, base_seed=11)
    k = cfg.kappa
    E_inf = cfg.steady_energy
    exact = E_inf + (E0 - E_inf) * math.exp(-k * t)
    assert abs(stats.mean_energy[1] - exact) < 4 * stats.energy_stderr[1]


def test_energy_floor_applies():
    cfg = geometric_cfg(epsilon=0.0, energy_floor=const.mK_to_J(20.0))
    stats = run_ensemble(TrajectoryState(UP, const.mK_to_J(100.0)), cfg, np.array([0.0, 30.0]), 500)
    assert const.J_to_mK(stats.mean_energy[1]) == pytest.approx(20.0, rel=1e-3)


def test_csv_and_json_layout():
    cfg = zeeman_stretched_config(decompose_rates(2.5, 0.609))
    stats = run_ensemble(TrajectoryState(DOWN, 1e-25), cfg, np.linspace(0, 1, 3), 10)
    text = stats.to_csv(comments=["hello"])
    lines = text.splitlines()
    assert lines[0] == "# hello"
    assert lines[1].startswith("t_over_tL,p_up,p_down,mean_Ekin_mK")
    assert len(lines) == 5
    d = stats.to_dict()
    assert d["n_trajectories"] == 10 and d["labels"] == ["up", "down"]


def test_bad_grid_rejected():
    cfg = geometric_cfg()
    with pytest.raises(ValueError):
        run_ensemble(TrajectoryState(UP, 1.0), cfg, [0.0, 0.0, 1.0], 10)
    with pytest.raises(ValueError):
        run_ensemble(TrajectoryState(UP, 1.0), cfg, [0.0, 1.0], 0)
