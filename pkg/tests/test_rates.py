import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ionbath.rates import (
    DOWN,
    HYPERFINE_LABELS,
    SE,
    SR,
    UP,
    FourLevelRates,
    GeneratorError,
    InconsistentDataError,
    MultipleSteadyStatesError,
    NoSteadyStateError,
    RateMatrix,
    TwoLevelRates,
    build_rule_set,
    closed_classes,
    decompose_rates,
    n_level_evolution,
    n_level_evolution_ode,
    n_level_steady_state,
    relaxation_rates,
    two_level_evolution,
    two_level_steady_state,
    two_timescale_fit_model,
)

rates_st = st.floats(0.0, 10.0)


def random_generator(rng, n, density=1.0):
    R = rng.uniform(0.0, 2.0, (n, n)) * (rng.random((n, n)) < density)
    np.fill_diagonal(R, 0.0)
    return R - np.diag(R.sum(axis=0))


# two-level ----------------------------------------------------------------

def test_two_level_evolution_examples():
    r = TwoLevelRates.from_totals(0.391, 0.609)
    assert two_level_evolution(0.2, r, 0.0) == 0.2
    assert two_level_evolution(0.2, r, 200.0) == pytest.approx(0.609, abs=1e-12)
    sym = TwoLevelRates.from_totals(0.3, 0.3)
    assert two_level_evolution(1.0, sym, 1e3) == pytest.approx(0.5, abs=1e-12)
    assert r.T1 == pytest.approx(1.0)


def test_two_level_evolution_matches_hand_solution():
    # p(t) = p_inf + (p0 - p_inf) exp(-t/T1) with T1 = 1/(a+b)
    a, b = 0.7, 0.2
    r = TwoLevelRates.from_totals(a, b)
    t = np.linspace(0, 5, 11)
    expected = b / (a + b) + (0.9 - b / (a + b)) * np.exp(-(a + b) * t)
    np.testing.assert_allclose(two_level_evolution(0.9, r, t), expected, rtol=1e-14)


def test_two_level_steady_state_limits():
    assert two_level_steady_state(TwoLevelRates.from_totals(1.0, 1.0)) == 0.5
    assert two_level_steady_state(TwoLevelRates.from_totals(0.0, 1.0)) == 1.0
    with pytest.raises(NoSteadyStateError):
        two_level_steady_state(TwoLevelRates())
    with pytest.raises(ValueError):
        TwoLevelRates(up_se=-1.0)


def test_decompose_rates_reported_values():
    r = decompose_rates(2.50, 0.609)
    assert r.down_se * 2.50 == pytest.approx(0.218, abs=1e-12)
    assert r.up_sr * 2.50 == pytest.approx(0.391, abs=1e-12)
    assert r.down_sr == r.up_sr
    assert r.up_se == 0.0
    # within the quoted errors 0.22 +- 0.03 and 0.39 +- 0.02
    assert abs(r.down_se * 2.5 - 0.22) < 0.03
    assert abs(r.up_sr * 2.5 - 0.39) < 0.02
    assert two_level_steady_state(r) == pytest.approx(0.609, abs=1e-12)
    assert r.T1 == pytest.approx(2.50, rel=1e-12)


def test_decompose_rates_limits_and_errors():
    r = decompose_rates(3.0, 1.0)
    assert r.up_sr == 0.0 and r.down_sr == 0.0
    r = decompose_rates(3.0, 0.5)
    assert r.down_se == 0.0
    with pytest.raises(InconsistentDataError):
        decompose_rates(2.0, 0.45)
    with pytest.raises(ValueError):
        decompose_rates(-1.0, 0.6)
    with pytest.raises(ValueError):
        decompose_rates(1.0, 0.6, stretched=False)


@given(st.floats(0.01, 100.0), st.floats(0.5, 1.0))
def test_decompose_round_trip(T1, p):
    r = decompose_rates(T1, p)
    assert r.T1 == pytest.approx(T1, rel=1e-12)
    assert r.steady_state == pytest.approx(p, abs=1e-12)


# selection rules ----------------------------------------------------------

def test_rule_set_stretched_and_exchange():
    rs = build_rule_set([UP, DOWN], (2, 2))
    assert not rs.se_allowed(UP)
    assert (UP, (2, 1)) in rs.products(DOWN)
    assert rs.allowed(DOWN, UP)


def test_rule_set_f1_promotion_suppressed():
    rs = build_rule_set([UP, DOWN], (1, 1))
    assert not rs.allowed(UP, DOWN)
    sup = [c for c in rs.channels if c.ion_from == UP]
    assert sup and all(c.suppressed and c.atom_to == (2, 2) for c in sup)
    # the other direction lowers m_F of the atom within F=1
    assert (UP, (1, 0)) in rs.products(DOWN)


def test_rule_set_rejects_bad_states():
    with pytest.raises(ValueError):
        build_rule_set([UP, DOWN], (1, 2))
    with pytest.raises(ValueError):
        build_rule_set(["|1,3>"], (2, 2))


def test_rule_set_conserves_total_projection():
    states = [(0, 0), (1, -1), (1, 0), (1, 1)]
    rs = build_rule_set(states, (2, -1))
    m = {f"|{F},{mm}>": mm for F, mm in states}
    for c in rs.channels:
        assert m[c.ion_from] + (-1) == m[c.ion_to] + c.atom_to[1]


# rate matrices ------------------------------------------------------------

def test_rate_matrix_generator_and_json_round_trip():
    rm = TwoLevelRates(0.1, 0.2, 0.3, 0.4).to_rate_matrix()
    G = rm.generator
    np.testing.assert_allclose(G.sum(axis=0), 0.0, atol=1e-15)
    assert G[1, 0] == pytest.approx(0.3)  # up -> down
    assert G[0, 1] == pytest.approx(0.7)
    back = RateMatrix.from_json(rm.to_json())
    assert back == rm
    assert back.to_dict()["rates"][0][3] in (SE, SR)


def test_rate_matrix_validation():
    with pytest.raises(GeneratorError):
        RateMatrix(["a", "a"])
    with pytest.raises(GeneratorError):
        RateMatrix(["a", "b"], sr=[[0, -1], [0, 0]])
    with pytest.raises(GeneratorError):
        RateMatrix(["a", "b"], sr=[[1, 0], [0, 0]])
    with pytest.raises(GeneratorError):
        n_level_steady_state(np.array([[-1.0, 0.0], [0.5, 0.0]]))
    with pytest.raises(ValueError):
        n_level_evolution(np.zeros((2, 2)), [0.5, 0.6], 1.0)


def test_n_level_evolution_initial_and_uniform():
    rng = np.random.default_rng(3)
    G = random_generator(rng, 5)
    p0 = rng.dirichlet(np.ones(5))
    np.testing.assert_allclose(n_level_evolution(G, p0, 0.0), p0, atol=1e-15)
    R = np.ones((4, 4)) - np.eye(4)
    U = R - np.diag(R.sum(axis=0))
    np.testing.assert_allclose(n_level_evolution(U, [1, 0, 0, 0], 50.0), 0.25, atol=1e-12)


@given(rates_st, rates_st, rates_st, rates_st, st.floats(0, 1), st.floats(0, 20))
@settings(max_examples=200)
def test_two_state_embedding_matches_closed_form(a, b, c, d, p0, t):
    r = TwoLevelRates(a, b, c, d)
    got = n_level_evolution(r.to_rate_matrix(), [p0, 1 - p0], t)[0]
    assert got == pytest.approx(two_level_evolution(p0, r, t), abs=1e-9)


def test_expm_agrees_with_ode_integrator():
    rng = np.random.default_rng(7)
    t = np.linspace(0.0, 6.0, 13)
    for n in (2, 3, 4, 6):
        G = random_generator(rng, n, density=0.7)
        p0 = rng.dirichlet(np.ones(n))
        np.testing.assert_allclose(n_level_evolution(G, p0, t), n_level_evolution_ode(G, p0, t),
                                   atol=1e-10)


def test_probability_is_conserved_and_positive():
    rng = np.random.default_rng(8)
    G = random_generator(rng, 6) * 1e3  # stiff
    out = n_level_evolution(G, np.eye(6)[0], np.linspace(0, 10, 50))
    assert np.all(out >= 0)
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-14)


def test_steady_state_examples():
    ring = np.zeros((4, 4))
    for i in range(4):
        ring[(i + 1) % 4, i] = 1.0
        ring[i, (i + 1) % 4] = 1.0
    G = ring - np.diag(ring.sum(axis=0))
    np.testing.assert_allclose(n_level_steady_state(G), 0.25, atol=1e-14)
    # state 2 absorbing
    R = np.zeros((3, 3))
    R[2, 0] = R[2, 1] = R[1, 0] = 1.0
    np.testing.assert_allclose(n_level_steady_state(R - np.diag(R.sum(axis=0))), [0, 0, 1], atol=1e-14)
    r = TwoLevelRates(0.1, 0.2, 0.3, 0.4)
    assert n_level_steady_state(r.to_rate_matrix())[0] == pytest.approx(r.steady_state, abs=1e-14)


def test_multiple_closed_classes_raise():
    R = np.zeros((4, 4))
    R[1, 0] = R[0, 1] = 1.0
    R[3, 2] = R[2, 3] = 1.0
    G = R - np.diag(R.sum(axis=0))
    assert sorted(closed_classes(G)) == [[0, 1], [2, 3]]
    with pytest.raises(MultipleSteadyStatesError) as exc:
        n_level_steady_state(RateMatrix.from_generator(G, list("abcd")))
    assert exc.value.classes == [["a", "b"], ["c", "d"]]


def test_steady_state_is_long_time_limit():
    rng = np.random.default_rng(9)
    for _ in range(5):
        G = random_generator(rng, 5, density=0.8)
        if len(closed_classes(G)) != 1:
            continue
        p = n_level_steady_state(G)
        np.testing.assert_allclose(G @ p, 0.0, atol=1e-12)
        slow = min(relaxation_rates(G))
        late = n_level_evolution(G, np.eye(5)[0], 40.0 / slow)
        np.testing.assert_allclose(late, p, atol=1e-10)


# four-level model ---------------------------------------------------------

def test_four_level_steady_p1_and_labels():
    r = FourLevelRates(transfer_plus=1.0, transfer_minus=1.0, transfer_back=1.0,
                       decay=0.5, pump=FourLevelRates.pump_for_steady_p1(0.5, 0.163))
    assert r.steady_p1 == pytest.approx(0.163, abs=1e-14)
    p = n_level_steady_state(r.rate_matrix())
    assert 1.0 - p[HYPERFINE_LABELS.index("|0,0>")] == pytest.approx(0.163, abs=1e-12)
    assert r.rate_matrix().labels == HYPERFINE_LABELS


def test_four_level_zero_transfer_single_timescale():
    r = FourLevelRates(decay=0.6)
    curves = two_timescale_fit_model(r, np.linspace(0, 5, 21))
    np.testing.assert_allclose(curves[:, 2], np.exp(-0.6 * np.linspace(0, 5, 21)), atol=1e-12)
    np.testing.assert_allclose(curves[:, 1], 0.0, atol=1e-15)


def test_four_level_fast_transfer_two_timescales():
    r = FourLevelRates(transfer_plus=5.0, transfer_minus=5.0, transfer_back=5.0, decay=0.3)
    t = np.linspace(0, 10, 201)
    c = two_timescale_fit_model(r, t)
    side = c[:, 1] + c[:, 3]
    k = int(np.argmax(side))
    assert 0 < t[k] < 1.0  # fast rise of |1,+-1>
    # joint slow decay of the F=1 manifold at the shared decay rate
    f1 = c[:, 1:].sum(axis=1)
    np.testing.assert_allclose(f1, np.exp(-0.3 * t), atol=1e-12)
    assert len(relaxation_rates(r.rate_matrix())) >= 2
