import numpy as np
import pytest

from fillsim.core import DEFAULT_START_MID, InvalidParams, MoveDirection
from fillsim.market_model import (
    TY_1S_PARAMS,
    GchpParams,
    HawkesParams,
    ModelParams,
    NonStationary,
    Reducible,
    TradeFlowParams,
    attach_trades,
    gchp_steady_state,
    markov_moves,
    simulate_gchp,
    simulate_hawkes,
    simulate_umd,
)

from oracles import markov_stationary


def test_model_params_validation():
    with pytest.raises(InvalidParams):
        ModelParams(0.5, 0.5, 0.5)
    with pytest.raises(InvalidParams):
        ModelParams(0.1, 0.8, 0.1, r_f=1.0)
    with pytest.raises(InvalidParams):
        ModelParams(0.1, 0.8, 0.1, p_fill_down=0.0)
    assert ModelParams.symmetric(0.1).p_mid == pytest.approx(0.8)


def test_hawkes_params_validation():
    with pytest.raises(NonStationary):
        HawkesParams(1.0, 2.0, 1.0)
    with pytest.raises(InvalidParams):
        HawkesParams(0.0, 0.1, 1.0)
    assert HawkesParams(1.0, 0.5, 1.0).stationary_rate == pytest.approx(2.0)


def test_umd_frequencies_within_binomial_bands():
    n = 200_000
    s = simulate_umd(TY_1S_PARAMS, n, seed=11)
    assert len(s) == n
    for direction, p in ((1, TY_1S_PARAMS.p_up), (-1, TY_1S_PARAMS.p_down), (0, TY_1S_PARAMS.p_mid)):
        k = np.count_nonzero(s.move == direction)
        assert abs(k / n - p) < 4 * np.sqrt(p * (1 - p) / n)


def test_umd_book_invariants():
    s = simulate_umd(ModelParams.symmetric(0.2), 1000, dt_s=0.5, seed=1)
    assert np.all(s.best_ask - s.best_bid == 2)
    assert np.allclose(np.diff(s.time_s), 0.5)
    assert s.start_mid_x2 == 2 * DEFAULT_START_MID
    assert np.array_equal(np.diff(s.mid_x2, prepend=s.start_mid_x2) // 4, s.move)


def test_umd_rejects_even_start_mid():
    with pytest.raises(InvalidParams):
        simulate_umd(TY_1S_PARAMS, 10, start_mid=14148)


def test_umd_is_deterministic():
    a = simulate_umd(TY_1S_PARAMS, 5000, seed=3)
    b = simulate_umd(TY_1S_PARAMS, 5000, seed=3)
    assert a.equals(b)


def test_hawkes_mean_rate_matches_stationary_rate():
    h = HawkesParams(0.5, 0.6, 1.0)
    horizon = 40_000.0
    t = simulate_hawkes(h, horizon, seed=2)
    assert np.all(np.diff(t) > 0) and t[-1] < horizon
    # counts over long blocks are close to independent; 5 block-standard-errors
    counts = np.histogram(t, bins=np.arange(0, horizon + 1, 400.0))[0]
    se = counts.std(ddof=1) / np.sqrt(len(counts))
    assert abs(counts.mean() - h.stationary_rate * 400) < 5 * se


def test_poisson_special_case_has_exponential_gaps():
    t = simulate_hawkes(HawkesParams(2.0, 0.0, 1.0), 20_000.0, seed=4)
    gaps = np.diff(t)
    assert gaps.mean() == pytest.approx(0.5, rel=0.03)
    assert gaps.std() == pytest.approx(0.5, rel=0.03)


def test_markov_moves_transition_frequencies():
    g = GchpParams.from_leave(0.3, 0.6)
    m = markov_moves(g, 200_000, seed=5)
    prev, nxt = m[:-1], m[1:]
    up = prev == 1
    assert np.mean(nxt[up] == -1) == pytest.approx(0.3, abs=0.01)
    assert np.mean(nxt[~up] == 1) == pytest.approx(0.6, abs=0.01)
    pi = markov_stationary(g.p_uu, g.p_du, g.p_ud, g.p_dd)
    assert np.mean(m == 1) == pytest.approx(pi[0], abs=0.01)
    assert gchp_steady_state(g)[0] == pytest.approx(pi[0], abs=1e-12)


def test_markov_first_move_conditions_on_start_state():
    g = GchpParams.from_leave(0.9, 0.9)
    firsts = np.array([markov_moves(g, 1, MoveDirection.UP, seed=s)[0] for s in range(2000)])
    assert np.mean(firsts == -1) == pytest.approx(0.9, abs=0.03)


def test_absorbing_chain_simulates_but_has_no_steady_state():
    g = GchpParams(1.0, 0.0, 0.5, 0.5)
    assert np.all(markov_moves(g, 100, MoveDirection.UP, seed=0) == 1)
    with pytest.raises(Reducible):
        gchp_steady_state(g)


def test_gchp_stream_moves_every_event():
    g = GchpParams.from_leave(0.4, 0.4, HawkesParams(1.0, 0.5, 1.0))
    s = simulate_gchp(g, 500.0, seed=6)
    assert len(s) > 0 and np.all(s.move != 0)
    assert np.all(s.best_ask - s.best_bid == 2)


def test_attach_trades_follows_side_rule():
    s = attach_trades(simulate_umd(ModelParams.symmetric(0.1), 50_000, seed=1), TradeFlowParams(0.2), seed=1)
    assert np.all(s.trade_side[s.move == 1] == 1)
    assert np.all(s.trade_side[s.move == -1] == -1)
    mid = s.move == 0
    assert np.mean(s.trade_side[mid] != 0) == pytest.approx(0.2, abs=0.01)
