import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fillsim.core import EventStream, InsufficientData, MalformedStream, Side, TY_GRID
from fillsim.engine import (
    ADDED,
    CANCELED,
    FILLED,
    drift_after_fills,
    mark_to_market,
    run_backtest,
    window_drift,
)
from fillsim.fill_model import AdverseBernoulli, AlwaysFillOnTrade, ExponentialFill, GroundTruth
from fillsim.market_model import TY_1S_PARAMS, HawkesParams, ModelParams, attach_trades, simulate_umd

from helpers import stream_from_mids


def check_invariants(report, stream):
    mid = stream.mid_x2 // 2
    assert np.array_equal(report.pnl, report.cash + report.position.astype(np.int64) * mid)
    assert set(np.unique(report.position).tolist()) <= {-1, 0, 1}
    terminal = {}
    added = set()
    for e in report.lifecycle:
        if e.kind == ADDED:
            assert e.order_id not in added
            added.add(e.order_id)
        else:
            assert e.order_id in added and e.order_id not in terminal
            terminal[e.order_id] = e.kind
    assert set(terminal) == added
    assert sum(k == FILLED for k in terminal.values()) == report.n_fills
    # a fill never happens on the event that posted the order
    created = {e.order_id: e.seq for e in report.lifecycle if e.kind == ADDED}
    assert all(f.fill_seq > created[f.order_id] for f in report.fills)


def test_forced_adverse_fill_marks_to_minus_half_tick():
    s = stream_from_mids([14149, 14147])
    r = run_backtest(s, AdverseBernoulli(0.0, 1.0))
    (fill,) = r.fills
    assert fill.side == Side.BUY and fill.fill_price == 14148 and fill.adverse
    assert r.position.tolist() == [0, 1]
    # bought at 14148 half-ticks, mid now 14147: one half-tick under water
    assert r.pnl.tolist() == [0, -1]
    assert float(r.pnl_price()[-1]) == -1 / 128
    check_invariants(r, s)


def test_round_trip_market_order_costs_one_tick():
    mid = 14149
    cash = -(mid + 1) + (mid - 1)  # buy at the ask, sell at the bid, mid unchanged
    assert mark_to_market(cash, 0, mid) == -2
    assert mark_to_market(cash, 0, mid, TY_GRID) == -float(TY_GRID.tick_size)


def test_fill_then_requote_on_same_event():
    s = stream_from_mids([14149, 14147, 14147])
    r = run_backtest(s, AdverseBernoulli(0.0, 1.0))
    kinds = [(e.kind, e.order_id, e.seq, e.side, e.price) for e in r.lifecycle]
    assert kinds[:2] == [(ADDED, 1, 0, Side.BUY, 14148), (ADDED, 2, 0, Side.SELL, 14150)]
    assert (FILLED, 1, 1, Side.BUY, 14148) in kinds
    # long now: the stale ask is moved to the new touch
    assert (CANCELED, 2, 1, Side.SELL, 14150) in kinds
    assert (ADDED, 3, 1, Side.SELL, 14148) in kinds
    assert kinds[-1] == (CANCELED, 3, 2, Side.SELL, 14148)


def test_only_one_fill_per_event_buy_first():
    s = stream_from_mids([14149] * 3)
    r = run_backtest(s, AdverseBernoulli(0.999999, 1.0), seed=1)
    assert r.fills[0].side == Side.BUY and r.fills[0].fill_seq == 1
    assert r.position.tolist()[:2] == [0, 1]
    check_invariants(r, s)


def test_technique1_fills_on_opposing_print():
    s = stream_from_mids([14149] * 4, trades=[0, -1, 1, 0])
    r = run_backtest(s, AlwaysFillOnTrade())
    assert [(f.side, f.fill_seq) for f in r.fills] == [(Side.BUY, 1), (Side.SELL, 2)]
    assert r.final_pnl == 2  # bought the bid, sold the ask: one tick
    assert r.n_orders == 4 and r.global_fill_rate == 0.5  # flat again at event 2: two new quotes


def test_malformed_streams_rejected():
    with pytest.raises(MalformedStream):
        run_backtest(stream_from_mids([]), AlwaysFillOnTrade())
    bad = EventStream(time_s=[1.0, 0.0], best_bid=[14148, 14148], best_ask=[14150, 14150])
    with pytest.raises(MalformedStream):
        run_backtest(bad, AlwaysFillOnTrade())
    crossed = EventStream(time_s=[0.0], best_bid=[14150], best_ask=[14148])
    with pytest.raises(MalformedStream):
        run_backtest(crossed, AlwaysFillOnTrade())


def test_pnl_windows_are_by_time():
    s = stream_from_mids(np.full(1000, 14149), dt=1.0)
    r = run_backtest(s, AdverseBernoulli(0.01), window_s=300.0)
    assert r.window_end.tolist() == [299, 599, 899, 999]
    assert np.array_equal(r.window_pnl, r.pnl[[299, 599, 899, 999]])
    assert r.window_increments.sum() == r.final_pnl


@pytest.mark.parametrize("technique", [
    AlwaysFillOnTrade(),
    ExponentialFill(0.05),
    AdverseBernoulli(0.02, 0.95),
    GroundTruth(0.99, HawkesParams(0.05, 0.5, 1.0)),
])
def test_invariants_on_simulated_streams(technique):
    s = attach_trades(simulate_umd(TY_1S_PARAMS, 30_000, seed=8), seed=8)
    r = run_backtest(s, technique, seed=4)
    assert r.n_fills > 0
    check_invariants(r, s)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 0.3), st.floats(0.0, 0.5), st.floats(0.05, 1.0), st.integers(0, 2**31))
def test_invariants_hold_for_random_parameters(p_move, r_f, p_fill_down, seed):
    s = attach_trades(simulate_umd(ModelParams.symmetric(p_move), 2000, seed=seed), seed=seed)
    r = run_backtest(s, AdverseBernoulli(r_f, p_fill_down), seed=seed)
    check_invariants(r, s)


def test_backtest_is_deterministic():
    s = attach_trades(simulate_umd(TY_1S_PARAMS, 20_000, seed=2), seed=2)
    a = run_backtest(s, GroundTruth(0.99, HawkesParams(0.05, 0.5, 1.0)), seed=9)
    b = run_backtest(s, GroundTruth(0.99, HawkesParams(0.05, 0.5, 1.0)), seed=9)
    assert a.lifecycle == b.lifecycle and np.array_equal(a.pnl, b.pnl)


def test_window_drift_includes_fill_event_move():
    s = stream_from_mids([14149, 14147, 14147, 14151], start_mid=14149)
    assert window_drift(s, np.array([1]), 1).tolist() == [-1.0]
    assert window_drift(s, np.array([1]), 3).tolist() == [1.0]
    assert window_drift(s, np.array([2]), 100).tolist() == [2.0]


def test_drift_after_fills_needs_fills():
    s = stream_from_mids([14149] * 5)
    r = run_backtest(s, AdverseBernoulli(0.0))
    with pytest.raises(InsufficientData):
        drift_after_fills(r, s)


def test_drift_after_fills_signs():
    s = simulate_umd(TY_1S_PARAMS, 200_000, seed=5)
    r = run_backtest(s, AdverseBernoulli(TY_1S_PARAMS.r_f), seed=5)
    d = drift_after_fills(r, s, window_events=1)
    assert d.buy_mean < -0.3 and d.sell_mean > 0.3
    assert abs(d.control_mean) < 0.05
    assert len(d.control) == max(len(d.buy), len(d.sell))
