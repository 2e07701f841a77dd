"""Event-loop backtester.

Per event: the book has already moved; working orders (posted on an earlier
event) are checked against that move; at most one fill is applied; then the
strategy re-quotes, and new orders work from the next event on.

Events on which the touch is unchanged, no trade prints and the fill engine
has no candidate are skipped: nothing can happen on them.

Cash is kept in integer half-tick * lot units and P&L in half-ticks, so the
mark-to-market identity is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .core import (
    EventStream,
    FillRecord,
    InsufficientData,
    MalformedStream,
    Side,
    TickGrid,
    VirtualOrder,
    as_stream,
    rng_for,
)
from .fill_model import FillTechnique
from .strategy import MakerState, apply_fill, desired_quotes

ADDED, CANCELED, FILLED = "added", "canceled", "filled"


@dataclass(frozen=True)
class LifecycleEvent:
    kind: str
    order_id: int
    seq: int
    time_s: float
    price: int
    side: Side


@dataclass(eq=False)
class BacktestReport:
    technique: str
    seed: int
    grid: TickGrid
    time_s: np.ndarray
    lifecycle: List[LifecycleEvent]
    fills: List[FillRecord]
    position: np.ndarray  # per event, after the event
    cash: np.ndarray  # half-tick * lot units
    pnl: np.ndarray  # half-ticks, cash + position * mid
    window_s: float
    window_end: np.ndarray  # index of the last event in each P&L window

    @property
    def n_events(self) -> int:
        return len(self.pnl)

    @property
    def n_orders(self) -> int:
        return sum(1 for e in self.lifecycle if e.kind == ADDED)

    @property
    def n_fills(self) -> int:
        return len(self.fills)

    @property
    def global_fill_rate(self) -> float:
        return self.n_fills / self.n_orders if self.n_orders else 0.0

    @property
    def window_pnl(self) -> np.ndarray:
        """Cumulative P&L (half-ticks) at the end of each window."""
        return self.pnl[self.window_end]

    @property
    def window_increments(self) -> np.ndarray:
        return np.diff(self.window_pnl, prepend=0)

    @property
    def window_times(self) -> np.ndarray:
        return self.time_s[self.window_end]

    @property
    def final_pnl(self) -> int:
        return int(self.pnl[-1]) if len(self.pnl) else 0

    def pnl_price(self, pnl_half_ticks=None):
        values = self.pnl if pnl_half_ticks is None else pnl_half_ticks
        return np.asarray(values, dtype=np.float64) * float(self.grid.half_tick)

    def fill_times(self) -> np.ndarray:
        return self.time_s[[f.fill_seq for f in self.fills]] if self.fills else np.empty(0)


def mark_to_market(cash: int, position: int, mid: int, grid: Optional[TickGrid] = None):
    """Cash plus position valued at the mid.

    With ``grid`` the half-tick inputs are converted to price units; without
    it the result stays in half-ticks.
    """
    value = cash + position * mid
    if grid is None:
        return value
    return float(value * grid.half_tick)


def validate_stream(stream: EventStream) -> None:
    if len(stream) == 0:
        raise MalformedStream("empty stream")
    if np.any(np.diff(stream.time_s) < 0):
        raise MalformedStream("event times are not monotone")
    spread = stream.best_ask - stream.best_bid
    if np.any(spread <= 0):
        raise MalformedStream("crossed or locked book")
    if np.any(spread % 2):
        raise MalformedStream("mid price is off the half-tick lattice")


def _windows(time_s: np.ndarray, window_s: float) -> np.ndarray:
    wid = np.floor((time_s - time_s[0]) / window_s).astype(np.int64)
    ends = np.flatnonzero(np.diff(wid))
    return np.append(ends, len(time_s) - 1)


def run_backtest(events, technique: FillTechnique, window_s: float = 300.0, seed: int = 0, grid=None) -> BacktestReport:
    stream = as_stream(events, grid) if grid is not None else as_stream(events)
    validate_stream(stream)
    if not window_s > 0:
        raise ValueError("window_s must be positive")
    rng = rng_for(seed, "backtest")
    engine = technique.bind(stream, rng)
    n = len(stream)
    bid, ask = stream.best_bid, stream.best_ask

    touch_change = np.flatnonzero((np.diff(bid) != 0) | (np.diff(ask) != 0)) + 1
    visit = np.union1d(np.union1d(touch_change, np.flatnonzero(stream.trade_side)), engine.candidates)
    visit = visit[visit > 0]

    lifecycle: List[LifecycleEvent] = []
    fills: List[FillRecord] = []
    state = MakerState()
    next_id = 1

    def requote(state: MakerState, ev) -> MakerState:
        nonlocal next_id
        instr = desired_quotes(state, ev)
        for side in (Side.BUY, Side.SELL):
            ins = instr.for_side(side)
            order = state.working(side)
            if ins.cancel and order is not None:
                lifecycle.append(LifecycleEvent(CANCELED, order.id, ev.seq, ev.time_s, order.price, side))
                engine.release(order)
                state = state.with_working(side, None)
            if ins.post is not None:
                order = VirtualOrder(id=next_id, side=side, price=ins.post, created_seq=ev.seq)
                next_id += 1
                lifecycle.append(LifecycleEvent(ADDED, order.id, ev.seq, ev.time_s, order.price, side))
                state = state.with_working(side, order)
        return state

    state = requote(state, stream[0])
    for k in visit.tolist():
        ev = stream[k]
        hit = None
        for order in (state.working_buy, state.working_sell):
            if order is None:
                continue
            d = engine.decide(order, ev)
            # buy is checked first; a second same-event fill is dropped
            if d.filled and hit is None:
                hit = (order, d)
        if hit is not None:
            order, d = hit
            rec = FillRecord(
                order_id=order.id,
                side=order.side,
                fill_seq=k,
                fill_price=d.fill_price,
                mid_at_fill=(ev.best_bid + ev.best_ask) // 2,
                adverse=d.adverse,
            )
            state = apply_fill(state, rec)
            fills.append(rec)
            lifecycle.append(LifecycleEvent(FILLED, order.id, k, ev.time_s, order.price, order.side))
            engine.release(order)
        state = requote(state, ev)

    last = stream[n - 1]
    for order in (state.working_buy, state.working_sell):
        if order is not None:
            lifecycle.append(LifecycleEvent(CANCELED, order.id, last.seq, last.time_s, order.price, order.side))

    position, cash = _accounts(fills, n)
    mid = stream.mid_x2 // 2
    return BacktestReport(
        technique=getattr(technique, "label", type(technique).__name__),
        seed=int(seed) if isinstance(seed, (int, np.integer)) else 0,
        grid=stream.grid,
        time_s=stream.time_s,
        lifecycle=lifecycle,
        fills=fills,
        position=position,
        cash=cash,
        pnl=cash + position.astype(np.int64) * mid,
        window_s=window_s,
        window_end=_windows(stream.time_s, window_s),
    )


def _accounts(fills: Sequence[FillRecord], n: int):
    dpos = np.zeros(n, dtype=np.int64)
    dcash = np.zeros(n, dtype=np.int64)
    for f in fills:
        dpos[f.fill_seq] += int(f.side)
        dcash[f.fill_seq] -= int(f.side) * f.fill_price
    return np.cumsum(dpos).astype(np.int8), np.cumsum(dcash)


@dataclass(eq=False)
class DriftStats:
    """Mid moves (ticks) over fixed event windows starting at each fill.

    Each window starts from the book just before the fill event, so the move
    that caused an adverse fill is part of the sample.
    """

    window_events: int
    buy: np.ndarray
    sell: np.ndarray
    control: np.ndarray
    control_seq: np.ndarray = field(repr=False, default=None)

    @staticmethod
    def _mean_se(x: np.ndarray):
        if len(x) == 0:
            return float("nan"), float("nan")
        se = float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else float("nan")
        return float(np.mean(x)), se

    @property
    def buy_mean(self) -> float:
        return self._mean_se(self.buy)[0]

    @property
    def sell_mean(self) -> float:
        return self._mean_se(self.sell)[0]

    @property
    def control_mean(self) -> float:
        return self._mean_se(self.control)[0]

    def summary(self):
        return {name: self._mean_se(getattr(self, name)) for name in ("buy", "sell", "control")}

    def histogram(self, name: str, bin_width: float = 0.5):
        x = getattr(self, name)
        if len(x) == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(1)
        lo = np.floor(x.min() / bin_width) * bin_width - bin_width / 2
        hi = np.ceil(x.max() / bin_width) * bin_width + bin_width
        return np.histogram(x, bins=np.arange(lo, hi, bin_width))

    def cumulative(self, name: str) -> np.ndarray:
        return np.cumsum(getattr(self, name))


def window_drift(stream: EventStream, seqs: np.ndarray, window_events: int) -> np.ndarray:
    """Mid move in ticks from just before event ``s`` to ``window_events`` events later."""
    seqs = np.asarray(seqs, dtype=np.int64)
    mid_x2 = stream.mid_x2
    n = len(stream)
    before = np.where(seqs > 0, mid_x2[np.maximum(seqs - 1, 0)],
                      stream.start_mid_x2 if stream.start_mid_x2 is not None else mid_x2[0])
    end = mid_x2[np.minimum(seqs - 1 + window_events, n - 1)]
    # one tick of mid is 4 units of mid_x2
    return (end - before) / 4.0


def drift_after_fills(report: BacktestReport, events, window_events: int = 100, seed: int = 0) -> DriftStats:
    if not report.fills:
        raise InsufficientData("no fills to measure drift after")
    if window_events < 1:
        raise ValueError("window_events must be >= 1")
    stream = as_stream(events)
    buy = np.array([f.fill_seq for f in report.fills if f.side == Side.BUY], dtype=np.int64)
    sell = np.array([f.fill_seq for f in report.fills if f.side == Side.SELL], dtype=np.int64)
    rng = rng_for(seed, "drift-control")
    n_control = max(len(buy), len(sell))
    control = np.sort(rng.integers(1, max(len(stream), 2), size=n_control))
    return DriftStats(
        window_events=window_events,
        buy=window_drift(stream, buy, window_events),
        sell=window_drift(stream, sell, window_events),
        control=window_drift(stream, control, window_events),
        control_seq=control,
    )
