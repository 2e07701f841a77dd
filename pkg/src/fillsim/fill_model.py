"""Fill-decision engines for resting at-the-touch orders.

A ``FillTechnique`` is an immutable description (what to simulate); calling
``bind(stream, rng)`` yields a ``FillEngine`` holding the per-run state.
Engines draw their randomness for the whole stream up front, so a decision at
event k does not depend on which other events the caller chose to visit.

``candidates`` lists the events, beyond touch changes and trade prints, at
which the engine might fill a working order. The backtest loop may skip every
other event.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Union

import numpy as np

from .core import EventStream, InvalidParams, MarketEvent, MoveDirection, Side, VirtualOrder
from .market_model import HawkesParams, simulate_hawkes


@dataclass(frozen=True)
class FillDecision:
    filled: bool
    adverse: bool = False
    fill_price: int = None

    def __post_init__(self):
        if self.adverse and not self.filled:
            raise ValueError("an adverse decision must be a fill")


NO_FILL = FillDecision(False)


def adverse_move_hits(order: VirtualOrder, event: MarketEvent) -> bool:
    """True when the move in ``event`` pushes the opposite touch through the order."""
    if order.side == Side.BUY:
        return event.move == MoveDirection.DOWN and event.best_ask <= order.price
    return event.move == MoveDirection.UP and event.best_bid >= order.price


def _fill(order: VirtualOrder, adverse: bool = False) -> FillDecision:
    return FillDecision(True, adverse, order.price)


class FillEngine:
    name = "base"
    candidates: np.ndarray

    def __init__(self, stream: EventStream, rng: np.random.Generator):
        self.stream = stream
        self.rng = rng
        self.candidates = np.empty(0, dtype=np.int64)

    def decide(self, order: VirtualOrder, event: MarketEvent) -> FillDecision:
        raise NotImplementedError

    def release(self, order: VirtualOrder) -> None:
        """Forget per-order state once the order is filled or canceled."""


def decide_fill(engine: FillEngine, order: VirtualOrder, event: MarketEvent) -> FillDecision:
    return engine.decide(order, event)


# -- technique 1 ---------------------------------------------------------------


@dataclass(frozen=True)
class AlwaysFillOnTrade:
    """Fill on the first opposing market order."""

    label = "technique1"

    def bind(self, stream: EventStream, rng: np.random.Generator) -> FillEngine:
        return _AlwaysFillEngine(stream, rng)


class _AlwaysFillEngine(FillEngine):
    def decide(self, order, event):
        if event.trade is not None and event.trade.aggressor.opposes(order.side):
            return _fill(order)
        return NO_FILL


# -- technique 2 ---------------------------------------------------------------


@dataclass(frozen=True)
class ExponentialFill:
    """Fill on the first opposing trade whose gap to the previous opposing
    trade is at least an Exp(lambda_f) draw made when the order is created."""

    lambda_f: float
    label = "technique2"

    def __post_init__(self):
        if not self.lambda_f > 0:
            raise InvalidParams(f"lambda_f must be positive, got {self.lambda_f}")

    def bind(self, stream: EventStream, rng: np.random.Generator) -> FillEngine:
        return _ExponentialEngine(stream, rng, self.lambda_f)


def trade_gaps(stream: EventStream) -> np.ndarray:
    """Seconds since the previous trade with the same aggressor side.

    Zero on events without a trade. The first trade of each side measures
    from the start of the stream.
    """
    gaps = np.zeros(len(stream), dtype=np.float64)
    if len(stream) == 0:
        return gaps
    t0 = stream.time_s[0]
    for aggr in (1, -1):
        idx = np.flatnonzero(stream.trade_side == aggr)
        if len(idx):
            t = stream.time_s[idx]
            gaps[idx] = np.diff(t, prepend=t0)
    return gaps


class _ExponentialEngine(FillEngine):
    def __init__(self, stream, rng, lambda_f):
        super().__init__(stream, rng)
        self.scale = 1.0 / lambda_f
        self.gaps = trade_gaps(stream)
        self.pending: Dict[int, float] = {}

    def draw_for(self, order: VirtualOrder) -> float:
        e = self.pending.get(order.id)
        if e is None:
            e = self.pending[order.id] = float(self.rng.exponential(self.scale))
        return e

    def decide(self, order, event):
        # draw at the order's first decision so every order consumes exactly one
        e = self.draw_for(order)
        trade = event.trade
        if trade is not None and trade.aggressor.opposes(order.side) and self.gaps[event.seq] >= e:
            return _fill(order)
        return NO_FILL

    def release(self, order):
        self.pending.pop(order.id, None)


# -- technique 3 ---------------------------------------------------------------


@dataclass(frozen=True)
class AdverseBernoulli:
    """Adverse moves fill with probability ``p_fill_down``; any other event
    fills a working order with probability ``r_f``."""

    r_f: float
    p_fill_down: float = 1.0
    label = "technique3"

    def __post_init__(self):
        if not (0.0 <= self.r_f < 1.0):
            raise InvalidParams(f"r_f must lie in [0, 1), got {self.r_f}")
        if not (0.0 < self.p_fill_down <= 1.0):
            raise InvalidParams(f"p_fill_down must lie in (0, 1], got {self.p_fill_down}")

    def bind(self, stream: EventStream, rng: np.random.Generator) -> FillEngine:
        return _AdverseBernoulliEngine(stream, rng, self.r_f, self.p_fill_down)


class _AdverseEngineBase(FillEngine):
    def __init__(self, stream, rng, p_fill_down):
        super().__init__(stream, rng)
        n = len(stream)
        self.p_fill_down = p_fill_down
        self.adverse_ok = {
            Side.BUY: rng.random(n) < p_fill_down,
            Side.SELL: rng.random(n) < p_fill_down,
        }

    def decide(self, order, event):
        if adverse_move_hits(order, event):
            if self.adverse_ok[order.side][event.seq]:
                return _fill(order, adverse=True)
            return NO_FILL
        if self.passive_fill[order.side][event.seq]:
            return _fill(order)
        return NO_FILL


class _AdverseBernoulliEngine(_AdverseEngineBase):
    def __init__(self, stream, rng, r_f, p_fill_down):
        super().__init__(stream, rng, p_fill_down)
        n = len(stream)
        self.passive_fill = {Side.BUY: rng.random(n) < r_f, Side.SELL: rng.random(n) < r_f}
        self.candidates = np.flatnonzero(self.passive_fill[Side.BUY] | self.passive_fill[Side.SELL])


# -- ground truth --------------------------------------------------------------


@dataclass(frozen=True)
class GroundTruth:
    """Stand-in for a live fill simulator.

    Adverse moves fill with probability ``p_fill_down``. Other fills happen
    when a fill opportunity arrives; opportunities follow a Hawkes process,
    one independent stream per side, so non-adverse fills cluster in time.
    """

    p_fill_down: float
    hawkes: HawkesParams
    label = "ground_truth"

    def __post_init__(self):
        if not (0.0 < self.p_fill_down <= 1.0):
            raise InvalidParams(f"p_fill_down must lie in (0, 1], got {self.p_fill_down}")

    def bind(self, stream: EventStream, rng: np.random.Generator) -> FillEngine:
        return _GroundTruthEngine(stream, rng, self.p_fill_down, self.hawkes)


class _GroundTruthEngine(_AdverseEngineBase):
    def __init__(self, stream, rng, p_fill_down, hawkes):
        super().__init__(stream, rng, p_fill_down)
        n = len(stream)
        self.opportunities = {}
        self.passive_fill = {}
        if n:
            t0, t1 = float(stream.time_s[0]), float(stream.time_s[-1])
            horizon = max(t1 - t0, 0.0) + 1e-9
        for side in (Side.BUY, Side.SELL):
            hit = np.zeros(n, dtype=bool)
            times = np.empty(0)
            if n:
                times = t0 + simulate_hawkes(hawkes, horizon, rng)
                # an opportunity in (t[k-1], t[k]] is seen at event k
                idx = np.searchsorted(stream.time_s, times, side="left")
                hit[idx[idx < n]] = True
            self.opportunities[side] = times
            self.passive_fill[side] = hit
        self.candidates = np.flatnonzero(self.passive_fill[Side.BUY] | self.passive_fill[Side.SELL])


FillTechnique = Union[AlwaysFillOnTrade, ExponentialFill, AdverseBernoulli, GroundTruth]
