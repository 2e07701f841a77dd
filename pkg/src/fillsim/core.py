"""Tick-grid price arithmetic and the event/order vocabulary.

Prices are carried internally as integers counting half-ticks, so the mid of a
one-tick market is always an exact integer.
"""

from __future__ import annotations

import enum
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence, Union, overload

import numpy as np


class FillSimError(Exception):
    """Base class for all package errors."""


class OffGridPrice(FillSimError):
    pass


class InvalidSpread(FillSimError):
    pass


class InvalidParams(FillSimError):
    pass


class MalformedStream(FillSimError):
    pass


class InsufficientData(FillSimError):
    pass


class EmptyStream(InsufficientData):
    pass


class MoveDirection(enum.IntEnum):
    DOWN = -1
    MIDDLE = 0
    UP = 1

    @property
    def ticks(self) -> int:
        return int(self)

    @property
    def letter(self) -> str:
        return "UMD"[1 - int(self)]


class Side(enum.IntEnum):
    BUY = 1
    SELL = -1


class Aggressor(enum.IntEnum):
    """Aggressor of a market order. Zero in arrays means no trade."""

    BUY = 1
    SELL = -1

    def opposes(self, side: Side) -> bool:
        # a sell market order executes against resting buys, and vice versa
        return int(self) == -int(side)


class OrderState(enum.Enum):
    WORKING = "working"
    FILLED = "filled"
    CANCELED = "canceled"


@dataclass(frozen=True)
class TickGrid:
    tick_size: Fraction

    def __init__(self, tick_size: Union[Fraction, float, str, int]):
        ts = Fraction(tick_size) if not isinstance(tick_size, float) else Fraction(tick_size).limit_denominator(10**9)
        if ts <= 0:
            raise InvalidParams(f"tick_size must be positive, got {tick_size}")
        object.__setattr__(self, "tick_size", ts)

    @property
    def half_tick(self) -> Fraction:
        return self.tick_size / 2

    def to_internal(self, price: Union[float, str, Fraction, int]) -> int:
        return to_internal(price, self)

    def to_external(self, half_ticks: int) -> float:
        return to_external(half_ticks, self)

    def half_ticks_to_price(self, half_ticks) -> float:
        """Convert a (possibly fractional) half-tick amount to price units."""
        return float(half_ticks) * float(self.half_tick)


TY_GRID = TickGrid(Fraction(1, 64))

# 14149 half-ticks on the 1/64 grid is 110.5390625; bid/ask 14148/14150
DEFAULT_START_MID = 14149


def to_internal(price: Union[float, str, Fraction, int], grid: TickGrid) -> int:
    exact = Fraction(price) if not isinstance(price, float) else Fraction(repr(price))
    q = exact / grid.half_tick
    n = round(q)
    if abs(q - n) * grid.half_tick > Fraction(1, 10**9) * grid.tick_size:
        raise OffGridPrice(f"price {price} is not on the half-tick lattice of tick {grid.tick_size}")
    return int(n)


def to_external(half_ticks: int, grid: TickGrid) -> float:
    return float(half_ticks * grid.half_tick)


@dataclass(frozen=True)
class TradeMark:
    aggressor: Aggressor
    qty: int = 1

    def __post_init__(self):
        if self.qty < 1:
            raise InvalidParams(f"trade qty must be >= 1, got {self.qty}")


@dataclass(frozen=True)
class MarketEvent:
    seq: int
    time_s: float
    move: MoveDirection
    best_bid: int
    best_ask: int
    trade: Optional[TradeMark] = None

    @property
    def spread(self) -> int:
        return self.best_ask - self.best_bid


def mid_of(event: MarketEvent) -> int:
    if event.best_ask - event.best_bid != 2:
        raise InvalidSpread(
            f"event {event.seq}: spread is {event.best_ask - event.best_bid} half-ticks, expected 2"
        )
    return (event.best_bid + event.best_ask) // 2


@dataclass(frozen=True)
class VirtualOrder:
    id: int
    side: Side
    price: int
    created_seq: int
    qty: int = 1
    state: OrderState = OrderState.WORKING


@dataclass(frozen=True)
class FillRecord:
    order_id: int
    side: Side
    fill_seq: int
    fill_price: int
    mid_at_fill: int
    adverse: bool


@dataclass(eq=False)
class EventStream(Sequence[MarketEvent]):
    """Columnar store of market events; indexing yields ``MarketEvent`` views.

    ``trade_side`` holds +1 (buy aggressor), -1 (sell aggressor) or 0 (no trade).
    Event ``seq`` equals the position in the stream.
    """

    time_s: np.ndarray
    best_bid: np.ndarray
    best_ask: np.ndarray
    trade_side: np.ndarray = None
    trade_qty: np.ndarray = None
    grid: TickGrid = field(default=TY_GRID)
    move: np.ndarray = None
    start_mid_x2: Optional[int] = None

    def __post_init__(self):
        self.time_s = np.ascontiguousarray(self.time_s, dtype=np.float64)
        self.best_bid = np.ascontiguousarray(self.best_bid, dtype=np.int64)
        self.best_ask = np.ascontiguousarray(self.best_ask, dtype=np.int64)
        n = len(self.time_s)
        if len(self.best_bid) != n or len(self.best_ask) != n:
            raise MalformedStream("column lengths differ")
        if self.trade_side is None:
            self.trade_side = np.zeros(n, dtype=np.int8)
        else:
            self.trade_side = np.ascontiguousarray(self.trade_side, dtype=np.int8)
        if self.trade_qty is None:
            self.trade_qty = (self.trade_side != 0).astype(np.int32)
        else:
            self.trade_qty = np.ascontiguousarray(self.trade_qty, dtype=np.int32)
        if self.move is None:
            self.move = derive_moves(self.best_bid + self.best_ask, self.start_mid_x2)
        else:
            self.move = np.ascontiguousarray(self.move, dtype=np.int8)

    def __len__(self) -> int:
        return len(self.time_s)

    @overload
    def __getitem__(self, i: int) -> MarketEvent: ...

    @overload
    def __getitem__(self, i: slice) -> "EventStream": ...

    def __getitem__(self, i):
        if isinstance(i, slice):
            return self.slice(i)
        n = len(self)
        if i < 0:
            i += n
        if not 0 <= i < n:
            raise IndexError(i)
        side = int(self.trade_side[i])
        trade = TradeMark(Aggressor(side), int(self.trade_qty[i])) if side else None
        return MarketEvent(
            seq=i,
            time_s=float(self.time_s[i]),
            move=MoveDirection(int(self.move[i])),
            best_bid=int(self.best_bid[i]),
            best_ask=int(self.best_ask[i]),
            trade=trade,
        )

    def __iter__(self) -> Iterator[MarketEvent]:
        for i in range(len(self)):
            yield self[i]

    def slice(self, s: slice) -> "EventStream":
        start, _, step = s.indices(len(self))
        if step != 1:
            raise ValueError("only contiguous slices are supported")
        prev = self.start_mid_x2 if start == 0 else int(self.mid_x2[start - 1])
        return EventStream(
            time_s=self.time_s[s],
            best_bid=self.best_bid[s],
            best_ask=self.best_ask[s],
            trade_side=self.trade_side[s],
            trade_qty=self.trade_qty[s],
            move=self.move[s],
            start_mid_x2=prev,
            grid=self.grid,
        )

    @property
    def mid_x2(self) -> np.ndarray:
        """Twice the mid price, in half-ticks (always an integer)."""
        return self.best_bid + self.best_ask

    @property
    def wide_spread(self) -> np.ndarray:
        return (self.best_ask - self.best_bid) != 2

    def equals(self, other: "EventStream") -> bool:
        return (
            self.grid == other.grid
            and np.array_equal(self.time_s, other.time_s)
            and np.array_equal(self.best_bid, other.best_bid)
            and np.array_equal(self.best_ask, other.best_ask)
            and np.array_equal(self.trade_side, other.trade_side)
            and np.array_equal(self.trade_qty, other.trade_qty)
            and np.array_equal(self.move, other.move)
            and self.start_mid_x2 == other.start_mid_x2
        )

    @classmethod
    def from_events(cls, events: Sequence[MarketEvent], grid: TickGrid = TY_GRID) -> "EventStream":
        if isinstance(events, EventStream):
            return events
        evs = list(events)
        sides = [int(e.trade.aggressor) if e.trade else 0 for e in evs]
        qtys = [e.trade.qty if e.trade else 0 for e in evs]
        return cls(
            time_s=np.array([e.time_s for e in evs], dtype=np.float64),
            best_bid=np.array([e.best_bid for e in evs], dtype=np.int64),
            best_ask=np.array([e.best_ask for e in evs], dtype=np.int64),
            trade_side=np.array(sides, dtype=np.int8),
            trade_qty=np.array(qtys, dtype=np.int32),
            move=np.array([int(e.move) for e in evs], dtype=np.int8),
            grid=grid,
        )


def as_stream(events, grid: TickGrid = TY_GRID) -> EventStream:
    return events if isinstance(events, EventStream) else EventStream.from_events(events, grid)


def derive_moves(mid_x2: np.ndarray, start_mid_x2: Optional[int] = None) -> np.ndarray:
    """Sign of the mid change into each event.

    The first event is compared with ``start_mid_x2`` when known, else MIDDLE.
    """
    mid_x2 = np.asarray(mid_x2, dtype=np.int64)
    move = np.zeros(len(mid_x2), dtype=np.int8)
    if len(mid_x2) == 0:
        return move
    move[1:] = np.sign(np.diff(mid_x2))
    if start_mid_x2 is not None:
        move[0] = np.sign(mid_x2[0] - start_mid_x2)
    return move


def rng_for(seed, purpose: str) -> np.random.Generator:
    """Generator for one consumer of an integer seed.

    Components seeded with the same integer must not share draws, so the
    purpose name is folded into the seed sequence. Generators pass through.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        return np.random.default_rng()
    tag = zlib.crc32(purpose.encode())
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(tag,)))
