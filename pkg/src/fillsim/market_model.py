"""Synthetic market-event generators.

Three families of stream:

* ``simulate_umd`` -- i.i.d. up/middle/down one-tick moves on a uniform clock.
* ``simulate_gchp`` -- +/-1 tick moves whose direction follows a two-state
  Markov chain and whose arrival times follow a self-exciting Hawkes process.
* ``attach_trades`` -- decorates any stream with market-order marks.

All generators take ``seed`` as an integer, ``None`` or an existing
``numpy.random.Generator``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .core import (
    DEFAULT_START_MID,
    TY_GRID,
    Aggressor,
    EventStream,
    InvalidParams,
    MoveDirection,
    TickGrid,
    rng_for,
)

_PROB_TOL = 1e-9


class NonStationary(InvalidParams):
    pass


class Reducible(InvalidParams):
    pass


def _check_prob(name: str, p: float) -> None:
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise InvalidParams(f"{name} must lie in [0, 1], got {p}")


@dataclass(frozen=True)
class ModelParams:
    p_up: float
    p_mid: float
    p_down: float
    r_f: float = 0.0
    p_fill_down: float = 1.0

    def __post_init__(self):
        for name in ("p_up", "p_mid", "p_down"):
            _check_prob(name, getattr(self, name))
        total = self.p_up + self.p_mid + self.p_down
        if abs(total - 1.0) > _PROB_TOL:
            raise InvalidParams(f"p_up + p_mid + p_down must equal 1, got {total}")
        if not (0.0 <= self.r_f < 1.0):
            raise InvalidParams(f"r_f must lie in [0, 1), got {self.r_f}")
        if not (0.0 < self.p_fill_down <= 1.0):
            raise InvalidParams(f"p_fill_down must lie in (0, 1], got {self.p_fill_down}")

    @classmethod
    def symmetric(cls, p_move: float, r_f: float = 0.0, p_fill_down: float = 1.0) -> "ModelParams":
        """Equal up and down probability ``p_move``; the remainder is middle."""
        return cls(p_move, 1.0 - 2.0 * p_move, p_move, r_f, p_fill_down)

    def mirrored(self) -> "ModelParams":
        """Swap up and down; maps the sell-side problem onto the buy side."""
        return ModelParams(self.p_down, self.p_mid, self.p_up, self.r_f, self.p_fill_down)


# Calibrated values from a 1-second resampling of a TY futures session.
TY_1S_PARAMS = ModelParams(p_up=0.0173, p_mid=0.9654, p_down=0.0173, r_f=0.018, p_fill_down=1.0)


@dataclass(frozen=True)
class HawkesParams:
    mu: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.mu > 0:
            raise InvalidParams(f"mu must be positive, got {self.mu}")
        if not self.alpha >= 0:
            raise InvalidParams(f"alpha must be non-negative, got {self.alpha}")
        if not self.beta > 0:
            raise InvalidParams(f"beta must be positive, got {self.beta}")
        if self.alpha >= self.beta:
            raise NonStationary(f"alpha ({self.alpha}) must be below beta ({self.beta})")

    @property
    def branching_ratio(self) -> float:
        return self.alpha / self.beta

    @property
    def stationary_rate(self) -> float:
        return self.mu / (1.0 - self.branching_ratio)


@dataclass(frozen=True)
class GchpParams:
    """Two-state Markov chain on move direction plus Hawkes arrival times.

    ``p_du`` is the probability that a down move follows an up move, ``p_ud``
    that an up move follows a down move.
    """

    p_uu: float
    p_du: float
    p_ud: float
    p_dd: float
    hawkes: HawkesParams = HawkesParams(mu=1.0, alpha=0.0, beta=1.0)

    def __post_init__(self):
        for name in ("p_uu", "p_du", "p_ud", "p_dd"):
            _check_prob(name, getattr(self, name))
        if abs(self.p_uu + self.p_du - 1.0) > _PROB_TOL:
            raise InvalidParams("p_uu + p_du must equal 1")
        if abs(self.p_ud + self.p_dd - 1.0) > _PROB_TOL:
            raise InvalidParams("p_ud + p_dd must equal 1")

    @classmethod
    def from_leave(cls, p_du: float, p_ud: float, hawkes: Optional[HawkesParams] = None) -> "GchpParams":
        kw = {} if hawkes is None else {"hawkes": hawkes}
        return cls(p_uu=1.0 - p_du, p_du=p_du, p_ud=p_ud, p_dd=1.0 - p_ud, **kw)

    @property
    def irreducible(self) -> bool:
        return min(self.p_uu, self.p_du, self.p_ud, self.p_dd) > 0.0


def _default_side_rule() -> Dict[MoveDirection, Aggressor]:
    return {MoveDirection.UP: Aggressor.BUY, MoveDirection.DOWN: Aggressor.SELL}


@dataclass(frozen=True)
class TradeFlowParams:
    p_trade_on_mid: float = 0.05
    side_rule: Dict[MoveDirection, Aggressor] = field(default_factory=_default_side_rule, hash=False)

    def __post_init__(self):
        _check_prob("p_trade_on_mid", self.p_trade_on_mid)


def gchp_steady_state(g: GchpParams) -> Tuple[float, float]:
    if not g.irreducible:
        raise Reducible("all four transition probabilities must be positive")
    q_up = g.p_ud / (g.p_ud + g.p_du)
    return q_up, 1.0 - q_up


def _book_from_mid(mid: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return mid - 1, mid + 1


def _check_start_mid(start_mid: int) -> None:
    if start_mid % 2 != 1:
        raise InvalidParams(f"start_mid must be odd (one-tick spread around it), got {start_mid}")


def simulate_umd(
    params: ModelParams,
    n_steps: int,
    dt_s: float = 1.0,
    start_mid: int = DEFAULT_START_MID,
    seed=None,
    grid: TickGrid = TY_GRID,
) -> EventStream:
    """Stream of ``n_steps`` events at times ``k * dt_s``; event k carries the
    k-th i.i.d. move, the first one measured from ``start_mid``."""
    if n_steps < 1:
        raise InvalidParams(f"n_steps must be >= 1, got {n_steps}")
    if not dt_s > 0:
        raise InvalidParams(f"dt_s must be positive, got {dt_s}")
    _check_start_mid(start_mid)
    rng = rng_for(seed, "umd")
    u = rng.random(n_steps)
    move = np.zeros(n_steps, dtype=np.int8)
    move[u < params.p_up] = 1
    move[u >= 1.0 - params.p_down] = -1
    if params.p_down == 0.0:
        move[move == -1] = 0
    mid = start_mid + 2 * np.cumsum(move, dtype=np.int64)
    bid, ask = _book_from_mid(mid)
    return EventStream(
        time_s=np.arange(n_steps, dtype=np.float64) * dt_s,
        best_bid=bid,
        best_ask=ask,
        move=move,
        start_mid_x2=2 * start_mid,
        grid=grid,
    )


class _Draws:
    """Buffered scalar draws from a numpy Generator (much faster than one call per draw)."""

    def __init__(self, rng: np.random.Generator, block: int = 4096):
        self.rng = rng
        self.block = block
        self._exp = self._uni = None
        self._i = block

    def pair(self) -> Tuple[float, float]:
        if self._i >= self.block:
            self._exp = self.rng.standard_exponential(self.block).tolist()
            self._uni = self.rng.random(self.block).tolist()
            self._i = 0
        i = self._i
        self._i += 1
        return self._exp[i], self._uni[i]


def simulate_hawkes(h: HawkesParams, horizon_s: float, seed=None) -> np.ndarray:
    """Event times of a Hawkes process with kernel ``alpha * exp(-beta * t)`` on
    ``[0, horizon_s)``, by Ogata thinning.

    Between events the intensity only decays, so the intensity just after the
    current time is a valid upper bound for the next candidate.
    """
    if not horizon_s > 0:
        raise InvalidParams(f"horizon_s must be positive, got {horizon_s}")
    rng = rng_for(seed, "hawkes")
    draws = _Draws(rng)
    mu, alpha, beta = h.mu, h.alpha, h.beta
    exp = math.exp
    t = 0.0
    excite = 0.0  # sum of alpha * exp(-beta * (t - t_i)) over past events
    times = []
    while True:
        lam_bar = mu + excite
        e, u = draws.pair()
        w = e / lam_bar
        t += w
        if t >= horizon_s:
            break
        excite *= exp(-beta * w)
        if u * lam_bar <= mu + excite:
            times.append(t)
            excite += alpha
    return np.asarray(times, dtype=np.float64)


def markov_moves(g: GchpParams, n: int, start_state: MoveDirection = MoveDirection.UP, seed=None) -> np.ndarray:
    """``n`` move directions (+1/-1) of the two-state chain, the first one
    conditioned on ``start_state``.

    Sampled run by run: a stay in state s lasts a geometric number of moves
    with success probability P(leave s).
    """
    if start_state not in (MoveDirection.UP, MoveDirection.DOWN):
        raise InvalidParams("start_state must be UP or DOWN")
    rng = rng_for(seed, "markov")
    out = np.empty(n, dtype=np.int8)
    leave = {1: g.p_du, -1: g.p_ud}
    state = int(start_state)
    pos = 0
    first = True
    while pos < n:
        p = leave[state]
        if p == 0.0:
            run = n - pos
        else:
            run = int(rng.geometric(p))
            if first:
                run -= 1  # the first draw may leave the starting state immediately
        first = False
        run = min(run, n - pos)
        out[pos:pos + run] = state
        pos += run
        state = -state
    return out


def simulate_gchp(
    g: GchpParams,
    horizon_s: float,
    start_state: MoveDirection = MoveDirection.UP,
    start_mid: int = DEFAULT_START_MID,
    seed=None,
    grid: TickGrid = TY_GRID,
) -> EventStream:
    _check_start_mid(start_mid)
    rng = rng_for(seed, "gchp")
    times = simulate_hawkes(g.hawkes, horizon_s, rng)
    move = markov_moves(g, len(times), start_state, rng)
    mid = start_mid + 2 * np.cumsum(move, dtype=np.int64)
    bid, ask = _book_from_mid(mid)
    return EventStream(
        time_s=times,
        best_bid=bid,
        best_ask=ask,
        move=move,
        start_mid_x2=2 * start_mid,
        grid=grid,
    )


def attach_trades(events: EventStream, t: TradeFlowParams = TradeFlowParams(), seed=None) -> EventStream:
    """Copy of ``events`` with market-order marks.

    Move events always carry a trade on the side given by ``t.side_rule``;
    middle events carry one with probability ``t.p_trade_on_mid``, side by a
    fair coin.
    """
    rng = rng_for(seed, "trades")
    n = len(events)
    move = events.move
    side = np.zeros(n, dtype=np.int8)
    for direction, aggr in t.side_rule.items():
        side[move == int(direction)] = int(aggr)
    u = rng.random(n)
    coin = rng.random(n) < 0.5
    on_mid = (move == 0) & (u < t.p_trade_on_mid)
    side[on_mid] = np.where(coin[on_mid], 1, -1)
    return EventStream(
        time_s=events.time_s,
        best_bid=events.best_bid,
        best_ask=events.best_ask,
        trade_side=side,
        trade_qty=(side != 0).astype(np.int32),
        move=events.move,
        start_mid_x2=events.start_mid_x2,
        grid=events.grid,
    )
