"""Parameter estimation from event streams and backtest lifecycles.

Streams are first put on a uniform clock (``resample``); every estimator is a
simple frequency or reciprocal mean with a binomial / delta-method standard
error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional

import numpy as np
from scipy import stats

from .core import EmptyStream, EventStream, InsufficientData, MoveDirection, Side, as_stream, rng_for
from .engine import FILLED, BacktestReport, window_drift
from .market_model import ModelParams
from .theory import drift_given_fill


@dataclass(frozen=True)
class ResampledInterval:
    t_index: int
    last_bid: int
    last_ask: int
    last_mid_x2: int
    order_active_buy: bool
    order_active_sell: bool
    fill_occurred_buy: bool
    fill_occurred_sell: bool
    move: MoveDirection


@dataclass(eq=False)
class Intervals:
    """Columnar resampled stream; ``intervals[i]`` gives a ``ResampledInterval``."""

    interval_s: Optional[float]
    last_bid: np.ndarray
    last_ask: np.ndarray
    mid_change_x2: np.ndarray
    active_buy: np.ndarray
    active_sell: np.ndarray
    fill_buy: np.ndarray
    fill_sell: np.ndarray

    def __len__(self) -> int:
        return len(self.last_bid)

    def __getitem__(self, i: int) -> ResampledInterval:
        return ResampledInterval(
            t_index=i,
            last_bid=int(self.last_bid[i]),
            last_ask=int(self.last_ask[i]),
            last_mid_x2=int(self.last_bid[i] + self.last_ask[i]),
            order_active_buy=bool(self.active_buy[i]),
            order_active_sell=bool(self.active_sell[i]),
            fill_occurred_buy=bool(self.fill_buy[i]),
            fill_occurred_sell=bool(self.fill_sell[i]),
            move=MoveDirection(int(self.move[i])),
        )

    @property
    def move(self) -> np.ndarray:
        return np.sign(self.mid_change_x2).astype(np.int8)

    @property
    def n_multi_tick(self) -> int:
        """Intervals whose mid moved by more than one tick (4 units of mid_x2)."""
        return int(np.count_nonzero(np.abs(self.mid_change_x2) > 4))


def _order_flags(report: Optional[BacktestReport], n: int):
    """Per-event activity and fill flags for each side.

    An order added on event c and terminated on event t works on events c+1..t.
    """
    active = {s: np.zeros(n, dtype=bool) for s in Side}
    filled = {s: np.zeros(n, dtype=bool) for s in Side}
    if report is None:
        return active, filled
    start: Dict[int, int] = {}
    delta = {s: np.zeros(n + 1, dtype=np.int64) for s in Side}
    for ev in report.lifecycle:
        if ev.kind == "added":
            start[ev.order_id] = ev.seq
            continue
        c = start.pop(ev.order_id)
        if ev.seq > c:
            delta[ev.side][c + 1] += 1
            delta[ev.side][ev.seq + 1] -= 1
        if ev.kind == FILLED:
            filled[ev.side][ev.seq] = True
    for s in Side:
        active[s] = np.cumsum(delta[s][:n]) > 0
    return active, filled


def resample(events, interval_s: Optional[float] = 1.0, report: Optional[BacktestReport] = None) -> Intervals:
    """Put ``events`` on a uniform clock of ``interval_s`` seconds.

    Each interval carries the last book of the interval (or of an earlier one
    when it saw no events). Order flags are ORs over the interval's events.
    ``interval_s=None`` keeps one interval per event.
    """
    stream = as_stream(events)
    n = len(stream)
    if n == 0:
        raise EmptyStream("no events to resample")
    active, filled = _order_flags(report, n)
    start_x2 = stream.start_mid_x2 if stream.start_mid_x2 is not None else int(stream.mid_x2[0])
    if interval_s is None:
        mid_x2 = stream.mid_x2
        return Intervals(
            interval_s=None,
            last_bid=stream.best_bid.copy(),
            last_ask=stream.best_ask.copy(),
            mid_change_x2=np.diff(mid_x2, prepend=start_x2),
            active_buy=active[Side.BUY],
            active_sell=active[Side.SELL],
            fill_buy=filled[Side.BUY],
            fill_sell=filled[Side.SELL],
        )
    if not interval_s > 0:
        raise ValueError("interval_s must be positive")
    t0 = stream.time_s[0]
    bucket = np.floor((stream.time_s - t0) / interval_s).astype(np.int64)
    m = int(bucket[-1]) + 1
    # last event index in each non-empty bucket, carried forward into empty ones
    last = np.full(m, -1, dtype=np.int64)
    last[bucket] = np.arange(n)
    last = np.maximum.accumulate(last)
    bid = stream.best_bid[last]
    ask = stream.best_ask[last]
    mid_x2 = bid + ask

    def any_in(flag):
        out = np.zeros(m, dtype=bool)
        np.logical_or.at(out, bucket, flag)
        return out

    return Intervals(
        interval_s=interval_s,
        last_bid=bid,
        last_ask=ask,
        mid_change_x2=np.diff(mid_x2, prepend=start_x2),
        active_buy=any_in(active[Side.BUY]),
        active_sell=any_in(active[Side.SELL]),
        fill_buy=any_in(filled[Side.BUY]),
        fill_sell=any_in(filled[Side.SELL]),
    )


class UmdEstimate(NamedTuple):
    p_up: float
    p_mid: float
    p_down: float
    se_up: float
    se_mid: float
    se_down: float
    n: int


def _binomial_se(p: float, n: int) -> float:
    return float(np.sqrt(p * (1.0 - p) / n)) if n else float("nan")


def estimate_umd(intervals: Intervals) -> UmdEstimate:
    n = len(intervals)
    if n < 2:
        raise EmptyStream("need at least two intervals")
    move = intervals.move
    n_up = int(np.count_nonzero(move > 0))
    n_down = int(np.count_nonzero(move < 0))
    p_up, p_down = n_up / n, n_down / n
    p_mid = (n - n_up - n_down) / n
    return UmdEstimate(p_up, p_mid, p_down, _binomial_se(p_up, n), _binomial_se(p_mid, n), _binomial_se(p_down, n), n)


class FillRateEstimate(NamedTuple):
    r_f: float
    p_fill_down: float
    se_r_f: float
    se_p_fill_down: float
    n_passive: int
    n_adverse: int


def fill_exposure(intervals: Intervals):
    """Counts of (exposures, fills) for adverse and non-adverse intervals, both sides pooled."""
    move = intervals.move
    adv_buy = intervals.active_buy & (move < 0)
    adv_sell = intervals.active_sell & (move > 0)
    pas_buy = intervals.active_buy & ~(move < 0)
    pas_sell = intervals.active_sell & ~(move > 0)
    n_adv = int(adv_buy.sum() + adv_sell.sum())
    k_adv = int((adv_buy & intervals.fill_buy).sum() + (adv_sell & intervals.fill_sell).sum())
    n_pas = int(pas_buy.sum() + pas_sell.sum())
    k_pas = int((pas_buy & intervals.fill_buy).sum() + (pas_sell & intervals.fill_sell).sum())
    return (n_adv, k_adv), (n_pas, k_pas)


def estimate_fill_rates(intervals: Intervals) -> FillRateEstimate:
    (n_adv, k_adv), (n_pas, k_pas) = fill_exposure(intervals)
    if n_pas == 0:
        raise InsufficientData("no order-active intervals without an adverse move; r_f is undefined")
    if n_adv == 0:
        raise InsufficientData("no adverse-move exposure; p_fill_down is undefined")
    r_f = k_pas / n_pas
    p_fd = k_adv / n_adv
    return FillRateEstimate(r_f, p_fd, _binomial_se(r_f, n_pas), _binomial_se(p_fd, n_adv), n_pas, n_adv)


def estimate_lambda_f(fill_times) -> float:
    """Inverse of the mean gap between successive fills."""
    t = np.sort(np.asarray(fill_times, dtype=np.float64))
    if len(t) < 2:
        raise InsufficientData("need at least two fills")
    mean_gap = float(np.mean(np.diff(t)))
    if mean_gap <= 0:
        raise InsufficientData("fills have no time separation")
    return 1.0 / mean_gap


def lambda_f_stderr(fill_times) -> float:
    """Delta-method standard error of ``estimate_lambda_f``, exponential gaps assumed."""
    n_gaps = len(fill_times) - 1
    return estimate_lambda_f(fill_times) / np.sqrt(n_gaps)


@dataclass(frozen=True)
class CalibrationResult:
    model: ModelParams
    lambda_f: Optional[float]
    n_intervals: int
    stderr: Dict[str, float]
    n_multi_tick: int = 0
    n_adverse_exposure: int = 0
    n_passive_exposure: int = 0


def calibrate(events, report: Optional[BacktestReport] = None, interval_s: Optional[float] = 1.0) -> CalibrationResult:
    """Estimate every model parameter. Without a lifecycle only the move
    probabilities are estimated; fill parameters keep their model defaults."""
    intervals = resample(events, interval_s, report)
    umd = estimate_umd(intervals)
    stderr = {"p_up": umd.se_up, "p_mid": umd.se_mid, "p_down": umd.se_down}
    r_f, p_fd, n_adv, n_pas = 0.0, 1.0, 0, 0
    lam = None
    if report is not None:
        rates = estimate_fill_rates(intervals)
        if rates.p_fill_down <= 0:
            raise InsufficientData("no adverse fills observed; p_fill_down must be positive")
        r_f, p_fd, n_adv, n_pas = rates.r_f, rates.p_fill_down, rates.n_adverse, rates.n_passive
        stderr.update(r_f=rates.se_r_f, p_fill_down=rates.se_p_fill_down)
        times = report.fill_times()
        if len(times) >= 2:
            lam = estimate_lambda_f(times)
            stderr["lambda_f"] = float(lambda_f_stderr(times))
    return CalibrationResult(
        model=ModelParams(umd.p_up, umd.p_mid, umd.p_down, r_f, p_fd),
        lambda_f=lam,
        n_intervals=umd.n,
        stderr=stderr,
        n_multi_tick=intervals.n_multi_tick,
        n_adverse_exposure=n_adv,
        n_passive_exposure=n_pas,
    )


class DriftComparison(NamedTuple):
    theoretical_ticks: float
    empirical_ticks: float
    stderr: float
    n: int


def compare_drift(model: ModelParams, report: BacktestReport, events) -> DriftComparison:
    """Closed-form drift given a fill next to the measured one-event drift
    after fills (sell side negated and pooled with the buy side)."""
    if not report.fills:
        raise InsufficientData("report has no fills")
    stream = as_stream(events)
    seqs = np.array([f.fill_seq for f in report.fills], dtype=np.int64)
    sign = np.array([int(f.side) for f in report.fills], dtype=np.float64)
    x = window_drift(stream, seqs, 1) * sign
    se = float(np.std(x, ddof=1) / np.sqrt(len(x))) if len(x) > 1 else float("nan")
    return DriftComparison(drift_given_fill(model), float(np.mean(x)), se, len(x))


@dataclass(eq=False)
class TailReport:
    observed_gaps: np.ndarray
    exponential_gaps: np.ndarray
    lambda_f: float
    bin_edges: np.ndarray
    observed_hist: np.ndarray
    exponential_hist: np.ndarray
    ks_statistic: float
    ks_pvalue: float

    def rejects(self, alpha: float) -> bool:
        return self.ks_pvalue < alpha


def interarrival_tail_report(fill_times, lambda_f: Optional[float] = None, seed=0, n_bins: int = 50) -> TailReport:
    """Observed fill gaps against an equally sized Exp(lambda_f) sample.

    Without ``lambda_f`` the rate is fitted from the gaps, so both samples
    share the same mean.
    """
    t = np.sort(np.asarray(fill_times, dtype=np.float64))
    if len(t) < 30:
        raise InsufficientData(f"need at least 30 fills, got {len(t)}")
    gaps = np.diff(t)
    lam = estimate_lambda_f(t) if lambda_f is None else float(lambda_f)
    rng = rng_for(seed, "tail-report")
    synth = rng.exponential(1.0 / lam, size=len(gaps))
    hi = float(np.quantile(np.concatenate([gaps, synth]), 0.99))
    edges = np.linspace(0.0, hi if hi > 0 else 1.0, n_bins + 1)
    res = stats.ks_2samp(gaps, synth)
    return TailReport(
        observed_gaps=gaps,
        exponential_gaps=synth,
        lambda_f=lam,
        bin_edges=edges,
        observed_hist=np.histogram(gaps, edges)[0],
        exponential_hist=np.histogram(synth, edges)[0],
        ks_statistic=float(res.statistic),
        ks_pvalue=float(res.pvalue),
    )
