"""Event files, run configuration and report writers.

Event file layout (CSV, one row per event)::

    # fillsim-events v1 tick_size=1/64 start_mid_x2=28298
    seq,time_s,type,best_bid,best_ask,trade_price,trade_qty,aggressor
    0,0.0,quote,110.53125,110.546875,,,
    1,1.0,trade,110.53125,110.546875,110.546875,1,B

The comment line is optional when the caller supplies the grid.
"""

from __future__ import annotations

import csv
import dataclasses
import json
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from .calibration import CalibrationResult, TailReport
from .core import (
    TY_GRID,
    DEFAULT_START_MID,
    EventStream,
    FillRecord,
    FillSimError,
    InvalidParams,
    MoveDirection,
    OffGridPrice,
    Side,
    TickGrid,
    as_stream,
)
from .engine import ADDED, FILLED, BacktestReport, DriftStats, LifecycleEvent, _accounts, _windows
from .fill_model import AdverseBernoulli, AlwaysFillOnTrade, ExponentialFill, GroundTruth
from .market_model import GchpParams, HawkesParams, ModelParams, TradeFlowParams
from .theory import DriftReport

PathLike = Union[str, Path]

EVENT_COLUMNS = ["seq", "time_s", "type", "best_bid", "best_ask", "trade_price", "trade_qty", "aggressor"]
MAGIC = "fillsim-events"


class ParseError(FillSimError):
    def __init__(self, message: str, line: Optional[int] = None, column: Optional[str] = None):
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column else "") + ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


class NonMonotoneTime(ParseError):
    pass


class ConfigError(FillSimError):
    pass


# -- event files ---------------------------------------------------------------


def _fmt_price(half_ticks: int, grid: TickGrid) -> str:
    return repr(float(half_ticks * grid.half_tick))


def write_events(events, path: PathLike) -> None:
    stream = as_stream(events)
    grid = stream.grid
    meta = f"# {MAGIC} v1 tick_size={grid.tick_size}"
    if stream.start_mid_x2 is not None:
        meta += f" start_mid_x2={stream.start_mid_x2}"
    bid = stream.best_bid.tolist()
    ask = stream.best_ask.tolist()
    side = stream.trade_side.tolist()
    qty = stream.trade_qty.tolist()
    times = stream.time_s.tolist()
    price_text: Dict[int, str] = {}

    def px(h: int) -> str:
        t = price_text.get(h)
        if t is None:
            t = price_text[h] = _fmt_price(h, grid)
        return t

    lines = [meta, ",".join(EVENT_COLUMNS)]
    for i, t in enumerate(times):
        b, a, s = bid[i], ask[i], side[i]
        if s:
            # the market order executed at the touch standing before this event
            j = i - 1 if i else i
            tp = px(ask[j] if s > 0 else bid[j])
            lines.append(f"{i},{t!r},trade,{px(b)},{px(a)},{tp},{qty[i]},{'B' if s > 0 else 'S'}")
        else:
            lines.append(f"{i},{t!r},quote,{px(b)},{px(a)},,,")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_meta(line: str) -> Dict[str, str]:
    parts = line.lstrip("#").split()
    if not parts or parts[0] != MAGIC:
        return {}
    return dict(p.split("=", 1) for p in parts[2:] if "=" in p)


def read_events(path: PathLike, grid: Optional[TickGrid] = None) -> EventStream:
    """Parse an event file. Rows with spreads wider than one tick are kept
    (``EventStream.wide_spread`` flags them); move directions come from
    consecutive mids.

    The tick size comes from the file's header comment; ``grid`` is used for
    files without one and must agree with it otherwise.
    """
    meta: Dict[str, str] = {}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    lineno = 0
    while lineno < len(lines) and lines[lineno].startswith("#"):
        meta.update(_parse_meta(lines[lineno]))
        lineno += 1
    if "tick_size" in meta:
        declared = TickGrid(Fraction(meta["tick_size"]))
        if grid is not None and grid != declared:
            raise ParseError(f"file declares tick_size={declared.tick_size}, expected {grid.tick_size}", 1)
        grid = declared
    elif grid is None:
        grid = TY_GRID
    start_mid_x2 = int(meta["start_mid_x2"]) if "start_mid_x2" in meta else None
    if lineno >= len(lines):
        raise ParseError("missing header row", lineno + 1)
    header = next(csv.reader([lines[lineno]]))
    if [h.strip() for h in header] != EVENT_COLUMNS:
        raise ParseError(f"header must be {','.join(EVENT_COLUMNS)}", lineno + 1)
    first_data = lineno + 1

    times: List[float] = []
    bids: List[float] = []
    asks: List[float] = []
    sides: List[int] = []
    qtys: List[int] = []
    line_of: List[int] = []
    trade_px = {}
    prev_t = 0.0
    n_cols = len(EVENT_COLUMNS)
    for offset, row in enumerate(csv.reader(lines[first_data:])):
        line = first_data + offset + 1
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != n_cols:
            raise ParseError(f"expected {n_cols} fields, got {len(row)}", line)
        _, t_txt, kind, bid_txt, ask_txt, px_txt, qty_txt, aggr = (f.strip() for f in row)
        col = "time_s"
        try:
            t = float(t_txt)
            col = "best_bid"
            b = float(bid_txt)
            col = "best_ask"
            a = float(ask_txt)
        except ValueError:
            raise ParseError(f"not a number: {row[EVENT_COLUMNS.index(col)]!r}", line, col) from None
        if t < 0:
            raise ParseError("negative timestamp", line, "time_s")
        if t < prev_t:
            raise NonMonotoneTime(f"time {t} is before the previous row's {prev_t}", line, "time_s")
        if a <= b:
            raise ParseError(f"best_ask {ask_txt} is not above best_bid {bid_txt}", line, "best_ask")
        if kind == "trade":
            try:
                q = int(qty_txt)
                trade_px[len(times)] = (line, float(px_txt))
            except ValueError:
                raise ParseError("trade rows need trade_price and an integer trade_qty", line, "trade_qty") from None
            if q < 1:
                raise ParseError("trade_qty must be >= 1", line, "trade_qty")
            if aggr not in ("B", "S"):
                raise ParseError(f"aggressor must be B or S, got {aggr!r}", line, "aggressor")
            sides.append(1 if aggr == "B" else -1)
            qtys.append(q)
        elif kind == "quote":
            sides.append(0)
            qtys.append(0)
        else:
            raise ParseError(f"type must be quote or trade, got {kind!r}", line, "type")
        prev_t = t
        times.append(t)
        bids.append(b)
        asks.append(a)
        line_of.append(line)

    time_s = np.array(times, dtype=np.float64)
    prices = np.column_stack([np.array(bids, dtype=np.float64), np.array(asks, dtype=np.float64)])
    side = np.array(sides, dtype=np.int8)
    qty = np.array(qtys, dtype=np.int32)
    half = float(grid.half_tick)
    q = prices / half
    internal = np.rint(q)
    bad = np.abs(q - internal) > 2e-9
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise OffGridPrice(f"line {line_of[r]}: {('best_bid', 'best_ask')[c]} {prices[r, c]} "
                           f"is not on the half-tick lattice of tick {grid.tick_size}")
    for idx, (line, px) in trade_px.items():
        if abs(px / half - round(px / half)) > 2e-9:
            raise OffGridPrice(f"line {line}: trade_price {px} is off the half-tick lattice")
    internal = internal.astype(np.int64)
    return EventStream(
        time_s=time_s,
        best_bid=internal[:, 0],
        best_ask=internal[:, 1],
        trade_side=side,
        trade_qty=qty,
        start_mid_x2=start_mid_x2,
        grid=grid,
    )


# -- configuration -------------------------------------------------------------


@dataclasses.dataclass
class RunConfig:
    """Flat run configuration; each key of a config file is a field name."""

    tick_size: Fraction = Fraction(1, 64)
    # discrete up/middle/down model; defaults are the 1-second TY calibration
    p_up: float = 0.0173
    p_mid: float = 0.9654
    p_down: float = 0.0173
    r_f: float = 0.018
    p_fill_down: float = 1.0
    dt_s: float = 1.0
    start_mid: int = DEFAULT_START_MID
    # Markov/Hawkes model
    p_uu: float = 0.5
    p_du: float = 0.5
    p_ud: float = 0.5
    p_dd: float = 0.5
    hawkes_mu: float = 1.0
    hawkes_alpha: float = 0.5
    hawkes_beta: float = 1.0
    start_state: str = "U"
    # market orders
    p_trade_on_mid: float = 0.05
    # fill techniques
    technique: str = "3"
    lambda_f: float = 0.0842
    gt_p_fill_down: float = 0.99
    gt_mu: float = 0.003
    gt_alpha: float = 0.0475
    gt_beta: float = 0.05
    # run control
    seed: int = 0
    resample_s: float = 1.0
    drift_window: int = 100
    pnl_window_s: float = 300.0

    def grid(self) -> TickGrid:
        return TickGrid(self.tick_size)

    def model_params(self) -> ModelParams:
        return ModelParams(self.p_up, self.p_mid, self.p_down, self.r_f, self.p_fill_down)

    def gchp_params(self) -> GchpParams:
        return GchpParams(self.p_uu, self.p_du, self.p_ud, self.p_dd,
                          HawkesParams(self.hawkes_mu, self.hawkes_alpha, self.hawkes_beta))

    def trade_params(self) -> TradeFlowParams:
        return TradeFlowParams(self.p_trade_on_mid)

    def ground_truth(self) -> GroundTruth:
        return GroundTruth(self.gt_p_fill_down, HawkesParams(self.gt_mu, self.gt_alpha, self.gt_beta))

    def start_direction(self) -> MoveDirection:
        try:
            return {"U": MoveDirection.UP, "D": MoveDirection.DOWN}[self.start_state.upper()[:1]]
        except (KeyError, IndexError):
            raise ConfigError(f"start_state must be U or D, got {self.start_state!r}") from None

    def technique_for(self, name: Optional[str] = None):
        name = (name or self.technique).lower()
        if name in ("1", "technique1"):
            return AlwaysFillOnTrade()
        if name in ("2", "technique2"):
            return ExponentialFill(self.lambda_f)
        if name in ("3", "technique3"):
            return AdverseBernoulli(self.r_f, self.p_fill_down)
        if name in ("ground-truth", "ground_truth", "gt"):
            return self.ground_truth()
        raise ConfigError(f"unknown technique {name!r}")

    def validate(self) -> "RunConfig":
        try:
            self.grid()
            self.model_params()
            self.gchp_params()
            self.trade_params()
            self.ground_truth()
            self.start_direction()
        except InvalidParams as exc:
            raise ConfigError(str(exc)) from exc
        if self.drift_window < 1 or self.resample_s <= 0 or self.pnl_window_s <= 0 or self.dt_s <= 0:
            raise ConfigError("drift_window, resample_s, pnl_window_s and dt_s must be positive")
        return self


def _convert(kind, raw: str):
    if kind is Fraction:
        return Fraction(raw)
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def parse_config(text: str) -> RunConfig:
    types = {f.name: type(f.default) for f in dataclasses.fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = _convert(types[key], value)
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from None
    return RunConfig(**values).validate()


def load_config(path: Optional[PathLike]) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    return parse_config(Path(path).read_text())


# -- reports -------------------------------------------------------------------


def _kv(pairs: Iterable) -> str:
    return "".join(f"{k}={v}\n" for k, v in pairs)


def _f(x: float, digits: int = 6) -> str:
    return f"{x:.{digits}f}"


def sidecar(path: PathLike, name: str) -> Path:
    """``run.txt`` + ``fills`` -> ``run.fills.csv``."""
    p = Path(path)
    return p.with_name(f"{p.stem}.{name}.csv")


def write_report(report, path: PathLike) -> None:
    if isinstance(report, BacktestReport):
        _write_backtest(report, Path(path))
    elif isinstance(report, CalibrationResult):
        _write_calibration(report, Path(path))
    elif isinstance(report, DriftReport):
        Path(path).write_text(drift_report_text(report))
    else:
        raise TypeError(f"cannot write {type(report).__name__}")


def drift_report_text(r: DriftReport) -> str:
    return _kv([
        ("drift_unconditional_ticks", repr(r.drift_unconditional_ticks)),
        ("fill_probability", repr(r.fill_probability)),
        ("drift_given_fill_ticks", repr(r.drift_given_fill_ticks)),
        ("drift_given_fill_ticks_2dp", _f(r.drift_given_fill_ticks, 2)),
    ])


def backtest_summary(r: BacktestReport) -> str:
    n_adverse = sum(f.adverse for f in r.fills)
    return _kv([
        ("technique", r.technique),
        ("seed", r.seed),
        ("tick_size", r.grid.tick_size),
        ("n_events", r.n_events),
        ("n_orders", r.n_orders),
        ("n_fills", r.n_fills),
        ("n_adverse_fills", n_adverse),
        ("fill_rate", f"{r.n_fills}/{r.n_orders}"),
        ("global_fill_rate", _f(r.global_fill_rate, 4)),
        ("final_position", int(r.position[-1]) if r.n_events else 0),
        ("final_pnl", repr(float(r.pnl_price(r.final_pnl)))),
        ("final_pnl_ticks", _f(r.final_pnl / 2, 1)),
        ("window_s", repr(float(r.window_s))),
        ("n_windows", len(r.window_end)),
    ])


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_backtest(r: BacktestReport, path: Path) -> None:
    path.write_text(backtest_summary(r))
    g = r.grid
    _write_csv(sidecar(path, "lifecycle"), ["kind", "order_id", "seq", "time_s", "price", "side"],
               ([e.kind, e.order_id, e.seq, repr(e.time_s), _fmt_price(e.price, g), e.side.name] for e in r.lifecycle))
    _write_csv(sidecar(path, "fills"), ["order_id", "side", "fill_seq", "time_s", "fill_price", "mid_at_fill", "adverse"],
               ([f.order_id, f.side.name, f.fill_seq, repr(float(r.time_s[f.fill_seq])), _fmt_price(f.fill_price, g),
                 _fmt_price(f.mid_at_fill, g), int(f.adverse)] for f in r.fills))
    pnl = r.window_pnl
    _write_csv(sidecar(path, "pnl"), ["window", "end_time_s", "cumulative_pnl", "increment"],
               ([i, repr(float(t)), repr(float(p * g.half_tick)), repr(float(d * g.half_tick))]
                for i, (t, p, d) in enumerate(zip(r.window_times, pnl, r.window_increments))))


def read_lifecycle(path: PathLike, grid: TickGrid = TY_GRID) -> List[LifecycleEvent]:
    out = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.DictReader(fh), 2):
            try:
                out.append(LifecycleEvent(row["kind"], int(row["order_id"]), int(row["seq"]), float(row["time_s"]),
                                          grid.to_internal(row["price"]), Side[row["side"]]))
            except (KeyError, ValueError) as exc:
                raise ParseError(f"bad lifecycle row ({exc})", lineno) from None
    return out


def report_from_lifecycle(lifecycle: List[LifecycleEvent], events, technique: str = "recorded",
                          window_s: float = 300.0, seed: int = 0) -> BacktestReport:
    """Rebuild a backtest report (accounts, fills, windows) from an order log."""
    from .fill_model import adverse_move_hits
    from .core import VirtualOrder

    stream = as_stream(events)
    orders = {}
    fills = []
    for e in lifecycle:
        if e.kind == ADDED:
            orders[e.order_id] = VirtualOrder(e.order_id, e.side, e.price, e.seq)
        elif e.kind == FILLED:
            ev = stream[e.seq]
            fills.append(FillRecord(e.order_id, e.side, e.seq, e.price, (ev.best_bid + ev.best_ask) // 2,
                                    adverse_move_hits(orders[e.order_id], ev)))
    n = len(stream)
    position, cash = _accounts(fills, n)
    return BacktestReport(
        technique=technique, seed=seed, grid=stream.grid, time_s=stream.time_s, lifecycle=list(lifecycle),
        fills=fills, position=position, cash=cash, pnl=cash + position.astype(np.int64) * (stream.mid_x2 // 2),
        window_s=window_s, window_end=_windows(stream.time_s, window_s),
    )


def read_report(path: PathLike, events) -> BacktestReport:
    """Load a report written by ``write_report`` against its event stream."""
    stream = as_stream(events)
    meta = dict(line.split("=", 1) for line in Path(path).read_text().splitlines() if "=" in line)
    lifecycle = read_lifecycle(sidecar(path, "lifecycle"), stream.grid)
    return report_from_lifecycle(lifecycle, stream, meta.get("technique", "recorded"),
                                 float(meta.get("window_s", 300.0)), int(meta.get("seed", 0)))


def calibration_record(c: CalibrationResult) -> dict:
    m = c.model
    rec = {
        "p_up": m.p_up, "p_mid": m.p_mid, "p_down": m.p_down, "r_f": m.r_f, "p_fill_down": m.p_fill_down,
        "lambda_f": c.lambda_f, "n_intervals": c.n_intervals, "n_multi_tick": c.n_multi_tick,
        "n_adverse_exposure": c.n_adverse_exposure, "n_passive_exposure": c.n_passive_exposure,
    }
    rec.update({f"se_{k}": v for k, v in sorted(c.stderr.items())})
    return rec


def _write_calibration(c: CalibrationResult, path: Path) -> None:
    rec = calibration_record(c)
    path.write_text(_kv((k, "none" if v is None else v) for k, v in rec.items()))
    path.with_suffix(".json").write_text(json.dumps(rec, indent=2, sort_keys=True) + "\n")


def write_drift(stats: DriftStats, out_dir: PathLike) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [("window_events", stats.window_events)]
    for name, (mean, se) in stats.summary().items():
        lines += [(f"{name}_n", len(getattr(stats, name))), (f"{name}_mean_ticks", _f(mean)), (f"{name}_stderr", _f(se))]
    (out / "drift_summary.txt").write_text(_kv(lines))
    rows = []
    for name in ("buy", "sell", "control"):
        x = getattr(stats, name)
        rows += [[name, i, repr(float(v)), repr(float(c))] for i, (v, c) in enumerate(zip(x, np.cumsum(x)))]
    _write_csv(out / "drift_samples.csv", ["group", "index", "drift_ticks", "cumulative_ticks"], rows)
    hrows = []
    for name in ("buy", "sell", "control"):
        counts, edges = stats.histogram(name)
        hrows += [[name, repr(float(lo)), repr(float(hi)), int(c)] for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
    _write_csv(out / "drift_histograms.csv", ["group", "bin_lo_ticks", "bin_hi_ticks", "count"], hrows)


def write_tail_report(t: TailReport, path: PathLike) -> None:
    p = Path(path)
    p.write_text(_kv([("n_gaps", len(t.observed_gaps)), ("lambda_f", _f(t.lambda_f)),
                      ("ks_statistic", _f(t.ks_statistic)), ("ks_pvalue", repr(t.ks_pvalue))]))
    _write_csv(sidecar(p, "hist"), ["bin_lo_s", "bin_hi_s", "observed", "exponential"],
               ([repr(float(lo)), repr(float(hi)), int(a), int(b)] for lo, hi, a, b in
                zip(t.bin_edges[:-1], t.bin_edges[1:], t.observed_hist, t.exponential_hist)))
