"""Fill modelling and backtesting for at-the-touch market making."""

from .core import (
    TY_GRID,
    Aggressor,
    EventStream,
    FillRecord,
    FillSimError,
    InsufficientData,
    InvalidParams,
    InvalidSpread,
    MalformedStream,
    MarketEvent,
    MoveDirection,
    OffGridPrice,
    Side,
    TickGrid,
    TradeMark,
    VirtualOrder,
)
from .market_model import (
    TY_1S_PARAMS,
    GchpParams,
    HawkesParams,
    ModelParams,
    TradeFlowParams,
    attach_trades,
    gchp_steady_state,
    markov_moves,
    simulate_gchp,
    simulate_hawkes,
    simulate_umd,
)
from .theory import (
    DriftReport,
    drift_given_fill,
    drift_report,
    drift_unconditional,
    fill_probability,
    gchp_drift_given_fill,
    gchp_drift_report,
)
from .fill_model import AdverseBernoulli, AlwaysFillOnTrade, ExponentialFill, GroundTruth
from .engine import BacktestReport, drift_after_fills, mark_to_market, run_backtest
from .calibration import calibrate, estimate_fill_rates, estimate_lambda_f, estimate_umd, interarrival_tail_report, resample
from .comparison import run_comparison
from .fileio import RunConfig, load_config, read_events, write_events, write_report

__version__ = "0.1.0"
