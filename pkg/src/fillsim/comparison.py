"""Side-by-side run of the three backtest techniques against ground truth.

Techniques 2 and 3 are calibrated in-sample on the ground-truth run, as a
desk would calibrate against its live simulator.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List

import numpy as np

from .calibration import estimate_fill_rates, estimate_lambda_f, resample
from .core import EventStream, rng_for
from .engine import BacktestReport, run_backtest
from .fill_model import AdverseBernoulli, AlwaysFillOnTrade, ExponentialFill, GroundTruth
from .market_model import HawkesParams, ModelParams, TradeFlowParams, attach_trades, simulate_umd

TECHNIQUES = ("technique1", "technique2", "technique3", "ground_truth")

# Raw-tick move probabilities of a TY futures session and its event clock:
# 576,670 events over 9 hours.
RAW_TICK_PARAMS = ModelParams(p_up=0.00186, p_mid=1.0 - 0.00186 - 0.00187, p_down=0.00187)
RAW_TICK_DT_S = 9 * 3600 / 576_670
DEFAULT_GROUND_TRUTH = GroundTruth(p_fill_down=0.99, hawkes=HawkesParams(mu=0.003, alpha=0.0475, beta=0.05))


def ground_truth_stream(n_events: int = 500_000, seed=0, params: ModelParams = RAW_TICK_PARAMS,
                        dt_s: float = RAW_TICK_DT_S, trades: TradeFlowParams = TradeFlowParams()) -> EventStream:
    rng = rng_for(seed, "ground-truth-stream")
    return attach_trades(simulate_umd(params, n_events, dt_s, seed=rng), trades, rng)


@dataclass(eq=False)
class ComparisonResult:
    reports: Dict[str, BacktestReport]
    lambda_f: float
    r_f: float
    p_fill_down: float

    def pnl_rms_to_ground_truth(self, name: str) -> float:
        """RMS gap (price units) between cumulative window P&L paths."""
        gt = self.reports["ground_truth"]
        diff = self.reports[name].window_pnl - gt.window_pnl
        return float(np.sqrt(np.mean(diff.astype(np.float64) ** 2)) * float(gt.grid.half_tick))

    def summary_rows(self) -> List[dict]:
        rows = []
        for name in TECHNIQUES:
            r = self.reports[name]
            rows.append({
                "technique": name,
                "n_orders": r.n_orders,
                "n_fills": r.n_fills,
                "global_fill_rate": r.global_fill_rate,
                "final_pnl": float(r.pnl_price(r.final_pnl)),
                "pnl_rms_to_ground_truth": self.pnl_rms_to_ground_truth(name),
            })
        return rows


def run_comparison(stream: EventStream, ground_truth: GroundTruth = DEFAULT_GROUND_TRUTH,
                   seed: int = 0, window_s: float = 300.0) -> ComparisonResult:
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(4)]
    gt = run_backtest(stream, ground_truth, window_s, seeds[3])
    rates = estimate_fill_rates(resample(stream, None, gt))
    lam = estimate_lambda_f(gt.fill_times())
    techniques = {
        "technique1": AlwaysFillOnTrade(),
        "technique2": ExponentialFill(lam),
        "technique3": AdverseBernoulli(rates.r_f, rates.p_fill_down),
    }
    reports = {name: run_backtest(stream, tech, window_s, s) for (name, tech), s in zip(techniques.items(), seeds)}
    reports["ground_truth"] = gt
    for name, r in reports.items():
        r.technique = name
    return ComparisonResult(reports, lam, rates.r_f, rates.p_fill_down)
