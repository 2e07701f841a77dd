"""Closed-form drift and fill-probability formulas.

All drifts are in ticks of mid-price movement over the step in which the
fill happens. Buy-side unless stated otherwise; the sell side follows by
swapping the roles of up and down moves and flipping the sign.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import InvalidParams, Side
from .market_model import GchpParams, ModelParams, gchp_steady_state


class DegenerateFill(InvalidParams):
    """The fill probability is zero, so conditioning on a fill is undefined."""


class InvalidRate(InvalidParams):
    pass


@dataclass(frozen=True)
class DriftReport:
    drift_unconditional_ticks: float
    fill_probability: float
    drift_given_fill_ticks: float


def drift_unconditional(m: ModelParams) -> float:
    return m.p_up - m.p_down


def fill_probability(m: ModelParams) -> float:
    p = m.p_fill_down * m.p_down + m.r_f * (m.p_mid + m.p_up)
    if p <= 0.0:
        raise DegenerateFill("fill probability is zero (r_f = 0 and no down moves)")
    return p


def drift_given_fill(m: ModelParams, side: Side = Side.BUY) -> float:
    """Expected mid move in the step of a fill, given that the order filled.

    Buy side: ``(r_f * P(U) - p_fill_down * P(D)) / P(f)``. Negative whenever
    ``P(U) = P(D)`` and ``r_f < 1 = p_fill_down``.
    """
    if side == Side.SELL:
        return -drift_given_fill(m.mirrored(), Side.BUY)
    return (m.r_f * m.p_up - m.p_fill_down * m.p_down) / fill_probability(m)


def drift_report(m: ModelParams) -> DriftReport:
    return DriftReport(drift_unconditional(m), fill_probability(m), drift_given_fill(m))


def gchp_drift_unconditional(g: GchpParams) -> float:
    q_up, q_down = gchp_steady_state(g)
    return q_up * (g.p_uu - g.p_du) + q_down * (g.p_ud - g.p_dd)


def _check_rate(r_f: float) -> None:
    if not (0.0 <= r_f < 1.0):
        raise InvalidRate(f"r_f must lie in [0, 1), got {r_f}")


def gchp_fill_probability(g: GchpParams, r_f: float) -> float:
    _check_rate(r_f)
    q_up, q_down = gchp_steady_state(g)
    return q_up * (r_f * g.p_uu + g.p_du) + q_down * (r_f * g.p_ud + g.p_dd)


def gchp_drift_given_fill(g: GchpParams, r_f: float) -> float:
    q_up, q_down = gchp_steady_state(g)
    p_f = gchp_fill_probability(g, r_f)
    num = q_up * (r_f * g.p_uu - g.p_du) + q_down * (r_f * g.p_ud - g.p_dd)
    return num / p_f


def gchp_drift_report(g: GchpParams, r_f: float) -> DriftReport:
    return DriftReport(
        gchp_drift_unconditional(g),
        gchp_fill_probability(g, r_f),
        gchp_drift_given_fill(g, r_f),
    )
