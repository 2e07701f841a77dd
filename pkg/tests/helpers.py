import numpy as np

from fillsim.core import EventStream


def stream_from_mids(mids, trades=None, dt=1.0, start_mid=None):
    """Stream with a one-tick spread around each mid (half-ticks, odd)."""
    mids = np.asarray(mids, dtype=np.int64)
    return EventStream(
        time_s=np.arange(len(mids)) * dt,
        best_bid=mids - 1,
        best_ask=mids + 1,
        trade_side=np.zeros(len(mids), dtype=np.int8) if trades is None else np.asarray(trades),
        start_mid_x2=None if start_mid is None else 2 * start_mid,
    )
