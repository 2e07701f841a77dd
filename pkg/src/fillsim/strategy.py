"""Naive at-the-touch market maker.

Flat: quote both touches. Long one lot: quote only the ask. Short one lot:
quote only the bid. A working order whose price has left the touch is
canceled and re-posted at the new touch.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .core import FillRecord, FillSimError, MarketEvent, Side, VirtualOrder


class PositionBound(FillSimError):
    pass


@dataclass(frozen=True)
class SideInstruction:
    """``cancel`` the working order and/or ``post`` a new one at that price.

    Neither set means keep whatever is working (possibly nothing).
    """

    cancel: bool = False
    post: Optional[int] = None

    @property
    def keep(self) -> bool:
        return not self.cancel and self.post is None


KEEP = SideInstruction()


@dataclass(frozen=True)
class QuoteInstruction:
    buy: SideInstruction = KEEP
    sell: SideInstruction = KEEP

    def for_side(self, side: Side) -> SideInstruction:
        return self.buy if side == Side.BUY else self.sell


@dataclass(frozen=True)
class MakerState:
    position: int = 0
    working_buy: Optional[VirtualOrder] = None
    working_sell: Optional[VirtualOrder] = None

    def working(self, side: Side) -> Optional[VirtualOrder]:
        return self.working_buy if side == Side.BUY else self.working_sell

    def with_working(self, side: Side, order: Optional[VirtualOrder]) -> "MakerState":
        if side == Side.BUY:
            return replace(self, working_buy=order)
        return replace(self, working_sell=order)


def _side_instruction(order: Optional[VirtualOrder], wanted: bool, touch: int) -> SideInstruction:
    if order is None:
        return SideInstruction(post=touch) if wanted else KEEP
    if not wanted:
        return SideInstruction(cancel=True)
    if order.price != touch:
        return SideInstruction(cancel=True, post=touch)
    return KEEP


def desired_quotes(state: MakerState, event: MarketEvent) -> QuoteInstruction:
    return QuoteInstruction(
        buy=_side_instruction(state.working_buy, state.position <= 0, event.best_bid),
        sell=_side_instruction(state.working_sell, state.position >= 0, event.best_ask),
    )


def apply_fill(state: MakerState, fill: FillRecord) -> MakerState:
    order = state.working(fill.side)
    if order is None or order.id != fill.order_id:
        raise PositionBound(f"fill for order {fill.order_id} does not match a working {fill.side.name} order")
    position = state.position + int(fill.side)
    if abs(position) > 1:
        raise PositionBound(f"fill would move position from {state.position} to {position}")
    return replace(state.with_working(fill.side, None), position=position)
