"""Feasible-price-interval tracking for fixed demand and fixed costs.

The policy keeps an interval [a, b] known to contain the clearing price and
a precision eps. Within a sub-phase it offers a, a+eps, a+2*eps, ... (capped
at b) until production reaches the demand, then shrinks the interval to the
bracketing pair of offers and squares the precision. Once the interval is
narrower than 1/T the price freezes at the lower end. Squaring eps means the
number of shrink events over a horizon T is O(log log T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

SEARCHING = "searching"
FROZEN = "frozen"


@dataclass(frozen=True)
class FixedPolicyState:
    """Interval tracker state. Value-copyable; observe() returns a new state.

    ``cursor`` indexes the next offer within the current sub-phase, so the
    current offer is min(a + cursor*eps, b). ``resets`` counts sub-phase
    restarts triggered by reaching b without covering demand, which cannot
    happen under exact best responses when the clearing price is in [a, b].
    """

    a: float
    b: float
    eps: float
    cursor: int
    phase: str
    horizon: int
    shrink_count: int = 0
    resets: int = 0

    @property
    def width(self) -> float:
        return self.b - self.a


def make_fixed_state(horizon: int) -> FixedPolicyState:
    """Fresh tracker over [0, 1] with eps = 1/2."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    phase = FROZEN if 1.0 <= 1.0 / horizon else SEARCHING
    return FixedPolicyState(
        a=0.0, b=1.0, eps=0.5, cursor=0, phase=phase, horizon=horizon
    )


def fixed_next_price(state: FixedPolicyState) -> float:
    """Price to post this period: the cursor offer, or a once frozen."""
    if state.phase == FROZEN:
        return state.a
    return min(state.a + state.cursor * state.eps, state.b)


def fixed_observe(
    state: FixedPolicyState, total_production: float, d: float
) -> FixedPolicyState:
    """Advance the tracker given production observed at fixed_next_price(state).

    Production >= d (boundary counts as covering) shrinks the interval to
    [previous offer, current offer] and squares eps; production < d advances
    the cursor, or resets the sub-phase if the offer already sat at b.
    Observing while frozen is a no-op.
    """
    if state.phase == FROZEN:
        return state
    price = fixed_next_price(state)
    if total_production >= d:
        if state.cursor == 0:
            # First offer of the sub-phase already covers demand: the
            # clearing price is at (or below) a, so the interval collapses.
            new_a, new_b = state.a, price
        else:
            new_a = min(state.a + (state.cursor - 1) * state.eps, state.b)
            new_b = price
        frozen = (new_b - new_a) <= 1.0 / state.horizon
        return replace(
            state,
            a=new_a,
            b=new_b,
            eps=state.eps * state.eps,
            cursor=0,
            phase=FROZEN if frozen else SEARCHING,
            shrink_count=state.shrink_count + 1,
        )
    if price >= state.b:
        # Reached the top of the interval without covering demand; under the
        # exact-response model this is impossible, so restart the sub-phase
        # and count the anomaly instead of stepping past b.
        return replace(state, cursor=0, resets=state.resets + 1)
    return replace(state, cursor=state.cursor + 1)


def max_shrink_events(horizon: int) -> int:
    """Shrink-count ceiling ceil(log2 log2 T) + 1 implied by eps-squaring."""
    if horizon < 4:
        return 1
    return math.ceil(math.log2(math.log2(horizon))) + 1
