"""Per-demand-interval price tracking for time-varying demand.

Demands in [d_lo, d_hi] are bucketed into cells of width gamma; every cell
runs its own interval search, treating any demand in the cell as the cell's
lower bound. A cell's feasible set (lo, hi] starts at (0, 1] with precision
1/2; when production at the cell price covers the cell's lower demand bound
the set shrinks to (p - eps, p], the price drops to p - eps, and eps is
squared. A cell freezes once its set is narrower than the freeze width
(1/sqrt(T) by default). With gamma = 1/sqrt(T) the policy's regret is
O(sqrt(T) log log T); setting one cell per distinct demand recovers the
small-support variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class DemandGrid:
    """Uniform partition of [d_lo, d_hi] into cells of width gamma.

    Cell k (1-based) covers [d_lo + (k-1)*gamma, d_lo + k*gamma); the top
    boundary d_hi clamps into the last cell.
    """

    d_lo: float
    d_hi: float
    gamma: float
    n_cells: int

    @classmethod
    def from_width(cls, d_lo: float, d_hi: float, gamma: float) -> "DemandGrid":
        if not (0.0 < d_lo <= d_hi):
            raise ValueError("need 0 < d_lo <= d_hi")
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        n = max(1, math.ceil((d_hi - d_lo) / gamma))
        return cls(d_lo=d_lo, d_hi=d_hi, gamma=gamma, n_cells=n)

    def cell_lower_bound(self, k: int) -> float:
        """Lower demand bound a_k of 1-based cell k."""
        return self.d_lo + (k - 1) * self.gamma


def default_gamma(horizon: int) -> float:
    """Cell width 1/sqrt(T), balancing per-cell search cost against
    within-cell demand rounding."""
    return 1.0 / math.sqrt(horizon)


def interval_index(grid: DemandGrid, d: float) -> int:
    """1-based cell index of demand d: floor((d - d_lo)/gamma) + 1, clamped."""
    if d < grid.d_lo - 1e-12 or d > grid.d_hi + 1e-12:
        raise ValueError(f"demand {d} outside grid bounds [{grid.d_lo}, {grid.d_hi}]")
    k = int((d - grid.d_lo) / grid.gamma) + 1
    return min(max(k, 1), grid.n_cells)


@dataclass(frozen=True)
class DemandPolicyState:
    """Per-cell feasible sets (s_lo, s_hi], prices, and precisions.

    Arrays are indexed by cell (0-based internally). freeze_width is the
    |S| threshold below which a cell's price stops moving.
    """

    s_lo: np.ndarray
    s_hi: np.ndarray
    price: np.ndarray
    eps: np.ndarray
    freeze_width: float
    shrink_count: int = 0

    def cell_width(self, k: int) -> float:
        return float(self.s_hi[k - 1] - self.s_lo[k - 1])

    def cell_frozen(self, k: int) -> bool:
        return self.cell_width(k) <= self.freeze_width


def make_demand_state(grid: DemandGrid, horizon: int, freeze_width: float | None = None) -> DemandPolicyState:
    """Fresh state: every cell at S=(0,1], price 0, eps 1/2."""
    n = grid.n_cells
    return DemandPolicyState(
        s_lo=np.zeros(n),
        s_hi=np.ones(n),
        price=np.zeros(n),
        eps=np.full(n, 0.5),
        freeze_width=(
            freeze_width if freeze_width is not None else 1.0 / math.sqrt(horizon)
        ),
    )


def cell_price(state: DemandPolicyState, grid: DemandGrid, d: float) -> float:
    """Price the policy posts for demand d (the current price of d's cell)."""
    return float(state.price[interval_index(grid, d) - 1])


def demand_step(
    state: DemandPolicyState,
    grid: DemandGrid,
    d: float,
    total_production: float,
) -> tuple[float, DemandPolicyState]:
    """One period: returns (price offered, updated state).

    ``total_production`` is the aggregate best response observed at the
    cell's current price. While the cell's feasible set is wider than the
    freeze width: production at or above the cell's lower demand bound
    shrinks the set to (p - eps, p], moves the price to p - eps, and squares
    eps; otherwise the price probes upward by eps (clamped at 1). Comparing
    against the cell lower bound rather than d itself is what rounds demands
    down within a cell.
    """
    k = interval_index(grid, d) - 1
    offered = float(state.price[k])
    if state.s_hi[k] - state.s_lo[k] <= state.freeze_width:
        return offered, state
    s_lo = state.s_lo.copy()
    s_hi = state.s_hi.copy()
    price = state.price.copy()
    eps = state.eps.copy()
    shrinks = state.shrink_count
    a_k = grid.cell_lower_bound(k + 1)
    if total_production >= a_k:
        s_lo[k] = offered - eps[k]
        s_hi[k] = offered
        price[k] = offered - eps[k]
        eps[k] = eps[k] * eps[k]
        shrinks += 1
    else:
        price[k] = min(offered + eps[k], 1.0)
    return offered, replace(
        state, s_lo=s_lo, s_hi=s_hi, price=price, eps=eps, shrink_count=shrinks
    )


def max_total_shrinks(grid: DemandGrid, horizon: int) -> int:
    """Ceiling K_d * (ceil(log2 log2 sqrt(T)) + 2) on shrink events."""
    root = math.sqrt(horizon)
    if root < 4:
        per_cell = 2
    else:
        per_cell = math.ceil(math.log2(math.log2(root))) + 2
    return grid.n_cells * per_cell
