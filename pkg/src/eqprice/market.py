"""Market model: cost families, best responses, the clearing-price oracle,
and regret accounting.

A market instance is a list of supplier cost functions, a demand sequence,
an optional context sequence, and a horizon. Suppliers are price takers: at
a posted price ``p`` each produces the quantity maximizing ``p*x - cost(x)``
over ``x >= 0``. The clearing price of a demand ``d`` is the price at which
aggregate best-response production equals ``d``; for convex costs it is also
the price minimizing total production cost and total payment among all
allocations meeting ``d``, which is what the regret ledger measures against.

Prices are normalized to [0, 1]; instance constructors reject inputs whose
clearing price would fall outside that range.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .features import apply_feature_map, apply_feature_map_batch

QUADRATIC = "quadratic"
LINEAR = "linear"
CONTEXT_QUADRATIC = "context_quadratic"

#: Bisection stops once aggregate production is within this of the demand.
#: Far below any regret tolerance used in tests.
TOL_EQ = 1e-10
MAX_BISECT_ITERS = 200


class InfeasibleMarket(ValueError):
    """Demand cannot be met at any price in [0, 1]."""


@dataclass(frozen=True)
class CostSpec:
    """One supplier's cost function.

    Families:

    - ``quadratic``: cost(x) = (mu/2) x^2 + a x with curvature ``mu > 0``
      and marginal-cost intercept ``a >= 0``. Strongly convex with
      modulus ``mu``; cost(0) = 0.
    - ``linear``: cost(x) = c x on [0, cap]. Not strongly convex; used by
      the hardness demonstrations only. At p == c any quantity is
      profit-equivalent; the supplier produces ``cap`` (deterministic
      one-sided jump).
    - ``context_quadratic``: cost(x; theta) = x^2 / (2 <phi, sigma(theta)>)
      where sigma is the feature map named by ``feature_map_id``. Requires
      <phi, sigma(theta)> > 0 for every admissible context.
    """

    family: str
    mu: float = 0.0
    a: float = 0.0
    c: float = 0.0
    cap: float = 0.0
    phi: tuple[float, ...] = ()
    feature_map_id: str = "identity"

    def __post_init__(self):
        if self.family == QUADRATIC:
            if not self.mu > 0:
                raise ValueError("quadratic family requires curvature mu > 0")
            if self.a < 0:
                raise ValueError("quadratic intercept a must be >= 0")
        elif self.family == LINEAR:
            if not self.c > 0:
                raise ValueError("linear family requires unit cost c > 0")
            if not self.cap > 0:
                raise ValueError("linear family requires a production cap > 0")
        elif self.family == CONTEXT_QUADRATIC:
            if len(self.phi) == 0:
                raise ValueError("context_quadratic family requires a parameter vector")
        else:
            raise ValueError(f"unknown cost family {self.family!r}")

    @classmethod
    def quadratic(cls, mu: float, a: float = 0.0) -> "CostSpec":
        return cls(family=QUADRATIC, mu=float(mu), a=float(a))

    @classmethod
    def linear(cls, c: float, cap: float) -> "CostSpec":
        return cls(family=LINEAR, c=float(c), cap=float(cap))

    @classmethod
    def context_quadratic(
        cls, phi: Sequence[float], feature_map_id: str = "identity"
    ) -> "CostSpec":
        return cls(
            family=CONTEXT_QUADRATIC,
            phi=tuple(float(v) for v in phi),
            feature_map_id=feature_map_id,
        )

    @property
    def strongly_convex(self) -> bool:
        return self.family in (QUADRATIC, CONTEXT_QUADRATIC)

    def coefficient(self, theta) -> float:
        """<phi, sigma(theta)>, the inverse curvature of the contextual family."""
        if self.family != CONTEXT_QUADRATIC:
            raise ValueError("coefficient is defined for the context_quadratic family")
        u = float(np.dot(self.phi, apply_feature_map(self.feature_map_id, theta)))
        if not u > 0:
            raise ValueError(
                f"context_quadratic requires <phi, sigma(theta)> > 0, got {u}"
            )
        return u

    def cost(self, x: float, theta=None) -> float:
        """Production cost of quantity ``x`` (context required iff contextual)."""
        if x < 0:
            raise ValueError("production quantity must be >= 0")
        if self.family == QUADRATIC:
            return 0.5 * self.mu * x * x + self.a * x
        if self.family == LINEAR:
            return self.c * x
        return x * x / (2.0 * self._require_coefficient(theta))

    def marginal_cost(self, x: float, theta=None) -> float:
        if self.family == QUADRATIC:
            return self.mu * x + self.a
        if self.family == LINEAR:
            return self.c
        return x / self._require_coefficient(theta)

    def _require_coefficient(self, theta) -> float:
        if theta is None:
            raise ValueError("context_quadratic cost requires a context")
        return self.coefficient(theta)

    def to_json_dict(self) -> dict:
        if self.family == QUADRATIC:
            return {"family": QUADRATIC, "mu": self.mu, "a": self.a}
        if self.family == LINEAR:
            return {"family": LINEAR, "c": self.c, "cap": self.cap}
        return {
            "family": CONTEXT_QUADRATIC,
            "phi": list(self.phi),
            "feature_map_id": self.feature_map_id,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CostSpec":
        fam = doc["family"]
        if fam == QUADRATIC:
            return cls.quadratic(doc["mu"], doc.get("a", 0.0))
        if fam == LINEAR:
            return cls.linear(doc["c"], doc["cap"])
        if fam == CONTEXT_QUADRATIC:
            return cls.context_quadratic(doc["phi"], doc.get("feature_map_id", "identity"))
        raise ValueError(f"unknown cost family {fam!r}")


@dataclass(frozen=True)
class Allocation:
    """Per-supplier production quantities at a posted price."""

    per_supplier: tuple[float, ...]
    total: float


def best_response(cost: CostSpec, p: float, theta=None) -> float:
    """Profit-maximizing production at posted price ``p``.

    quadratic: max(0, (p - a)/mu); linear: 0 below c, cap at or above c;
    context_quadratic: p * <phi, sigma(theta)>.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"price must lie in [0, 1], got {p}")
    if cost.family == QUADRATIC:
        return max(0.0, (p - cost.a) / cost.mu)
    if cost.family == LINEAR:
        return cost.cap if p >= cost.c else 0.0
    if theta is None:
        raise ValueError("best_response for context_quadratic requires a context")
    return p * cost.coefficient(theta)


def aggregate_production(
    suppliers: Sequence[CostSpec], p: float, theta=None
) -> Allocation:
    """Best responses of every supplier at ``p`` and their sum."""
    per = tuple(best_response(s, p, theta) for s in suppliers)
    total = 0.0
    for x in per:
        total += x
    return Allocation(per_supplier=per, total=total)


def equilibrium_price(
    suppliers: Sequence[CostSpec],
    d: float,
    theta=None,
    tol: float = TOL_EQ,
    max_iters: int = MAX_BISECT_ITERS,
) -> float:
    """Market-clearing price: bisection on the monotone map p -> total production.

    Requires every supplier strongly convex and the demand feasible at p = 1.
    The returned price satisfies |total(p) - d| <= tol. By the first-order
    conditions it equals every active supplier's marginal cost, so it also
    minimizes total cost and total payment among demand-feasible allocations.
    """
    if d <= 0:
        raise ValueError("demand must be positive")
    for s in suppliers:
        if not s.strongly_convex:
            raise ValueError(
                "equilibrium_price requires strongly convex suppliers; "
                f"{s.family} family present"
            )
    if aggregate_production(suppliers, 1.0, theta).total < d:
        raise InfeasibleMarket(
            f"aggregate production at p=1 is below demand {d}; no clearing price in [0, 1]"
        )
    lo, hi = 0.0, 1.0
    mid = 0.5
    for _ in range(max_iters):
        mid = 0.5 * (lo + hi)
        total = aggregate_production(suppliers, mid, theta).total
        if abs(total - d) <= tol:
            return mid
        if total < d:
            lo = mid
        else:
            hi = mid
    return mid


def equilibrium_price_batch(
    mus: np.ndarray,
    intercepts: np.ndarray,
    demands: np.ndarray,
    tol: float = TOL_EQ,
    max_iters: int = MAX_BISECT_ITERS,
) -> np.ndarray:
    """Vectorized clearing prices for an all-quadratic market over many demands.

    Element-for-element identical to calling :func:`equilibrium_price` per
    demand: each element freezes at the first midpoint within tolerance.
    """
    mus = np.asarray(mus, dtype=np.float64)
    intercepts = np.asarray(intercepts, dtype=np.float64)
    demands = np.asarray(demands, dtype=np.float64)
    cap = np.sum(np.maximum(0.0, (1.0 - intercepts) / mus))
    if np.any(demands > cap):
        raise InfeasibleMarket("some demands infeasible at p=1")
    lo = np.zeros_like(demands)
    hi = np.ones_like(demands)
    out = np.full_like(demands, 0.5)
    done = np.zeros(demands.shape, dtype=bool)
    for _ in range(max_iters):
        mid = 0.5 * (lo + hi)
        total = np.zeros_like(demands)
        for mu_i, a_i in zip(mus, intercepts):
            total += np.maximum(0.0, (mid - a_i) / mu_i)
        hit = (np.abs(total - demands) <= tol) & ~done
        out[hit] = mid[hit]
        done |= hit
        low = (total < demands) & ~done
        lo[low] = mid[low]
        high = (total >= demands) & ~done
        hi[high] = mid[high]
        if done.all():
            break
    out[~done] = 0.5 * (lo[~done] + hi[~done])
    return out


@dataclass
class RegretLedger:
    """Running unmet demand, cost regret, and payment regret.

    ``unmet`` accumulates the positive part of (demand - total production),
    so it is nonnegative. Cost and payment increments are signed: a price
    below the clearing price yields negative increments. Cumulative fields
    are exact running sums of the stored per-period increments.
    """

    unmet: float = 0.0
    cost_regret: float = 0.0
    payment_regret: float = 0.0
    per_period: list[tuple[float, float, float]] = field(default_factory=list)


def record_step(
    ledger: RegretLedger,
    suppliers: Sequence[CostSpec],
    d: float,
    theta,
    p: float,
) -> RegretLedger:
    """Append one period's regret increments for posted price ``p``.

    Increments are measured against the clearing price for (suppliers, d,
    theta): unmet_inc = (d - total(p))_+, cost_inc and pay_inc are actual
    minus equilibrium totals. Returns the updated ledger.
    """
    p_star = equilibrium_price(suppliers, d, theta)
    alloc = aggregate_production(suppliers, p, theta)
    alloc_eq = aggregate_production(suppliers, p_star, theta)
    unmet_inc = max(0.0, d - alloc.total)
    cost_inc = 0.0
    for s, x, x_eq in zip(suppliers, alloc.per_supplier, alloc_eq.per_supplier):
        cost_inc += s.cost(x, theta) - s.cost(x_eq, theta)
    pay_inc = p * alloc.total - p_star * alloc_eq.total
    ledger.unmet += unmet_inc
    ledger.cost_regret += cost_inc
    ledger.payment_regret += pay_inc
    ledger.per_period.append((unmet_inc, cost_inc, pay_inc))
    return ledger


# ---------------------------------------------------------------------------
# Instances and their JSON form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GeneratorSpec:
    """Seedable sequence generator named in an instance file.

    kinds: ``constant`` (value), ``uniform`` (lo, hi) for demands,
    ``uniform_cube`` (lo, hi, dim) for contexts. Draws use the replication's
    Philox stream; see the harness docs for the draw order.
    """

    kind: str
    value: float = 0.0
    lo: float = 0.0
    hi: float = 0.0
    dim: int = 0

    def to_json_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "uniform":
            return {"kind": "uniform", "lo": self.lo, "hi": self.hi}
        return {"kind": "uniform_cube", "lo": self.lo, "hi": self.hi, "dim": self.dim}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "GeneratorSpec":
        kind = doc["kind"]
        if kind == "constant":
            return cls(kind="constant", value=float(doc["value"]))
        if kind == "uniform":
            return cls(kind="uniform", lo=float(doc["lo"]), hi=float(doc["hi"]))
        if kind == "uniform_cube":
            return cls(
                kind="uniform_cube",
                lo=float(doc["lo"]),
                hi=float(doc["hi"]),
                dim=int(doc["dim"]),
            )
        raise ValueError(f"unknown generator kind {kind!r}")

    def bounds(self) -> tuple[float, float]:
        if self.kind == "constant":
            return (self.value, self.value)
        return (self.lo, self.hi)


@dataclass(frozen=True)
class InstanceSpec:
    """Serializable description of a market instance.

    ``demands`` and ``contexts`` are either explicit sequences or
    :class:`GeneratorSpec` entries materialized per replication by the
    harness. ``function_class`` optionally lists candidate production
    functions for the contextual policy as (family, parameters,
    feature_map_id) member records; ``class_bound`` is their shared output
    bound B.
    """

    suppliers: tuple[CostSpec, ...]
    demands: tuple[float, ...] | GeneratorSpec
    horizon: int
    contexts: tuple[tuple[float, ...], ...] | GeneratorSpec | None = None
    demand_bounds: tuple[float, float] | None = None
    function_class: tuple[dict, ...] | None = None
    class_bound: float | None = None

    def to_json_dict(self) -> dict:
        doc: dict = {
            "suppliers": [s.to_json_dict() for s in self.suppliers],
            "demands": (
                self.demands.to_json_dict()
                if isinstance(self.demands, GeneratorSpec)
                else list(self.demands)
            ),
            "horizon": self.horizon,
        }
        if self.contexts is not None:
            doc["contexts"] = (
                self.contexts.to_json_dict()
                if isinstance(self.contexts, GeneratorSpec)
                else [list(row) for row in self.contexts]
            )
        if self.demand_bounds is not None:
            doc["demand_bounds"] = list(self.demand_bounds)
        if self.function_class is not None:
            doc["function_class"] = [dict(m) for m in self.function_class]
        if self.class_bound is not None:
            doc["class_bound"] = self.class_bound
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "InstanceSpec":
        suppliers = tuple(CostSpec.from_json_dict(s) for s in doc["suppliers"])
        raw_d = doc["demands"]
        demands = (
            GeneratorSpec.from_json_dict(raw_d)
            if isinstance(raw_d, dict)
            else tuple(float(v) for v in raw_d)
        )
        raw_c = doc.get("contexts")
        if raw_c is None:
            contexts = None
        elif isinstance(raw_c, dict):
            contexts = GeneratorSpec.from_json_dict(raw_c)
        else:
            contexts = tuple(tuple(float(v) for v in row) for row in raw_c)
        fc = doc.get("function_class")
        return cls(
            suppliers=suppliers,
            demands=demands,
            horizon=int(doc["horizon"]),
            contexts=contexts,
            demand_bounds=(
                tuple(float(v) for v in doc["demand_bounds"])
                if "demand_bounds" in doc
                else None
            ),
            function_class=tuple(dict(m) for m in fc) if fc is not None else None,
            class_bound=float(doc["class_bound"]) if "class_bound" in doc else None,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "InstanceSpec":
        return cls.from_json_dict(json.loads(text))

    def with_horizon(self, horizon: int) -> "InstanceSpec":
        return replace(self, horizon=int(horizon))

    def materialize(self, rng: np.random.Generator) -> "MarketInstance":
        """Draw any generated sequences and validate the concrete instance.

        Draw order: demands first (T uniforms when generated), then contexts
        (T*dim uniforms, row-major). Explicit sequences consume no draws.
        """
        T = self.horizon
        if isinstance(self.demands, GeneratorSpec):
            g = self.demands
            if g.kind == "constant":
                demands = np.full(T, g.value)
            elif g.kind == "uniform":
                demands = rng.uniform(g.lo, g.hi, T)
            else:
                raise ValueError(f"demand generator kind {g.kind!r} not supported")
            bounds = self.demand_bounds or g.bounds()
        else:
            demands = np.asarray(self.demands, dtype=np.float64)
            bounds = self.demand_bounds or (float(demands.min()), float(demands.max()))
        if isinstance(self.contexts, GeneratorSpec):
            g = self.contexts
            if g.kind != "uniform_cube":
                raise ValueError(f"context generator kind {g.kind!r} not supported")
            contexts = rng.uniform(g.lo, g.hi, (T, g.dim))
        elif self.contexts is not None:
            contexts = np.asarray(self.contexts, dtype=np.float64)
        else:
            contexts = None
        return MarketInstance(
            suppliers=self.suppliers,
            demands=demands,
            contexts=contexts,
            horizon=T,
            demand_bounds=bounds,
        )


@dataclass
class MarketInstance:
    """Concrete instance: suppliers, a demand path, optional contexts, horizon.

    The constructor checks sequence lengths, demand bounds, and that the
    clearing price lies in [0, 1] at every period (feasibility at p = 1).
    """

    suppliers: tuple[CostSpec, ...]
    demands: np.ndarray
    contexts: np.ndarray | None
    horizon: int
    demand_bounds: tuple[float, float]

    def __post_init__(self):
        self.suppliers = tuple(self.suppliers)
        self.demands = np.asarray(self.demands, dtype=np.float64)
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.demands.shape != (self.horizon,):
            raise ValueError("demand sequence length must equal the horizon")
        d_lo, d_hi = self.demand_bounds
        if not (0.0 < d_lo <= d_hi):
            raise ValueError("demand bounds must satisfy 0 < d_lo <= d_hi")
        if self.demands.min() < d_lo - 1e-12 or self.demands.max() > d_hi + 1e-12:
            raise ValueError("demands fall outside the declared bounds")
        if self.contexts is not None:
            self.contexts = np.asarray(self.contexts, dtype=np.float64)
            if self.contexts.ndim != 2 or self.contexts.shape[0] != self.horizon:
                raise ValueError("context sequence must be (horizon, dim)")
        if any(s.family == CONTEXT_QUADRATIC for s in self.suppliers):
            if self.contexts is None:
                raise ValueError("contextual suppliers require a context sequence")
        self._validate_price_range()

    def _validate_price_range(self) -> None:
        # Clearing price <= 1 iff production at p=1 covers the demand.
        max_d = float(self.demands.max())
        if self.contexts is None:
            top = aggregate_production(self.suppliers, 1.0).total
            if top < max_d - 1e-12:
                raise InfeasibleMarket(
                    "clearing price above 1 for some period: production at "
                    f"p=1 is {top}, maximum demand {max_d}"
                )
            return
        totals = np.zeros(self.horizon)
        for s in self.suppliers:
            if s.family == CONTEXT_QUADRATIC:
                u = self.coefficient_path(s)
                if u.min() <= 0:
                    raise ValueError(
                        "context_quadratic requires <phi, sigma(theta)> > 0 "
                        "for every period"
                    )
                totals += u
            else:
                totals += best_response(s, 1.0)
        if np.any(totals < self.demands - 1e-12):
            raise InfeasibleMarket("clearing price above 1 for some period")

    def coefficient_path(self, supplier: CostSpec) -> np.ndarray:
        """<phi, sigma(theta_t)> for every period of one contextual supplier."""
        feats = apply_feature_map_batch(supplier.feature_map_id, self.contexts)
        return feats @ np.asarray(supplier.phi)

    def aggregate_coefficient_path(self) -> np.ndarray:
        """Sum over suppliers of coefficient paths; aggregate production is
        p times this when all suppliers are contextual with zero intercepts."""
        total = np.zeros(self.horizon)
        for s in self.suppliers:
            if s.family != CONTEXT_QUADRATIC:
                raise ValueError("aggregate coefficient path requires contextual suppliers")
            total += self.coefficient_path(s)
        return total

    def context_hashes(self) -> np.ndarray | None:
        """CRC-32 of each context row's float64 bytes (stable across runs)."""
        if self.contexts is None:
            return None
        out = np.empty(self.horizon, dtype=np.uint32)
        for t in range(self.horizon):
            out[t] = zlib.crc32(self.contexts[t].tobytes())
        return out
