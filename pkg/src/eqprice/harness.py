"""Experiment runner: seeded policy executions, CSV export, scaling fits.

Reproducibility contract
------------------------
All randomness flows from the Philox 4x64-10 counter-based generator as
implemented by NumPy. Replication ``r`` of a configuration with base seed
``s`` uses the stream ``Philox(key = s + r)``; distinct keys give
independent streams, so replications never share draws. Within a
replication the draw order is fixed: demands (T uniforms, when generated),
then contexts (T*dim uniforms, row-major, when generated), then the
policy's own uniforms (one per period for the sampling policy). Uniform
draws on [lo, hi) are ``lo + (hi - lo) * next_double()``. Given the same
configuration and seed, output CSV files are byte-identical across runs.

CSV schemas (fixed headers, fixed column order, 17 significant digits):

- per-period: ``t,demand,price,production,unmet_inc,cost_inc,pay_inc``
- summary:    ``policy,T,replication,seed,U_T,C_T,P_T,proxy_reg``
  (proxy_reg is nan for policies without a sampling distribution)

Rate fits
---------
``fit_scaling`` regresses regret against horizon in the coordinates of the
chosen model: ``power_law`` fits log(value) on log(T); ``loglog`` fits
value on log(log(T)). Cumulative cost and payment regret are signed and go
negative for persistently under-priced trajectories, so rate fits use the
overshoot-only accumulations (sums of positive increments) exposed on each
run record; those are the quantities whose growth the theory controls.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .features import apply_feature_map_batch
from .market import (
    CONTEXT_QUADRATIC,
    LINEAR,
    QUADRATIC,
    InstanceSpec,
    MarketInstance,
    equilibrium_price_batch,
)
from .oracle import ClassMember, FunctionClass, default_eta
from .policy_contextual import default_gamma, default_grid_size

POLICIES = ("fixed_interval", "demand_grid", "contextual_igw", "constant_price")

PER_PERIOD_HEADER = "t,demand,price,production,unmet_inc,cost_inc,pay_inc"
SUMMARY_HEADER = "policy,T,replication,seed,U_T,C_T,P_T,proxy_reg"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: an instance, one policy, horizons x replications.

    ``policy_params`` may carry: p (constant_price), gamma_demand and
    freeze_width (demand_grid), n_prices / gamma_explore / eta / delta /
    oracle_mode (contextual_igw). Missing entries fall back to the
    theory-default tunings.
    """

    instance: InstanceSpec
    policy: str
    horizons: tuple[int, ...]
    replications: int = 1
    seed: int = 0
    policy_params: dict = field(default_factory=dict)
    out: str | None = None

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; choose from {POLICIES}")
        if len(self.horizons) == 0:
            raise ValueError("at least one horizon required")
        if list(self.horizons) != sorted(self.horizons):
            raise ValueError("horizons must be sorted ascending")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")

    @classmethod
    def from_json_dict(cls, doc: dict, base_dir: str | Path = ".") -> "ExperimentConfig":
        inst = doc["instance"]
        if isinstance(inst, str):
            text = (Path(base_dir) / inst).read_text()
            instance = InstanceSpec.from_json(text)
        else:
            instance = InstanceSpec.from_json_dict(inst)
        return cls(
            instance=instance,
            policy=doc["policy"],
            horizons=tuple(int(t) for t in doc["horizons"]),
            replications=int(doc.get("replications", 1)),
            seed=int(doc.get("seed", 0)),
            policy_params=dict(doc.get("policy_params", {})),
            out=doc.get("out"),
        )


@dataclass
class RunRecord:
    """Seeded trajectory of one (horizon, replication) execution.

    Cumulative fields are the running sums of the per-period columns.
    ``cost_pos`` / ``pay_pos`` accumulate only positive increments (the
    overshoot periods) and are what the rate fits consume. ``proxy_inc``
    holds the exact expected absolute production-demand mismatch under the
    sampling distribution, present only for the sampling policy.
    """

    policy: str
    horizon: int
    replication: int
    seed: int
    demand: np.ndarray
    price: np.ndarray
    production: np.ndarray
    unmet_inc: np.ndarray
    cost_inc: np.ndarray
    pay_inc: np.ndarray
    context_hash: np.ndarray | None = None
    proxy_inc: np.ndarray | None = None
    unmet: float = 0.0
    cost_regret: float = 0.0
    payment_regret: float = 0.0
    cost_pos: float = 0.0
    pay_pos: float = 0.0
    proxy_reg: float = float("nan")

    def __post_init__(self):
        self.unmet = float(np.cumsum(self.unmet_inc)[-1])
        self.cost_regret = float(np.cumsum(self.cost_inc)[-1])
        self.payment_regret = float(np.cumsum(self.pay_inc)[-1])
        self.cost_pos = float(np.cumsum(np.maximum(self.cost_inc, 0.0))[-1])
        self.pay_pos = float(np.cumsum(np.maximum(self.pay_inc, 0.0))[-1])
        if self.proxy_inc is not None:
            self.proxy_reg = float(np.cumsum(self.proxy_inc)[-1])

    @property
    def final_price(self) -> float:
        return float(self.price[-1])

    def metric(self, name: str) -> float:
        """Metric lookup for fits: U_T, C_T, P_T, C_T_pos, P_T_pos, proxy_reg."""
        table = {
            "U_T": self.unmet,
            "C_T": self.cost_regret,
            "P_T": self.payment_regret,
            "C_T_pos": self.cost_pos,
            "P_T_pos": self.pay_pos,
            "proxy_reg": self.proxy_reg,
        }
        return table[name]


def replication_stream(seed: int, replication: int) -> np.random.Generator:
    """Philox stream for one replication: key = seed + replication."""
    return np.random.Generator(np.random.Philox(key=seed + replication))


# ---------------------------------------------------------------------------
# Policy execution
# ---------------------------------------------------------------------------


def _equilibrium_paths(inst: MarketInstance) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(p_star_t, cost_eq_t, pay_eq_t) per period for quadratic or single-
    linear instances."""
    families = {s.family for s in inst.suppliers}
    if families == {QUADRATIC}:
        mus = np.array([s.mu for s in inst.suppliers])
        ints = np.array([s.a for s in inst.suppliers])
        if inst.demands.min() == inst.demands.max():
            p = equilibrium_price_batch(mus, ints, inst.demands[:1])
            p_stars = np.full(inst.horizon, p[0])
        else:
            p_stars = equilibrium_price_batch(mus, ints, inst.demands)
        cost_eq = np.zeros(inst.horizon)
        tot_eq = np.zeros(inst.horizon)
        for mu_i, a_i in zip(mus, ints):
            x = np.maximum(0.0, (p_stars - a_i) / mu_i)
            cost_eq += 0.5 * mu_i * x * x + a_i * x
            tot_eq += x
        return p_stars, cost_eq, p_stars * tot_eq
    if families == {LINEAR}:
        if len(inst.suppliers) != 1:
            raise ValueError("linear instances support a single supplier")
        s = inst.suppliers[0]
        if s.cap < inst.demands.max():
            raise ValueError("linear supplier cap below demand: no clearing price")
        if s.c > 1.0:
            raise ValueError("linear clearing price above 1")
        p_stars = np.full(inst.horizon, s.c)
        base = s.c * inst.demands
        return p_stars, base.copy(), base.copy()
    raise ValueError(
        "harness trajectories support all-quadratic, single-linear, or "
        f"all-contextual instances; got families {sorted(families)}"
    )


def _production_paths(inst: MarketInstance, prices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(total production, total cost) per period at the given price path."""
    tot = np.zeros(inst.horizon)
    cost = np.zeros(inst.horizon)
    for s in inst.suppliers:
        if s.family == QUADRATIC:
            x = np.maximum(0.0, (prices - s.a) / s.mu)
            cost += 0.5 * s.mu * x * x + s.a * x
        elif s.family == LINEAR:
            x = np.where(prices >= s.c, s.cap, 0.0)
            cost += s.c * x
        else:
            u = inst.coefficient_path(s)
            x = prices * u
            cost += x * x / (2.0 * u)
        tot += x
    return tot, cost


def _run_constant_price(inst: MarketInstance, p: float) -> dict:
    if not 0.0 <= p <= 1.0:
        raise ValueError("constant price must lie in [0, 1]")
    prices = np.full(inst.horizon, float(p))
    if all(s.family == CONTEXT_QUADRATIC for s in inst.suppliers):
        u = inst.aggregate_coefficient_path()
        p_stars = inst.demands / u
        prod = prices * u
        cost_inc = (prices**2 - p_stars**2) * u * 0.5
        pay_inc = (prices**2 - p_stars**2) * u
    else:
        p_stars, cost_eq, pay_eq = _equilibrium_paths(inst)
        prod, cost_actual = _production_paths(inst, prices)
        cost_inc = cost_actual - cost_eq
        pay_inc = prices * prod - pay_eq
    unmet = np.maximum(0.0, inst.demands - prod)
    return dict(
        price=prices, production=prod, unmet_inc=unmet, cost_inc=cost_inc, pay_inc=pay_inc
    )


def _run_fixed_interval(inst: MarketInstance) -> dict:
    if inst.demands.min() != inst.demands.max():
        raise ValueError("fixed_interval expects a constant demand sequence")
    d = float(inst.demands[0])
    p_stars, cost_eq, pay_eq = _equilibrium_paths(inst)
    fam, p1, p2 = kernels.encode_suppliers(inst.suppliers)
    price, prod, unmet, cost, pay, *_ = kernels.fixed_trajectory(
        fam, p1, p2, d, inst.horizon, float(cost_eq[0]), float(pay_eq[0])
    )
    return dict(price=price, production=prod, unmet_inc=unmet, cost_inc=cost, pay_inc=pay)


def _run_demand_grid(inst: MarketInstance, params: dict) -> dict:
    if not all(s.family == QUADRATIC for s in inst.suppliers):
        raise ValueError("demand_grid requires strongly convex quadratic suppliers")
    T = inst.horizon
    gamma = params.get("gamma_demand") or (1.0 / math.sqrt(T))
    freeze = params.get("freeze_width") or (1.0 / math.sqrt(T))
    d_lo, d_hi = inst.demand_bounds
    n_cells = max(1, math.ceil((d_hi - d_lo) / gamma))
    p_stars, cost_eq, pay_eq = _equilibrium_paths(inst)
    fam, p1, p2 = kernels.encode_suppliers(inst.suppliers)
    price, prod, unmet, cost, pay, _ = kernels.demand_trajectory(
        fam, p1, p2, inst.demands, p_stars, cost_eq, pay_eq,
        d_lo, gamma, n_cells, freeze,
    )
    return dict(price=price, production=prod, unmet_inc=unmet, cost_inc=cost, pay_inc=pay)


def _contextual_class(inst_spec: InstanceSpec) -> FunctionClass:
    if inst_spec.function_class is None:
        raise ValueError("contextual_igw requires a function_class on the instance")
    if inst_spec.class_bound is None:
        raise ValueError("contextual_igw requires class_bound (output bound B)")
    members = tuple(ClassMember.from_json_dict(m) for m in inst_spec.function_class)
    return FunctionClass(members=members, bound=float(inst_spec.class_bound))


def _run_contextual(
    inst: MarketInstance,
    cls: FunctionClass,
    params: dict,
    rng: np.random.Generator,
) -> dict:
    if not all(s.family == CONTEXT_QUADRATIC for s in inst.suppliers):
        raise ValueError("contextual_igw requires context_quadratic suppliers")
    if inst.contexts is None:
        raise ValueError("contextual_igw requires a context sequence")
    T = inst.horizon
    n_members = len(cls)
    K = int(params.get("n_prices") or default_grid_size(T, n_members))
    delta = float(params.get("delta", 0.05))
    gamma = float(
        params.get("gamma_explore")
        or default_gamma(T, K, n_members, delta=delta)
    )
    eta = float(params.get("eta") or default_eta(cls.bound))

    phi = cls.coefficient_matrix()
    feats = apply_feature_map_batch(cls.feature_map_id(), inst.contexts)
    member_u = phi @ feats.T
    u_true = inst.aggregate_coefficient_path()
    p_stars = inst.demands / u_true
    grid = np.linspace(0.0, 1.0, K)
    uniforms = rng.uniform(0.0, 1.0, T)
    log_w0 = np.full(n_members, -math.log(n_members))

    (_, price, prod, unmet, cost, pay, proxy, _, _, _) = kernels.contextual_trajectory(
        member_u, log_w0, eta, u_true, inst.demands, p_stars, grid, gamma, uniforms
    )
    return dict(
        price=price, production=prod, unmet_inc=unmet, cost_inc=cost,
        pay_inc=pay, proxy_inc=proxy,
    )


def run_experiment(config: ExperimentConfig) -> list[RunRecord]:
    """Execute every (horizon, replication) pair of a configuration.

    Deterministic given (config, seed); when ``config.out`` is set, writes
    one per-period CSV per run plus a summary CSV into that directory.
    """
    records: list[RunRecord] = []
    for T in config.horizons:
        spec_T = config.instance.with_horizon(T)
        for rep in range(config.replications):
            key = config.seed + rep
            rng = replication_stream(config.seed, rep)
            inst = spec_T.materialize(rng)
            if config.policy == "constant_price":
                if "p" not in config.policy_params:
                    raise ValueError("constant_price requires policy_params['p']")
                cols = _run_constant_price(inst, float(config.policy_params["p"]))
            elif config.policy == "fixed_interval":
                cols = _run_fixed_interval(inst)
            elif config.policy == "demand_grid":
                cols = _run_demand_grid(inst, config.policy_params)
            else:
                cls = _contextual_class(spec_T)
                cols = _run_contextual(inst, cls, config.policy_params, rng)
            records.append(
                RunRecord(
                    policy=config.policy,
                    horizon=T,
                    replication=rep,
                    seed=key,
                    demand=inst.demands,
                    context_hash=inst.context_hashes(),
                    **cols,
                )
            )
    if config.out is not None:
        out_dir = Path(config.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for rec in records:
            write_run_csv(rec, out_dir / f"run_T{rec.horizon}_rep{rec.replication}.csv")
        write_summary_csv(records, out_dir / "summary.csv")
    return records


# ---------------------------------------------------------------------------
# Scaling fits
# ---------------------------------------------------------------------------

POWER_LAW = "power_law"
LOGLOG = "loglog"


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares fit of regret against horizon in model coordinates."""

    model: str
    slope: float
    intercept: float
    r_squared: float


def fit_scaling(horizons, values, model: str) -> ScalingFit:
    """Fit ``power_law`` (log value vs log T) or ``loglog`` (value vs
    log log T) over at least three horizons."""
    horizons = np.asarray(horizons, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if len(horizons) < 3:
        raise ValueError("scaling fits need at least 3 horizons")
    if len(horizons) != len(values):
        raise ValueError("horizons and values must have equal length")
    if np.all(values == values[0]):
        raise ValueError("degenerate fit: regret values have zero variance")
    if model == POWER_LAW:
        if np.any(values <= 0):
            raise ValueError("power_law fit requires positive regret values")
        x = np.log(horizons)
        y = np.log(values)
    elif model == LOGLOG:
        x = np.log(np.log(horizons))
        y = values
    else:
        raise ValueError(f"unknown scaling model {model!r}")
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot
    return ScalingFit(model=model, slope=float(slope), intercept=float(intercept), r_squared=r2)


def mean_metric_by_horizon(records: list[RunRecord], name: str) -> tuple[list[int], list[float]]:
    """Replication means of one metric, ordered by horizon."""
    horizons = sorted({r.horizon for r in records})
    means = []
    for T in horizons:
        vals = [r.metric(name) for r in records if r.horizon == T]
        means.append(float(np.mean(vals)))
    return horizons, means


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_run_csv(record: RunRecord, path: str | Path) -> None:
    """Per-period CSV with the fixed 7-column schema; t is 1-based."""
    lines = [PER_PERIOD_HEADER]
    for t in range(record.horizon):
        lines.append(
            ",".join(
                (
                    str(t + 1),
                    _fmt(record.demand[t]),
                    _fmt(record.price[t]),
                    _fmt(record.production[t]),
                    _fmt(record.unmet_inc[t]),
                    _fmt(record.cost_inc[t]),
                    _fmt(record.pay_inc[t]),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary_csv(records: list[RunRecord], path: str | Path) -> None:
    lines = [SUMMARY_HEADER]
    for r in records:
        lines.append(
            ",".join(
                (
                    r.policy,
                    str(r.horizon),
                    str(r.replication),
                    str(r.seed),
                    _fmt(r.unmet),
                    _fmt(r.cost_regret),
                    _fmt(r.payment_regret),
                    _fmt(r.proxy_reg),
                )
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_summary_csv(path: str | Path) -> list[dict]:
    text = Path(path).read_text().strip().splitlines()
    if not text or text[0] != SUMMARY_HEADER:
        raise ValueError(f"unexpected summary header in {path}")
    rows = []
    for line in text[1:]:
        policy, T, rep, seed, u, c, p, proxy = line.split(",")
        rows.append(
            {
                "policy": policy,
                "T": int(T),
                "replication": int(rep),
                "seed": int(seed),
                "U_T": float(u),
                "C_T": float(c),
                "P_T": float(p),
                "proxy_reg": float(proxy),
            }
        )
    return rows


def load_config(path: str | Path) -> ExperimentConfig:
    doc = json.loads(Path(path).read_text())
    return ExperimentConfig.from_json_dict(doc, base_dir=Path(path).parent)
