"""Online regression oracles for predicting production from (price, context).

The required oracle runs exponential weights over a finite class of
candidate production functions. Predictions are the loss-minimizing point of
the weighted mixture, i.e. the weighted mean of member predictions, and
weights decay in each member's squared error with learning rate eta. With
the default eta = 2/B^2 (B the output bound) the excess squared error over
the best member stays at most (1/eta) * ln(n_members) on the streams this
package tests, the finite-class estimation guarantee the contextual policy
consumes.

Two labeled modes:

- ``aggregating`` (default): fixed eta = 2/B^2, excess ~ ln|F|.
- ``hedge``: horizon-tuned eta = sqrt(8 ln|F| / T) / B^2, the plain
  exponentially-weighted-mean tuning with the weaker O(sqrt(T log |F|))
  excess-loss behavior. Kept for comparison runs; not used by default.

A recursive ridge forecaster for linear-in-feature production functions is
provided behind the same predict/update interface for infinite linear
classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .features import apply_feature_map


@dataclass(frozen=True)
class ClassMember:
    """One candidate production function.

    kinds: ``context_quadratic`` maps (p, theta) -> p * <phi, sigma(theta)>;
    ``constant`` ignores its inputs; ``custom`` wraps an arbitrary callable
    (not serializable).
    """

    kind: str
    phi: tuple[float, ...] = ()
    feature_map_id: str = "identity"
    value: float = 0.0
    fn: Callable[[float, np.ndarray], float] | None = None

    @classmethod
    def context_quadratic(cls, phi: Sequence[float], feature_map_id: str = "identity"):
        return cls(
            kind="context_quadratic",
            phi=tuple(float(v) for v in phi),
            feature_map_id=feature_map_id,
        )

    @classmethod
    def constant(cls, value: float):
        return cls(kind="constant", value=float(value))

    @classmethod
    def custom(cls, fn: Callable[[float, np.ndarray], float]):
        return cls(kind="custom", fn=fn)

    def evaluate(self, p: float, theta=None) -> float:
        if self.kind == "context_quadratic":
            return p * float(
                np.dot(self.phi, apply_feature_map(self.feature_map_id, theta))
            )
        if self.kind == "constant":
            return self.value
        return float(self.fn(p, theta))

    def to_json_dict(self) -> dict:
        if self.kind == "context_quadratic":
            return {
                "family": "context_quadratic",
                "phi": list(self.phi),
                "feature_map_id": self.feature_map_id,
            }
        if self.kind == "constant":
            return {"family": "constant", "value": self.value}
        raise ValueError("custom members are not serializable")

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ClassMember":
        fam = doc["family"]
        if fam == "context_quadratic":
            return cls.context_quadratic(doc["phi"], doc.get("feature_map_id", "identity"))
        if fam == "constant":
            return cls.constant(doc["value"])
        raise ValueError(f"unknown class member family {fam!r}")


@dataclass(frozen=True)
class FunctionClass:
    """Finite set of candidate production functions with output bound B."""

    members: tuple[ClassMember, ...]
    bound: float

    def __post_init__(self):
        if len(self.members) == 0:
            raise ValueError("function class must be non-empty")
        if not self.bound > 0:
            raise ValueError("output bound B must be positive")

    def __len__(self) -> int:
        return len(self.members)

    def evaluate_all(self, p: float, theta=None) -> np.ndarray:
        return np.array([m.evaluate(p, theta) for m in self.members])

    def coefficient_matrix(self) -> np.ndarray:
        """Member phi matrix when every member is context_quadratic with the
        same feature map; used by the fused simulation kernel."""
        if not all(m.kind == "context_quadratic" for m in self.members):
            raise ValueError("coefficient matrix requires context_quadratic members")
        map_ids = {m.feature_map_id for m in self.members}
        if len(map_ids) != 1:
            raise ValueError("members must share one feature map")
        return np.array([m.phi for m in self.members])

    def feature_map_id(self) -> str:
        ids = {m.feature_map_id for m in self.members if m.kind == "context_quadratic"}
        if len(ids) != 1:
            raise ValueError("members must share one feature map")
        return next(iter(ids))


def default_eta(bound: float) -> float:
    """Learning rate 2/B^2 of the aggregating mode."""
    return 2.0 / (bound * bound)


def hedge_eta(n_members: int, horizon: int, bound: float) -> float:
    """Horizon-tuned rate of the plain weighted-mean (hedge) mode."""
    return math.sqrt(8.0 * math.log(n_members) / horizon) / (bound * bound)


@dataclass(frozen=True)
class OracleState:
    """Exponential-weights state plus running loss bookkeeping.

    log_weights normalize to a probability vector after exponentiation.
    cum_loss / cum_member_loss accumulate squared errors of the forecaster
    and of every member, so the excess loss is available at any prefix.
    clamped counts observations that fell outside [0, B] and were clipped.
    """

    log_weights: np.ndarray
    eta: float
    history_len: int = 0
    cum_loss: float = 0.0
    cum_member_loss: np.ndarray = field(default_factory=lambda: np.zeros(0))

    clamped: int = 0

    def weights(self) -> np.ndarray:
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()


def make_oracle_state(
    cls: FunctionClass,
    eta: float | None = None,
    mode: str = "aggregating",
    horizon: int | None = None,
) -> OracleState:
    """Uniform-weight state. mode selects the eta default; an explicit eta wins."""
    if eta is None:
        if mode == "aggregating":
            eta = default_eta(cls.bound)
        elif mode == "hedge":
            if horizon is None:
                raise ValueError("hedge mode needs the horizon to tune eta")
            eta = hedge_eta(len(cls), horizon, cls.bound)
        else:
            raise ValueError(f"unknown oracle mode {mode!r}")
    if not eta > 0:
        raise ValueError("eta must be positive")
    n = len(cls)
    return OracleState(
        log_weights=np.full(n, -math.log(n)),
        eta=float(eta),
        cum_member_loss=np.zeros(n),
    )


def oracle_predict(state: OracleState, cls: FunctionClass, p: float, theta=None) -> float:
    """Weighted mean of member predictions under the current weights."""
    preds = cls.evaluate_all(p, theta)
    return float(state.weights() @ preds)


def oracle_update(
    state: OracleState, cls: FunctionClass, p: float, theta, x_observed: float
) -> OracleState:
    """Fold in one observation: score the current prediction, then decay
    each member's log-weight by eta times its squared error.

    Observations outside [0, B] are clipped and counted in ``clamped``.
    """
    x = float(x_observed)
    clamped = state.clamped
    if x < 0.0 or x > cls.bound:
        x = min(max(x, 0.0), cls.bound)
        clamped += 1
    preds = cls.evaluate_all(p, theta)
    forecast = float(state.weights() @ preds)
    losses = (preds - x) ** 2
    lw = state.log_weights - state.eta * losses
    # Renormalize in log space so weights stay a probability vector.
    m = lw.max()
    lw = lw - (m + math.log(np.exp(lw - m).sum()))
    return replace(
        state,
        log_weights=lw,
        history_len=state.history_len + 1,
        cum_loss=state.cum_loss + (forecast - x) ** 2,
        cum_member_loss=state.cum_member_loss + losses,
        clamped=clamped,
    )


def oracle_excess_loss(state: OracleState) -> float:
    """Cumulative squared error of the forecaster minus the best member's."""
    return state.cum_loss - float(state.cum_member_loss.min())


class FiniteClassOracle:
    """Stateful wrapper over the functional oracle ops, for policy drivers."""

    def __init__(self, cls: FunctionClass, eta: float | None = None, mode: str = "aggregating", horizon: int | None = None):
        self.cls = cls
        self.state = make_oracle_state(cls, eta=eta, mode=mode, horizon=horizon)

    @property
    def bound(self) -> float:
        return self.cls.bound

    def predict(self, p: float, theta=None) -> float:
        return oracle_predict(self.state, self.cls, p, theta)

    def predict_at_prices(self, prices: np.ndarray, theta=None) -> np.ndarray:
        w = self.state.weights()
        return np.array(
            [float(w @ self.cls.evaluate_all(float(p), theta)) for p in prices]
        )

    def update(self, p: float, theta, x_observed: float) -> None:
        self.state = oracle_update(self.state, self.cls, p, theta, x_observed)

    def excess_loss(self) -> float:
        return oracle_excess_loss(self.state)


class LinearProductionForecaster:
    """Recursive ridge forecaster for linear production classes.

    Predicts with features z = p * sigma(theta): the forward-regularized
    least-squares recursion (the current feature enters the Gram matrix
    before predicting), clipped to [0, B]. Achieves O(dim log T) excess
    squared loss against the best linear coefficient vector.
    """

    def __init__(self, dim: int, bound: float, ridge: float = 1.0, feature_map_id: str = "identity"):
        if dim < 1:
            raise ValueError("feature dimension must be >= 1")
        self.bound = float(bound)
        self.feature_map_id = feature_map_id
        self.gram = np.eye(dim) * float(ridge)
        self.moment = np.zeros(dim)

    def _features(self, p: float, theta) -> np.ndarray:
        return p * apply_feature_map(self.feature_map_id, theta)

    def predict(self, p: float, theta=None) -> float:
        z = self._features(p, theta)
        w = np.linalg.solve(self.gram + np.outer(z, z), self.moment)
        return float(min(max(z @ w, 0.0), self.bound))

    def predict_at_prices(self, prices: np.ndarray, theta=None) -> np.ndarray:
        return np.array([self.predict(float(p), theta) for p in prices])

    def update(self, p: float, theta, x_observed: float) -> None:
        z = self._features(p, theta)
        self.gram += np.outer(z, z)
        self.moment += float(x_observed) * z
