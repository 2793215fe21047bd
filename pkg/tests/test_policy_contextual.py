import math

import numpy as np
import pytest

from eqprice.oracle import ClassMember, FiniteClassOracle, FunctionClass
from eqprice.policy_contextual import (
    IGWParams,
    IgwDistribution,
    PriceGrid,
    contextual_observe,
    contextual_step,
    default_gamma,
    default_grid_size,
    greedy_price,
    igw_distribution,
    make_contextual_state,
    sample_price,
)

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0


def test_grid_spacing():
    grid = PriceGrid.uniform(5)
    assert np.allclose(grid.prices, [0.0, 0.25, 0.5, 0.75, 1.0])
    assert grid.spacing == pytest.approx(0.25)
    with pytest.raises(ValueError):
        PriceGrid.uniform(1)


def test_greedy_price_matches_truth():
    grid = PriceGrid.uniform(5)
    f_hat = lambda p, th: 4.0 * p  # production of cost x^2/8
    assert greedy_price(f_hat, grid, None, 1.0) == 1  # grid price 0.25


def test_greedy_price_tie_breaks_low():
    grid = PriceGrid.uniform(4)
    assert greedy_price(lambda p, th: 0.7, grid, None, 1.0) == 0


def test_greedy_price_saturates_at_top():
    grid = PriceGrid.uniform(6)
    assert greedy_price(lambda p, th: 2.0 * p, grid, None, 5.0) == 5


def test_igw_uniform_when_all_gaps_zero():
    dist = igw_distribution(np.zeros(7), gamma_explore=3.0)
    assert np.allclose(dist.probs, 1.0 / 7.0)
    assert dist.lam == pytest.approx(7.0, abs=1e-9)


def test_igw_two_arm_closed_form():
    # 1/lam + 1/(lam + 1) = 1 has the golden ratio as its root
    dist = igw_distribution(np.array([0.0, 0.5]), gamma_explore=1.0)
    assert dist.lam == pytest.approx(GOLDEN, abs=1e-9)
    assert dist.probs[0] == pytest.approx(1.0 / GOLDEN, abs=1e-9)
    assert dist.probs[1] == pytest.approx(1.0 - 1.0 / GOLDEN, abs=1e-9)


def test_igw_greedy_dominates_for_large_gamma():
    gaps = np.array([0.0, 0.2, 0.7, 1.3])
    dist = igw_distribution(gaps, gamma_explore=1e6)
    assert dist.probs[0] > 0.999


def test_igw_rejects_bad_gaps():
    with pytest.raises(ValueError):
        igw_distribution(np.array([-0.1, 0.0]), 1.0)
    with pytest.raises(ValueError):
        igw_distribution(np.array([0.2, 0.4]), 1.0)  # greedy gap missing


def test_igw_distribution_properties_random():
    rng = np.random.Generator(np.random.Philox(key=71))
    for _ in range(1000):
        K = int(rng.integers(2, 65))
        gamma = float(np.exp(rng.uniform(math.log(0.1), math.log(1e6))))
        gaps = rng.uniform(0.0, 2.0, K)
        gaps[rng.integers(0, K)] = 0.0
        gaps = gaps - gaps.min()
        dist = igw_distribution(gaps, gamma)
        assert abs(dist.probs.sum() - 1.0) <= 1e-9
        assert np.all(dist.probs > 0.0)
        greedy = int(np.argmin(gaps))
        assert dist.probs[greedy] == pytest.approx(dist.probs.max())
        # exploration floor
        floor = 1.0 / (K + 2.0 * gamma * gaps.max())
        assert np.all(dist.probs >= floor - 1e-12)
        assert 0.0 < dist.lam <= K + 1e-12


def test_sample_price_inverse_cdf():
    dist = IgwDistribution(probs=np.array([0.618, 0.382]), lam=GOLDEN)
    assert sample_price(dist, 0.7) == 1  # second arm: draw above 0.618
    assert sample_price(dist, 0.5) == 0
    assert sample_price(dist, 0.618) == 0  # boundary goes to the lower arm
    assert sample_price(dist, 0.9999999) == 1


def test_default_tunings():
    assert default_grid_size(10**5, 8) == math.ceil((10**5 / math.log(8)) ** (1 / 3))
    g = default_gamma(10**5, 37, 8, delta=0.05)
    expected = math.sqrt(37 * 10**5 / (math.log(8) + math.log(1 / 0.05)))
    assert g == pytest.approx(expected)


def test_params_validation():
    with pytest.raises(ValueError):
        IGWParams(gamma_explore=0.0, n_prices=4)
    with pytest.raises(ValueError):
        IGWParams(gamma_explore=1.0, n_prices=1)
    with pytest.raises(ValueError):
        IGWParams(gamma_explore=1.0, n_prices=4, delta=1.5)


class _FixedDraw:
    def __init__(self, value):
        self.value = value

    def uniform(self):
        return self.value


def test_first_round_is_uniform():
    # an uninformed oracle over constant members gives equal gaps
    cls = FunctionClass(
        members=(ClassMember.constant(0.4), ClassMember.constant(0.4)), bound=1.0
    )
    state = make_contextual_state(FiniteClassOracle(cls))
    grid = PriceGrid.uniform(4)
    params = IGWParams(gamma_explore=10.0, n_prices=4)
    _, state = contextual_step(state, grid, params, None, 0.4, _FixedDraw(0.1))
    assert np.allclose(state.last_distribution.probs, 0.25)


def test_observe_requires_pending_step():
    cls = FunctionClass(members=(ClassMember.constant(0.4),), bound=1.0)
    state = make_contextual_state(FiniteClassOracle(cls))
    with pytest.raises(ValueError):
        contextual_observe(state, 0.5)


def test_long_run_greedy_converges_to_clearing_price():
    # truth in a 2-member class: after convergence the greedy arm is the
    # grid price nearest the clearing price
    rng = np.random.Generator(np.random.Philox(key=72))
    truth = ClassMember.context_quadratic(phi=(2.0, 1.0))
    other = ClassMember.context_quadratic(phi=(1.0, 2.5))
    cls = FunctionClass(members=(truth, other), bound=6.0)
    oracle = FiniteClassOracle(cls)
    state = make_contextual_state(oracle)
    K = 11
    grid = PriceGrid.uniform(K)
    params = IGWParams(gamma_explore=200.0, n_prices=K)
    d = 1.0
    for _ in range(600):
        theta = rng.uniform(0.5, 1.5, 2)
        p, state = contextual_step(state, grid, params, theta, d, rng)
        x = truth.evaluate(p, theta)
        state = contextual_observe(state, x)
    theta = np.array([1.0, 1.0])
    u = 3.0  # <phi_truth, theta>
    p_star = d / u
    greedy = greedy_price(lambda p, th: oracle.predict(p, th), grid, theta, d)
    nearest = int(np.argmin(np.abs(grid.prices - p_star)))
    assert greedy == nearest


def test_distribution_attached_to_state():
    cls = FunctionClass(
        members=(ClassMember.constant(0.2), ClassMember.constant(0.8)), bound=1.0
    )
    state = make_contextual_state(FiniteClassOracle(cls))
    grid = PriceGrid.uniform(3)
    params = IGWParams(gamma_explore=5.0, n_prices=3)
    price, state = contextual_step(state, grid, params, None, 0.5, _FixedDraw(0.0))
    assert price == grid.prices[0]  # draw 0 lands on the first arm
    assert state.last_distribution is not None
    assert state.pending_price == price
    state = contextual_observe(state, 0.5)
    assert state.pending_price is None
