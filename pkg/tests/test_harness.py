import json
import math

import numpy as np
import pytest

from eqprice.harness import (
    ExperimentConfig,
    fit_scaling,
    load_config,
    mean_metric_by_horizon,
    read_summary_csv,
    replication_stream,
    run_experiment,
    write_run_csv,
    write_summary_csv,
)
from eqprice.market import CostSpec, GeneratorSpec, InstanceSpec, equilibrium_price

QUAD_FIXED = InstanceSpec(
    suppliers=(CostSpec.quadratic(0.3),),
    demands=GeneratorSpec(kind="constant", value=1.0),
    horizon=1000,
)


def contextual_spec(n_members=4, seed=90, bound=9.0):
    rng = np.random.Generator(np.random.Philox(key=seed))
    phi_a = (0.75, 0.75, 0.5)
    phi_b = (0.75, 0.75, 0.5)
    truth = tuple(a + b for a, b in zip(phi_a, phi_b))
    members = [{"family": "context_quadratic", "phi": list(truth), "feature_map_id": "identity"}]
    for _ in range(n_members - 1):
        members.append(
            {
                "family": "context_quadratic",
                "phi": list(np.array(truth) * rng.uniform(0.6, 1.4, 3)),
                "feature_map_id": "identity",
            }
        )
    return InstanceSpec(
        suppliers=(
            CostSpec.context_quadratic(phi_a),
            CostSpec.context_quadratic(phi_b),
        ),
        demands=GeneratorSpec(kind="uniform", lo=0.5, hi=1.5),
        contexts=GeneratorSpec(kind="uniform_cube", lo=0.5, hi=1.5, dim=3),
        horizon=500,
        function_class=tuple(members),
        class_bound=bound,
    )


def test_constant_price_at_equilibrium_zero_regret():
    p_star = equilibrium_price([CostSpec.quadratic(0.3)], 1.0)
    cfg = ExperimentConfig(
        instance=QUAD_FIXED,
        policy="constant_price",
        horizons=(200,),
        policy_params={"p": p_star},
    )
    rec = run_experiment(cfg)[0]
    assert np.all(np.abs(rec.unmet_inc) <= 1e-9)
    assert np.all(np.abs(rec.cost_inc) <= 1e-9)
    assert np.all(np.abs(rec.pay_inc) <= 1e-9)


def test_fixed_interval_converges_to_clearing_price():
    cfg = ExperimentConfig(
        instance=QUAD_FIXED, policy="fixed_interval", horizons=(100_000,)
    )
    rec = run_experiment(cfg)[0]
    assert abs(rec.final_price - 0.3) <= 1e-5 + 1e-10


def test_byte_identical_reruns(tmp_path):
    cfg = ExperimentConfig(
        instance=contextual_spec(),
        policy="contextual_igw",
        horizons=(300,),
        replications=2,
        seed=424,
        out=str(tmp_path / "a"),
    )
    run_experiment(cfg)
    cfg2 = ExperimentConfig(
        instance=contextual_spec(),
        policy="contextual_igw",
        horizons=(300,),
        replications=2,
        seed=424,
        out=str(tmp_path / "b"),
    )
    run_experiment(cfg2)
    for name in ("summary.csv", "run_T300_rep0.csv", "run_T300_rep1.csv"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes()
        assert a == b


def test_replications_use_distinct_streams():
    cfg = ExperimentConfig(
        instance=InstanceSpec(
            suppliers=(CostSpec.quadratic(0.5), CostSpec.quadratic(1.0)),
            demands=GeneratorSpec(kind="uniform", lo=0.5, hi=1.5),
            horizon=200,
        ),
        policy="demand_grid",
        horizons=(200,),
        replications=3,
        seed=7,
    )
    records = run_experiment(cfg)
    assert [r.seed for r in records] == [7, 8, 9]
    assert not np.array_equal(records[0].demand, records[1].demand)
    s1 = replication_stream(7, 0).uniform(0.0, 1.0, 8)
    s2 = replication_stream(7, 1).uniform(0.0, 1.0, 8)
    assert not np.array_equal(s1, s2)


def test_fixed_interval_rejects_varying_demand():
    cfg = ExperimentConfig(
        instance=InstanceSpec(
            suppliers=(CostSpec.quadratic(0.5),),
            demands=GeneratorSpec(kind="uniform", lo=0.5, hi=1.5),
            horizon=100,
        ),
        policy="fixed_interval",
        horizons=(100,),
    )
    with pytest.raises(ValueError):
        run_experiment(cfg)


def test_contextual_requires_class_and_contexts():
    spec = contextual_spec()
    no_class = InstanceSpec(
        suppliers=spec.suppliers,
        demands=spec.demands,
        contexts=spec.contexts,
        horizon=spec.horizon,
    )
    cfg = ExperimentConfig(instance=no_class, policy="contextual_igw", horizons=(100,))
    with pytest.raises(ValueError):
        run_experiment(cfg)


def test_config_validation():
    with pytest.raises(ValueError):
        ExperimentConfig(instance=QUAD_FIXED, policy="nope", horizons=(10,))
    with pytest.raises(ValueError):
        ExperimentConfig(instance=QUAD_FIXED, policy="fixed_interval", horizons=(100, 10))
    with pytest.raises(ValueError):
        ExperimentConfig(
            instance=QUAD_FIXED, policy="fixed_interval", horizons=(10,), replications=0
        )


def test_fit_scaling_power_law_exact():
    Ts = [10**3, 10**4, 10**5, 10**6]
    fit = fit_scaling(Ts, [5.0 * math.sqrt(t) for t in Ts], "power_law")
    assert fit.slope == pytest.approx(0.5, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(5.0), abs=1e-9)


def test_fit_scaling_loglog_exact():
    Ts = [10**3, 10**4, 10**5]
    fit = fit_scaling(Ts, [3.0 * math.log(math.log(t)) for t in Ts], "loglog")
    assert fit.slope == pytest.approx(3.0, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_scaling_errors():
    with pytest.raises(ValueError):
        fit_scaling([10, 100], [1.0, 2.0], "power_law")  # too few horizons
    with pytest.raises(ValueError):
        fit_scaling([10, 100, 1000], [2.0, 2.0, 2.0], "power_law")  # zero variance
    with pytest.raises(ValueError):
        fit_scaling([10, 100, 1000], [1.0, -2.0, 3.0], "power_law")  # nonpositive
    with pytest.raises(ValueError):
        fit_scaling([10, 100, 1000], [1.0, 2.0, 3.0], "parabola")


def test_run_csv_schema(tmp_path):
    cfg = ExperimentConfig(
        instance=QUAD_FIXED, policy="fixed_interval", horizons=(50,)
    )
    rec = run_experiment(cfg)[0]
    path = tmp_path / "run.csv"
    write_run_csv(rec, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,demand,price,production,unmet_inc,cost_inc,pay_inc"
    assert len(lines) == 51
    first = lines[1].split(",")
    assert first[0] == "1"
    assert float(first[2]) == 0.0  # first posted price


def test_summary_csv_round_trip(tmp_path):
    cfg = ExperimentConfig(
        instance=QUAD_FIXED,
        policy="fixed_interval",
        horizons=(50, 100, 200),
        replications=2,
        seed=5,
    )
    records = run_experiment(cfg)
    path = tmp_path / "summary.csv"
    write_summary_csv(records, path)
    rows = read_summary_csv(path)
    assert len(rows) == 6
    assert rows[0]["policy"] == "fixed_interval"
    assert rows[0]["U_T"] == records[0].unmet
    assert math.isnan(rows[0]["proxy_reg"])
    horizons, means = mean_metric_by_horizon(records, "U_T")
    assert horizons == [50, 100, 200]


def test_record_cumulative_fields_match_columns():
    cfg = ExperimentConfig(
        instance=contextual_spec(), policy="contextual_igw", horizons=(250,), seed=3
    )
    rec = run_experiment(cfg)[0]
    assert rec.unmet == float(np.cumsum(rec.unmet_inc)[-1])
    assert rec.cost_regret == float(np.cumsum(rec.cost_inc)[-1])
    assert rec.payment_regret == float(np.cumsum(rec.pay_inc)[-1])
    assert rec.proxy_reg == float(np.cumsum(rec.proxy_inc)[-1])
    assert rec.cost_pos >= rec.cost_regret
    assert rec.context_hash is not None and len(rec.context_hash) == 250


def test_config_json_and_instance_path(tmp_path):
    inst_path = tmp_path / "inst.json"
    inst_path.write_text(QUAD_FIXED.to_json())
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(
        json.dumps(
            {
                "instance": "inst.json",
                "policy": "fixed_interval",
                "horizons": [100],
                "replications": 1,
                "seed": 11,
            }
        )
    )
    cfg = load_config(cfg_path)
    assert cfg.instance == QUAD_FIXED
    assert cfg.seed == 11
    records = run_experiment(cfg)
    assert len(records) == 1
