import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from mhrt.recovery import (
    ReplicationResult,
    aggregate,
    bias,
    cor,
    rmse,
    run_replications,
)
from mhrt.sampler import SamplerConfig
from mhrt.simulate import default_design


def test_bias_rmse_values():
    assert bias([1.0, 2.0, 3.0], 1.0) == 1.0
    assert rmse([1.0, 3.0], 2.0) == 1.0
    with pytest.raises(ValueError):
        bias([], 0.0)
    with pytest.raises(ValueError):
        rmse([], 0.0)


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.integers(2, 40), elements=st.floats(-100, 100)),
       st.floats(-100, 100))
def test_rmse_bias_variance_identity(est, truth):
    lhs = rmse(est, truth) ** 2
    rhs = bias(est, truth) ** 2 + np.var(est)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-9)


def test_cor():
    assert cor([1.0, 2.0, 3.0], [2.0, 4.0, 6.0]) == pytest.approx(1.0)
    assert cor([1.0, 2.0, 3.0], [3.0, 2.0, 1.0]) == pytest.approx(-1.0)
    assert cor([1.0, 2.0, 3.0], [2.0, 2.0, 2.0]) is None
    with pytest.raises(ValueError):
        cor([1.0], [1.0])


def _result(index, est, truth, converged=True):
    return ReplicationResult(index=index, estimates=est, truths=truth,
                             max_psrf=1.01, ppp_ra=0.5, ppp_rt=0.5, dic=0.0,
                             converged=converged)


def test_aggregate_per_element_then_family_mean():
    truth = {"xi": np.array([4.0, 5.0]), "omega": np.array([2.0, 2.0])}
    r1 = _result(0, {"xi": np.array([4.1, 5.0]), "omega": np.array([2.1, 1.9])}, truth)
    r2 = _result(1, {"xi": np.array([3.9, 5.2]), "omega": np.array([2.0, 2.0])}, truth)
    rows = {r["parameter"]: r for r in aggregate([r2, r1])}
    # element biases: xi1 0.0, xi2 0.1
    assert rows["xi"]["bias"] == pytest.approx(0.05)
    # omega element biases +0.05 and -0.05 cancel in the signed mean only
    assert rows["omega"]["bias"] == pytest.approx(0.0, abs=1e-15)
    assert rows["omega"]["mean_abs_bias"] == pytest.approx(0.05)
    rmse_1 = np.sqrt((0.01 + 0.01) / 2)
    rmse_2 = np.sqrt((0.0 + 0.04) / 2)
    assert rows["xi"]["rmse"] == pytest.approx((rmse_1 + rmse_2) / 2)
    assert rows["xi"]["n"] == 4
    # constant truth: correlation undefined
    assert rows["omega"]["cor"] is None
    assert aggregate([]) == []


@pytest.fixture(scope="module")
def tiny_report():
    des = default_design(n_persons=60, n_items=10)
    cfg = SamplerConfig(n_iterations=160, n_burnin=80)
    return des, cfg, run_replications(des, cfg, 2, base_seed=5, psrf_threshold=10.0)


def test_run_replications_rows(tiny_report):
    des, cfg, report = tiny_report
    names = [r["parameter"] for r in report.rows]
    for fam in ("d", "xi", "omega", "theta_1", "theta_2", "tau_1", "tau_2",
                "mu_d", "mu_xi", "sigma_item[2,1]", "sigma_person[4,4]"):
        assert fam in names
    assert report.row("xi")["n"] == 20
    assert report.row("omega")["cor"] is None
    assert report.n_excluded == 0
    assert report.to_dict()["n_replications"] == 2


def test_run_replications_deterministic(tiny_report):
    des, cfg, report = tiny_report
    again = run_replications(des, cfg, 2, base_seed=5, psrf_threshold=10.0)
    assert again.rows == report.rows


def test_replications_use_distinct_data(tiny_report):
    _, _, report = tiny_report
    a, b = report.replications
    assert not np.array_equal(a.truths["xi"], b.truths["xi"])


def test_psrf_gate_excludes(tiny_report):
    des, cfg, _ = tiny_report
    report = run_replications(des, cfg, 2, base_seed=5, psrf_threshold=1.0)
    assert report.n_excluded == 2 and report.rows == []


def test_needs_a_replication():
    with pytest.raises(ValueError):
        run_replications(default_design(n_persons=5), SamplerConfig(n_iterations=2, n_burnin=1), 0)
