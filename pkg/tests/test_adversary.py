import csv

import numpy as np
import pytest

from ternopt.adversary import (
    AttackObservation,
    IllConditionedError,
    MissingRoundLogError,
    attack_report,
    infer_gradient_baseline,
    infer_gradient_quantized,
    observe,
    quantized_error_samples,
)
from ternopt.engine import run
from ternopt.problems import make_sensor_problem
from ternopt.quantizer import QuantizerSpec
from ternopt.schedule import Schedule
from ternopt.topology import from_edges, preset

IDENTITY = QuantizerSpec("identity")
FIVE = preset("five-agent")


@pytest.fixture(scope="module")
def identity_run():
    return run(FIVE, Schedule(), IDENTITY, make_sensor_problem(), 101, seed=0, record="full")


@pytest.fixture(scope="module")
def ternary_run():
    q = QuantizerSpec("ternary", 5.0, "saturate")
    return run(FIVE, Schedule(), q, make_sensor_problem(), 101, seed=0, record="full")


def pair_observation(broadcast, broadcast_next, quantized=False):
    W = np.array([[0.0, 0.5], [0.5, 0.0]])
    return AttackObservation(0, 0, W, 1.0, 1.0, np.asarray(broadcast, float),
                             np.asarray(broadcast_next, float), quantized)


def test_two_agent_hand_inversion():
    # x = (1, 3), g = (0.5, -1) gives x' = (1.5, 3) at eps = lam = 1
    res = infer_gradient_baseline(pair_observation([[1.0], [3.0]], [[1.5], [3.0]]), [0.5])
    np.testing.assert_allclose(res.inferred, [0.5], atol=1e-15)
    assert res.relative_error <= 1e-15


def test_zero_gradient_recovered():
    res = infer_gradient_baseline(pair_observation([[2.0], [2.0]], [[2.0], [2.0]]))
    np.testing.assert_array_equal(res.inferred, [0.0])
    assert np.isnan(res.relative_error)


def test_baseline_is_exact(identity_run):
    rep = attack_report(identity_run)
    assert len(rep) == 100 * 5
    assert rep.relative_error.max() <= 1e-9


def test_baseline_rejects_quantized_observation(ternary_run):
    with pytest.raises(ValueError):
        infer_gradient_baseline(observe(ternary_run, 0, 0))


def test_quantized_report_errors_large(ternary_run):
    rep = attack_report(ternary_run)
    assert rep.relative_error.min() >= 0.1
    assert rep.per_iteration().shape == (100,)


def test_metrics_only_trajectory():
    traj = run(FIVE, Schedule(), IDENTITY, make_sensor_problem(), 5, seed=0)
    with pytest.raises(MissingRoundLogError):
        attack_report(traj)
    with pytest.raises(MissingRoundLogError):
        observe(traj, 0, 0)


def test_empty_trajectory_gives_empty_report():
    traj = run(FIVE, Schedule(), IDENTITY, make_sensor_problem(), 0, seed=0, record="full")
    rep = attack_report(traj)
    assert len(rep) == 0 and rep.per_iteration().size == 0


def test_last_round_not_attackable(identity_run):
    with pytest.raises(IndexError):
        observe(identity_run, 100, 0)


def test_honest_but_curious_full_view_is_exact():
    # on a complete graph every neighbour of the target is visible to the observer
    t = from_edges(3, [(0, 1), (1, 2), (0, 2)])
    traj = run(t, Schedule(), IDENTITY, make_sensor_problem(m=3), 20, seed=0, record="full")
    rep = attack_report(traj, targets=[0], mode="honest_but_curious", observer=1)
    assert rep.relative_error.max() <= 1e-9


def test_honest_but_curious_partial_view(identity_run):
    # observer 1 cannot see agent 4, a neighbour of target 0
    obs = observe(identity_run, 10, 0, "honest_but_curious", observer=1)
    assert not obs.visible[4] and obs.visible[2]
    res = infer_gradient_quantized(obs, identity_run.rounds[10].gradients[0])
    assert res.relative_error > 1e-6


def test_mode_validation(identity_run):
    with pytest.raises(ValueError):
        observe(identity_run, 0, 0, mode="passive")
    with pytest.raises(ValueError):
        observe(identity_run, 0, 0, mode="honest_but_curious", observer=3)


def test_ill_conditioned_round():
    obs = AttackObservation(0, 0, np.array([[0.0, 0.5], [0.5, 0.0]]), 1e-7, 1e-7,
                            np.zeros((2, 1)), np.zeros((2, 1)), False)
    with pytest.raises(IllConditionedError):
        infer_gradient_baseline(obs)


@pytest.mark.parametrize("mode", ["eavesdropper", "honest_but_curious"])
def test_error_grows_with_threshold(identity_run, mode):
    k = 50
    x = identity_run.states[k]
    g = identity_run.rounds[k].gradients
    means = []
    for r in (2.0, 5.0, 10.0):
        errs = quantized_error_samples(x, g, FIVE, Schedule(), k, QuantizerSpec("ternary", r, "saturate"),
                                       target=0, draws=200, seed=1, mode=mode)
        means.append(errs.mean())
    assert means[0] < means[1] < means[2]
    assert means[0] > 1.0


def test_identity_samples_exact(identity_run):
    k = 20
    errs = quantized_error_samples(identity_run.states[k], identity_run.rounds[k].gradients, FIVE,
                                   Schedule(), k, IDENTITY, target=3, draws=3)
    assert errs.max() <= 1e-9


def test_report_csv(tmp_path, identity_run):
    rep = attack_report(identity_run, targets=[1, 2])
    path = tmp_path / "attack.csv"
    rep.write_csv(path, comment="config_digest: abc")
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_digest: abc"
    rows = list(csv.DictReader(lines[1:]))
    assert len(rows) == 200 and {r["agent"] for r in rows} == {"1", "2"}
    assert rows[0]["mode"] == "eavesdropper"
