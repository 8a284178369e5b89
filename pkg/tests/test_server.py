import numpy as np
import pytest

from byzgd import analysis
from byzgd.config import load_config
from byzgd.core import ConstraintBox
from byzgd.server import DivergenceError, ScheduleKind, StepSchedule, project_box, run, step


BOX = ConstraintBox.cube(2, 100.0)


def test_project_examples():
    np.testing.assert_array_equal(project_box([150, -150], BOX), [100, -100])
    np.testing.assert_array_equal(project_box([3, -4], BOX), [3, -4])


def test_projection_non_expansive_and_idempotent(rng):
    for _ in range(1000):
        u, v = rng.uniform(-300, 300, (2, 2))
        pu, pv = project_box(u, BOX), project_box(v, BOX)
        assert np.linalg.norm(pu - pv) <= np.linalg.norm(u - v) + 1e-12
        np.testing.assert_array_equal(project_box(pu, BOX), pu)


def test_step_examples():
    w = np.array([2.0, -1.0])
    np.testing.assert_array_equal(step(w, np.zeros(2), 0.3, BOX), w)
    np.testing.assert_array_equal(step(np.zeros(2), [1, 1], 0.5, BOX), [-0.5, -0.5])
    np.testing.assert_array_equal(step(np.zeros(2), [1e4, 0], 1.0, BOX), [-100, 0])
    with pytest.raises(DivergenceError):
        step(np.zeros(2), [np.inf, 0], 1.0, BOX)
    with pytest.raises(ValueError):
        step(np.zeros(2), [1, 0], 0.0, BOX)


def test_schedules():
    s = StepSchedule(ScheduleKind.DIMINISHING, c=10)
    assert [s(t) for t in range(3)] == [10, 5, 10 / 3]
    assert StepSchedule(ScheduleKind.CONSTANT, eta=0.2)(99) == 0.2
    with pytest.raises(ValueError):
        StepSchedule(ScheduleKind.CONSTANT)
    with pytest.raises(ValueError):
        StepSchedule(ScheduleKind.LINEAR_RATE)(0)


def test_six_agent_run(six_agents):
    tr = run(load_config("paper_sec10", ["horizon=500"]))
    assert len(tr) == 501
    assert np.all(tr.errors > 0)
    assert tr.final_error < 1e-2
    assert all(BOX.contains(w) for w in tr.w)


def test_plain_descent_converges():
    tr = run(load_config("paper_sec10", [
        "f=0", "byzantine_ids=[]", "filter=none", 'schedule={"kind": "constant", "eta": 0.1}', "horizon=400",
    ]))
    assert tr.final_error < 1e-6


def test_run_is_deterministic():
    a = run(load_config("paper_sec10_random"))
    b = run(load_config("paper_sec10_random"))
    np.testing.assert_array_equal(a.estimates, b.estimates)
    assert a.kept == b.kept


def test_start_at_w_star_stays_put():
    for kind in ("norm", "norm_cap"):
        for adv in ('"omniscient"', '{"kind": "random", "scale": 10}'):
            tr = run(load_config("paper_sec10", ["w0=[1, 1]", f"filter={kind}", f"adversary={adv}", "horizon=30"]))
            assert np.all(tr.errors == 0)


def test_async_zero_t_o_matches_synchronous():
    sync = run(load_config("paper_sec10_random", ["horizon=200"]))
    asyn = run(load_config("paper_sec10_random", ["horizon=200", 'delays={"t_o": 0, "pattern": "random", "seed": 9}']))
    np.testing.assert_array_equal(sync.estimates, asyn.estimates)


def test_crash_adversary_excluded_after_limit():
    tr = run(load_config("paper_sec10", [
        'adversary={"kind": "crash", "stop_at": 5}', "delays.outdatedness_limit=3", "horizon=200",
    ]))
    assert tr.crashed[5] == ()
    assert tr.crashed[9] == (1,)
    assert 1 not in tr.kept[50]
    assert tr.final_error < 1e-2


def test_crash_without_limit_reuses_last_report():
    tr = run(load_config("paper_sec10", ['adversary={"kind": "crash", "stop_at": 5}', "horizon=20"]))
    assert tr.staleness_matrix[20, 1] == 16
    assert tr.crashed[-1] == ()


def test_linear_rate_schedule_contracts(six_agents):
    mu = analysis.compute_mu(six_agents.agents)
    gamma = analysis.compute_gamma(six_agents.agents, 1)
    eta, rho = analysis.theorem3_step_and_rate(6, 1, mu, gamma)
    tr = run(load_config("paper_sec10", ['schedule="linear_rate"', "horizon=100"]))
    e = tr.errors
    assert np.all(e[1:] <= rho * e[:-1] + 1e-10)


def test_malformed_byzantine_report_aborts(monkeypatch):
    import byzgd.server as server

    def bad(*args, **kwargs):
        return np.array([np.nan, 0.0])

    monkeypatch.setattr(server, "byzantine_report", bad)
    tr = run(load_config("paper_sec10"))
    assert tr.diverged and len(tr) == 1
