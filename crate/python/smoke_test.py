"""Smoke test for the leadstep Python module.

Build and run from the repository root:

    cargo build --release -p leadstep-py
    cp target/release/libleadstep.so python/leadstep.so
    python3 python/smoke_test.py
"""

import json
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import leadstep  # noqa: E402


def check_model():
    m = leadstep.Model()
    assert m.dof == 16, m.dof
    assert m.hand_names == ["hand_left", "hand_right"]
    q = m.hold_posture()
    pos, quat = m.forward_kinematics(q, "hand_left")
    assert abs(sum(c * c for c in quat) - 1.0) < 1e-12
    # Central differences against the analytic Jacobian, linear rows.
    jac = m.jacobian(q, "hand_left")
    h = 1e-6
    for k in range(m.dof):
        qp, qm = list(q), list(q)
        qp[k] += h
        qm[k] -= h
        pp, _ = m.forward_kinematics(qp, "hand_left")
        pm, _ = m.forward_kinematics(qm, "hand_left")
        for r in range(3):
            assert abs((pp[r] - pm[r]) / (2 * h) - jac[r][k]) < 1e-6
    tau = m.project_wrenches(q, [[6, 0, 0, 0, 0, 0], [0] * 6])
    assert len(tau) == 16
    try:
        m.forward_kinematics(q[:3], "hand_left")
    except ValueError:
        pass
    else:
        raise AssertionError("short joint vector accepted")


def check_controller():
    c = leadstep.Controller()
    start = c.hand_position(0)
    for _ in range(200):
        c.step([[6, 0, 0, 0, 0, 0], [0] * 6])
    assert c.lambdas[0] == 0.0 and c.lambdas[1] == 1.0
    assert c.hand_position(0)[0] > start[0]
    assert min(c.blend) == 0.0 and max(c.blend) == 0.6


def check_trial():
    cfg = leadstep.TrialConfig("HW+HD")
    cfg.duration = 6.0
    log = leadstep.run_trial(cfg)
    assert len(log) == 1200
    assert log.columns()[:3] == ["time", "step", "stopped"]
    placed = [e for e in log.events() if e[1] == "foot_placed"]
    assert len(placed) == 6, len(placed)
    json.loads(placed[0][2])
    m = log.metrics()
    assert m["stop_time"] is None and m["steps"] == 6
    assert log.continuity_ratio() <= 1.0
    again = leadstep.TrialConfig.from_toml(cfg.to_toml())
    assert again.label == "HW+HD" and again.duration == 6.0
    with tempfile.TemporaryDirectory() as d:
        csv_path, ev_path = log.write(d)
        assert os.path.getsize(csv_path) > 0 and os.path.getsize(ev_path) > 0


def check_metrics():
    votes = [
        ("p1", "b1", "HW", "best"),
        ("p2", "b1", "HW", "best"),
        ("p3", "b1", "HW", "worst"),
        ("p4", "b1", "HW", "none"),
    ]
    assert math.isclose(leadstep.preference_metric(votes, "HW"), 3.5)
    split = [("p1", "b1", "HW", "best"), ("p1", "b1", "HD", "best")]
    assert leadstep.weighted_best_worst(split, "b1") == {"HD": (0.5, 0.0), "HW": (0.5, 0.0)}
    with tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False) as f:
        f.write("participant,block,trial,vote,confidence,comfort,order\n")
        f.write("p1,b1,HW,best,3,4,1\np2,b1,HW,,5,4,2\n")
    try:
        trials, by_order, warnings = leadstep.likert_summary(f.name)
    finally:
        os.unlink(f.name)
    assert trials["HW"][0] == (4.0, 1.0, 2)
    assert sorted(by_order) == [1, 2] and warnings == []


if __name__ == "__main__":
    check_model()
    check_controller()
    check_trial()
    check_metrics()
    print("python smoke test: ok")
