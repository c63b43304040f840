import math

import numpy as np
import pytest

import htm

SMALL = {
    "data": {"contexts": 4, "trajectories": 6, "T": 40},
    "cvae": {"epochs": 2, "hidden": 16},
    "cpc": {"epochs": 2, "steps_per_epoch": 10, "pool": 20, "hidden": 16},
    "sptm": {"epochs": 1, "steps_per_epoch": 5, "hidden": 16},
    "inverse": {"epochs": 2, "hidden": 16},
    "planning": {"M": 20},
    "execution": {"n": 40, "r": 20},
    "eval": {"heldout_contexts": 2, "ablation_tasks": 1},
}


def test_effective_config_defaults():
    cfg = htm.effective_config()
    assert cfg["planning"]["M"] == 300
    assert cfg["execution"]["n"] == 500 and cfg["execution"]["r"] == 200
    assert cfg["execution"]["tau"] == 0.5


def test_config_rejects_bad_value():
    with pytest.raises(htm.ConfigError, match="world.a_max"):
        htm.effective_config({"world": {"a_max": -1}})


def test_world_observation_normalized():
    w = htm.world()
    assert w.observe(1.4, 1.4) == pytest.approx([0.5, 0.5])
    c = w.generate_context(0)
    assert len(c.walls) == 1
    assert w.step(c, 1.4, 0.2, 0.0, 0.0) == pytest.approx((1.4, 0.2))


def test_weights_and_shortest_path():
    zero = np.zeros((5, 5))
    w = htm.edge_weights(zero, "normalized")
    off = ~np.eye(5, dtype=bool)
    assert np.all(w[off] == 5.0)
    assert np.all(htm.edge_weights(zero, "inverse")[off] == 1.0)
    path, total = htm.shortest_path(zero, 0, 4, "inverse")
    assert path == [0, 4] and total == 1.0
    lhs, rhs, holds = htm.jensen_bound_check(np.random.default_rng(0).normal(size=(6, 6)), [0, 3, 1, 5])
    assert holds and lhs >= rhs - 1e-12


def test_cpc_loss_and_mi_bound():
    assert htm.cpc_loss_from_logits(np.zeros((3, 8))) == pytest.approx(math.log(8))
    assert htm.mi_lower_bound(math.log(16), 16) == pytest.approx(0.0)


def test_end_to_end_small(tmp_path):
    data = htm.collect_dataset(SMALL)
    assert data.transition_count == 4 * 6 * 40
    cvae, cvae_curve = htm.train_cvae(data, SMALL)
    cpc, cpc_curve = htm.train_cpc(data, cvae, SMALL)
    sptm, _ = htm.train_sptm(data, SMALL)
    inverse, err = htm.train_inverse(data, SMALL)
    assert all(math.isfinite(v) for v in cvae_curve + cpc_curve)
    assert err >= 0.0

    tasks = htm.benchmark_tasks(2, SMALL)
    plan = htm.plan(tasks[0], cvae, cpc, seed=3, config=SMALL)
    assert plan["path"][0] == 0 and plan["path"][-1] == 21
    assert plan == htm.plan(tasks[0], cvae, cpc, seed=3, config=SMALL)

    result = htm.execute(tasks[0], inverse, cvae, cpc, seed=1, config=SMALL)
    assert result["steps"] <= 40
    assert result["success"] == (result["final_distance"] <= 0.5)

    csv, report = htm.evaluate(cvae, inverse, cpc, sptm, config=SMALL)
    assert csv.splitlines()[0] == (
        "task_id,method,scheme,success,steps,final_distance,feasibility,completeness,fidelity,seed"
    )
    assert {a["method"] for a in report["aggregates"]} == {"HTM", "SPTM-BCE", "inverse-only"}

    image = htm.render_plan(np.array(plan["observations"]), tasks[0], 16, SMALL)
    assert image.startswith(b"P6\n%d 16\n255\n" % (16 * len(plan["path"])))

    cpc.save(str(tmp_path / "cpc.htmc"))
    again = htm.load_cpc(str(tmp_path / "cpc.htmc"))
    assert np.array_equal(again.bilinear, cpc.bilinear)
