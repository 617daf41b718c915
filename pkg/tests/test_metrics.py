import numpy as np
import pytest

from ropedyn.control import EpisodeRecord
from ropedyn.metrics import geom_error, success
from ropedyn.rng import child_rng


def rope(seed=0):
    return child_rng(seed, "rope").uniform(5, 59, (25, 2))


def record(final, avg, task="goal"):
    return EpisodeRecord(task=task, states=np.zeros((1, 25, 2)),
                         actions=np.zeros((0, 4)), final_error=final,
                         traj_avg_error=avg)


def test_identical_states_zero_error():
    s = rope()
    assert geom_error(s, s) == 0.0


def test_translation_by_3_4_gives_5():
    s = rope(1)
    assert geom_error(s, s + np.array([3.0, 4.0])) == pytest.approx(5.0)


def test_reversed_order_treated_as_identical():
    s = rope(2)
    assert geom_error(s, s[::-1]) == 0.0


def test_count_mismatch_errors():
    with pytest.raises(ValueError, match="mismatch"):
        geom_error(rope(), rope()[:10])


def test_symmetric_and_triangle_for_aligned_form():
    rng = child_rng(3, "tri")
    for _ in range(50):
        a, b, c = (rng.uniform(0, 64, (25, 2)) for _ in range(3))
        def aligned(x, y):
            return float(np.mean(np.linalg.norm(x - y, axis=1)))
        assert aligned(a, b) == pytest.approx(aligned(b, a))
        assert aligned(a, c) <= aligned(a, b) + aligned(b, c) + 1e-12
        assert geom_error(a, b) == pytest.approx(geom_error(b, a))


def test_goal_success_boundary_strict():
    assert success(record(0.0, 0.0), "goal")
    assert success(record(3.999, 99.0), "goal")
    assert not success(record(4.0, 0.0), "goal")  # exactly at threshold fails
    assert not success(record(4.001, 0.0), "goal")


def test_imitation_uses_trajectory_average():
    per_step = [2.0, 3.0, 10.0]
    rec = record(final=10.0, avg=float(np.mean(per_step)), task="imitation")
    assert np.mean(per_step) == 5.0
    assert not success(rec, "imitation")
    assert success(record(99.0, 3.9, task="imitation"), "imitation")


def test_success_monotone_in_errors():
    rng = child_rng(4, "mono")
    for _ in range(100):
        e = float(rng.uniform(0, 8))
        lower = e * float(rng.uniform(0.1, 1.0))
        if success(record(e, e), "goal"):
            assert success(record(lower, lower), "goal")


def test_unknown_task_errors():
    with pytest.raises(ValueError, match="task"):
        success(record(0, 0), "juggling")
