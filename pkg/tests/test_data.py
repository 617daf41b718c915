import numpy as np
import pytest

from ropedyn import env as E
from ropedyn.data import collect_dataset, load_dataset, save_dataset

CFG = E.EnvConfig()


def test_collect_counts_and_contiguity():
    ds = collect_dataset(CFG, trajectories=1, length=20, seed=5)
    assert len(ds) == 20
    assert np.array_equal(ds.traj_ids, np.zeros(20))
    assert np.array_equal(ds.steps, np.arange(20))
    # consecutive transitions chain: s_{t+1} of one is s_t of the next
    assert np.allclose(ds.states_t1[:-1], ds.states_t[1:])


def test_collect_is_deterministic_and_files_byte_identical(tmp_path):
    a = collect_dataset(CFG, trajectories=3, length=5, seed=9)
    b = collect_dataset(CFG, trajectories=3, length=5, seed=9)
    pa, pb = tmp_path / "a.txt", tmp_path / "b.txt"
    save_dataset(a, pa)
    save_dataset(b, pb)
    assert pa.read_bytes() == pb.read_bytes()
    c = collect_dataset(CFG, trajectories=3, length=5, seed=10)
    assert not np.array_equal(a.actions, c.actions)


def test_collect_respects_env_invariants_at_scale():
    ds = collect_dataset(CFG, trajectories=50, length=20, seed=3)
    assert len(ds) == 1000
    for k in range(0, len(ds), 97):
        E.check_state(ds.states_t[k], CFG)
        E.check_state(ds.states_t1[k], CFG)


def test_split_75_25_by_whole_trajectories():
    ds = collect_dataset(CFG, trajectories=8, length=4, seed=1)
    train = ds.train_mask
    test = ds.test_mask
    assert train.sum() == 6 * 4 and test.sum() == 2 * 4
    assert not np.any(train & test)
    # split never cuts a trajectory in half
    for t in np.unique(ds.traj_ids):
        tags = train[ds.traj_ids == t]
        assert tags.all() or not tags.any()


def test_next_actions_shift_within_trajectory():
    ds = collect_dataset(CFG, trajectories=2, length=3, seed=2)
    nxt = ds.next_actions
    assert np.array_equal(nxt[0], ds.actions[1])
    assert np.array_equal(nxt[1], ds.actions[2])
    assert np.array_equal(nxt[2], ds.actions[2])  # trajectory end reuses own action
    assert np.array_equal(nxt[3], ds.actions[4])
    assert np.array_equal(nxt[5], ds.actions[5])


def test_save_load_save_round_trip_bytes(tmp_path):
    ds = collect_dataset(CFG, trajectories=2, length=4, seed=7)
    p1, p2 = tmp_path / "one.txt", tmp_path / "two.txt"
    save_dataset(ds, p1)
    loaded = load_dataset(p1)
    save_dataset(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(loaded.states_t, ds.states_t)
    assert np.array_equal(loaded.actions, ds.actions)
    assert loaded.env == ds.env


def test_empty_dataset_round_trip(tmp_path):
    ds = collect_dataset(CFG, trajectories=0, length=5, seed=0)
    p = tmp_path / "empty.txt"
    save_dataset(ds, p)
    assert p.read_text().count("\n") == 1  # header only
    loaded = load_dataset(p)
    assert len(loaded) == 0


def test_hand_written_fixture_loads_exact_values(tmp_path):
    cfg = E.EnvConfig(geom_count=2)
    header = ('ropedyn-dataset v1 geoms=2 env={"geom_count":2,"image_size":64,'
              '"mode":"deterministic","noise_sigma":0.5,"pick_radius":5.0,'
              '"rest_length":2.0,"seed":0}')
    lines = [
        header,
        "0 0 1.5 2.25 3.0 2.25 10.0 20.0 30.0 40.0 1.5 2.25 3.5 2.25",
        "0 1 1.5 2.25 3.5 2.25 5.0 6.0 7.0 8.0 2.0 2.25 4.0 2.25",
    ]
    p = tmp_path / "fixture.txt"
    p.write_text("\n".join(lines) + "\n")
    ds = load_dataset(p)
    assert len(ds) == 2
    assert ds.env == cfg
    assert ds.states_t[0].tolist() == [[1.5, 2.25], [3.0, 2.25]]
    assert ds.actions[0].tolist() == [10.0, 20.0, 30.0, 40.0]
    assert ds.states_t1[1].tolist() == [[2.0, 2.25], [4.0, 2.25]]
    assert ds.next_actions[0].tolist() == [5.0, 6.0, 7.0, 8.0]


def test_version_mismatch_rejected(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("ropedyn-dataset v99 geoms=25 env={}\n")
    with pytest.raises(ValueError, match="unsupported dataset header"):
        load_dataset(p)


def test_malformed_line_reports_line_number(tmp_path):
    ds = collect_dataset(CFG, trajectories=1, length=2, seed=0)
    p = tmp_path / "broken.txt"
    save_dataset(ds, p)
    lines = p.read_text().splitlines()
    lines[2] = lines[2] + " 123"  # extra field on line 3
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="line 3"):
        load_dataset(p)


def test_non_numeric_field_reports_line_number(tmp_path):
    ds = collect_dataset(CFG, trajectories=1, length=1, seed=0)
    p = tmp_path / "nan.txt"
    save_dataset(ds, p)
    lines = p.read_text().splitlines()
    parts = lines[1].split()
    parts[5] = "bogus"
    lines[1] = " ".join(parts)
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(ValueError, match="line 2"):
        load_dataset(p)
