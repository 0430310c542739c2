import numpy as np
import pytest

from pnml_linreg.data import (
    IngestionError,
    SplitSpec,
    load_csv,
    load_registered,
    parse_manifest,
    split,
    write_standin_csv,
)


def write(tmp_path, text, name="d.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_csv_well_formed(tmp_path):
    path = write(tmp_path, "a,b,target\n1,2,3\n4,5,6\n7,8,9\n")
    raw = load_csv(path, "target")
    assert raw.features.shape == (3, 2)
    assert raw.dropped_rows == 0
    assert np.allclose(raw.targets, [3.0, 6.0, 9.0])
    assert raw.feature_names == ("a", "b")


def test_load_csv_drops_bad_row(tmp_path):
    path = write(tmp_path, "a,b,target\n1,2,3\n4,NA,6\n7,8,9\n")
    raw = load_csv(path, "target")
    assert raw.features.shape == (2, 2)
    assert raw.dropped_rows == 1


def test_load_csv_missing_target(tmp_path):
    path = write(tmp_path, "a,b\n1,2\n")
    with pytest.raises(IngestionError):
        load_csv(path, "target")


def test_split_partitions_and_standardizes(tmp_path):
    rng = np.random.default_rng(0)
    rows = ["a,b,target"] + [
        f"{rng.normal()*3+1},{rng.normal()},{rng.normal()}" for _ in range(200)
    ]
    raw = load_csv(write(tmp_path, "\n".join(rows) + "\n"), "target")
    view = split(raw, SplitSpec(seed=5))

    n_train, n_val = view.x_train.shape[0], view.x_validation.shape[0]
    n_test = view.x_test.shape[0]
    assert n_train == int(np.floor(0.81 * 200))
    assert n_val == int(np.floor(0.09 * 200))
    assert n_train + n_val + n_test == 200
    assert np.allclose(view.x_train.mean(axis=0), 0.0, atol=1e-10)
    assert np.allclose(view.x_train.std(axis=0), 1.0, atol=1e-10)
    # partitions are disjoint
    all_idx = np.concatenate([view.train_indices, view.validation_indices, view.test_indices])
    assert len(set(all_idx.tolist())) == 200


def test_split_is_deterministic(tmp_path):
    raw = load_csv(
        write(tmp_path, "a,target\n" + "\n".join(f"{i},{i*2}" for i in range(50)) + "\n"),
        "target",
    )
    v1 = split(raw, SplitSpec(seed=3))
    v2 = split(raw, SplitSpec(seed=3))
    assert np.array_equal(v1.train_indices, v2.train_indices)
    assert np.array_equal(v1.x_test, v2.x_test)
    v3 = split(raw, SplitSpec(seed=4))
    assert not np.array_equal(v1.train_indices, v3.train_indices)


def test_split_trainset_cap(tmp_path):
    raw = load_csv(
        write(tmp_path, "a,target\n" + "\n".join(f"{i},{i}" for i in range(100)) + "\n"),
        "target",
    )
    view = split(raw, SplitSpec(seed=1, trainset_cap=7))
    assert view.x_train.shape[0] == 7
    with pytest.raises(ValueError):
        split(raw, SplitSpec(seed=1, trainset_cap=1000))


def test_constant_feature_column_zeroed(tmp_path):
    raw = load_csv(
        write(tmp_path, "a,b,target\n" + "\n".join(f"5,{i},{i}" for i in range(40)) + "\n"),
        "target",
    )
    view = split(raw, SplitSpec(seed=0))
    assert np.allclose(view.x_train[:, 0], 0.0)


def test_parse_manifest_and_load(tmp_path):
    write_standin_csv("yacht_hydrodynamics", tmp_path / "yacht.csv")
    manifest = write(tmp_path, "# registry\nyacht_hydrodynamics = yacht.csv, target\n", "m.txt")
    registry = parse_manifest(manifest)
    assert set(registry) == {"yacht_hydrodynamics"}
    raw = load_registered(registry["yacht_hydrodynamics"], tmp_path)
    assert raw.features.shape == (308, 6)


def test_parse_manifest_rejects_unknown_and_malformed(tmp_path):
    with pytest.raises(IngestionError, match=":1:"):
        parse_manifest(write(tmp_path, "no equals sign here\n", "m1.txt"))
    with pytest.raises(IngestionError, match=":2:"):
        parse_manifest(write(tmp_path, "# ok\nnot_a_dataset = x.csv, target\n", "m2.txt"))


def test_load_registered_shape_mismatch(tmp_path):
    write(tmp_path, "f0,target\n1,2\n3,4\n", "yacht.csv")
    registry = parse_manifest(
        write(tmp_path, "yacht_hydrodynamics = yacht.csv, target\n", "m.txt")
    )
    with pytest.raises(IngestionError, match="shape"):
        load_registered(registry["yacht_hydrodynamics"], tmp_path)


def test_standin_csv_deterministic(tmp_path):
    p1 = write_standin_csv("yacht_hydrodynamics", tmp_path / "a.csv")
    p2 = write_standin_csv("yacht_hydrodynamics", tmp_path / "b.csv")
    assert p1.read_bytes() == p2.read_bytes()
    p3 = write_standin_csv("boston_housing", tmp_path / "c.csv")
    assert p1.read_bytes() != p3.read_bytes()
