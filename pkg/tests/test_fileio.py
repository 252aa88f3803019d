"""File formats: exact round-trips, stable bytes, manifest hashing."""

import json

import numpy as np
import pytest

from qot import fileio


def test_matrix_roundtrip_is_exact(tmp_path):
    rng = np.random.default_rng(0)
    matrix = rng.standard_normal((7, 3)) * 10.0 ** rng.integers(-8, 8, size=(7, 3))
    path = fileio.write_matrix(tmp_path / "m.csv", matrix)
    assert np.array_equal(fileio.read_matrix(path), matrix)


def test_matrix_read_keeps_two_dims(tmp_path):
    path = fileio.write_matrix(tmp_path / "row.csv", np.array([[1.0, 2.0, 3.0]]))
    assert fileio.read_matrix(path).shape == (1, 3)


def test_labels_roundtrip(tmp_path):
    labels = np.array([0, 2, 1, 1, 0])
    path = fileio.write_labels(tmp_path / "l.csv", labels)
    assert path.read_text() == "0\n2\n1\n1\n0\n"
    assert np.array_equal(fileio.read_labels(path), labels)


def test_labels_reject_floats(tmp_path):
    with pytest.raises(ValueError):
        fileio.write_labels(tmp_path / "l.csv", np.array([0.0, 1.0]))


def test_potentials_roundtrip(tmp_path):
    rng = np.random.default_rng(1)
    u, v = rng.standard_normal(6), rng.standard_normal(6)
    path = fileio.write_potentials(tmp_path / "p.csv", u, v)
    ru, rv = fileio.read_potentials(path)
    assert np.array_equal(ru, u) and np.array_equal(rv, v)


def test_records_roundtrip_and_stable_bytes(tmp_path):
    records = [
        {"suite": "s", "check": "c", "inputs": {"n": 3}, "statistic": {"x": 0.5},
         "threshold": 1e-10, "verdict": "pass"},
        {"suite": "s", "check": "d", "inputs": {}, "statistic": {}, "threshold": 0,
         "verdict": "info"},
    ]
    path = fileio.write_records(tmp_path / "r.jsonl", records)
    assert fileio.read_records(path) == records
    first = path.read_bytes()
    fileio.write_records(path, records)
    assert path.read_bytes() == first


def test_manifest_contents_and_hashes(tmp_path):
    data = fileio.write_matrix(tmp_path / "data.csv", np.eye(2))
    mpath = fileio.write_manifest(
        tmp_path / "manifest.json", "solve", {"b": 2, "a": 1}, 7, [data]
    )
    manifest = fileio.read_manifest(mpath)
    assert manifest["command"] == "solve"
    assert manifest["seed"] == 7
    assert list(manifest["parameters"]) == ["a", "b"]
    assert manifest["outputs"] == {"data.csv": fileio.sha256_file(data)}
    # no volatile fields: rewriting yields identical bytes
    first = mpath.read_bytes()
    fileio.write_manifest(mpath, "solve", {"b": 2, "a": 1}, 7, [data])
    assert mpath.read_bytes() == first


def test_manifest_is_valid_json_with_trailing_newline(tmp_path):
    data = fileio.write_matrix(tmp_path / "d.csv", np.zeros((1, 1)))
    mpath = fileio.write_manifest(tmp_path / "m.json", "sample", {}, None, [data])
    text = mpath.read_text()
    assert text.endswith("\n")
    json.loads(text)


def test_estimates_format(tmp_path):
    from qot import ClusteringResult

    result = ClusteringResult(
        labels=np.array([0, 1]),
        k_hat=2,
        theta_hat=np.array([0.5, 0.5]),
        means_hat=np.array([[1.0, 2.0], [3.0, 4.0]]),
        sigma2_hat=0.25,
        epsilon_implied=1.5,
        spectrum=np.array([1.0, -1.0]),
    )
    path = fileio.write_estimates(tmp_path / "e.csv", result)
    lines = path.read_text().splitlines()
    assert lines[0] == "k_hat,2"
    assert lines[1] == "sigma2_hat,0.25"
    assert lines[2] == "epsilon_implied,1.5"
    assert lines[3] == "theta_hat,0.5,0.5"
    assert lines[4] == "mean,1,2"
    assert lines[5] == "mean,3,4"
