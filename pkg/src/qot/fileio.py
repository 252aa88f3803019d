"""Plain-text artifact I/O: CSV matrices, labels, potentials, manifests, reports.

All real numbers are written with 17 significant digits so files round-trip
doubles exactly; labels are bare integers, one per line. Manifests list every
file a run produced together with its SHA-256 content hash and carry no
timestamps, so reruns with identical flags are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

REAL_FORMAT = "%.17g"


def write_matrix(path, matrix: np.ndarray) -> Path:
    path = Path(path)
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    np.savetxt(path, matrix, fmt=REAL_FORMAT, delimiter=",", newline="\n")
    return path


def read_matrix(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_labels(path, labels: np.ndarray) -> Path:
    path = Path(path)
    labels = np.asarray(labels)
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError("labels must be integers")
    np.savetxt(path, labels.reshape(-1, 1), fmt="%d", newline="\n")
    return path


def read_labels(path) -> np.ndarray:
    return np.loadtxt(path, dtype=int, ndmin=1)


def write_potentials(path, first: np.ndarray, second: np.ndarray) -> Path:
    path = Path(path)
    np.savetxt(
        path,
        np.column_stack([first, second]),
        fmt=REAL_FORMAT,
        delimiter=",",
        newline="\n",
    )
    return path


def read_potentials(path) -> tuple[np.ndarray, np.ndarray]:
    table = np.loadtxt(path, delimiter=",", ndmin=2)
    return table[:, 0], table[:, 1]


def write_estimates(path, result) -> Path:
    """Key-value CSV of clustering estimates: counts, weights, means, variance."""
    path = Path(path)
    real = lambda x: REAL_FORMAT % x
    lines = [
        f"k_hat,{result.k_hat}",
        f"sigma2_hat,{real(result.sigma2_hat)}",
        f"epsilon_implied,{real(result.epsilon_implied)}",
        "theta_hat," + ",".join(real(t) for t in result.theta_hat),
    ]
    lines.extend("mean," + ",".join(real(x) for x in row) for row in result.means_hat)
    path.write_text("\n".join(lines) + "\n")
    return path


def write_records(path, records: list[dict]) -> Path:
    """One JSON object per line, keys sorted for stable bytes."""
    path = Path(path)
    with open(path, "w") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True, separators=(",", ":")))
            handle.write("\n")
    return path


def read_records(path) -> list[dict]:
    with open(path) as handle:
        return [json.loads(line) for line in handle if line.strip()]


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, command: str, parameters: dict, seed: int | None, outputs) -> Path:
    """Record a run: command name, flat parameters, seed, output hashes."""
    path = Path(path)
    manifest = {
        "command": command,
        "parameters": {k: parameters[k] for k in sorted(parameters)},
        "seed": seed,
        "outputs": {Path(p).name: sha256_file(p) for p in outputs},
    }
    with open(path, "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def read_manifest(path) -> dict:
    with open(path) as handle:
        return json.load(handle)
