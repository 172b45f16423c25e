"""Regenerate the JSON job files in demos/configs from fixed seeds."""

from pathlib import Path

import numpy as np

from isomonodromy.connection_model import (
    MeromorphicConnection,
    complex_to_json,
    connection_to_json,
    dumps,
)

HERE = Path(__file__).parent / "configs"


def random_matrix(rng, scale):
    return scale * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))


def write(name, job):
    HERE.mkdir(exist_ok=True)
    (HERE / name).write_text(dumps(job) + "\n")


def schlesinger_job():
    rng = np.random.default_rng(11)
    positions = np.array([0, 2, 1 + 1.6j])
    residues = [random_matrix(rng, 0.3) for _ in range(2)]
    residues.append(-residues[0] - residues[1])
    conn = MeromorphicConnection(positions, tuple(r[None] for r in residues))
    square = [0, 0.25, 0.25 + 0.25j, 0.25j, 0]
    path = [complex_to_json(positions + np.array([d, 0, 0])) for d in square]
    return {"connection": connection_to_json(conn), "seed": 0,
            "flow": {"path": path, "checkpoints": 4}}


def dubrovin_job():
    rng = np.random.default_rng(2)
    leading = np.diag([1.0 + 0.3j, -0.8 + 0.1j])
    residue = random_matrix(rng, 0.4)
    conn = MeromorphicConnection(np.array([0, 1.5]),
                                 (np.array([leading, residue]), -residue[None]))
    positions = complex_to_json(conn.positions)
    start = np.array([[1.0 + 0.3j, -0.8 + 0.1j]])
    path = [{"positions": positions, "irregular": [complex_to_json(start), None]},
            {"positions": positions,
             "irregular": [complex_to_json(start + np.array([[0.2, -0.1j]])), None]}]
    return {"connection": connection_to_json(conn), "seed": 0,
            "flow": {"path": path, "checkpoints": 3}}


def rank_one_job():
    conn = MeromorphicConnection(np.array([0, 1]), (np.array([[[0.3]]]), np.array([[[-0.3]]])))
    return {"connection": connection_to_json(conn)}


def diagonal_job():
    lead = np.diag([1.0, -1.0 + 0.5j])
    res = np.diag([0.2, -0.1])
    conn = MeromorphicConnection(np.array([0, 1]), (np.array([lead, res]), -res[None]))
    return {"connection": connection_to_json(conn)}


if __name__ == "__main__":
    write("schlesinger_loop.json", schlesinger_job())
    write("dubrovin.json", dubrovin_job())
    write("rank_one.json", rank_one_job())
    write("diagonal.json", diagonal_job())
    print("wrote", sorted(p.name for p in HERE.iterdir()))
