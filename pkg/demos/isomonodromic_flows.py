"""Isomonodromic deformations: move the poles of a Fuchsian system around a
closed loop, then deform the irregular type of an order-two pole, and watch the
monodromy data and the symplectic form stay put.

Run: python3 demos/isomonodromic_flows.py   (writes CSV files next to this script)
"""

from pathlib import Path

import numpy as np

from isomonodromy.connection_model import MeromorphicConnection
from isomonodromy.isomonodromy_flows import (
    DeformationPoint,
    FlowState,
    invariance_report,
    write_trajectory_csv,
)

HERE = Path(__file__).parent
rng = np.random.default_rng(11)


def summary(name, report):
    keys = ("monodromy_drift", "framed_drift", "exponent_drift", "symplectic_drift")
    print(name, {key: f"{report[key]:.1e}" for key in keys})


# %% Three simple poles in rank two.  The first pole traces a square of side 1/4,
# so the loop has length one.
positions = np.array([0, 2, 1 + 1.6j])
residues = [0.3 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) for _ in range(2)]
residues.append(-residues[0] - residues[1])
fuchsian = FlowState.from_connection(
    MeromorphicConnection(positions, tuple(r[None] for r in residues)))
square = [0, 0.25, 0.25 + 0.25j, 0.25j, 0]
loop = [positions + np.array([d, 0, 0]) for d in square]
report = invariance_report(fuchsian, loop, checkpoints=4)
summary("pole loop", report)
write_trajectory_csv(str(HERE / "pole_loop.csv"), report["rows"])

# %% The square encloses no other pole, so the residues return to their start.
# A loop around another pole would instead act on them by a braid.
before = np.array(fuchsian.parts)[:, 0]
after = np.array(report["final_state"].parts)[:, 0]
print("residue change after the loop", np.abs(after - before).max())

# %% One pole of order two and one simple pole.  The deformation moves the
# leading diagonal term of the irregular pole while the positions stay fixed.
rng = np.random.default_rng(2)
leading = np.diag([1.0 + 0.3j, -0.8 + 0.1j])
residue = 0.4 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
irregular = FlowState.from_connection(
    MeromorphicConnection(np.array([0, 1.5]), (np.array([leading, residue]), -residue[None])))
start = irregular.irregular_types()[0]
target = start + np.array([[0.2, -0.1j]])
path = [DeformationPoint(irregular.positions, (start, None)),
        DeformationPoint(irregular.positions, (target, None))]
report = invariance_report(irregular, path, checkpoints=3)
summary("irregular type", report)
print("final irregular type", np.round(report["final_state"].irregular_types()[0], 6))
write_trajectory_csv(str(HERE / "irregular_type.csv"), report["rows"])
