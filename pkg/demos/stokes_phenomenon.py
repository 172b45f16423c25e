"""Stokes data at a pole of order two, computed numerically and checked against
a direct loop around the pole.

Run: python3 demos/stokes_phenomenon.py
"""

import numpy as np

from isomonodromy.connection_model import MeromorphicConnection, formal_diagonalize
from isomonodromy.monodromy_numeric import (
    MonodromyParams,
    default_tentacles,
    loop_monodromy,
    stokes_numeric,
    torus_equivariance_check,
)
from isomonodromy.stokes_data import anti_stokes, local_monodromy

np.set_printoptions(precision=5, suppress=True)
rng = np.random.default_rng(2)

# %% A rank-two connection with an order-two pole at 0 and a simple pole at 1.5.
# The residues cancel, so there is no pole at infinity.
leading = np.diag([1.0 + 0.3j, -0.8 + 0.1j])
residue = 0.4 * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
conn = MeromorphicConnection(np.array([0, 1.5]), (np.array([leading, residue]), -residue[None]))

# %% The base sector at the irregular pole is picked so the tentacle from the base
# point avoids the other pole; the formal type fixes the anti-Stokes rays.
params = MonodromyParams()
angle = default_tentacles(conn, params).base_angles[0]
sm = stokes_numeric(conn, 0, params, base_angle=angle)
_, normal_form = formal_diagonalize(conn.parts[0], conn.framing(0), 4)
rays = anti_stokes(normal_form)
print("anti-Stokes rays", np.round(rays.directions, 4), "roots", rays.roots)
print("base angle", round(angle, 4))
print("exponent of formal monodromy", sm.exponent)
for label, S in zip(("S_1", "S_2"), sm.S):
    print(label)
    print(S)

# %% Going once around the pole by direct integration must reproduce the product
# of Stokes matrices times the formal monodromy.
loop = loop_monodromy(conn, 0, params, base_angle=angle)
print("loop vs Stokes data", np.abs(loop - local_monodromy(sm)).max())

# %% Refinement: halve the integrator tolerance, add two series terms.
finer = stokes_numeric(conn, 0, params.refined(), base_angle=angle)
print("refinement change", max(np.abs(a - b).max() for a, b in zip(sm.S, finer.S)))

# %% Changing the framing by a diagonal t conjugates every Stokes matrix by t.
report = torus_equivariance_check(conn, np.array([2.0, 0.5j]), poles=[0])
print("torus action deviation", report["max_deviation"])
