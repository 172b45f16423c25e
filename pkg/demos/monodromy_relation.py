"""Monodromy data of random Fuchsian systems: the product of the loop
monodromies around all poles is the identity, and the formal exponents sum to
zero.

Run: python3 demos/monodromy_relation.py
"""

import time

import numpy as np

from isomonodromy.connection_model import MeromorphicConnection, validate
from isomonodromy.monodromy_numeric import degree_by_quadrature, monodromy_data

rng = np.random.default_rng(404)


def random_fuchsian(rng, poles=3, scale=0.3):
    positions = rng.normal(size=poles) + 1j * rng.normal(size=poles)
    residues = [scale * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))
                for _ in range(poles - 1)]
    residues.append(-sum(residues))
    return MeromorphicConnection(positions, tuple(r[None] for r in residues))


# %% One instance in detail.
conn = random_fuchsian(rng)
print("validation passed:", validate(conn).passed)
md = monodromy_data(conn)
print("relation order", md.order, "base point", np.round(md.tentacles.p0, 3))
for i, pole in enumerate(md.poles):
    print(f"pole {i}: eigenvalues of rho", np.round(np.linalg.eigvals(pole.rho), 6))
print("relation residual", md.residual)
print("degree from exponents", md.degree, "by quadrature", degree_by_quadrature(conn))

# %% A small batch: worst relation residual and degree.
start = time.perf_counter()
worst = max((monodromy_data(random_fuchsian(rng)).residual for _ in range(10)))
print(f"worst residual over 10 instances {worst:.2e} in {time.perf_counter() - start:.1f} s")
