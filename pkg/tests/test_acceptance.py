"""Acceptance suite: each criterion runs at its stated size and tolerance and
prints one PASS/FAIL line.  Run directly with ``python3 tests/test_acceptance.py``
or through pytest."""

import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from conftest import dubrovin_connection, random_complex, simple_pole_connection  # noqa: E402

from isomonodromy.connection_model import FormalNormalForm, MeromorphicConnection  # noqa: E402
from isomonodromy.isomonodromy_flows import (  # noqa: E402
    DeformationPoint,
    DeformationTangent,
    FlowState,
    integrate_schlesinger,
    invariance_report,
    jmu_rhs,
    schlesinger_velocity,
)
from isomonodromy.monodromy_numeric import (  # noqa: E402
    MonodromyParams,
    default_tentacles,
    loop_monodromy,
    monodromy_data,
    stokes_numeric,
    trace_invariants,
)
from isomonodromy.orbit_geometry import random_extended_point, self_check  # noqa: E402
from isomonodromy.stokes_data import (  # noqa: E402
    StokesFactor,
    anti_stokes,
    compose_factors,
    factor_unipotent,
    half_period_order,
    labelled_directions,
    local_monodromy,
)


def relative(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.abs(a - b).max() / max(1.0, np.abs(b).max()))


def schlesinger_loop_setup():
    """n = 2, m = 3 Fuchsian state and a closed square loop of length one traced by
    the first pole."""
    rng = np.random.default_rng(11)
    positions = np.array([0, 2, 1 + 1.6j])
    residues = [0.3 * random_complex(rng, 2, 2) for _ in range(2)]
    residues.append(-residues[0] - residues[1])
    conn = MeromorphicConnection(positions, tuple(r[None] for r in residues))
    square = [0, 0.25, 0.25 + 0.25j, 0.25j, 0]
    return conn, [positions + np.array([d, 0, 0]) for d in square]


def dubrovin_setup():
    rng = np.random.default_rng(2)
    leading = np.diag([1.0 + 0.3j, -0.8 + 0.1j])
    residue = 0.4 * random_complex(rng, 2, 2)
    conn = MeromorphicConnection(np.array([0, 1.5]),
                                 (np.array([leading, residue]), -residue[None]))
    state = FlowState.from_connection(conn)
    irr = state.irregular_types()[0]
    path = [DeformationPoint(state.positions, (irr, None)),
            DeformationPoint(state.positions, (irr + np.array([[0.2, -0.1j]]), None))]
    return state, path


_FLOW_REPORTS = {}


def flow_report(name):
    """Invariance reports are shared by criteria 6, 7 and 8."""
    if name not in _FLOW_REPORTS:
        if name == "schlesinger":
            conn, path = schlesinger_loop_setup()
            state = FlowState.from_connection(conn)
        else:
            state, path = dubrovin_setup()
        _FLOW_REPORTS[name] = invariance_report(state, path, checkpoints=4)
    return _FLOW_REPORTS[name]


# ---------------------------------------------------------------- criteria


def criterion_1():
    rng = np.random.default_rng(101)
    worst = []
    start = time.perf_counter()
    for _ in range(200):
        n = int(rng.integers(1, 6))
        k = int(rng.integers(2, 5))
        aset = anti_stokes(FormalNormalForm(k, random_complex(rng, k - 1, n), np.zeros(n)))
        ok = aset.count % (2 * k - 2) == 0
        half = aset.half_period_length
        ok &= sum(aset.multiplicities[:half]) == n * (n - 1) // 2
        dirs = np.asarray(aset.directions)
        for d, roots in zip(dirs, aset.roots):
            gap = np.abs(np.angle(np.exp(1j * (dirs - d - np.pi / (k - 1)))))
            partner = int(np.argmin(gap))
            ok &= gap[partner] < 1e-9
            ok &= tuple(sorted((j, i) for i, j in roots)) == aset.roots[partner]
        if not ok:
            worst.append((n, k))
    seconds = time.perf_counter() - start
    return not worst and seconds < 5, f"200 normal forms, {len(worst)} failures", seconds


def criterion_2():
    rng = np.random.default_rng(202)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(500):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(2, 5))
        aset = anti_stokes(FormalNormalForm(k, random_complex(rng, k - 1, n), np.zeros(n)))
        base = 0.5 * (aset.directions[0] + aset.directions[1])
        labels = labelled_directions(aset, base)[:aset.half_period_length]
        _, P = half_period_order(aset, base)
        factors = []
        for d in labels:
            K = np.eye(n, dtype=complex)
            for i, j in aset.roots[d]:
                K[i, j] = random_complex(rng)
            factors.append(StokesFactor(d, K, aset.roots[d]))
        U = compose_factors(factors, P)
        again = compose_factors(factor_unipotent(U, aset, labels, P), P)
        worst = max(worst, relative(again, U))
    seconds = time.perf_counter() - start
    return worst <= 1e-12 and seconds < 5, f"round trip {worst:.2e} <= 1e-12", seconds


def criterion_3():
    rng = np.random.default_rng(303)
    limits = {"skew": 1e-10, "lift_independence": 1e-10, "moment_map": 1e-6,
              "decouple_roundtrip": 1e-12, "decoupled_form": 1e-9}
    worst = dict.fromkeys(limits, 0.0)
    samples = 0
    start = time.perf_counter()
    shapes = [(n, k) for n in (2, 3) for k in (1, 2, 3)]
    while samples < 120:
        n, k = shapes[samples // 4 % len(shapes)]
        report = self_check(random_extended_point(rng, n, k), rng, samples=4)
        samples += 4
        for key in limits:
            worst[key] = max(worst[key], report[key])
    seconds = time.perf_counter() - start
    ok = all(worst[key] <= limits[key] for key in limits) and seconds < 30
    detail = ", ".join(f"{key} {worst[key]:.1e}" for key in limits)
    return ok, f"{samples} samples: {detail}", seconds


def criterion_4():
    rng = np.random.default_rng(404)
    residual = degree = 0.0
    start = time.perf_counter()
    for _ in range(20):
        md = monodromy_data(simple_pole_connection(rng, poles=3, scale=0.3, separation=0.5))
        residual = max(residual, md.residual)
        degree = max(degree, abs(md.degree))
    seconds = time.perf_counter() - start
    ok = residual <= 1e-8 and degree <= 1e-8 and seconds < 120
    return ok, f"20 instances: relation {residual:.2e}, degree {degree:.2e}", seconds


def criterion_5():
    rng = np.random.default_rng(505)
    loop_err = refine_err = 0.0
    params = MonodromyParams()
    start = time.perf_counter()
    for _ in range(5):
        conn = dubrovin_connection(rng)
        angle = default_tentacles(conn, params).base_angles[0]
        sm = stokes_numeric(conn, 0, params, base_angle=angle)
        local = local_monodromy(sm)
        loop_err = max(loop_err, relative(local, loop_monodromy(conn, 0, params, angle)))
        finer = stokes_numeric(conn, 0, params.refined(), base_angle=angle)
        refine_err = max(refine_err, relative(local_monodromy(finer), local),
                         *(relative(a, b) for a, b in zip(finer.S, sm.S)))
    seconds = time.perf_counter() - start
    ok = loop_err <= 1e-6 and refine_err <= 1e-6 and seconds < 300
    return ok, f"5 instances: loop {loop_err:.2e}, refinement {refine_err:.2e}", seconds


def criterion_6():
    conn, path = schlesinger_loop_setup()
    start = time.perf_counter()
    params = MonodromyParams()
    tent = default_tentacles(conn, params)
    before = trace_invariants(monodromy_data(conn, tent, params))
    residues = np.array([p.residue for p in conn.parts])
    drift = 0.0
    for a, b in zip(path[:-1], path[1:]):
        residues = integrate_schlesinger(a, residues, [a, b])
        moved = MeromorphicConnection(b, tuple(r[None] for r in residues))
        md = monodromy_data(moved, default_tentacles(moved, params, p0=tent.p0), params)
        drift = max(drift, relative(trace_invariants(md), before))
    flow = flow_report("schlesinger")
    flow_drift = flow["monodromy_drift"]
    seconds = time.perf_counter() - start
    ok = max(drift, flow_drift) <= 1e-6 and seconds < 300 and flow["skipped_checkpoints"] == 0
    return ok, (f"unit loop: invariant drift {drift:.2e} (Schlesinger), "
                f"{flow_drift:.2e} (general flow)"), seconds


def criterion_7():
    start = time.perf_counter()
    fuchsian = flow_report("schlesinger")["symplectic_drift"]
    dubrovin = flow_report("dubrovin")
    seconds = time.perf_counter() - start
    ok = max(fuchsian, dubrovin["symplectic_drift"]) <= 1e-5 and seconds < 600
    ok &= dubrovin["monodromy_drift"] <= 1e-6 and dubrovin["framed_drift"] <= 1e-6
    ok &= dubrovin["skipped_checkpoints"] == 0
    return ok, (f"symplectic drift {fuchsian:.2e} (Schlesinger), "
                f"{dubrovin['symplectic_drift']:.2e} (order 2+1)"), seconds


def criterion_8():
    rng = np.random.default_rng(808)
    worst = 0.0
    start = time.perf_counter()
    for _ in range(100):
        state = FlowState.from_connection(simple_pole_connection(rng))
        velocity = random_complex(rng, 3)
        got = jmu_rhs(state, DeformationTangent.moving_poles(state, velocity), "infinity")
        expected = schlesinger_velocity(state, velocity)
        worst = max(worst, max(float(np.abs(a[0] - b).max())
                               for a, b in zip(got.parts, expected)))
    exponent = max(flow_report(name)["exponent_drift"] for name in ("schlesinger", "dubrovin"))
    seconds = time.perf_counter() - start
    ok = worst <= 1e-9 and exponent <= 1e-8
    return ok, f"100 states: {worst:.2e}; exponent drift {exponent:.2e}", seconds


CRITERIA = {
    1: ("Stokes combinatorics", criterion_1),
    2: ("factorization round trip", criterion_2),
    3: ("orbit geometry", criterion_3),
    4: ("monodromy relation and degree", criterion_4),
    5: ("irregular Stokes cross-check", criterion_5),
    6: ("isomonodromy invariance", criterion_6),
    7: ("symplectic invariance", criterion_7),
    8: ("general equations consistency", criterion_8),
}


def run_criterion(number):
    title, fn = CRITERIA[number]
    ok, detail, seconds = fn()
    line = f"{'PASS' if ok else 'FAIL'} criterion {number} ({title}): {detail} [{seconds:.1f} s]"
    return ok, line


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_acceptance_criterion(number, capsys):
    ok, line = run_criterion(number)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run_criterion(number) for number in sorted(CRITERIA)]
    for _, line in results:
        print(line)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
