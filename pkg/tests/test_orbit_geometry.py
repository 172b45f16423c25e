import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isomonodromy.errors import OffLevelSet, OffSlice, ShapeMismatch, SimplePoleUnsupported
from isomonodromy.orbit_geometry import (
    ExtendedOrbitPoint,
    TangentLift,
    ambient_tangent,
    coadjoint,
    decouple,
    kernel_lift,
    lift_from_ambient,
    moduli_form,
    moments,
    omega_extended,
    on_extended_orbit,
    pairing,
    random_extended_point,
    random_lift,
    recouple,
    self_check,
    winding,
    winding_preimage,
)

from conftest import random_complex


def zero_lift(k, n):
    return TangentLift(np.zeros((k, n, n), dtype=complex), np.zeros(n, dtype=complex))


def test_pairing_oracles():
    I = np.eye(2)
    A = np.array([I, I])
    assert pairing(A, np.array([I, I])) == 4
    assert pairing(A, np.zeros((2, 2, 2))) == 0
    with pytest.raises(ShapeMismatch):
        pairing(A, np.zeros((1, 2, 2)))


def test_coadjoint_identity_and_first_order_jet(rng):
    A = random_complex(rng, 2, 2, 2)
    one = np.array([np.eye(2), np.zeros((2, 2))])
    assert np.allclose(coadjoint(one, A), A)
    X = random_complex(rng, 2, 2)
    g = np.array([np.eye(2), X])
    out = coadjoint(g, A)
    assert np.allclose(out[0], A[0])
    assert np.allclose(out[1], A[1] + X @ A[0] - A[0] @ X)


def test_winding_of_identity_is_the_normal_form():
    A0 = np.array([np.diag([1.0, -1.0]), np.diag([0.2, 0.3])], dtype=complex)
    g = np.array([np.eye(2), np.zeros((2, 2))], dtype=complex)
    pt = winding(g, np.zeros(2), A0)
    assert np.allclose(pt.g0, np.eye(2))
    assert np.allclose(pt.A, A0)


def test_winding_preimage_round_trip(rng):
    pt = random_extended_point(rng, 3, 3)
    g, R, A0 = winding_preimage(pt)
    back = winding(g, R, A0)
    assert np.allclose(back.g0, pt.g0)
    assert np.allclose(back.A, pt.A, atol=1e-10)
    assert on_extended_orbit(pt, A0)


def test_omega_vanishes_on_zero_jets_and_is_skew(rng):
    pt = random_extended_point(rng, 2, 2)
    v = TangentLift(np.zeros((2, 2, 2)), random_complex(rng, 2))
    w = TangentLift(np.zeros((2, 2, 2)), random_complex(rng, 2))
    assert omega_extended(pt, v, w) == 0
    a, b = random_lift(rng, pt), random_lift(rng, pt)
    assert np.isclose(omega_extended(pt, a, b), -omega_extended(pt, b, a))


def test_omega_simple_pole_trace_oracle(rng):
    lam = np.diag([0.3, -0.7 + 0.2j])
    pt = ExtendedOrbitPoint(np.eye(2, dtype=complex), lam[None].astype(complex))
    X1, X2 = random_complex(rng, 2, 2), random_complex(rng, 2, 2)
    v = TangentLift(X1[None], np.zeros(2))
    w = TangentLift(X2[None], np.zeros(2))
    assert np.isclose(omega_extended(pt, v, w), np.trace(lam @ (X1 @ X2 - X2 @ X1)))


def test_moments_and_decouple_of_a_diagonal_point():
    A = np.array([np.diag([1.0, -2.0]), np.diag([0.25, 0.5])], dtype=complex)
    pt = ExtendedOrbitPoint(np.eye(2, dtype=complex), A)
    mu_g, mu_t = moments(pt)
    assert np.allclose(mu_g, A[1])
    assert np.allclose(mu_t, -A[1])
    g0, S, B = decouple(pt)
    assert np.allclose(g0, np.eye(2)) and np.allclose(S, A[1])
    assert np.allclose(B[0], A[0]) and np.allclose(B[1], 0)


def test_decouple_round_trip_and_simple_pole_guard(rng):
    pt = random_extended_point(rng, 3, 3)
    back = recouple(*decouple(pt))
    assert np.allclose(back.A, pt.A, atol=1e-12)
    with pytest.raises(SimplePoleUnsupported):
        decouple(random_extended_point(rng, 2, 1))


def test_kernel_lift_represents_zero_tangent(rng):
    pt = random_extended_point(rng, 2, 3)
    W = np.zeros((3, 2, 2), dtype=complex)
    W[1] = np.diag(random_complex(rng, 2))
    W[2] = np.diag(random_complex(rng, 2))
    dg0, dA = ambient_tangent(pt, kernel_lift(pt, W))
    assert np.abs(dg0).max() < 1e-12
    assert np.abs(dA).max() < 1e-10


def test_lift_from_ambient_recovers_tangent(rng):
    pt = random_extended_point(rng, 2, 2)
    v = random_lift(rng, pt)
    lift, resid = lift_from_ambient(pt, *ambient_tangent(pt, v))
    assert resid < 1e-10
    for a, b in zip(ambient_tangent(pt, lift), ambient_tangent(pt, v)):
        assert np.allclose(a, b, atol=1e-10)


def test_moduli_form_zero_lifts_and_guards(rng):
    lam = np.diag([0.3, -0.3])
    points = [ExtendedOrbitPoint(np.eye(2, dtype=complex), lam[None].astype(complex)),
              ExtendedOrbitPoint(np.eye(2, dtype=complex), -lam[None].astype(complex))]
    zeros = [zero_lift(1, 2), zero_lift(1, 2)]
    assert moduli_form(points, zeros, zeros) == 0
    off_level = [points[0], ExtendedOrbitPoint(np.eye(2, dtype=complex), lam[None].astype(complex))]
    with pytest.raises(OffLevelSet):
        moduli_form(off_level, zeros, zeros)
    tilted = [ExtendedOrbitPoint(np.array([[1, 1], [0, 1]], dtype=complex), points[0].A), points[1]]
    with pytest.raises(OffSlice):
        moduli_form(tilted, zeros, zeros)


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.integers(1, 3))
def test_self_check_identities(seed, n, k):
    rng = np.random.default_rng(seed)
    report = self_check(random_extended_point(rng, n, k), rng, samples=2)
    assert report["skew"] <= 1e-10
    assert report["lift_independence"] <= 1e-10
    assert report["moment_map"] <= 1e-6
    assert report["decouple_roundtrip"] <= 1e-12
    assert report["decoupled_form"] <= 1e-9
