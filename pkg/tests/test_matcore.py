import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isomonodromy.errors import EigenvalueCollision, ResonantShift
from isomonodromy.matcore import circle_path, eig_distinct, integrate_linear, mat_exp, solve_ad_shift

from conftest import random_complex


def test_eig_distinct_on_diagonal_input_returns_identity_vectors():
    values, vectors = eig_distinct(np.diag([1.0, 2.0]))
    assert np.allclose(values, [1, 2])
    assert np.allclose(np.abs(vectors), np.eye(2))


def test_eig_distinct_swap_matrix_sorted():
    values, vectors = eig_distinct([[0, 1], [1, 0]])
    assert np.allclose(values, [-1, 1])
    M = np.array([[0, 1], [1, 0]])
    assert np.allclose(M @ vectors, vectors * values)


def test_eig_distinct_rejects_repeated_eigenvalue():
    with pytest.raises(EigenvalueCollision):
        eig_distinct([[1, 1], [0, 1]])


def test_eig_distinct_rejects_non_square():
    with pytest.raises(ValueError):
        eig_distinct(np.zeros((2, 3)))


def test_mat_exp_oracles():
    assert np.allclose(mat_exp(np.zeros((3, 3))), np.eye(3))
    assert np.allclose(mat_exp(np.diag([1j * np.pi, 0])), np.diag([-1, 1]))
    assert np.allclose(mat_exp([[0, 1], [0, 0]]), [[1, 1], [0, 1]])


def test_solve_ad_shift_oracles():
    X = solve_ad_shift(np.diag([1.0, 2.0]), np.array([[0, 1], [1, 0]], dtype=complex))
    assert np.allclose(X, [[0, -1], [1, 0]])
    assert np.allclose(solve_ad_shift(np.diag([3.0, -1.0]), np.zeros((2, 2))), 0)
    with pytest.raises(ResonantShift):
        solve_ad_shift(np.zeros((2, 2)), np.array([[0, 1.0], [0, 0]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=3, allow_nan=False,
                                                      allow_infinity=False))
def test_solve_ad_shift_solves_the_shifted_commutator_equation(seed, shift):
    rng = np.random.default_rng(seed)
    d = random_complex(rng, 3)
    B = random_complex(rng, 3, 3)
    denom = d[:, None] - d[None, :] + shift
    if np.abs(denom).min() < 1e-3:
        return
    X = solve_ad_shift(np.diag(d), B, shift)
    D = np.diag(d)
    assert np.allclose(D @ X - X @ D + shift * X, B, atol=1e-10)


def test_integrate_linear_zero_coefficient_keeps_frame(rng):
    frame = random_complex(rng, 2, 2)
    out = integrate_linear(lambda z: np.zeros((2, 2)), [0, 1 + 1j, 2j], frame)
    assert np.allclose(out, frame, atol=1e-14)


def test_integrate_linear_residue_loop_gives_exponential():
    lam = 0.37 - 0.2j
    out = integrate_linear(lambda z: lam / z * np.eye(2), circle_path(0, 1.0, 0.0, 2 * np.pi),
                           np.eye(2), tol=1e-12)
    assert np.allclose(out, np.exp(2j * np.pi * lam) * np.eye(2), atol=1e-10)


def test_integrate_linear_constant_coefficient_matches_exponential(rng):
    A = random_complex(rng, 3, 3)
    frame = random_complex(rng, 3, 3)
    direction = np.exp(0.7j)
    out = integrate_linear(lambda z: A, [0, 1.3 * direction], frame, tol=1e-12)
    assert np.allclose(out, mat_exp(A * 1.3 * direction) @ frame, rtol=1e-9, atol=1e-9)


def test_integrate_linear_rejects_bad_paths():
    with pytest.raises(ValueError):
        integrate_linear(lambda z: np.zeros((1, 1)), [0], np.eye(1))
    with pytest.raises(ValueError):
        integrate_linear(lambda z: np.zeros((1, 1)), [0, 0], np.eye(1))


def test_circle_path_closes():
    path = circle_path(1 + 1j, 0.5, 0.3, 2 * np.pi)
    assert np.isclose(path[0], path[-1])
    assert np.allclose(np.abs(path - (1 + 1j)), 0.5)
