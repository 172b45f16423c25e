import json

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from isomonodromy import _series
from isomonodromy.connection_model import (
    FormalNormalForm,
    MeromorphicConnection,
    PrincipalPart,
    complex_from_json,
    complex_to_json,
    connection_from_json,
    connection_to_json,
    default_framing,
    dumps,
    evaluate,
    formal_diagonalize,
    framing_is_compatible,
    pole_genericity,
    validate,
)
from isomonodromy.errors import (
    ConfigError,
    IncompatibleFraming,
    PoleEvaluation,
    TruncationTooShort,
    ValidationError,
)

from conftest import random_complex


def pair_connection(lam=0.3):
    return MeromorphicConnection(np.array([0.0, 1.0]),
                                 (np.diag([lam, -lam])[None], np.diag([-lam, lam])[None]))


def gauge_of_normal_form(g, normal_form, N):
    """Principal part and holomorphic tail of ``g^-1 A0 g - g^-1 dg`` where
    ``A0`` is the normal form; exact through ``z^(N-1)``."""
    k = normal_form.order
    n = normal_form.rank
    ginv = _series.inv(g, N + k)
    A0 = _series.Laurent(-k, normal_form.polar_part())
    conj = _series.Laurent(0, ginv) @ A0 @ _series.Laurent(0, g)
    dg = _series.Laurent(0, g).derivative()
    total = conj - (_series.Laurent(0, ginv) @ dg)
    part = np.array([total.coeff(-j) for j in range(k, 0, -1)])
    tail = np.array([total.coeff(p) for p in range(N)])
    return PrincipalPart(part), tail.reshape(N, n, n)


def test_validate_pair_of_opposite_residues_passes():
    report = validate(pair_connection())
    assert report.passed
    assert report.residue_sum_norm == 0.0


def test_validate_nilpotent_leading_term_fails():
    part = PrincipalPart(np.array([[[0, 1], [0, 0]], [[0.1, 0], [0, -0.1]]], dtype=complex))
    generic, _ = pole_genericity(part)
    assert not generic


def test_validate_integer_separated_residue_eigenvalues_fail():
    conn = MeromorphicConnection(np.array([0.0, 1.0]),
                                 (np.diag([1.0, 0.0])[None], np.diag([-1.0, 0.0])[None]))
    assert not validate(conn).passed


def test_validate_nonzero_residue_sum_fails():
    conn = MeromorphicConnection(np.array([0.0, 1.0]),
                                 (np.diag([0.3, -0.3])[None], np.diag([0.1, -0.2])[None]))
    assert not validate(conn).passed


def test_connection_rejects_mismatched_parts():
    with pytest.raises(ValidationError):
        MeromorphicConnection(np.array([0.0, 1.0]), (np.eye(2)[None],))
    with pytest.raises(ValidationError):
        MeromorphicConnection(np.array([0.0, 1.0]), (np.eye(2)[None], np.eye(3)[None]))


def test_evaluate_single_simple_pole():
    R = np.array([[0.2, 1.0], [0.5, -0.2]])
    conn = MeromorphicConnection(np.array([0.0]), (R[None],))
    assert np.allclose(evaluate(conn, 2.0), R / 2)


def test_evaluate_sums_rational_terms(rng):
    A = random_complex(rng, 2, 2, 2)
    B = random_complex(rng, 1, 2, 2)
    conn = MeromorphicConnection(np.array([0.0, 1.0]), (A, B))
    z = -1.0
    expected = A[0] / z**2 + A[1] / z + B[0] / (z - 1)
    assert np.allclose(conn(z), expected)
    with pytest.raises(PoleEvaluation):
        conn(1.0)


def test_formal_diagonalize_on_diagonal_part_is_trivial():
    part = PrincipalPart(np.array([np.diag([1.0, -2.0]), np.diag([0.25, 0.5])], dtype=complex))
    ghat, nf = formal_diagonalize(part, np.eye(2), 5)
    assert np.allclose(ghat[0], np.eye(2))
    assert np.allclose(ghat[1:], 0)
    assert np.allclose(nf.irregular, [[1.0, -2.0]])
    assert np.allclose(nf.exponent, [0.25, 0.5])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(2, 3))
def test_formal_diagonalize_recovers_a_forward_gauge(seed, order, rank):
    rng = np.random.default_rng(seed)
    N = order + 3
    irregular = random_complex(rng, order - 1, rank)
    exponent = 0.3 * random_complex(rng, rank)
    gaps = np.abs(irregular[0][:, None] - irregular[0][None, :]) + np.eye(rank) * 10
    assume(gaps.min() > 0.05)
    # every series order divides by a leading eigenvalue gap
    tol = 1e-11 * min(gaps.min(), 1.0) ** -N
    nf = FormalNormalForm(order, irregular, exponent)
    decay = 0.5 ** np.arange(N + 1)
    g = 0.4 * random_complex(rng, N + 1, rank, rank) * decay[:, None, None]
    g[0] = np.eye(rank) + 0.3 * random_complex(rng, rank, rank)
    part, tail = gauge_of_normal_form(g, nf, N)
    tol *= max(1.0, np.abs(part.coefficients).max(), np.abs(tail).max()) * np.linalg.cond(g[0])
    ghat, found = formal_diagonalize(part, g[0], N, tail=tail)
    assert np.allclose(found.irregular, irregular, atol=max(tol, 1e-9))
    assert np.allclose(found.exponent, exponent, atol=max(tol, 1e-9))
    # ghat g^-1 must be a diagonal series with constant term one
    ratio = _series.mul(ghat, _series.inv(g, N + 1), N + 1)
    off = ratio - np.einsum("kii->ki", ratio)[:, :, None] * np.eye(rank)
    assert np.abs(off).max() <= tol
    assert np.allclose(ratio[0], np.eye(rank), atol=1e-12)


def test_formal_diagonalize_simple_pole_gauge_is_unique(rng):
    N = 5
    nf = FormalNormalForm(1, np.zeros((0, 2)), np.array([0.3 + 0.1j, -0.45]))
    g = 0.4 * random_complex(rng, N + 1, 2, 2)
    g[0] = np.eye(2) + 0.2 * random_complex(rng, 2, 2)
    part, tail = gauge_of_normal_form(g, nf, N)
    ghat, found = formal_diagonalize(part, g[0], N, tail=tail)
    assert np.allclose(found.exponent, nf.exponent, atol=1e-10)
    assert np.allclose(ghat, g, atol=1e-9)


def test_formal_diagonalize_guards(rng):
    part = PrincipalPart(np.array([np.diag([1.0, -1.0]), random_complex(rng, 2, 2)]))
    with pytest.raises(TruncationTooShort):
        formal_diagonalize(part, np.eye(2), 1)
    with pytest.raises(IncompatibleFraming):
        formal_diagonalize(part, np.array([[1, 1], [0, 1.0]]), 4)


def test_default_framing_is_compatible(rng):
    part = PrincipalPart(random_complex(rng, 3, 3, 3))
    assert framing_is_compatible(part, default_framing(part))


def test_json_round_trip(rng):
    conn = MeromorphicConnection(np.array([0.5j, 2.0]),
                                 (random_complex(rng, 2, 2, 2), random_complex(rng, 1, 2, 2)))
    back = connection_from_json(json.loads(dumps(connection_to_json(conn))))
    assert np.allclose(back.positions, conn.positions)
    for a, b in zip(back.parts, conn.parts):
        assert np.allclose(a.coefficients, b.coefficients)
    assert np.allclose(complex_from_json(complex_to_json(1 - 2j)), 1 - 2j)


def test_json_rejects_malformed_specs():
    with pytest.raises(ConfigError):
        connection_from_json({"rank": 2})
    with pytest.raises(ConfigError):
        connection_from_json({"rank": 2, "poles": [{"position": [0, 0], "order": 1,
                                                     "principal_part": [[[1, 0]]]}]})
    with pytest.raises(ConfigError):
        complex_from_json([1.0, 2.0, 3.0])
