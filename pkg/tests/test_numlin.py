import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from speclab import blockops, numlin
from speclab.errors import DimensionError, ValidationError

import oracles


# ---- eigenvalues -----------------------------------------------------------------

def test_eigenvalues_diagonal():
    assert np.allclose(numlin.eigenvalues(np.diag([1.0, 2.0, 3.0])), [1, 2, 3])


def test_eigenvalues_delay_block():
    ev = numlin.eigenvalues([[0, 1], [8, 0]])
    assert np.allclose(ev, [-2 * np.sqrt(2), 2 * np.sqrt(2)], atol=1e-14)


def test_eigenvalues_triangular():
    ev = numlin.eigenvalues([[1 + 1j, 5], [0, 2 - 1j]])
    assert oracles.multiset_close(ev, [1 + 1j, 2 - 1j], 1e-14)


def test_eigenvalues_canonical_order():
    ev = numlin.eigenvalues(np.diag([3, 1j, -1j, 1, 1 - 1j]))
    assert list(ev) == list(numlin.sort_points(ev))
    assert ev[0] == -1j and ev[1] == 1j


def test_eigenvalues_rejects_non_square():
    with pytest.raises(DimensionError):
        numlin.eigenvalues(np.ones((2, 3)))


def test_eigenvalues_rejects_nan():
    with pytest.raises(ValidationError):
        numlin.eigenvalues([[np.nan, 0], [0, 1]])


def test_eigenvalues_permutation_similarity(rng):
    M = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    P = np.eye(12)[rng.permutation(12)]
    assert numlin.multiset_deviation(numlin.eigenvalues(M),
                                     numlin.eigenvalues(P @ M @ P.T)) < 1e-9


# ---- smallest singular value ---------------------------------------------------

def test_smin_identity():
    assert numlin.smallest_singular_value(np.eye(2)) == pytest.approx(1.0)


def test_smin_rank_deficient():
    assert numlin.smallest_singular_value([[1, 1], [1, 1]]) == pytest.approx(0.0, abs=1e-15)


def test_smin_antidiagonal():
    assert numlin.smallest_singular_value([[0, 1], [8, 0]]) == pytest.approx(1.0, abs=1e-14)


def test_smin_matches_hermitian_path(rng):
    for _ in range(10):
        M = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
        assert abs(numlin.smallest_singular_value(M) - oracles.smin_hermitian(M)) < 1e-8


# ---- resolvent norm -------------------------------------------------------------

def test_resolvent_scalar():
    assert numlin.resolvent_norm([[0]], 2) == pytest.approx(0.5)


def test_resolvent_selfadjoint():
    assert numlin.resolvent_norm(np.diag([1.0, 4.0]), 2) == pytest.approx(1.0)


def test_resolvent_delay_block_matches_closed_form():
    lam = 5j
    svd = numlin.resolvent_norm([[0, 1], [8, 0]], lam)
    closed = blockops.delay_block_norm_closed(8.0, lam)
    assert abs(svd - closed) < 1e-12


def test_resolvent_infinite_at_eigenvalue():
    assert numlin.resolvent_norm(np.diag([1.0, 2.0]), 1.0) == np.inf


def test_resolvent_times_smin_is_one(rng):
    M = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    for lam in rng.normal(size=5) + 1j * rng.normal(size=5):
        s = numlin.smallest_singular_value(M - lam * np.eye(8))
        assert numlin.resolvent_norm(M, lam) * s == pytest.approx(1.0, rel=1e-12)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=8),
       st.floats(-10, 10), st.floats(-10, 10))
def test_resolvent_real_diagonal_equals_inverse_distance(d, x, y):
    lam = complex(x, y)
    dist = min(abs(lam - v) for v in d)
    val = numlin.resolvent_norm(np.diag(d), lam)
    if dist < 1e-6:
        return
    assert val == pytest.approx(1.0 / dist, rel=1e-12)


# ---- shifted solver audit ----------------------------------------------------------

def _audit_cases():
    rng = np.random.default_rng(2024)
    cases = []
    for k in range(20):
        n = [60, 90, 120, 200][k % 4]
        kind = k % 5
        if kind == 0:
            M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        elif kind == 1:
            M = np.triu(rng.normal(size=(n, n)))
        elif kind == 2:
            M = np.diag(rng.normal(size=n)) + np.diag(np.ones(n - 1), 1) * 3
        elif kind == 3:
            M = np.diag(8.0 * np.arange(n) ** 2 / n) + np.diag(np.ones(n - 1), 1)
        else:
            A = rng.normal(size=(n, n))
            M = A + A.T
        lam = complex(rng.normal() * 2, rng.normal() * 2)
        cases.append((M, lam))
    return cases


@pytest.mark.parametrize("case", range(20))
def test_shifted_solver_agrees_with_svd(case):
    M, lam = _audit_cases()[case]
    solver = numlin.ShiftedSmin(M, method="lanczos")
    s, _ = solver.evaluate(lam)
    ref = np.linalg.svd(M - lam * np.eye(M.shape[0]), compute_uv=False)[-1]
    assert abs(s - ref) < 1e-8 * max(1.0, ref)


def test_shifted_solver_sweep_matches_pointwise(rng):
    M = rng.normal(size=(70, 70)) + 1j * rng.normal(size=(70, 70))
    lams = np.linspace(-3, 3, 9) + 0.5j
    solver = numlin.ShiftedSmin(M)
    swept = solver.sweep(lams)
    direct = [np.linalg.svd(M - z * np.eye(70), compute_uv=False)[-1] for z in lams]
    assert np.allclose(swept, direct, rtol=1e-8, atol=1e-12)


def test_shifted_solver_diagonal_path_is_exact():
    d = np.array([1.0, 4.0, -2 + 1j])
    solver = numlin.ShiftedSmin(np.diag(d))
    for z in [0, 2.5, 3j, -2 + 1.5j]:
        assert solver(z) == min(abs(d - z))


def test_multiset_deviation_size_mismatch():
    with pytest.raises(DimensionError):
        numlin.multiset_deviation([1, 2], [1])
