"""Dense complex linear-algebra kernel.

Matrices are plain ``numpy`` arrays of dtype ``complex128``; points in the
complex plane are Python ``complex`` numbers.  Everything here is a pure
function of its inputs.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.linalg.blas import ztrsv

from .errors import DimensionError, ValidationError

MACH_EPS = float(np.finfo(float).eps)
SINGULAR_FACTOR = 1e3

# Below this dimension a full SVD per shift is cheaper than Schur + Lanczos.
_SMALL_DIM = 48
_LANCZOS_RTOL = 1e-14
_LANCZOS_MAXIT = 120


def as_matrix(M, *, square: bool = True) -> np.ndarray:
    """Validate ``M`` and return it as a C-contiguous complex128 array."""
    A = np.asarray(M)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D matrix, got shape {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    A = np.ascontiguousarray(A, dtype=np.complex128)
    if not np.all(np.isfinite(A)):
        raise ValidationError("matrix has non-finite entries")
    return A


def as_point(lam) -> complex:
    z = complex(lam)
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise ValidationError(f"non-finite point {lam!r}")
    return z


def singular_threshold(frobenius_norm: float) -> float:
    return SINGULAR_FACTOR * MACH_EPS * frobenius_norm


def sort_points(points) -> np.ndarray:
    """Canonical ordering: ascending real part, ties broken by imaginary part."""
    z = np.asarray(points, dtype=np.complex128).ravel()
    return z[np.lexsort((z.imag, z.real))]


def eigenvalues(M) -> np.ndarray:
    """All eigenvalues of ``M`` with multiplicity, sorted by (re, im)."""
    A = as_matrix(M)
    return sort_points(np.linalg.eigvals(A))


def smallest_singular_value(M) -> float:
    """sigma_min(M), reported as exactly 0.0 when M is numerically singular."""
    A = as_matrix(M)
    s = float(sla.svdvals(A, check_finite=False)[-1])
    if s < singular_threshold(float(np.linalg.norm(A))):
        return 0.0
    return s


def resolvent_norm(M, lam) -> float:
    """||(M - lam)^{-1}||_2, or ``inf`` when M - lam is numerically singular."""
    A = as_matrix(M)
    z = as_point(lam)
    s = smallest_singular_value(A - z * np.eye(A.shape[0]))
    return np.inf if s == 0.0 else 1.0 / s


class ShiftedSmin:
    """Evaluate sigma_min(M - lam) for many shifts ``lam``.

    One complex Schur factorisation M = Q U Q* is computed up front; each
    shift then costs two triangular solves per inverse-Lanczos step on
    (U - lam)^{-*} (U - lam)^{-1}.  Small matrices use a direct SVD instead,
    and diagonal matrices the exact distance to their diagonal.

    Instances keep a private work copy of U and are therefore not safe to
    share between threads; use :meth:`copy` to get one per worker.
    """

    def __init__(self, M, *, method: str = "auto"):
        A = as_matrix(M)
        self.dim = A.shape[0]
        if method == "auto":
            if np.count_nonzero(A - np.diag(np.diag(A))) == 0:
                method = "diagonal"
            else:
                method = "svd" if self.dim <= _SMALL_DIM else "lanczos"
        if method not in ("svd", "lanczos", "diagonal"):
            raise ValidationError(f"unknown sigma_min method {method!r}")
        self.method = method
        self._A = A
        self._fro2 = float(np.vdot(A, A).real)
        self._trace = complex(np.trace(A))
        if method == "diagonal":
            if np.count_nonzero(A - np.diag(np.diag(A))):
                raise ValidationError("method 'diagonal' needs a diagonal matrix")
            self._diag = np.diag(A).copy()
        if method == "lanczos":
            U, _ = sla.schur(A, output="complex")
            self._U = np.asfortranarray(U)
            self._diag = np.diag(U).copy()
            rng = np.random.default_rng(20150417)
            q0 = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
            self._q0 = q0 / np.linalg.norm(q0)

    def copy(self) -> "ShiftedSmin":
        other = object.__new__(ShiftedSmin)
        other.__dict__.update(self.__dict__)
        if self.method == "lanczos":
            other._U = np.array(self._U, order="F")
        return other

    def _threshold(self, lam: complex) -> float:
        fro2 = self._fro2 - 2.0 * (np.conj(lam) * self._trace).real + self.dim * abs(lam) ** 2
        return singular_threshold(float(np.sqrt(max(fro2, 0.0))))

    def __call__(self, lam) -> float:
        return self.evaluate(lam)[0]

    def resolvent_norm(self, lam) -> float:
        s = self(lam)
        return np.inf if s == 0.0 else 1.0 / s

    def evaluate(self, lam, start=None):
        """Return ``(sigma_min, ritz_vector)`` for one shift.

        ``start`` is an optional Lanczos starting vector, typically the Ritz
        vector returned for a nearby shift.  The vector is ``None`` for the
        SVD path and for numerically singular shifts.
        """
        z = complex(lam)
        thresh = self._threshold(z)
        if self.method == "svd":
            s = float(sla.svdvals(self._A - z * np.eye(self.dim), check_finite=False)[-1])
            vec = None
        elif self.method == "diagonal":
            # normal matrix: sigma_min is the distance to the spectrum
            s = float(np.min(np.abs(self._diag - z)))
            vec = None
        elif np.min(np.abs(self._diag - z)) <= thresh:
            return 0.0, None
        else:
            s, vec = self._lanczos(z, start)
        return (0.0 if s < thresh else s), vec

    def sweep(self, lams) -> np.ndarray:
        """sigma_min(M - lam) along a path of shifts.

        Each Lanczos run is warm-started from the previous shift's Ritz
        vector.  The chain always starts from the same fixed vector, so the
        output depends only on ``lams``.
        """
        zs = np.asarray(lams, dtype=np.complex128).ravel()
        out = np.empty(zs.size)
        q = None
        for i, z in enumerate(zs):
            out[i], vec = self.evaluate(z, q)
            if vec is not None:
                q = vec
        return out

    def _lanczos(self, z: complex, start):
        n = self.dim
        U = self._U
        idx = np.diag_indices(n)
        U[idx] = self._diag - z
        try:
            res = _inverse_lanczos(U, self._q0 if start is None else start)
        finally:
            U[idx] = self._diag
        if res is None:
            # no convergence (or overflow next to an eigenvalue): dense fallback
            return float(sla.svdvals(self._A - z * np.eye(n), check_finite=False)[-1]), None
        return res


def _inverse_lanczos(T: np.ndarray, q0: np.ndarray):
    """Largest eigenpair of (T T*)^{-1} for upper-triangular T.

    Returns ``(sigma_min(T), ritz_vector)`` or ``None`` without convergence.
    """
    n = T.shape[0]
    maxit = min(n, _LANCZOS_MAXIT)
    Q = np.empty((maxit, n), dtype=np.complex128)
    H = np.zeros((maxit + 1, maxit + 1))
    q = q0 / np.linalg.norm(q0)
    q_prev = None
    beta = 0.0
    ritz_prev = 0.0
    for k in range(maxit):
        Q[k] = q
        w = ztrsv(T, q)
        w = ztrsv(T, w, trans=2)
        if q_prev is not None:
            w -= beta * q_prev
        alpha = float(np.vdot(q, w).real)
        w -= alpha * q
        beta = float(np.linalg.norm(w))
        H[k, k] = alpha
        vals, vecs = np.linalg.eigh(H[: k + 1, : k + 1])
        ritz = float(vals[-1])
        if not np.isfinite(ritz) or ritz <= 0.0:
            return None
        if beta <= _LANCZOS_RTOL * ritz or abs(ritz - ritz_prev) <= _LANCZOS_RTOL * ritz:
            return 1.0 / np.sqrt(ritz), vecs[:, -1] @ Q[: k + 1]
        ritz_prev = ritz
        H[k, k + 1] = H[k + 1, k] = beta
        q_prev, q = q, w / beta
    return None


def multiset_deviation(a, b) -> float:
    """Largest pairing error under the optimal one-to-one matching of two equal-size point sets."""
    from scipy.optimize import linear_sum_assignment

    x = np.asarray(a, dtype=np.complex128).ravel()
    y = np.asarray(b, dtype=np.complex128).ravel()
    if x.size != y.size:
        raise DimensionError(f"multisets differ in size: {x.size} vs {y.size}")
    if x.size == 0:
        return 0.0
    cost = np.abs(x[:, None] - y[None, :])
    # minimise the largest pairing distance via squared costs (dominated by the worst pair)
    rows, cols = linear_sum_assignment(cost ** 2)
    return float(cost[rows, cols].max())
