"""Block-diagonally dominant operators A = diag(T_k) + S with superdiagonal couplings.

Truncations keep a window of consecutive blocks.  Limit sets of the
truncation family are estimated from the tail behaviour of the diagonal
block resolvent norms ||(T_k - lam)^{-1}||.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla

from . import numlin
from .errors import OutOfRegionError, SingularBlockError, ValidationError
from .pseudo import GridSpec

NATURAL = "NaturalIndexed"
INTEGER = "IntegerIndexed"
GOLDEN = (1 + np.sqrt(5)) / 2


@dataclass(frozen=True)
class BlockSequenceSpec:
    """Generator of diagonal blocks T_k and couplings S_k (placed at block (k, k+1))."""

    index_kind: str
    block: Callable[[int], np.ndarray]
    coupling: Callable[[int], np.ndarray] | None = None
    description: str = ""
    # vectorized tail norms: lam grid, array of k -> norms (optional fast path)
    block_norms: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(
        default=None, compare=False, repr=False)
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.index_kind not in (NATURAL, INTEGER):
            raise ValidationError(f"unknown index kind {self.index_kind!r}")

    def indices(self, n: int) -> range:
        if int(n) != n or n < 1:
            raise ValidationError(f"truncation parameter must be >= 1, got {n}")
        n = int(n)
        return range(1, n + 1) if self.index_kind == NATURAL else range(-n, n)

    def T(self, k: int) -> np.ndarray:
        B = np.atleast_2d(np.asarray(self.block(k), dtype=np.complex128))
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise ValidationError(f"block T_{k} is not square: shape {B.shape}")
        if not np.all(np.isfinite(B)):
            raise ValidationError(f"block T_{k} has non-finite entries")
        return B

    def S(self, k: int, rows: int, cols: int) -> np.ndarray:
        if self.coupling is None:
            return np.zeros((rows, cols), dtype=np.complex128)
        C = np.atleast_2d(np.asarray(self.coupling(k), dtype=np.complex128))
        if C.shape != (rows, cols):
            raise ValidationError(f"coupling S_{k} has shape {C.shape}, expected {(rows, cols)}")
        if not np.all(np.isfinite(C)):
            raise ValidationError(f"coupling S_{k} has non-finite entries")
        return C


def assemble(spec: BlockSequenceSpec, n: int) -> np.ndarray:
    """Truncation over the block window (1..n or -n..n-1)."""
    ks = list(spec.indices(n))
    blocks = [spec.T(k) for k in ks]
    sizes = [b.shape[0] for b in blocks]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    M = np.zeros((offs[-1], offs[-1]), dtype=np.complex128)
    for a, (k, B) in enumerate(zip(ks, blocks)):
        M[offs[a]:offs[a + 1], offs[a]:offs[a + 1]] = B
        if a + 1 < len(ks):
            M[offs[a]:offs[a + 1], offs[a + 1]:offs[a + 2]] = spec.S(k, sizes[a], sizes[a + 1])
    return M


def block_resolvent_norm(spec: BlockSequenceSpec, k: int, lam) -> float:
    """||(T_k - lam)^{-1}|| by SVD of the block."""
    B = spec.T(k)
    z = numlin.as_point(lam)
    s = numlin.smallest_singular_value(B - z * np.eye(B.shape[0]))
    if s == 0.0:
        raise SingularBlockError(f"lam = {z} is an eigenvalue of block T_{k}")
    return 1.0 / s


def two_by_two_norms(a, b, c, d, lam) -> np.ndarray:
    """||([[a, b], [c, d]] - lam)^{-1}|| elementwise, by the 2x2 singular value formula.

    With F the Frobenius norm and D the determinant of B = T - lam,
    sigma_max^2 = (F^2 + sqrt(F^4 - 4|D|^2)) / 2 and sigma_min = |D| / sigma_max.
    """
    p, q, r, s = a - lam, b, c, d - lam
    F2 = abs(p) ** 2 + abs(q) ** 2 + abs(r) ** 2 + abs(s) ** 2
    D = np.abs(p * s - q * r)
    smax = np.sqrt(0.5 * (F2 + np.sqrt(np.maximum(F2 ** 2 - 4 * D ** 2, 0.0))))
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(D == 0, np.inf, smax / D)


def delay_block_norm_closed(a_j: float, lam) -> float:
    """||(T_j - lam)^{-1}|| for T_j = [[0, 1], [a_j, 0]] via ||[[lam, 1], [a_j, lam]]|| / |a_j - lam^2|."""
    z = complex(lam)
    den = abs(a_j - z * z)
    if den == 0:
        raise SingularBlockError(f"lam = {z} is an eigenvalue of the block with a = {a_j}")
    return float(np.linalg.norm(np.array([[z, 1], [a_j, z]]), 2) / den)


# ---- shipped families ---------------------------------------------------------

def delay_spec(scale: float = 8.0) -> BlockSequenceSpec:
    """Neutral delay example: T_j = [[0, 1], [scale j^2, 0]], S_j = [[0, 0], [1, 0]], j in Z."""

    def block(j):
        return np.array([[0, 1], [scale * j * j, 0]], dtype=np.complex128)

    def coupling(j):
        return np.array([[0, 0], [1, 0]], dtype=np.complex128)

    def norms(lam, ks):
        a = scale * np.asarray(ks, dtype=float) ** 2
        return two_by_two_norms(0, 1, a, 0, lam)

    return BlockSequenceSpec(INTEGER, block, coupling,
                             f"neutral delay blocks [[0,1],[{scale} j^2,0]], couplings [[0,0],[1,0]]",
                             norms, {"builtin": "delay", "scale": scale})


def example1_spec(d: float = 2.0, a_scale: float = 8.0) -> BlockSequenceSpec:
    """Upper-triangular 2x2 blocks with a divergent and a convergent diagonal.

    T_k = [[a_k, b_{2k-1}], [0, d_k]] and S_k = [[0, 0], [c_{2k}, 0]] with
    a_j = a_scale j^2, b_j = 1 + 1/j, c_j = 1/j, d_j = d + 1/j (k >= 1).
    Essential spectrum {d}; eps-near limit set is the circle |lam - d| = eps.
    """

    def a(j):
        return a_scale * j * j

    def b(j):
        return 1 + 1 / j

    def c(j):
        return 1 / j

    def dd(j):
        return d + 1 / j

    def block(k):
        return np.array([[a(k), b(2 * k - 1)], [0, dd(k)]], dtype=np.complex128)

    def coupling(k):
        return np.array([[0, 0], [c(2 * k), 0]], dtype=np.complex128)

    def norms(lam, ks):
        k = np.asarray(ks, dtype=float)
        return two_by_two_norms(a(k), b(2 * k - 1), 0, dd(k), lam)

    return BlockSequenceSpec(NATURAL, block, coupling,
                             f"upper-triangular blocks with a_j = {a_scale} j^2, b_j = 1 + 1/j, "
                             f"c_j = 1/j, d_j = {d} + 1/j",
                             norms, {"builtin": "example1", "d": d, "a_scale": a_scale})


def diagonal_spec(value: complex, index_kind: str = NATURAL) -> BlockSequenceSpec:
    """Constant scalar blocks T_k = [value], no coupling."""
    v = complex(value)

    def norms(lam, ks):
        with np.errstate(divide="ignore"):
            r = 1.0 / np.abs(v - lam)
        return np.broadcast_to(r, np.broadcast(lam, np.asarray(ks)).shape)

    return BlockSequenceSpec(index_kind, lambda k: np.array([[v]]), None,
                             f"constant blocks [{v}]", norms, {"value": v})


def table_spec(blocks: dict[int, np.ndarray], couplings: dict[int, np.ndarray] | None = None,
               index_kind: str = NATURAL, tail: str = "repeat-last") -> BlockSequenceSpec:
    """Finitely many tabulated blocks; indices beyond the table repeat the last one."""
    if tail != "repeat-last":
        raise ValidationError(f"tail rule {tail!r} is not supported; use 'repeat-last'")
    if not blocks:
        raise ValidationError("block table is empty")
    keys = sorted(blocks)
    couplings = couplings or {}
    ckeys = sorted(couplings)

    def pick(table, ks, k):
        if k in table:
            return table[k]
        if k > ks[-1]:
            return table[ks[-1]]
        if k < ks[0]:
            return table[ks[0]]
        raise ValidationError(f"no block for index {k} inside the table range")

    def block(k):
        return pick(blocks, keys, k)

    coupling = None
    if couplings:
        def coupling(k):
            return pick(couplings, ckeys, k)

    return BlockSequenceSpec(index_kind, block, coupling, "tabulated blocks (tail repeats last)")


def spec_from_json(obj) -> BlockSequenceSpec:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if "builtin" in obj:
        name = obj["builtin"]
        if name == "delay":
            return delay_spec(float(obj.get("scale", 8.0)))
        if name == "example1":
            return example1_spec(float(obj.get("d", 2.0)), float(obj.get("a_scale", 8.0)))
        raise ValidationError(f"unknown builtin block family {name!r}")

    def mat(v):
        A = np.asarray(v, dtype=float)
        if A.ndim == 3 and A.shape[-1] == 2:
            return A[..., 0] + 1j * A[..., 1]
        return A.astype(np.complex128)

    try:
        blocks = {int(k): mat(v) for k, v in obj["blocks"].items()}
        couplings = {int(k): mat(v) for k, v in obj.get("couplings", {}).items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed block spec JSON: {exc}") from None
    kind = obj.get("index_kind", NATURAL)
    return table_spec(blocks, couplings, kind, obj.get("tail", "repeat-last"))


# ---- limit-set estimators ----------------------------------------------------

@dataclass
class LimitSetEstimate:
    grid: GridSpec
    kind: str  # "EssentialSpectrum" | "EpsNearSpectrum"
    flagged: np.ndarray
    K_blocks: int
    tolerance: float
    eps: float | None = None

    def __post_init__(self):
        self.flagged = np.asarray(self.flagged, dtype=bool)
        if self.flagged.shape != (self.grid.ny, self.grid.nx):
            raise ValidationError("flag mask does not match the grid")
        if not self.tolerance > 0:
            raise ValidationError("tolerance must be positive")

    def points(self) -> np.ndarray:
        return self.grid.nodes()[self.flagged]


def _tail_indices(spec: BlockSequenceSpec, K_blocks: int) -> np.ndarray:
    if int(K_blocks) != K_blocks or K_blocks < 16:
        raise ValidationError(f"K_blocks must be an integer >= 16, got {K_blocks}")
    K = int(K_blocks)
    pos = np.arange(K // 2, K + 1)
    if spec.index_kind == INTEGER:
        return np.concatenate([-pos[::-1], pos])
    return pos


def tail_norms(spec: BlockSequenceSpec, lam: np.ndarray, ks: np.ndarray) -> np.ndarray:
    """Block resolvent norms, shape lam.shape + (len(ks),); +inf where a block is singular."""
    lam = np.asarray(lam, dtype=np.complex128)
    if spec.block_norms is not None:
        return np.asarray(spec.block_norms(lam[..., None], ks), dtype=float)
    out = np.empty(lam.shape + (ks.size,))
    flat = out.reshape(-1, ks.size)
    for c, k in enumerate(ks):
        B = spec.T(int(k))
        m = B.shape[0]
        for idx, z in enumerate(lam.ravel()):
            s = sla.svdvals(B - z * np.eye(m))[-1]
            thr = numlin.singular_threshold(np.linalg.norm(B - z * np.eye(m)))
            flat[idx, c] = np.inf if s < thr else 1.0 / s
    return out


def essential_limit_estimate(spec: BlockSequenceSpec, grid: GridSpec, K_blocks: int = 2000,
                             threshold: float = 1e3) -> LimitSetEstimate:
    """Flag nodes where the tail block resolvent norms reach ``threshold``.

    Surrogate for ||(T_n - lam)^{-1}|| -> infinity along a subsequence: the
    supremum over |k| in [K_blocks/2, K_blocks] is compared with ``threshold``.
    """
    if not threshold > 0:
        raise ValidationError("threshold must be positive")
    ks = _tail_indices(spec, K_blocks)
    nodes = grid.nodes()
    flags = np.empty(nodes.shape, dtype=bool)
    for j in range(grid.ny):
        flags[j] = tail_norms(spec, nodes[j], ks).max(axis=-1) >= threshold
    return LimitSetEstimate(grid, "EssentialSpectrum", flags, int(K_blocks), float(threshold))


def eps_near_limit_estimate(spec: BlockSequenceSpec, grid: GridSpec, eps: float,
                            K_blocks: int = 2000, tol: float | None = None) -> LimitSetEstimate:
    """Flag nodes where a tail subsequence of block norms clusters at 1/eps.

    A node is flagged when at least max(3, len/8) tail values lie within
    ``tol`` of 1/eps and their spread is below ``tol``.  Default tol is 0.05/eps.
    """
    eps = float(eps)
    if not (eps > 0 and np.isfinite(eps)):
        raise ValidationError("eps must be positive")
    tol = 0.05 / eps if tol is None else float(tol)
    if not tol > 0:
        raise ValidationError("tol must be positive")
    ks = _tail_indices(spec, K_blocks)
    need = max(3, ks.size // 8)
    target = 1.0 / eps
    nodes = grid.nodes()
    flags = np.empty(nodes.shape, dtype=bool)
    for j in range(grid.ny):
        v = tail_norms(spec, nodes[j], ks)
        hit = np.abs(v - target) <= tol
        count = hit.sum(axis=-1)
        hv = np.where(hit, v, np.nan)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            spread = np.nanmax(hv, axis=-1) - np.nanmin(hv, axis=-1)
        flags[j] = (count >= need) & (np.nan_to_num(spread, nan=np.inf) < tol)
    return LimitSetEstimate(grid, "EpsNearSpectrum", flags, int(K_blocks), tol, eps)


# ---- delay example oracles ----------------------------------------------------

def delay_spectrum_oracle(n: int, scale: float = 8.0) -> np.ndarray:
    """{+-sqrt(scale) |j| : j = -n..n-1} as a sorted multiset."""
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    j = np.arange(-int(n), int(n))
    r = np.sqrt(scale) * np.abs(j)
    return numlin.sort_points(np.concatenate([r, -r]).astype(np.complex128))


def constant_norm_bound(lam) -> float:
    """Smallest modulus for which the constant-norm statement applies at arg(lam)."""
    z = numlin.as_point(lam)
    c2 = np.cos(2 * np.angle(z))
    if c2 >= 0:
        return np.inf
    return max(GOLDEN, 1.0 / abs(c2))


def constant_norm_region_check(lam, J: int = 200, scale: float = 8.0) -> float:
    """sup_{|j| <= J} ||(T_j - lam)^{-1}|| for the delay blocks.

    Requires lam = r e^{i phi} with cos(2 phi) < 0 and r >= max(golden ratio, 1/|cos 2 phi|).
    """
    z = numlin.as_point(lam)
    bound = constant_norm_bound(z)
    if not np.isfinite(bound):
        raise OutOfRegionError(f"cos(2 arg lam) >= 0 at lam = {z}")
    if abs(z) < bound:
        raise OutOfRegionError(f"|lam| = {abs(z):.6g} below the required {bound:.6g}")
    if int(J) != J or J < 0:
        raise ValidationError("J must be a non-negative integer")
    j = np.arange(-int(J), int(J) + 1)
    return float(two_by_two_norms(0, 1, scale * j.astype(float) ** 2, 0, z).max())
