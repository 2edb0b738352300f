"""Banded Toeplitz operators: symbols, symbol curves, winding numbers, finite sections.

For a symbol f(z) = sum_k a_k z^k the Toeplitz matrix has entries
T[i, j] = a_{i-j}.  Its spectrum is the symbol curve f(unit circle) together
with every point around which the curve winds a nonzero number of times.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.linalg as sla
from scipy import ndimage
from scipy.spatial import cKDTree

from . import numlin
from .geometry import polyline_distance
from .errors import OnCurveError, ResolutionError, ValidationError
from .pseudo import GridSpec

MIN_SAMPLES = 64
# refinement stops here; points still unresolved are treated as on the curve
MAX_SAMPLES = 1 << 18
ON_CURVE_FACTOR = 2.0


@dataclass(frozen=True)
class ToeplitzSymbol:
    """Finitely supported Laurent coefficients ``{k: a_k}``."""

    coeffs: Mapping[int, complex]

    def __post_init__(self):
        if not self.coeffs:
            raise ValidationError("symbol needs at least one coefficient")
        clean = {}
        for k, v in self.coeffs.items():
            if int(k) != k:
                raise ValidationError(f"offset {k!r} is not an integer")
            c = complex(v)
            if not (np.isfinite(c.real) and np.isfinite(c.imag)):
                raise ValidationError(f"coefficient a_{k} is not finite")
            clean[int(k)] = c
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))

    def __call__(self, z):
        z = np.asarray(z, dtype=np.complex128)
        out = np.zeros_like(z)
        for k, c in self.coeffs.items():
            out = out + c * z**k
        return out

    def scaled(self, c: complex) -> "ToeplitzSymbol":
        return ToeplitzSymbol({k: c * v for k, v in self.coeffs.items()})

    def reflected(self) -> "ToeplitzSymbol":
        """Symbol of f(1/z): the same curve traversed in reverse."""
        return ToeplitzSymbol({-k: v for k, v in self.coeffs.items()})

    def to_json(self) -> dict:
        return {"coeffs": {str(k): [v.real, v.imag] for k, v in self.coeffs.items()}}

    @classmethod
    def from_json(cls, obj) -> "ToeplitzSymbol":
        if isinstance(obj, str):
            obj = json.loads(obj)
        try:
            raw = obj["coeffs"]
            coeffs = {}
            for k, v in raw.items():
                if isinstance(v, (list, tuple)):
                    if len(v) != 2:
                        raise ValidationError(f"coefficient {k} must be [re, im]")
                    coeffs[int(k)] = complex(float(v[0]), float(v[1]))
                else:
                    coeffs[int(k)] = complex(float(v))
        except (KeyError, TypeError, AttributeError) as exc:
            raise ValidationError(f"malformed symbol JSON: {exc}") from None
        except ValueError as exc:
            raise ValidationError(f"malformed symbol JSON: {exc}") from None
        return cls(coeffs)


def fish_symbol() -> ToeplitzSymbol:
    """The shipped banded example with a_{-3..3} = (-7, 8, -1, 0, 0, 15, 5)."""
    return ToeplitzSymbol({-3: -7, -2: 8, -1: -1, 2: 15, 3: 5})


@dataclass(frozen=True)
class PerturbationSpec:
    """Sparse additive perturbation with 1-based ``(i, j) -> value`` entries."""

    entries: Mapping[tuple[int, int], complex] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (i, j), v in self.entries.items():
            if int(i) != i or int(j) != j or i < 1 or j < 1:
                raise ValidationError(f"perturbation index {(i, j)} must be positive integers")
            clean[(int(i), int(j))] = complex(v)
        object.__setattr__(self, "entries", clean)

    @property
    def support(self) -> list[int]:
        """Sorted 1-based indices touched by any entry (rows and columns)."""
        idx = set()
        for i, j in self.entries:
            idx.update((i, j))
        return sorted(idx)

    def to_json(self) -> dict:
        return {"entries": [[i, j, [v.real, v.imag]] for (i, j), v in self.entries.items()]}

    @classmethod
    def from_json(cls, obj) -> "PerturbationSpec":
        if "diagonal" in obj:
            d = obj["diagonal"]
            return diagonal_bump(int(d.get("count", 10)), complex(d.get("value", 20)))
        out = {}
        for item in obj.get("entries", []):
            i, j, v = item
            out[(int(i), int(j))] = complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)
        return cls(out)


def diagonal_bump(count: int = 10, value: complex = 20) -> PerturbationSpec:
    """``value`` on the first ``count`` diagonal entries (rank ``count``)."""
    return PerturbationSpec({(i, i): value for i in range(1, count + 1)})


def finite_section(sym: ToeplitzSymbol, n: int) -> np.ndarray:
    """n x n matrix with entry (i, j) = a_{i-j}."""
    if int(n) != n or n < 1:
        raise ValidationError(f"section size must be >= 1, got {n}")
    n = int(n)
    col = np.zeros(n, dtype=np.complex128)
    row = np.zeros(n, dtype=np.complex128)
    for k, c in sym.coeffs.items():
        if 0 <= k < n:
            col[k] = c
        if -n < k <= 0:
            row[-k] = c
    return sla.toeplitz(col, row)


def apply_perturbation(M, S: PerturbationSpec) -> np.ndarray:
    """M + P_n S P_n: entries outside the matrix are dropped."""
    A = numlin.as_matrix(M).copy()
    n = A.shape[0]
    for (i, j), v in S.entries.items():
        if i <= n and j <= n:
            A[i - 1, j - 1] += v
    return A


def perturbed_section(sym: ToeplitzSymbol, S: PerturbationSpec, n: int) -> np.ndarray:
    return apply_perturbation(finite_section(sym, n), S)


@dataclass(frozen=True)
class SymbolCurve:
    """f sampled at m equally spaced angles; the closing segment is implicit."""

    samples: np.ndarray
    symbol: ToeplitzSymbol | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128).ravel()
        if s.size < MIN_SAMPLES:
            raise ValidationError(f"symbol curve needs >= {MIN_SAMPLES} samples, got {s.size}")
        object.__setattr__(self, "samples", s)

    @property
    def m(self) -> int:
        return self.samples.size

    def reversed(self) -> "SymbolCurve":
        sym = self.symbol.reflected() if self.symbol is not None else None
        return SymbolCurve(np.roll(self.samples[::-1], 1), sym)

    def refined(self) -> "SymbolCurve | None":
        if self.symbol is None:
            return None
        return symbol_curve(self.symbol, 2 * self.m)

    def closed(self) -> np.ndarray:
        return np.append(self.samples, self.samples[0])

    def bbox(self) -> tuple[float, float, float, float]:
        s = self.samples
        return float(s.real.min()), float(s.real.max()), float(s.imag.min()), float(s.imag.max())

    def distance(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Distance from each point to the closed polyline, and the length of the nearest segment."""
        return polyline_distance(points, self.samples, closed=True)


def symbol_curve(sym: ToeplitzSymbol, m: int = 1024) -> SymbolCurve:
    """Samples f(exp(2 pi i t / m)), t = 0..m-1."""
    if int(m) != m or m < MIN_SAMPLES:
        raise ValidationError(f"symbol curve needs m >= {MIN_SAMPLES}, got {m}")
    t = np.arange(int(m))
    return SymbolCurve(sym(np.exp(2j * np.pi * t / m)), sym)


def _raw_winding(samples: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Sum of principal-branch argument increments, in turns, for each point."""
    out = np.empty(points.size, dtype=np.int64)
    nxt = np.roll(samples, -1)
    step = max(1, 2_000_000 // samples.size)
    for lo in range(0, points.size, step):
        z = points[lo:lo + step, None]
        turns = np.angle((nxt - z) / (samples - z)).sum(axis=1) / (2 * np.pi)
        out[lo:lo + step] = np.rint(turns).astype(np.int64)
    return out


def _resolved(curve: SymbolCurve, z: complex) -> tuple[bool, float, float]:
    d, seg = curve.distance([z])
    tol = ON_CURVE_FACTOR * float(seg[0])
    return bool(d[0] > tol), float(d[0]), tol


def winding_number(curve: SymbolCurve, lam) -> int:
    """Signed number of turns of ``curve`` around ``lam``.

    When the curve carries its symbol, sampling is doubled until two
    consecutive resolutions agree.  Raises OnCurveError when ``lam`` stays
    within twice the local sample spacing of the curve.
    """
    z = numlin.as_point(lam)
    prev = None
    cur: SymbolCurve | None = curve
    last = (False, np.inf, 0.0)
    while cur is not None and cur.m <= MAX_SAMPLES:
        last = _resolved(cur, z)
        if last[0]:
            w = int(_raw_winding(cur.samples, np.array([z]))[0])
            if prev is not None and w == prev:
                return w
            if cur.symbol is None:
                return w
            prev = w
        else:
            prev = None
        cur = cur.refined()
    raise OnCurveError(z, last[1], last[2])


@dataclass(frozen=True)
class SpectrumClass:
    kind: str  # "OnCurve" | "InteriorSpectrum" | "Resolvent"
    winding: int | None = None

    @property
    def in_spectrum(self) -> bool:
        return self.kind != "Resolvent"


def spectrum_classify(sym: ToeplitzSymbol, lam, *, m: int = 1024) -> SpectrumClass:
    """Place ``lam`` relative to the spectrum of the Toeplitz operator of ``sym``."""
    try:
        w = winding_number(symbol_curve(sym, m), lam)
    except OnCurveError:
        return SpectrumClass("OnCurve")
    return SpectrumClass("Resolvent", 0) if w == 0 else SpectrumClass("InteriorSpectrum", w)


@dataclass
class Component:
    label: int
    winding: int
    representative: complex
    size: int
    bounded: bool
    clearance: float


@dataclass
class ComponentMap:
    """Connected components of the grid nodes off the symbol curve."""

    grid: GridSpec
    labels: np.ndarray  # (ny, nx); 0 marks nodes too close to the curve
    components: list[Component]

    def by_winding(self) -> dict[int, list[complex]]:
        out: dict[int, list[complex]] = {}
        for c in self.components:
            out.setdefault(c.winding, []).append(c.representative)
        return out

    def component_of(self, points) -> np.ndarray:
        """Label of the grid node nearest to each point (0 off-grid or on the barrier)."""
        z = np.atleast_1d(np.asarray(points, dtype=np.complex128))
        g = self.grid
        i = np.rint((z.real - g.x0) / g.hx).astype(int)
        j = np.rint((z.imag - g.y0) / g.hy).astype(int)
        ok = (i >= 0) & (i < g.nx) & (j >= 0) & (j < g.ny)
        out = np.zeros(z.size, dtype=int)
        out[ok] = self.labels[j[ok], i[ok]]
        return out

    def get(self, label: int) -> Component:
        return self.components[label - 1]


def component_probe(curve: SymbolCurve, grid: GridSpec, *, min_size: int = 1) -> ComponentMap:
    """Split the grid into connected regions of constant winding number.

    Nodes within one cell diagonal of the curve form a barrier, so no
    4-connected path of remaining nodes can cross the curve.  Each component
    is represented by its node farthest from the curve; the component touching
    the grid border is the unbounded one.
    """
    x0, x1, y0, y1 = curve.bbox()
    if not (grid.x0 < x0 and grid.x1 > x1 and grid.y0 < y0 and grid.y1 > y1):
        raise ValidationError("grid must cover the symbol curve's bounding box with margin")
    dense = curve
    while dense.symbol is not None and dense.m < 8 * max(grid.nx, grid.ny):
        dense = dense.refined()
    pts = dense.closed()
    # pad segments so tree distances are accurate to a small fraction of a cell
    steps = np.abs(np.diff(pts))
    sub = max(1, int(np.ceil(steps.max() / (0.1 * min(grid.hx, grid.hy)))))
    t = np.linspace(0, 1, sub, endpoint=False)
    fine = (pts[:-1, None] + t * (pts[1:] - pts[:-1])[:, None]).ravel()
    tree = cKDTree(np.c_[fine.real, fine.imag])
    nodes = grid.nodes()
    dist = tree.query(np.c_[nodes.real.ravel(), nodes.imag.ravel()])[0].reshape(nodes.shape)
    free = dist > grid.cell
    labels, count = ndimage.label(free)
    if count == 0:
        raise ResolutionError("grid too coarse: every node lies next to the curve")
    comps = []
    keep = np.zeros(count + 1, dtype=bool)
    idx = np.arange(count + 1)
    sizes = ndimage.sum(np.ones_like(labels), labels, idx)
    far = ndimage.maximum_position(dist, labels, idx[1:])
    border = set(np.unique(np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])))
    relabel = np.zeros(count + 1, dtype=int)
    for lab in range(1, count + 1):
        if sizes[lab] < min_size:
            continue
        j, i = far[lab - 1]
        rep = complex(nodes[j, i])
        w = winding_number(dense, rep)
        # a second node confirms the component did not leak across the curve
        members = np.argwhere(labels == lab)
        jj, ii = members[len(members) // 2]
        if dist[jj, ii] > 2 * grid.cell and winding_number(dense, nodes[jj, ii]) != w:
            raise ResolutionError("grid too coarse to separate the curve's components")
        keep[lab] = True
        relabel[lab] = len(comps) + 1
        comps.append(Component(len(comps) + 1, w, rep, int(sizes[lab]), lab not in border,
                               float(dist[j, i])))
    return ComponentMap(grid, relabel[labels], comps)


def perturbation_certificate(sym: ToeplitzSymbol, S: PerturbationSpec, lam, n: int) -> float:
    """sigma_min(I + S_JJ G_JJ) with G = (T_n - lam)^{-1} and J the support of S.

    det(T_n + S - lam) = det(T_n - lam) det(I + S_JJ G_JJ), so at a winding-0
    point (where the sections T_n - lam are uniformly invertible) a value
    near zero for large n certifies an eigenvalue of the perturbed operator.
    """
    z = numlin.as_point(lam)
    J = [j for j in S.support if j <= n]
    if not J:
        return 1.0
    T = finite_section(sym, n) - z * np.eye(n)
    E = np.zeros((n, len(J)), dtype=np.complex128)
    E[np.array(J) - 1, np.arange(len(J))] = 1.0
    G = sla.solve(T, E)[np.array(J) - 1]
    pos = {j: a for a, j in enumerate(J)}
    SJ = np.zeros((len(J), len(J)), dtype=np.complex128)
    for (i, j), v in S.entries.items():
        if i <= n and j <= n:
            SJ[pos[i], pos[j]] += v
    return float(sla.svdvals(np.eye(len(J)) + SJ @ G)[-1])
