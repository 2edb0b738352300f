"""Resolvent-norm fields on rectangular grids and the eps-pseudospectra they define.

A point ``lam`` belongs to the eps-pseudospectrum of ``M`` when
``||(M - lam)^{-1}|| > 1/eps`` (strict: the set is open).  On a grid the set
is represented by the nodes that satisfy the inequality; that node set is the
discrete stand-in for the closure used in Hausdorff comparisons.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Any, Sequence

import numpy as np
from skimage import measure

from . import numlin
from .errors import ValidationError


@dataclass(frozen=True)
class GridSpec:
    """Uniform lattice on [x0, x1] x [y0, y1], endpoints included."""

    x0: float
    x1: float
    y0: float
    y1: float
    nx: int = 201
    ny: int = 201

    def __post_init__(self):
        vals = (self.x0, self.x1, self.y0, self.y1)
        if not all(np.isfinite(v) for v in vals):
            raise ValidationError("grid bounds must be finite")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValidationError(f"degenerate grid rectangle {vals}")
        if int(self.nx) != self.nx or int(self.ny) != self.ny or self.nx < 2 or self.ny < 2:
            raise ValidationError(f"grid needs at least 2x2 nodes, got {self.nx}x{self.ny}")

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse ``"x0,x1,y0,y1,nx,ny"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 6:
            raise ValidationError(f"grid spec needs 6 comma-separated values, got {text!r}")
        try:
            x0, x1, y0, y1 = (float(p) for p in parts[:4])
            nx, ny = int(parts[4]), int(parts[5])
        except ValueError as exc:
            raise ValidationError(f"bad grid spec {text!r}: {exc}") from None
        return cls(x0, x1, y0, y1, nx, ny)

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x0, self.x1, self.nx)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y0, self.y1, self.ny)

    @property
    def hx(self) -> float:
        return (self.x1 - self.x0) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.y1 - self.y0) / (self.ny - 1)

    @property
    def cell(self) -> float:
        """Length of one cell diagonal."""
        return float(np.hypot(self.hx, self.hy))

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.x1 - self.x0, self.y1 - self.y0))

    def nodes(self) -> np.ndarray:
        """Complex node array of shape (ny, nx); row j has imaginary part ys[j]."""
        return self.xs[None, :] + 1j * self.ys[:, None]

    def contains(self, points) -> np.ndarray:
        z = np.asarray(points, dtype=np.complex128)
        return (z.real >= self.x0) & (z.real <= self.x1) & (z.imag >= self.y0) & (z.imag <= self.y1)

    def as_dict(self) -> dict[str, float | int]:
        return {"x0": self.x0, "x1": self.x1, "y0": self.y0, "y1": self.y1,
                "nx": self.nx, "ny": self.ny}


@dataclass
class PseudospectrumField:
    """Resolvent norms on ``grid``; ``values[j, i]`` belongs to node (xs[i], ys[j])."""

    grid: GridSpec
    values: np.ndarray
    matrix_dim: int
    meta: dict[str, Any] = dc_field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.ny, self.grid.nx):
            raise ValidationError(
                f"field shape {self.values.shape} does not match grid {(self.grid.ny, self.grid.nx)}"
            )
        if np.any(np.isnan(self.values)) or np.any(self.values < 0):
            raise ValidationError("resolvent norms must be >= 0 or +inf")


@dataclass
class ContourSet:
    eps: float
    polylines: list[np.ndarray]


def default_threads() -> int:
    env = os.environ.get("SPECLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"SPECLAB_THREADS must be an integer, got {env!r}") from None
    return 1


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not (eps > 0 and np.isfinite(eps)):
        raise ValidationError(f"eps must be a positive finite number, got {eps}")
    return eps


def field(M, grid: GridSpec, *, threads: int | None = None,
          solver: numlin.ShiftedSmin | None = None) -> PseudospectrumField:
    """Resolvent norm of ``M`` at every node of ``grid``.

    Rows are independent work items; with ``threads > 1`` they are spread
    over a thread pool and reassembled by row index, so the result does not
    depend on scheduling.
    """
    if not isinstance(grid, GridSpec):
        raise ValidationError("grid must be a GridSpec")
    A = numlin.as_matrix(M)
    base = solver if solver is not None else numlin.ShiftedSmin(A)
    nodes = grid.nodes()
    threads = default_threads() if threads is None else max(1, int(threads))

    if threads == 1:
        rows = [base.sweep(nodes[j]) for j in range(grid.ny)]
    else:
        solvers = [base.copy() for _ in range(threads)]

        def run(chunk):
            worker, js = chunk
            return [(j, solvers[worker].sweep(nodes[j])) for j in js]

        chunks = [(w, range(w, grid.ny, threads)) for w in range(threads)]
        rows = [None] * grid.ny
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(run, chunks):
                for j, row in part:
                    rows[j] = row
    smin = np.vstack(rows)
    with np.errstate(divide="ignore"):
        values = np.where(smin == 0.0, np.inf, 1.0 / smin)
    meta = {
        "quantity": "resolvent norm ||(M - lam)^-1||_2 = 1/sigma_min",
        "sentinel": "+inf where M - lam is numerically singular",
        "pseudospectrum": "open set {resnorm > 1/eps}; grid nodes discretize its closure",
        "sigma_min_method": base.method,
    }
    return PseudospectrumField(grid, values, A.shape[0], meta)


def membership(M, lam, eps: float) -> bool:
    """True iff ``lam`` lies in the (open) eps-pseudospectrum of ``M``."""
    eps = _check_eps(eps)
    return numlin.resolvent_norm(M, lam) > 1.0 / eps


def sublevel_mask(fld: PseudospectrumField, eps: float) -> np.ndarray:
    eps = _check_eps(eps)
    return fld.values > 1.0 / eps


def sublevel_points(fld: PseudospectrumField, eps: float) -> np.ndarray:
    """Grid nodes inside the eps-pseudospectrum, in row-major order."""
    return fld.grid.nodes()[sublevel_mask(fld, eps)]


def mask_points(grid: GridSpec, mask: np.ndarray) -> np.ndarray:
    return grid.nodes()[np.asarray(mask, dtype=bool)]


def certified_sublevel_masks(M, grid: GridSpec, eps_levels: Sequence[float], *,
                             solver: numlin.ShiftedSmin | None = None,
                             coarse_stride: int = 16) -> dict[float, np.ndarray]:
    """Node masks of the eps-pseudospectra without evaluating every node.

    sigma_min(M - lam) is 1-Lipschitz in ``lam``.  A node with value ``s``
    therefore fixes the side of the threshold ``eps`` for every node closer
    than ``|s - eps|``.  Nodes are visited coarse-to-fine and only those not
    yet decided are evaluated.  The result agrees with thresholding
    :func:`field` except at nodes whose sigma_min is within the solver's
    rounding error of some ``eps``.

    Returns
    -------
    dict mapping each eps to a boolean (ny, nx) mask.  Its ``evaluated``
    attribute holds the number of sigma_min evaluations.
    """
    levels = [_check_eps(e) for e in eps_levels]
    if not levels:
        return {}
    A = numlin.as_matrix(M)
    smin = solver if solver is not None else numlin.ShiftedSmin(A)
    nodes = grid.nodes()
    hx, hy = grid.hx, grid.hy
    eps_arr = np.asarray(levels)
    # status[k]: 0 undecided, 1 inside, -1 outside
    status = np.zeros((len(levels), grid.ny, grid.nx), dtype=np.int8)
    evaluated = 0

    def certify(j: int, i: int, s: float):
        radius = np.abs(s - eps_arr) * (1.0 - 1e-9) - 1e-12
        rmax = float(radius.max())
        ri, rj = int(rmax / hx), int(rmax / hy)
        j0, j1 = max(0, j - rj), min(grid.ny, j + rj + 1)
        i0, i1 = max(0, i - ri), min(grid.nx, i + ri + 1)
        dist = np.abs(nodes[j0:j1, i0:i1] - nodes[j, i])
        for k, e in enumerate(levels):
            side = 1 if s < e else -1
            block = status[k, j0:j1, i0:i1]
            block[(block == 0) & (dist < radius[k])] = side
            status[k, j, i] = side

    stride = max(1, int(coarse_stride))
    while True:
        for j in range(0, grid.ny, stride):
            q = None
            cols = list(range(0, grid.nx, stride))
            if cols[-1] != grid.nx - 1:
                cols.append(grid.nx - 1)
            for i in cols:
                if np.all(status[:, j, i] != 0):
                    continue
                s, vec = smin.evaluate(nodes[j, i], q)
                evaluated += 1
                if vec is not None:
                    q = vec
                certify(j, i, s)
        if stride == 1:
            break
        stride //= 2
    out = _MaskDict({e: status[k] == 1 for k, e in enumerate(levels)})
    out.evaluated = evaluated
    return out


class _MaskDict(dict):
    evaluated: int = 0


def contours(fld: PseudospectrumField, eps_levels: Sequence[float]) -> list[ContourSet]:
    """Level curves ``resnorm = 1/eps`` by marching squares on the node values.

    ``eps_levels`` must be positive and strictly decreasing, so each set lies
    inside the previous one.  A level that the field never crosses yields an
    empty ContourSet.
    """
    levels = [_check_eps(e) for e in eps_levels]
    if any(b >= a for a, b in zip(levels, levels[1:])):
        raise ValidationError("eps levels must be strictly decreasing")
    vals = fld.values
    finite = vals[np.isfinite(vals)]
    top = max(float(finite.max()) if finite.size else 1.0, 1.0 / min(levels) if levels else 1.0)
    # +inf sits above every threshold; a large finite cap keeps interpolation defined
    data = np.where(np.isfinite(vals), vals, top * 1e6)
    g = fld.grid
    out = []
    for eps in levels:
        thr = 1.0 / eps
        polylines: list[np.ndarray] = []
        if data.min() < thr < data.max():
            for path in measure.find_contours(data, thr):
                if len(path) < 2:
                    continue
                pts = (g.x0 + path[:, 1] * g.hx) + 1j * (g.y0 + path[:, 0] * g.hy)
                polylines.append(pts)
        out.append(ContourSet(eps, polylines))
    return out
