"""Periodic domain truncation of constant-coefficient operators with decaying potentials (d = 1).

The operator sum_a (1/i^a) c_a D^a + b(x) on R is restricted to (-n, n) with
periodic boundary conditions and written in the Fourier basis
e_z(x) = exp(i pi z x / n) / sqrt(2n).  The differential part is diagonal with
entries p(pi z / n), p(zeta) = sum_a c_a zeta^a; the potential contributes the
Toeplitz matrix of its Fourier coefficients beta_{z - w}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
import scipy.linalg as sla

from . import numlin, pseudo
from .errors import AccuracyError, ValidationError
from .geometry import polyline_distance


@dataclass(frozen=True)
class SymbolPolynomial:
    """p(zeta) = sum_a c_a zeta^a; order is the highest degree with c_a != 0."""

    coeffs: Mapping[int, complex]

    def __post_init__(self):
        clean = {}
        for a, c in self.coeffs.items():
            if int(a) != a or a < 0:
                raise ValidationError(f"degree {a!r} must be a non-negative integer")
            c = complex(c)
            if not (np.isfinite(c.real) and np.isfinite(c.imag)):
                raise ValidationError(f"coefficient c_{a} is not finite")
            if c != 0:
                clean[int(a)] = c
        if not clean or max(clean) < 1:
            raise ValidationError("symbol must have order >= 1 with a nonzero leading coefficient")
        object.__setattr__(self, "coeffs", dict(sorted(clean.items())))

    @property
    def order(self) -> int:
        return max(self.coeffs)

    @property
    def leading(self) -> complex:
        return self.coeffs[self.order]

    def __call__(self, zeta):
        zeta = np.asarray(zeta, dtype=np.complex128)
        out = np.zeros_like(zeta)
        for a in range(self.order, -1, -1):
            out = out * zeta + self.coeffs.get(a, 0)
        return out

    @classmethod
    def from_derivative_coeffs(cls, d: Mapping[int, complex]) -> "SymbolPolynomial":
        """Symbol of sum_a d_a (d/dx)^a, i.e. c_a = i^a d_a."""
        return cls({a: (1j ** a) * complex(v) for a, v in d.items()})

    def to_json(self) -> dict:
        return {str(a): [c.real, c.imag] for a, c in self.coeffs.items()}

    @classmethod
    def from_json(cls, obj) -> "SymbolPolynomial":
        try:
            return cls({int(a): complex(*v) if isinstance(v, (list, tuple)) else complex(v)
                        for a, v in obj.items()})
        except (TypeError, ValueError, AttributeError) as exc:
            raise ValidationError(f"malformed symbol polynomial: {exc}") from None


def example_symbol() -> SymbolPolynomial:
    """Symbol of -d^2/dx^2 - 2 d/dx: zeta^2 - 2i zeta."""
    return SymbolPolynomial({2: 1, 1: -2j})


def symbol_eval(p: SymbolPolynomial, zeta) -> complex:
    return complex(p(float(zeta)))


def truncated_symbol_spectrum(p: SymbolPolynomial, n: int, cutoff: int | None = None) -> np.ndarray:
    """{p(pi z / n) : |z| <= cutoff}, sorted."""
    n = _check_n(n)
    cutoff = n if cutoff is None else int(cutoff)
    if cutoff < n:
        raise ValidationError(f"cutoff {cutoff} must be >= n = {n}")
    z = np.arange(-cutoff, cutoff + 1)
    return numlin.sort_points(p(np.pi * z / n))


@dataclass(frozen=True)
class PotentialSpec:
    """Pointwise potential b(x) with |b| negligible beyond ``decay_radius``.

    ``order`` is the derivative order it multiplies (0 for a plain potential).
    ``breakpoints`` mark kinks (e.g. of tabulated data) that quadrature panels
    must respect.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    decay_radius: float
    order: int = 0
    description: str = ""
    breakpoints: np.ndarray | None = field(default=None, compare=False, repr=False)
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (self.decay_radius > 0 and np.isfinite(self.decay_radius)):
            raise ValidationError("decay_radius must be positive and finite")
        if int(self.order) != self.order or self.order < 0:
            raise ValidationError("potential order must be a non-negative integer")

    def __call__(self, x):
        return np.asarray(self.evaluator(np.asarray(x, dtype=float)), dtype=np.complex128)

    def check_decay(self, *, span: float = 50.0, samples: int = 20001) -> None:
        """Sampled check that |b| <= 1e-14 sup|b| outside the decay radius."""
        R = self.decay_radius
        inside = np.abs(self(np.linspace(-R, R, samples)))
        if not np.all(np.isfinite(inside)):
            raise ValidationError("potential is not finite on its support")
        top = inside.max()
        xs = np.concatenate([np.linspace(R, R + span, samples), np.linspace(-R - span, -R, samples)])
        outside = np.abs(self(xs))
        if not np.all(np.isfinite(outside)) or outside.max() > 1e-14 * top:
            raise ValidationError(f"potential does not decay below 1e-14 sup|b| beyond |x| = {R}")


def gauss_sine(amplitude: float = 20.0) -> PotentialSpec:
    """b(x) = amplitude sin(x) exp(-x^2)."""
    A = float(amplitude)
    # |b| <= |A| exp(-R^2) must fall below 1e-14 sup|b|, and sup|sin x exp(-x^2)| > 0.39
    R = float(np.sqrt(-np.log(1e-14 * 0.39))) + 0.25
    return PotentialSpec(lambda x: A * np.sin(x) * np.exp(-x * x), R, 0,
                         f"{A} sin(x) exp(-x^2)", params={"builtin": "gauss-sine", "amplitude": A})


def zero_potential() -> PotentialSpec:
    return PotentialSpec(lambda x: np.zeros_like(x), 1.0, 0, "0", params={"builtin": "zero"})


def tabulated_potential(x, values) -> PotentialSpec:
    """Piecewise-linear potential through samples with spacing <= 0.01, zero outside."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(values, dtype=np.complex128)
    if x.ndim != 1 or x.size < 2 or v.shape != x.shape:
        raise ValidationError("tabulated potential needs matching 1-D x and values")
    dx = np.diff(x)
    if np.any(dx <= 0):
        raise ValidationError("tabulated x must be strictly increasing")
    if dx.max() > 0.01 + 1e-12:
        raise ValidationError(f"tabulated spacing {dx.max():.4g} exceeds 0.01")
    if abs(v[0]) > 0 or abs(v[-1]) > 0:
        # extend to zero so the potential is continuous and compactly supported
        x = np.concatenate([[x[0] - dx[0]], x, [x[-1] + dx[-1]]])
        v = np.concatenate([[0], v, [0]])

    def ev(t):
        return np.interp(t, x, v.real, 0, 0) + 1j * np.interp(t, x, v.imag, 0, 0)

    R = float(max(abs(x[0]), abs(x[-1])))
    return PotentialSpec(ev, R, 0, f"tabulated ({x.size} samples)", breakpoints=x,
                         params={"builtin": "tabulated"})


def potential_from_json(obj) -> PotentialSpec:
    if obj is None:
        return zero_potential()
    order = int(obj.get("order", 0))
    if "builtin" in obj:
        name = obj["builtin"]
        if name == "gauss-sine":
            spec = gauss_sine(float(obj.get("amplitude", 20.0)))
        elif name == "zero":
            spec = zero_potential()
        else:
            raise ValidationError(f"unknown builtin potential {name!r}")
    elif "x" in obj and "values" in obj:
        vals = [complex(*v) if isinstance(v, (list, tuple)) else complex(v) for v in obj["values"]]
        spec = tabulated_potential(obj["x"], vals)
    else:
        raise ValidationError("potential needs 'builtin' or tabulated 'x'/'values'")
    if order:
        spec = PotentialSpec(spec.evaluator, spec.decay_radius, order, spec.description,
                             spec.breakpoints, spec.params)
    return spec


def operator_from_json(obj) -> tuple[SymbolPolynomial, PotentialSpec]:
    if isinstance(obj, str):
        obj = json.loads(obj)
    if "symbol" not in obj:
        raise ValidationError("operator JSON needs a 'symbol' entry")
    return SymbolPolynomial.from_json(obj["symbol"]), potential_from_json(obj.get("potential"))


# ---- quadrature --------------------------------------------------------------

_GL_ORDER = 20
_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_ORDER)
_MAX_PANELS = 1 << 14


def _panel_rule(a: np.ndarray, b: np.ndarray):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid[:, None] + half[:, None] * _GL_X, half[:, None] * _GL_W


def fourier_integrals(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
                      freqs: np.ndarray, *, tol: float = 1e-12,
                      breakpoints=None) -> np.ndarray:
    """int_a^b f(x) exp(-i w x) dx for every w in ``freqs`` by adaptive Gauss-Legendre panels.

    A panel is accepted when its 20-point value and the sum over its two
    halves agree for every frequency within its share of ``tol``.
    """
    freqs = np.asarray(freqs, dtype=float)
    edges = np.array([a, b], dtype=float)
    if breakpoints is not None:
        bp = np.asarray(breakpoints, dtype=float)
        edges = np.unique(np.concatenate([edges, bp[(bp > a) & (bp < b)]]))
    # start with panels no wider than one period of the fastest oscillation
    wmax = float(np.max(np.abs(freqs))) if freqs.size else 0.0
    if wmax > 0:
        width = 2 * np.pi / wmax
        edges = np.unique(np.concatenate(
            [np.linspace(lo, hi, int(np.ceil((hi - lo) / width)) + 1)
             for lo, hi in zip(edges[:-1], edges[1:])]))
    lo, hi = edges[:-1], edges[1:]
    total = np.zeros(freqs.size, dtype=np.complex128)
    L = b - a

    def integrate(pa, pb):
        x, w = _panel_rule(pa, pb)
        fx = f(x.ravel()).reshape(x.shape) * w
        out = np.empty((x.shape[0], freqs.size), dtype=np.complex128)
        step = max(1, 4_000_000 // (x.shape[1] * max(freqs.size, 1)))
        for s in range(0, x.shape[0], step):
            ph = np.exp(-1j * x[s:s + step, :, None] * freqs[None, None, :])
            out[s:s + step] = np.einsum("pn,pnf->pf", fx[s:s + step], ph)
        return out

    panels = 0
    while lo.size:
        panels += lo.size
        if panels > _MAX_PANELS:
            raise AccuracyError(f"quadrature did not reach tolerance {tol} within {_MAX_PANELS} panels")
        mid = 0.5 * (lo + hi)
        coarse = integrate(lo, hi)
        fine = integrate(lo, mid) + integrate(mid, hi)
        err = np.max(np.abs(fine - coarse), axis=1)
        ok = err <= tol * (hi - lo) / L
        total += fine[ok].sum(axis=0)
        lo, hi = np.concatenate([lo[~ok], mid[~ok]]), np.concatenate([mid[~ok], hi[~ok]])
    return total


def potential_coeffs(b: PotentialSpec, n: int, max_offset: int, *, tol: float = 1e-12) -> dict[int, complex]:
    """beta_m = (1/2n) int_{-n}^{n} b(x) exp(-i pi m x / n) dx for |m| <= max_offset."""
    n = _check_n(n)
    if int(max_offset) != max_offset or max_offset < 0:
        raise ValidationError("max_offset must be a non-negative integer")
    m = np.arange(-int(max_offset), int(max_offset) + 1)
    R = min(float(n), b.decay_radius)
    # the 1/(2n) scaling is applied after integration, so tighten accordingly
    vals = fourier_integrals(b, -R, R, np.pi * m / n, tol=tol * 2 * n,
                             breakpoints=b.breakpoints) / (2 * n)
    return dict(zip(m.tolist(), vals))


def assemble_truncation(p: SymbolPolynomial, b: PotentialSpec, n: int,
                        cutoff: int | None = None) -> np.ndarray:
    """Matrix of the truncated operator on span{e_z : |z| <= cutoff} (default cutoff = n).

    Entry (z, w) is p(pi z / n) delta_{zw} + beta_{z - w}; the size is 2 cutoff + 1.
    """
    n = _check_n(n)
    N = n if cutoff is None else int(cutoff)
    if N < 1:
        raise ValidationError("cutoff must be >= 1")
    if b.order != 0:
        raise ValidationError(
            f"only multiplication potentials (order 0) can be assembled, got order {b.order}")
    z = np.arange(-N, N + 1)
    A = np.diag(p(np.pi * z / n))
    if b.params.get("builtin") != "zero":
        beta = potential_coeffs(b, n, 2 * N)
        col = np.array([beta[k] for k in range(0, 2 * N + 1)])
        row = np.array([beta[-k] for k in range(0, 2 * N + 1)])
        A = A + sla.toeplitz(col, row)
    return A


def essential_curve(p: SymbolPolynomial, zeta_range: float, m: int = 2001) -> np.ndarray:
    """p sampled on a uniform grid of [-zeta_range, zeta_range]."""
    if int(m) != m or m < 64:
        raise ValidationError("essential curve needs m >= 64 samples")
    if not zeta_range > 0:
        raise ValidationError("zeta_range must be positive")
    return p(np.linspace(-zeta_range, zeta_range, int(m)))


def covering_range(p: SymbolPolynomial, box: pseudo.GridSpec, margin: float = 1.0) -> float:
    """A zeta range whose curve end points lie outside ``box`` by at least ``margin``."""
    reach = max(abs(complex(x, y)) for x in (box.x0, box.x1) for y in (box.y0, box.y1)) + margin
    R = 1.0
    while min(abs(p(R)), abs(p(-R))) <= reach or _inner_radius(p, R) <= reach:
        R *= 2
    return R


def _inner_radius(p: SymbolPolynomial, R: float) -> float:
    # |p| beyond R is bounded below by |c_k| R^k - sum |c_a| R^a for large R
    k = p.order
    return abs(p.leading) * R ** k - sum(abs(c) * R ** a for a, c in p.coeffs.items() if a < k)


def distance_to_essential(p: SymbolPolynomial, points, box: pseudo.GridSpec,
                          m: int = 20001) -> np.ndarray:
    R = covering_range(p, box)
    curve = essential_curve(p, R, m)
    return polyline_distance(points, curve)[0]


def discrete_candidates(p: SymbolPolynomial, eigs, box: pseudo.GridSpec,
                        margin: float = 0.5) -> np.ndarray:
    """Eigenvalues inside ``box`` farther than ``margin`` from the essential curve."""
    z = np.asarray(eigs, dtype=np.complex128).ravel()
    z = z[box.contains(z)]
    if z.size == 0:
        return z
    d = distance_to_essential(p, z, box)
    return numlin.sort_points(z[d > margin])


# ---- first-derivative counterexample ----------------------------------------

@dataclass
class DerivativeDemoReport:
    n: int
    eps: float
    cell: float
    cutoff: int
    max_abs_re_flagged: float
    strip_bound_holds: bool
    right_half_plane_nodes: int
    right_half_plane_flagged: int
    probe: complex
    probe_member: bool
    probe_distance: float

    def as_dict(self) -> dict:
        d = dict(self.__dict__)
        d["probe"] = [self.probe.real, self.probe.imag]
        return d


def first_derivative_matrix(n: int, cutoff: int | None = None) -> np.ndarray:
    """d/dx on (0, n) with periodic conditions: diag(2 pi i k / n), |k| <= cutoff."""
    n = _check_n(n)
    N = n if cutoff is None else int(cutoff)
    if N < 0:
        raise ValidationError("cutoff must be >= 0")
    k = np.arange(-N, N + 1)
    return np.diag(2j * np.pi * k / n)


def first_derivative_demo(n: int, grid: pseudo.GridSpec, eps: float, *,
                          cutoff: int | None = None, probe: complex = 1.0):
    """Field of the periodic first-derivative truncation and a report on its eps-pseudospectrum.

    Every truncation is normal with imaginary spectrum, so its eps-pseudospectrum
    stays in the strip |Re lam| < eps, while the limit operator on the half line
    has the whole closed right half-plane as spectrum.
    """
    eps = float(eps)
    if not eps > 0:
        raise ValidationError("eps must be positive")
    M = first_derivative_matrix(n, cutoff)
    fld = pseudo.field(M, grid)
    mask = pseudo.sublevel_mask(fld, eps)
    nodes = grid.nodes()
    flagged = nodes[mask]
    max_re = float(np.abs(flagged.real).max()) if flagged.size else 0.0
    probe = complex(probe)
    dist = float(np.abs(flagged - probe).min()) if flagged.size else np.inf
    rhp = nodes.real >= 0
    report = DerivativeDemoReport(
        n=int(n), eps=eps, cell=grid.cell, cutoff=M.shape[0] // 2,
        max_abs_re_flagged=max_re, strip_bound_holds=bool(max_re < eps + grid.cell),
        right_half_plane_nodes=int(rhp.sum()), right_half_plane_flagged=int((rhp & mask).sum()),
        probe=probe, probe_member=pseudo.membership(M, probe, eps), probe_distance=dist)
    fld.meta["operator"] = f"periodic d/dx on (0, {n}), Fourier modes |k| <= {M.shape[0] // 2}"
    return fld, report


def _check_n(n) -> int:
    if int(n) != n or n < 1:
        raise ValidationError(f"n must be a positive integer, got {n}")
    return int(n)
