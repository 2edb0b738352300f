"""Convergence studies over truncation sizes and spectral-pollution verdicts."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Any, Sequence

import numpy as np
from scipy.spatial import cKDTree

from . import blockops, fourier_pde, numlin, pseudo, toeplitz
from .clusters import Track, track_clusters
from .errors import SpeclabError, UndefinedDistanceError, ValidationError
from .geometry import polyline_distance

GENUINE, POLLUTING, UNDECIDED = "Genuine", "Polluting", "Undecided"


def hausdorff(A, B) -> float:
    """max(sup_a dist(a, B), sup_b dist(b, A)) for finite complex point sets."""
    a = np.asarray(A, dtype=np.complex128).ravel()
    b = np.asarray(B, dtype=np.complex128).ravel()
    if a.size == 0 or b.size == 0:
        raise UndefinedDistanceError("Hausdorff distance needs two non-empty sets")
    pa, pb = np.c_[a.real, a.imag], np.c_[b.real, b.imag]
    # the trees only pick nearest neighbours; distances are recomputed with the
    # scalar complex modulus so results do not depend on vectorized rounding
    ia = cKDTree(pb).query(pa)[1]
    ib = cKDTree(pa).query(pb)[1]
    diffs = np.concatenate([a - b[ia], b - a[ib]]).tolist()
    return float(max(abs(z) for z in diffs))


def _hausdorff_or_inf(A, B) -> float:
    a, b = np.asarray(A).size, np.asarray(B).size
    if a == 0 and b == 0:
        return 0.0
    if a == 0 or b == 0:
        return float("inf")
    return hausdorff(A, B)


# ---- operator families -------------------------------------------------------

class Family:
    """A truncation family n -> matrix, with an optional reference set."""

    name = "family"

    def build(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def describe(self) -> dict[str, Any]:
        return {"family": self.name}

    def reference_points(self, K: pseudo.GridSpec, n_max: int) -> np.ndarray | None:
        """Discretized reference spectrum inside K, or None when unknown."""
        return None

    def reference_curve(self, K: pseudo.GridSpec) -> np.ndarray | None:
        return None

    def judge(self, points: np.ndarray, n_max: int,
              K: pseudo.GridSpec) -> list[tuple[bool, dict]]:
        """For each stable cluster point: (present in the reference?, evidence)."""
        raise NotImplementedError

    def summarize(self, report: "ConvergenceReport") -> dict[str, Any]:
        return {}


class BlockFamily(Family):
    name = "blockdiag"

    def __init__(self, spec: blockops.BlockSequenceSpec, match_tol: float = 1e-6):
        self.spec = spec
        self.match_tol = match_tol

    def build(self, n):
        return blockops.assemble(self.spec, n)

    def describe(self):
        return {"family": self.name, "description": self.spec.description, **self.spec.params}

    def _block_eigs(self, n_max: int) -> np.ndarray:
        ks = self.spec.indices(4 * n_max)
        return np.concatenate([np.linalg.eigvals(self.spec.T(k)) for k in ks])

    def reference_points(self, K, n_max):
        ev = self._block_eigs(n_max)
        return numlin.sort_points(np.unique(ev[K.contains(ev)]))

    def judge(self, points, n_max, K):
        ref = self._block_eigs(n_max)
        out = []
        for z in points:
            d = float(np.abs(ref - z).min())
            out.append((d <= self.match_tol * max(1.0, abs(z)),
                        {"distance_to_block_eigenvalues": d}))
        return out


class DelayFamily(BlockFamily):
    name = "delay"

    def __init__(self, scale: float = 8.0):
        super().__init__(blockops.delay_spec(scale))
        self.scale = scale

    def reference_points(self, K, n_max):
        # exact spectrum {+-sqrt(scale) j : j >= 0}, restricted to K
        R = max(abs(complex(x, y)) for x in (K.x0, K.x1) for y in (K.y0, K.y1))
        j = np.arange(0, int(R / np.sqrt(self.scale)) + 2)
        r = np.sqrt(self.scale) * j
        pts = np.unique(np.concatenate([r, -r])).astype(np.complex128)
        return numlin.sort_points(pts[K.contains(pts)])


class ToeplitzFamily(Family):
    """Finite sections of T(f) + S."""

    name = "toeplitz"

    def __init__(self, symbol: toeplitz.ToeplitzSymbol | None = None,
                 perturbation: toeplitz.PerturbationSpec | None = None,
                 curve_tol: float = 0.15, certificate_tol: float = 1e-6,
                 probe_cells: int = 240):
        self.symbol = symbol or toeplitz.fish_symbol()
        self.perturbation = perturbation if perturbation is not None else toeplitz.diagonal_bump()
        self.curve = toeplitz.symbol_curve(self.symbol, 4096)
        self.curve_tol = curve_tol
        self.certificate_tol = certificate_tol
        x0, x1, y0, y1 = self.curve.bbox()
        pad = 0.1 * max(x1 - x0, y1 - y0) + 1.0
        w, h = x1 - x0 + 2 * pad, y1 - y0 + 2 * pad
        h_cell = max(w, h) / probe_cells
        self.probe_grid = pseudo.GridSpec(x0 - pad, x1 + pad, y0 - pad, y1 + pad,
                                          int(w / h_cell) + 1, int(h / h_cell) + 1)
        self._components: toeplitz.ComponentMap | None = None

    @property
    def components(self) -> toeplitz.ComponentMap:
        if self._components is None:
            self._components = toeplitz.component_probe(self.curve, self.probe_grid)
        return self._components

    def build(self, n):
        return toeplitz.perturbed_section(self.symbol, self.perturbation, n)

    def describe(self):
        return {"family": self.name, "symbol": self.symbol.to_json(),
                "perturbation": self.perturbation.to_json()}

    def reference_curve(self, K):
        return self.curve.closed()

    def reference_points(self, K, n_max):
        # spectrum of the unperturbed operator on K's nodes: curve neighbourhood or winding != 0
        nodes = K.nodes().ravel()
        d = self.curve.distance(nodes)[0]
        on = d <= K.cell / 2
        w = np.zeros(nodes.size, dtype=int)
        off = ~on
        w[off] = toeplitz._raw_winding(self.curve.samples, nodes[off])
        return nodes[on | (w != 0)]

    def curve_distance(self, points) -> np.ndarray:
        return self.curve.distance(points)[0]

    def region(self, z: complex) -> tuple[int | None, str | None]:
        """(winding, "bounded"/"unbounded") of the curve component containing z."""
        x0, x1, y0, y1 = self.curve.bbox()
        if not (x0 <= z.real <= x1 and y0 <= z.imag <= y1):
            return 0, "unbounded"
        label = int(self.components.component_of([z])[0])
        if label == 0:
            return None, None
        c = self.components.get(label)
        return c.winding, ("bounded" if c.bounded else "unbounded")

    def judge(self, points, n_max, K):
        out = []
        for z in points:
            cls = toeplitz.spectrum_classify(self.symbol, z)
            d = float(self.curve_distance([z])[0])
            ev: dict[str, Any] = {"classification": cls.kind, "winding": cls.winding,
                                  "distance_to_curve": d}
            if cls.in_spectrum or d <= self.curve_tol:
                out.append((True, ev))
                continue
            cert = [toeplitz.perturbation_certificate(self.symbol, self.perturbation, z, N)
                    for N in (n_max, 2 * n_max)]
            ev["certificate"] = cert
            out.append((max(cert) <= self.certificate_tol, ev))
        return out

    def summarize(self, report):
        counts = {"bounded": 0, "unbounded": 0}
        for flag in report.pollution_flags:
            if flag.verdict != GENUINE or flag.evidence.get("winding") != 0:
                continue
            if flag.evidence.get("distance_to_curve", 0.0) <= self.curve_tol:
                continue
            _, kind = self.region(flag.point)
            if kind:
                counts[kind] += 1
        return {"winding0_accumulation_counts": {"omega1_bounded": counts["bounded"],
                                                 "omega2_unbounded": counts["unbounded"]}}


class PdeFamily(Family):
    name = "pde"

    def __init__(self, p: fourier_pde.SymbolPolynomial | None = None,
                 b: fourier_pde.PotentialSpec | None = None, cutoff_factor: float = 1.0,
                 margin: float = 0.5):
        self.p = p or fourier_pde.example_symbol()
        self.b = b or fourier_pde.gauss_sine(20.0)
        self.cutoff_factor = cutoff_factor
        self.margin = margin
        self._discrete: dict[tuple, np.ndarray] = {}

    def cutoff(self, n: int) -> int:
        return max(n, int(round(self.cutoff_factor * n)))

    def build(self, n):
        return fourier_pde.assemble_truncation(self.p, self.b, n, self.cutoff(n))

    def describe(self):
        return {"family": self.name, "symbol": self.p.to_json(),
                "potential": self.b.description, "cutoff_factor": self.cutoff_factor}

    def reference_curve(self, K):
        R = fourier_pde.covering_range(self.p, K)
        return fourier_pde.essential_curve(self.p, R, 4001)

    def _discrete_at(self, K, n):
        key = (K, n)
        if key not in self._discrete:
            ev = numlin.eigenvalues(self.build(n))
            self._discrete[key] = fourier_pde.discrete_candidates(self.p, ev, K, self.margin)
        return self._discrete[key]

    def reference_points(self, K, n_max):
        curve = self.reference_curve(K)
        curve = curve[K.contains(curve)]
        return np.concatenate([curve, self._discrete_at(K, n_max)])

    def judge(self, points, n_max, K):
        out = []
        curve = self.reference_curve(K)
        disc = self._discrete_at(K, n_max)
        for z in points:
            d = float(polyline_distance([z], curve)[0][0])
            dd = float(np.abs(disc - z).min()) if disc.size else np.inf
            ev = {"distance_to_essential_curve": d, "distance_to_discrete_candidate": dd}
            out.append((d <= self.margin or dd <= 0.05, ev))
        return out


class SyntheticPollutionFamily(Family):
    """Fixture with a spurious eigenvalue at every truncation.

    The operator is a direct sum of 2x2 blocks [[0, 1 + e_k], [1 + e_k, 0]]
    (spectrum near +-1).  Truncations of odd size 2n+1 cut the last block and
    keep a lone zero on the diagonal, which sits halfway between +-1.
    """

    name = "synthetic"

    def __init__(self, seed: int = 0, noise: float = 1e-3):
        self.seed = int(seed)
        self.noise = float(noise)

    def _eta(self, count: int) -> np.ndarray:
        rng = np.random.default_rng(self.seed)
        return self.noise * rng.random(count) / (1.0 + np.arange(count)) ** 2

    def build(self, n):
        if int(n) != n or n < 1:
            raise ValidationError("n must be >= 1")
        eta = self._eta(n)
        M = np.zeros((2 * n + 1, 2 * n + 1), dtype=np.complex128)
        for k in range(n):
            M[2 * k, 2 * k + 1] = M[2 * k + 1, 2 * k] = 1 + eta[k]
        return M

    def describe(self):
        return {"family": self.name, "seed": self.seed, "noise": self.noise}

    def _spectrum(self, n_max):
        eta = self._eta(4 * n_max)
        return np.concatenate([1 + eta, -1 - eta, [1.0, -1.0]]).astype(np.complex128)

    def reference_points(self, K, n_max):
        ref = self._spectrum(n_max)
        return ref[K.contains(ref)]

    def judge(self, points, n_max, K):
        ref = self._spectrum(n_max)
        out = []
        for z in points:
            d = float(np.abs(ref - z).min())
            out.append((d <= 1e-6, {"distance_to_reference": d}))
        return out


# ---- the study engine ---------------------------------------------------------

@dataclass
class PollutionFlag:
    point: complex
    verdict: str
    evidence: dict[str, Any] = dc_field(default_factory=dict)


@dataclass
class ConvergenceReport:
    region: pseudo.GridSpec
    n_list: list[int]
    eps_levels: list[float]
    per_n: dict[int, dict[str, Any]]
    hausdorff_spectra: dict[tuple[int, int], float]
    hausdorff_pseudo: dict[tuple[float, int, int], float]
    hausdorff_reference: dict[int, float] = dc_field(default_factory=dict)
    pollution_flags: list[PollutionFlag] = dc_field(default_factory=list)
    tracks: list[Track] = dc_field(default_factory=list)
    match_radius: float = 0.0
    summary: dict[str, Any] = dc_field(default_factory=dict)
    source: dict[str, Any] = dc_field(default_factory=dict)

    def verdict_counts(self) -> dict[str, int]:
        out = {GENUINE: 0, POLLUTING: 0, UNDECIDED: 0}
        for f in self.pollution_flags:
            out[f.verdict] += 1
        return out


def convergence_study(family: Family, n_list: Sequence[int], K: pseudo.GridSpec,
                      eps_levels: Sequence[float] = (), *, threads: int | None = None,
                      with_reference: bool = True) -> ConvergenceReport:
    """Eigenvalues and eps-sublevel node sets in K for every n, with Hausdorff distances.

    Sublevel node sets come from the certified Lipschitz classification, so
    they equal thresholding the full resolvent-norm field on K's nodes.
    """
    ns = [int(n) for n in n_list]
    if len(ns) < 2 or any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValidationError("n_list must be strictly increasing with at least two entries")
    levels = [float(e) for e in eps_levels]
    for e in levels:
        if not e > 0:
            raise ValidationError("eps levels must be positive")
    threads = pseudo.default_threads() if threads is None else max(1, int(threads))

    def run(n):
        try:
            M = family.build(n)
        except SpeclabError as exc:
            raise type(exc)(f"building {family.name} truncation at n = {n}: {exc}") from exc
        ev = numlin.eigenvalues(M)
        masks = pseudo.certified_sublevel_masks(M, K, levels) if levels else {}
        return {"dim": M.shape[0],
                "eigenvalues": ev[K.contains(ev)],
                "eigenvalue_count": int(ev.size),
                "sublevel": {e: pseudo.mask_points(K, masks[e]) for e in levels},
                "evaluations": int(getattr(masks, "evaluated", 0))}

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, ns))
    else:
        results = [run(n) for n in ns]
    per_n = dict(zip(ns, results))

    hs = {}
    hp = {}
    for a, b in zip(ns, ns[1:]):
        hs[(a, b)] = _hausdorff_or_inf(per_n[a]["eigenvalues"], per_n[b]["eigenvalues"])
        for e in levels:
            hp[(e, a, b)] = _hausdorff_or_inf(per_n[a]["sublevel"][e], per_n[b]["sublevel"][e])
    href = {}
    if with_reference:
        ref = family.reference_points(K, ns[-1])
        if ref is not None:
            for n in ns:
                href[n] = _hausdorff_or_inf(per_n[n]["eigenvalues"], ref)
    return ConvergenceReport(K, ns, levels, per_n, hs, hp, href,
                             match_radius=0.05 * K.diameter, source=family.describe())


def classify_pollution(report: ConvergenceReport, family: Family,
                       radius: float | None = None) -> ConvergenceReport:
    """Verdict per eigenvalue cluster of the finest level.

    Clusters matched across all levels with shrinking drift are Genuine when
    the family's reference confirms them and Polluting otherwise; the rest are
    Undecided.
    """
    if len(report.n_list) < 2:
        raise ValidationError("pollution classification needs at least two levels")
    r = report.match_radius if radius is None else float(radius)
    levels = [report.per_n[n]["eigenvalues"] for n in report.n_list]
    tracks = track_clusters(levels, r)
    stable = [t for t in tracks if t.stable]
    judged = family.judge(np.array([t.point for t in stable]), report.n_list[-1], report.region)
    verdicts = {id(t): j for t, j in zip(stable, judged)}
    flags = []
    for t in tracks:
        base = {"path": [None if p is None else [p.real, p.imag] for p in t.path],
                "drifts": t.drifts}
        if id(t) in verdicts:
            ok, ev = verdicts[id(t)]
            flags.append(PollutionFlag(t.point, GENUINE if ok else POLLUTING, {**base, **ev}))
        else:
            flags.append(PollutionFlag(t.point, UNDECIDED, base))
    report.tracks = tracks
    report.match_radius = r
    report.pollution_flags = flags
    report.summary = {"verdicts": report.verdict_counts(), **family.summarize(report)}
    return report


@dataclass
class SpectralPortrait:
    n: int
    eigenvalues: np.ndarray
    field: pseudo.PseudospectrumField | None = None
    contour_sets: list[pseudo.ContourSet] = dc_field(default_factory=list)
    source: dict[str, Any] = dc_field(default_factory=dict)
    reference_curve: np.ndarray | None = None
    meta: dict[str, Any] = dc_field(default_factory=dict)

    def __post_init__(self):
        eps = [c.eps for c in self.contour_sets]
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise ValidationError("contour eps levels must be strictly decreasing")


def portrait(M, n: int, grid: pseudo.GridSpec | None, eps_levels: Sequence[float], *,
             source: dict | None = None, reference_curve=None,
             threads: int | None = None) -> SpectralPortrait:
    """Eigenvalues, resolvent-norm field and eps-contours of one truncation."""
    ev = numlin.eigenvalues(M)
    fld = None
    cs: list[pseudo.ContourSet] = []
    if grid is not None:
        fld = pseudo.field(M, grid, threads=threads)
        if eps_levels:
            cs = pseudo.contours(fld, eps_levels)
    return SpectralPortrait(int(n), ev, fld, cs, source or {}, reference_curve)
