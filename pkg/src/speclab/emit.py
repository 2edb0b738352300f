"""JSON, CSV and SVG writers for portraits and convergence reports.

Floats are written with Python's shortest round-trip repr, so reading a
file back reproduces every value bit for bit.  +inf resolvent norms become
JSON ``null`` and CSV ``inf``.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .errors import SpeclabError, ValidationError
from .pseudo import ContourSet, GridSpec, PseudospectrumField
from .study import ConvergenceReport, SpectralPortrait

FORMATS = ("json", "csv", "svg")


class OutputError(SpeclabError):
    """Writing an output file failed."""


def _pt(z) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def _num(x):
    x = float(x)
    return None if not math.isfinite(x) else x


def _contours(cs: list[ContourSet]) -> list[dict]:
    return [{"eps": float(c.eps), "polylines": [[_pt(z) for z in line] for line in c.polylines]}
            for c in cs]


def _clean(obj):
    """Make numpy scalars, complex numbers and tuples JSON-friendly."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return _pt(obj)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    return obj


def portrait_to_dict(p: SpectralPortrait) -> dict[str, Any]:
    fld = p.field
    meta = {"source": p.source, **p.meta}
    if fld is not None:
        meta["field"] = fld.meta
        meta["matrix_dim"] = fld.matrix_dim
    return {
        "meta": _clean(meta),
        "n": int(p.n),
        "eigenvalues": [_pt(z) for z in p.eigenvalues],
        "grid": fld.grid.as_dict() if fld is not None else None,
        "resnorm": [_num(v) for v in fld.values.ravel()] if fld is not None else None,
        "contours": _contours(p.contour_sets),
    }


def report_to_dict(r: ConvergenceReport) -> dict[str, Any]:
    per_n = {}
    for n in r.n_list:
        d = r.per_n[n]
        per_n[str(n)] = {
            "dim": d["dim"],
            "eigenvalue_count": d["eigenvalue_count"],
            "eigenvalues": [_pt(z) for z in d["eigenvalues"]],
            "sublevel": {repr(e): [_pt(z) for z in pts] for e, pts in d["sublevel"].items()},
        }
    return {
        "meta": _clean({"source": r.source, "match_radius": r.match_radius,
                        "cell": r.region.cell,
                        "sublevel_sets": "grid nodes of K with resnorm > 1/eps"}),
        "grid": r.region.as_dict(),
        "n_list": list(r.n_list),
        "eps_levels": list(r.eps_levels),
        "per_n": per_n,
        "hausdorff_spectra": [{"n": a, "n_next": b, "distance": _num(v)}
                              for (a, b), v in r.hausdorff_spectra.items()],
        "hausdorff_pseudo": [{"eps": e, "n": a, "n_next": b, "distance": _num(v),
                              "cells": _num(v / r.region.cell)}
                             for (e, a, b), v in r.hausdorff_pseudo.items()],
        "hausdorff_reference": [{"n": n, "distance": _num(v)}
                                for n, v in r.hausdorff_reference.items()],
        "pollution_flags": [{"point": _pt(f.point), "verdict": f.verdict,
                             "evidence": _clean(f.evidence)} for f in r.pollution_flags],
        "summary": _clean(r.summary),
    }


def dumps(obj) -> str:
    if isinstance(obj, SpectralPortrait):
        obj = portrait_to_dict(obj)
    elif isinstance(obj, ConvergenceReport):
        obj = report_to_dict(obj)
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def field_csv(fld: PseudospectrumField) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re", "im", "resnorm"])
    nodes = fld.grid.nodes()
    for z, v in zip(nodes.ravel(), fld.values.ravel()):
        w.writerow([repr(float(z.real)), repr(float(z.imag)), repr(float(v))])
    return buf.getvalue()


def eigenvalue_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "re", "im"])
    for n, z in rows:
        w.writerow([int(n), repr(float(z.real)), repr(float(z.imag))])
    return buf.getvalue()


def to_csv(obj) -> str:
    """Field CSV (re,im,resnorm) when a field is present, else eigenvalue CSV (n,re,im)."""
    if isinstance(obj, PseudospectrumField):
        return field_csv(obj)
    if isinstance(obj, SpectralPortrait):
        if obj.field is not None:
            return field_csv(obj.field)
        return eigenvalue_csv((obj.n, z) for z in obj.eigenvalues)
    if isinstance(obj, ConvergenceReport):
        return eigenvalue_csv((n, z) for n in obj.n_list for z in obj.per_n[n]["eigenvalues"])
    raise ValidationError(f"cannot write {type(obj).__name__} as CSV")


def to_svg(obj) -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "speclab"
    fig, ax = plt.subplots(figsize=(6.4, 5.2))
    try:
        if isinstance(obj, SpectralPortrait):
            _draw_portrait(ax, obj)
        elif isinstance(obj, ConvergenceReport):
            _draw_report(ax, obj)
        else:
            raise ValidationError(f"cannot draw {type(obj).__name__}")
        ax.set_xlabel("Re λ")
        ax.set_ylabel("Im λ")
        ax.set_aspect("equal", adjustable="box")
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        return buf.getvalue()
    finally:
        plt.close(fig)


def _draw_portrait(ax, p: SpectralPortrait):
    if p.field is not None and p.contour_sets:
        g = p.field.grid
        vals = p.field.values
        finite = vals[np.isfinite(vals)]
        cap = max(finite.max() if finite.size else 1.0, 1.0 / p.contour_sets[-1].eps) * 10
        data = np.where(np.isfinite(vals), vals, cap)
        thresholds = [1.0 / c.eps for c in p.contour_sets]
        levels = thresholds + [max(cap, thresholds[-1] * 2)]
        greys = [str(0.85 - 0.6 * k / max(1, len(thresholds) - 1)) for k in range(len(thresholds))]
        ax.contourf(g.xs, g.ys, data, levels=levels, colors=greys)
        for c in p.contour_sets:
            for line in c.polylines:
                ax.plot(line.real, line.imag, color="k", lw=0.5)
        ax.set_xlim(g.x0, g.x1)
        ax.set_ylim(g.y0, g.y1)
    if p.reference_curve is not None:
        rc = np.asarray(p.reference_curve)
        ax.plot(rc.real, rc.imag, color="tab:red", lw=0.8, label="reference")
    ev = np.asarray(p.eigenvalues)
    ax.plot(ev.real, ev.imag, ".", color="tab:blue", ms=3, label="eigenvalues")
    ax.set_title(f"n = {p.n}")
    ax.legend(loc="upper right", fontsize="small")


def _draw_report(ax, r: ConvergenceReport):
    colors = {"Genuine": "tab:green", "Polluting": "tab:red", "Undecided": "tab:grey"}
    for verdict, color in colors.items():
        pts = np.array([f.point for f in r.pollution_flags if f.verdict == verdict])
        if pts.size:
            ax.plot(pts.real, pts.imag, ".", color=color, ms=4, label=verdict)
    if not r.pollution_flags:
        ev = r.per_n[r.n_list[-1]]["eigenvalues"]
        ax.plot(ev.real, ev.imag, ".", color="tab:blue", ms=3, label="eigenvalues")
    g = r.region
    ax.set_xlim(g.x0, g.x1)
    ax.set_ylim(g.y0, g.y1)
    ax.set_title(f"n = {', '.join(map(str, r.n_list))}")
    ax.legend(loc="upper right", fontsize="small")


def render(obj, fmt: str) -> str:
    if fmt == "json":
        return dumps(obj)
    if fmt == "csv":
        return to_csv(obj)
    if fmt == "svg":
        return to_svg(obj)
    raise ValidationError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")


def emit(obj, fmt: str, path) -> Path:
    text = render(obj, fmt)
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


# ---- reading back ---------------------------------------------------------------

def load_portrait(path) -> dict[str, Any]:
    """Parse a portrait JSON file; eigenvalues come back as complex, null resnorms as inf."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    data["eigenvalues"] = np.array([complex(a, b) for a, b in data["eigenvalues"]],
                                   dtype=np.complex128)
    if data.get("resnorm") is not None:
        data["resnorm"] = np.array([np.inf if v is None else v for v in data["resnorm"]])
    if data.get("grid") is not None:
        data["grid"] = GridSpec(**data["grid"])
    return data
