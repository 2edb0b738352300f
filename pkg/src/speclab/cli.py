"""Command-line entry point: ``speclab <subcommand> [options]``.

Exit codes: 0 success, 2 invalid input, 3 numerical accuracy failure,
1 any other error (for example an unwritable output path).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import blockops, fourier_pde, numlin, pseudo, study, toeplitz
from .emit import FORMATS, emit, render
from .errors import SpeclabError, ValidationError

DEFAULTS = {
    "toeplitz": {"n": 100, "grid": "-30,32,-25,25,201,201", "eps": "2,1,0.5,0.25,0.125"},
    "blockdiag": {"n": 20, "grid": "0,4,-2,2,81,81", "eps": "1,0.5"},
    "delay": {"n": 10, "grid": "-12,12,-12,12,121,121", "eps": "1,0.5,0.25"},
    "pde": {"n": 100, "grid": "-5,10,-7,7,201,201", "eps": "2,1,0.5"},
    "deriv-demo": {"n": 10, "grid": "-2,2,-3,3,81,121", "eps": "0.5"},
    "study": {"eps": ""},
}

STUDY_DEFAULTS = {
    "delay": {"n_list": "5,10,20", "grid": "-10,10,-10,10,41,41"},
    "toeplitz": {"n_list": "50,100,200", "grid": "-30,45,-25,25,151,101"},
    "pde": {"n_list": "100,200", "grid": "-5,10,-7,7,201,201"},
    "blockdiag": {"n_list": "5,10,20", "grid": "0,4,-2,2,41,41"},
    "synthetic": {"n_list": "5,10,20", "grid": "-2,2,-1,1,41,21"},
}


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    text = str(text).strip()
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ValidationError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _grid(value) -> pseudo.GridSpec:
    if isinstance(value, dict):
        return pseudo.GridSpec(**value)
    if isinstance(value, (list, tuple)):
        value = ",".join(str(v) for v in value)
    return pseudo.GridSpec.parse(str(value))


def _load_config(path) -> dict:
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _load_json_arg(value):
    """A JSON object given inline or as a path to a file."""
    if value is None or isinstance(value, dict):
        return value
    text = str(value)
    if text.lstrip().startswith("{"):
        src = text
    else:
        try:
            src = Path(text).read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationError(f"cannot read {text}: {exc.strerror or exc}") from None
    try:
        return json.loads(src)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {text[:40]!r}: {exc}") from None


class Settings:
    """Flag values, falling back to the config file, then to per-command defaults."""

    def __init__(self, args: argparse.Namespace, defaults: dict):
        self.args = args
        self.config = _load_config(args.config)
        self.defaults = defaults

    def get(self, key, default=None):
        v = getattr(self.args, key, None)
        if v is not None:
            return v
        if key in self.config:
            return self.config[key]
        return self.defaults.get(key, default)


def _threads(s: Settings) -> int:
    t = s.get("threads")
    return pseudo.default_threads() if t is None else max(1, int(t))


def _finish(obj, s: Settings) -> int:
    out = s.get("out")
    fmt = s.get("format")
    if fmt is None:
        suffix = Path(out).suffix.lstrip(".").lower() if out else ""
        fmt = suffix if suffix in FORMATS else "json"
    if fmt not in FORMATS:
        raise ValidationError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")
    if out:
        emit(obj, fmt, out)
    else:
        sys.stdout.write(render(obj, fmt))
    return 0


def _portrait_of(M, n, s: Settings, source: dict, reference_curve=None, meta=None):
    grid = _grid(s.get("grid"))
    eps = sorted(_floats(s.get("eps")), reverse=True)
    p = study.portrait(M, n, grid, eps, source=source, reference_curve=reference_curve,
                       threads=_threads(s))
    p.meta.update(meta or {})
    return p


def cmd_toeplitz(s: Settings) -> int:
    sym_obj = _load_json_arg(s.get("symbol"))
    sym = toeplitz.ToeplitzSymbol.from_json(sym_obj) if sym_obj else toeplitz.fish_symbol()
    pert_obj = _load_json_arg(s.get("perturbation"))
    S = toeplitz.PerturbationSpec.from_json(pert_obj) if pert_obj else toeplitz.diagonal_bump()
    n = int(s.get("n"))
    M = toeplitz.perturbed_section(sym, S, n)
    curve = toeplitz.symbol_curve(sym, 2048)
    p = _portrait_of(M, n, s, {"operator": "toeplitz", "symbol": sym.to_json(),
                               "perturbation": S.to_json()}, curve.closed())
    return _finish(p, s)


def _block_spec(s: Settings) -> blockops.BlockSequenceSpec:
    obj = _load_json_arg(s.get("spec"))
    return blockops.spec_from_json(obj) if obj else blockops.example1_spec()


def _limit_meta(spec, s: Settings) -> dict:
    grid = _grid(s.get("grid"))
    K = int(s.get("k_blocks", 2000))
    thr = float(s.get("threshold", 1e3))
    ess = blockops.essential_limit_estimate(spec, grid, K, thr)
    out = {"essential_estimate": {"K_blocks": K, "threshold": thr,
                                  "flagged": ess.points().tolist()}}
    eps = _floats(s.get("eps"))
    if eps:
        near = blockops.eps_near_limit_estimate(spec, grid, max(eps), K)
        out["eps_near_estimate"] = {"eps": max(eps), "tolerance": near.tolerance,
                                    "flagged": near.points().tolist()}
    return out


def cmd_blockdiag(s: Settings) -> int:
    spec = _block_spec(s)
    n = int(s.get("n"))
    M = blockops.assemble(spec, n)
    meta = _limit_meta(spec, s) if s.get("limits") else {}
    p = _portrait_of(M, n, s, {"operator": "blockdiag", "description": spec.description,
                               **spec.params}, meta=meta)
    return _finish(p, s)


def cmd_delay(s: Settings) -> int:
    spec = blockops.delay_spec()
    n = int(s.get("n"))
    M = blockops.assemble(spec, n)
    ev = numlin.eigenvalues(M)
    oracle = blockops.delay_spectrum_oracle(n)
    meta = {"oracle_max_deviation": numlin.multiset_deviation(ev, oracle),
            "resolvent_norm_at_5i": numlin.resolvent_norm(M, 5j),
            "block_norm_sup_at_5i": blockops.constant_norm_region_check(5j, 200)}
    if s.get("limits"):
        meta.update(_limit_meta(spec, s))
    p = _portrait_of(M, n, s, {"operator": "delay", "description": spec.description}, meta=meta)
    return _finish(p, s)


def _pde_operator(s: Settings):
    obj = _load_json_arg(s.get("operator"))
    if obj:
        return fourier_pde.operator_from_json(obj)
    return fourier_pde.example_symbol(), fourier_pde.gauss_sine(20.0)


def cmd_pde(s: Settings) -> int:
    p_sym, b = _pde_operator(s)
    n = int(s.get("n"))
    cutoff = s.get("cutoff")
    cutoff = None if cutoff is None else int(cutoff)
    M = fourier_pde.assemble_truncation(p_sym, b, n, cutoff)
    grid = _grid(s.get("grid"))
    ev = numlin.eigenvalues(M)
    disc = fourier_pde.discrete_candidates(p_sym, ev, grid)
    curve = fourier_pde.essential_curve(p_sym, fourier_pde.covering_range(p_sym, grid), 4001)
    p = _portrait_of(M, n, s, {"operator": "pde", "symbol": p_sym.to_json(),
                               "potential": b.description, "cutoff": cutoff or n},
                     curve, {"discrete_candidates": disc.tolist()})
    return _finish(p, s)


def cmd_deriv_demo(s: Settings) -> int:
    n = int(s.get("n"))
    grid = _grid(s.get("grid"))
    eps = _floats(s.get("eps"))
    if not eps:
        raise ValidationError("deriv-demo needs an eps value")
    fld, report = fourier_pde.first_derivative_demo(n, grid, eps[0])
    ev = numlin.eigenvalues(fourier_pde.first_derivative_matrix(n))
    p = study.SpectralPortrait(n, ev, fld, pseudo.contours(fld, [eps[0]]),
                               {"operator": "first-derivative", "n": n},
                               meta={"report": report.as_dict()})
    return _finish(p, s)


def _family(s: Settings) -> study.Family:
    name = s.get("family") or "delay"
    if name == "delay":
        return study.DelayFamily()
    if name == "toeplitz":
        sym_obj = _load_json_arg(s.get("symbol"))
        pert_obj = _load_json_arg(s.get("perturbation"))
        return study.ToeplitzFamily(
            toeplitz.ToeplitzSymbol.from_json(sym_obj) if sym_obj else None,
            toeplitz.PerturbationSpec.from_json(pert_obj) if pert_obj else None)
    if name == "pde":
        p_sym, b = _pde_operator(s)
        return study.PdeFamily(p_sym, b, float(s.get("cutoff_factor", 1.0)))
    if name == "blockdiag":
        return study.BlockFamily(_block_spec(s))
    if name == "synthetic":
        seed = s.get("seed")
        return study.SyntheticPollutionFamily(0 if seed is None else int(seed))
    raise ValidationError(f"unknown family {name!r}")


def cmd_study(s: Settings) -> int:
    fam = _family(s)
    fam_defaults = STUDY_DEFAULTS.get(fam.name, {})
    n_list = _ints(s.get("n_list", fam_defaults.get("n_list")))
    grid = _grid(s.get("grid", fam_defaults.get("grid")))
    eps = sorted(_floats(s.get("eps")), reverse=True)
    report = study.convergence_study(fam, n_list, grid, eps, threads=_threads(s))
    study.classify_pollution(report, fam)
    return _finish(report, s)


COMMANDS = {
    "toeplitz": (cmd_toeplitz, "finite sections of a perturbed banded Toeplitz operator"),
    "blockdiag": (cmd_blockdiag, "truncations of a block-diagonally dominant operator"),
    "delay": (cmd_delay, "the neutral delay block operator"),
    "pde": (cmd_pde, "Fourier domain truncation of a differential operator with potential"),
    "deriv-demo": (cmd_deriv_demo, "periodic first-derivative truncations"),
    "study": (cmd_study, "convergence study and pollution classification over several n"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="speclab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--n", type=int, help="truncation parameter")
        p.add_argument("--n-list", dest="n_list", help="comma-separated increasing n values")
        p.add_argument("--grid", help="x0,x1,y0,y1,nx,ny")
        p.add_argument("--eps", help="comma-separated eps levels")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=FORMATS, help="output format (default from --out suffix, else json)")
        p.add_argument("--threads", type=int, help="worker threads (default $SPECLAB_THREADS or 1)")
        p.add_argument("--seed", type=int, help="seed for synthetic fixtures")
        p.add_argument("--config", help="JSON file whose keys mirror these flags")
        if name in ("toeplitz", "study"):
            p.add_argument("--symbol", help="symbol JSON (inline or file)")
            p.add_argument("--perturbation", help="perturbation JSON (inline or file)")
        if name in ("blockdiag", "study"):
            p.add_argument("--spec", help="block spec JSON (inline or file)")
        if name in ("blockdiag", "delay"):
            p.add_argument("--limits", action="store_true", default=None,
                           help="add limit-set estimates to the output metadata")
            p.add_argument("--k-blocks", dest="k_blocks", type=int, help="tail depth (default 2000)")
            p.add_argument("--threshold", type=float, help="divergence threshold (default 1e3)")
        if name in ("pde", "study"):
            p.add_argument("--operator", help="operator JSON (inline or file)")
        if name == "pde":
            p.add_argument("--cutoff", type=int, help="Fourier cutoff (default n)")
        if name == "study":
            p.add_argument("--family", choices=sorted(STUDY_DEFAULTS),
                           help="operator family (default delay)")
            p.add_argument("--cutoff-factor", dest="cutoff_factor", type=float,
                           help="pde family: Fourier cutoff as a multiple of n")
    return parser


# flags whose values may start with "-" (e.g. --grid -30,32,...)
_LIST_FLAGS = ("--grid", "--eps", "--n-list")


def _join_list_values(argv: list[str]) -> list[str]:
    out: list[str] = []
    it = iter(argv)
    for tok in it:
        if tok in _LIST_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(_join_list_values(argv))
    func = COMMANDS[args.command][0]
    try:
        settings = Settings(args, DEFAULTS[args.command])
        return func(settings)
    except SpeclabError as exc:
        print(f"speclab {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (TypeError, ValueError) as exc:
        print(f"speclab {args.command}: error: {exc}", file=sys.stderr)
        return ValidationError.exit_code


if __name__ == "__main__":
    sys.exit(main())
