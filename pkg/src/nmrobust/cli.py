"""Command-line front end: ``nmrobust analyze | verify | sweep``."""
from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from . import charfun as cfm
from . import exprparse as ex
from .charfun import CharacteristicFunction, Piece
from .family import ChannelFamily
from .markov import InconsistencyError
from .oracle import BudgetExceeded, check_times, verify_markovian_grid
from .solver import CapExceeded, MeasureResult, SolveOptions, cross_check, measure_general

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_CAP, EXIT_INTERNAL = 0, 1, 2, 3, 4


class SpecError(ValueError):
    pass


# ---------------------------------------------------------------------------
# spec files


def _number(v, what: str) -> float:
    """Numbers may be given as JSON numbers or as constant expressions."""
    if isinstance(v, bool):
        raise SpecError(f"{what}: expected a number")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        e = ex.parse(v)
        x = float(ex.evaluate(e, 0.0))
        if ex.differentiate(e) != ex.ZERO and not math.isclose(x, float(ex.evaluate(e, 1.0))):
            raise SpecError(f"{what}: {v!r} depends on t")
        return x
    raise SpecError(f"{what}: expected a number, got {type(v).__name__}")


def family_from_spec(sel) -> ChannelFamily:
    if isinstance(sel, str):
        sel = {"kind": sel}
    if not isinstance(sel, dict) or "kind" not in sel:
        raise SpecError("family: expected a name or an object with 'kind'")
    kind = sel["kind"]
    if kind not in ("depolarizing", "dephasing"):
        raise SpecError(f"family: unknown kind {kind!r}")
    d = int(_number(sel.get("d", 2), "family.d"))
    if kind == "depolarizing" and d < 2:
        raise SpecError("family.d must be at least 2")
    return ChannelFamily(kind, d if kind == "depolarizing" else 2)


def load_spec(data: dict) -> tuple[CharacteristicFunction, dict]:
    """Build the characteristic function described by an evolution spec."""
    if not isinstance(data, dict):
        raise SpecError("spec must be a JSON object")
    fam_sel = data.get("family", "depolarizing")
    if isinstance(fam_sel, str) and "d" in data:
        fam_sel = {"kind": fam_sel, "d": data["d"]}
    fam = family_from_spec(fam_sel)
    raw = data.get("pieces")
    if not isinstance(raw, list) or not raw:
        raise SpecError("pieces: expected a non-empty list")
    pieces = []
    for k, p in enumerate(raw):
        try:
            pieces.append(Piece(_number(p["t_start"], f"pieces[{k}].t_start"),
                                _number(p["t_end"], f"pieces[{k}].t_end"), ex.parse(p["expr"])))
        except (KeyError, TypeError):
            raise SpecError(f"pieces[{k}]: expected t_start, t_end and expr") from None
    horizon = _number(data["horizon"], "horizon") if "horizon" in data else None
    cf = cfm.build(fam, pieces, horizon=horizon)
    return cf, {k: data[k] for k in ("grid", "tol", "max_jumps", "solver") if k in data}


def read_spec(path) -> tuple[CharacteristicFunction, dict]:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as err:
            raise SpecError(f"{path}: invalid JSON ({err})") from None
    return load_spec(data)


def spec_of(cf: CharacteristicFunction) -> dict:
    """Evolution spec that re-ingests to ``cf``."""
    fam = {"kind": cf.family.kind}
    if cf.family.kind == "depolarizing":
        fam["d"] = cf.family.d
    return {"family": fam, "horizon": cf.horizon,
            "pieces": [{"t_start": p.t_start, "t_end": p.t_end, "expr": ex.to_text(p.expr)} for p in cf.pieces]}


# ---------------------------------------------------------------------------
# serialization


def _clean(v):
    """Round floats to 12 significant digits; non-finite values become strings."""
    if isinstance(v, bool) or v is None or isinstance(v, (str, int)):
        return v
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if not math.isfinite(v):
            return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
        return float(f"{v:.12g}")
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _g(v: float) -> str:
    return f"{float(v):.12g}"


def _write_atomic(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _dump(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=False) + "\n"


def build_report(cf: CharacteristicFunction, res: MeasureResult, opts: SolveOptions, check) -> dict:
    v = res.verdict
    return {
        "tool": {"name": "nmrobust", "version": __version__},
        "family": {"kind": cf.family.kind, "d": cf.family.d},
        "horizon": cf.horizon,
        "verdict": {"markovian": v.markovian, "max_residual": v.max_residual, "grid_size": v.grid_size,
                    "witnesses": [{"s": w.s, "t": w.t, "residual": w.residual} for w in v.witnesses],
                    "local_violations": v.local_violations[:20]},
        "gaps": res.gaps.to_dict(),
        "class": res.tractability.value,
        "pathway": res.pathway,
        "p": res.p,
        "p_star": res.p_star,
        "p_star_available": res.p_star_available,
        "sign_vectors": None if res.sign_vectors is None else {"a": list(res.sign_vectors[0]),
                                                                "b": list(res.sign_vectors[1])},
        "params": res.params,
        "companion": {"file": "companion.json", "kind": res.companion.kind,
                      "normalizer": res.companion.normalizer},
        "oracle": None if check is None else check.to_dict(),
        "notes": res.notes,
        "tolerances": {"grid": opts.oracle_points, "tol": opts.tol, "tol_p": opts.tol_p,
                       "max_jumps": opts.max_jumps, "xi_points": opts.xi_points,
                       "refinements": opts.refinements, "solver_points": opts.n_points,
                       "time_tol": cfm.TIME_TOL, "value_tol": cfm.VALUE_TOL, "run_tol": cfm.RUN_TOL},
    }


def samples_csv(cf: CharacteristicFunction, comp: CharacteristicFunction, p: float, n_points: int) -> str:
    ts, f = cfm.with_sides(cf, check_times(cf, n_points, comp.breakpoints()))
    left = cfm.side_flags(ts)
    h = cfm.values_at(comp, ts, left)
    m = (1.0 - p) * f + p * h
    rows = ["t,f,h,f_mixed_at_p"]
    rows += [",".join(_g(x) for x in row) for row in zip(ts, f, h, m)]
    return "\n".join(rows) + "\n"


# ---------------------------------------------------------------------------
# commands


def _options(args, extra: dict) -> SolveOptions:
    kw = {}
    solver = extra.get("solver", {}) or {}
    for key in ("max_jumps", "xi_points", "refinements", "tol_p", "n_points"):
        if key in solver:
            kw[key] = solver[key]
    if "grid" in extra:
        kw["oracle_points"] = int(extra["grid"])
    if "tol" in extra:
        kw["tol"] = float(extra["tol"])
    if "max_jumps" in extra:
        kw["max_jumps"] = int(extra["max_jumps"])
    if args.grid is not None:
        kw["oracle_points"] = args.grid
    if args.tol is not None:
        kw["tol"] = args.tol
    if args.max_jumps is not None:
        kw["max_jumps"] = args.max_jumps
    return SolveOptions(**kw)


def analyze_cf(cf: CharacteristicFunction, opts: SolveOptions, out: Path) -> MeasureResult:
    res = measure_general(cf, opts)
    check = cross_check(cf, res, opts) if res.p < 1.0 else None
    out.mkdir(parents=True, exist_ok=True)
    _write_atomic(out / "report.json", _dump(build_report(cf, res, opts, check)))
    _write_atomic(out / "companion.json", _dump(spec_of(res.companion.function)))
    _write_atomic(out / "samples.csv", samples_csv(cf, res.companion.function, res.p, opts.oracle_points))
    return res


def cmd_analyze(args) -> int:
    cf, extra = read_spec(args.spec)
    opts = _options(args, extra)
    res = analyze_cf(cf, opts, Path(args.out))
    print(json.dumps(_clean({"p": res.p, "p_star": res.p_star, "class": res.tractability.value,
                             "markovian": res.verdict.markovian, "out": str(args.out)})))
    return EXIT_OK


def cmd_verify(args) -> int:
    cf, extra = read_spec(args.spec)
    comp, _ = read_spec(args.companion)
    if comp.family != cf.family:
        raise SpecError("companion family differs from the evolution family")
    if abs(comp.horizon - cf.horizon) > cfm.TIME_TOL:
        raise SpecError("companion horizon differs from the evolution horizon")
    p = _number(args.p, "p")
    if not 0.0 <= p <= 1.0:
        raise SpecError("p must lie in [0, 1]")
    opts = _options(args, extra)
    v = verify_markovian_grid(cfm.mix(cf, comp, p), opts.oracle_points, opts.tol)
    print(json.dumps(_clean({"p": p, "markovian": v.markovian, "residual": v.worst_residual,
                             "worst_pair": list(v.worst_pair), "grid_size": v.grid_size})))
    return EXIT_OK if v.markovian else EXIT_FAIL


def substitute(template, name: str, value: str):
    """Replace ``${name}`` in every string of a parsed template.

    A string that is exactly the placeholder takes the value text; inside a
    longer expression the value is parenthesised.
    """
    token = "${" + name + "}"
    if isinstance(template, dict):
        return {k: substitute(v, name, value) for k, v in template.items()}
    if isinstance(template, list):
        return [substitute(v, name, value) for v in template]
    if isinstance(template, str):
        if template == token:
            return value
        return template.replace(token, f"({value})")
    return template


def _slug(value: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", value)


def cmd_sweep(args) -> int:
    values = [v for v in args.values]
    if not values:
        raise SpecError("sweep needs at least one value")
    with open(args.template, encoding="utf-8") as fh:
        text = fh.read()
    if "${" + args.param + "}" not in text:
        raise SpecError(f"template has no placeholder ${{{args.param}}}")
    try:
        template = json.loads(text)
    except json.JSONDecodeError as err:
        raise SpecError(f"{args.template}: invalid JSON ({err})") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [f"{args.param},p,p_star,class"]
    for value in values:
        _number(value, args.param)
        cf, extra = load_spec(substitute(template, args.param, value))
        res = analyze_cf(cf, _options(args, extra), out / f"{args.param}={_slug(value)}")
        rows.append(f"{value},{_g(res.p)},{_g(res.p_star)},{res.tractability.value}")
        print(rows[-1])
    _write_atomic(out / "sweep.csv", "\n".join(rows) + "\n")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid", type=int, help="oracle grid points (default 2000)")
    common.add_argument("--tol", type=float, help="residual tolerance (default 1e-9)")
    common.add_argument("--max-jumps", type=int, dest="max_jumps", help="enumeration cap (default 10)")

    ap = argparse.ArgumentParser(prog="nmrobust", description="Robustness measure of non-Markovianity "
                                 "for depolarizing and dephasing evolutions.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="measure, companion and samples for one spec")
    a.add_argument("spec")
    a.add_argument("--out", default="out")
    a.set_defaults(func=cmd_analyze)

    v = sub.add_parser("verify", parents=[common], help="check a mixture with a companion at weight p")
    v.add_argument("spec")
    v.add_argument("companion")
    v.add_argument("p")
    v.set_defaults(func=cmd_verify)

    s = sub.add_parser("sweep", parents=[common], help="analyze a template over parameter values")
    s.add_argument("template")
    s.add_argument("param")
    s.add_argument("values", nargs="*")
    s.add_argument("--out", default="sweep")
    s.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except (SpecError, cfm.ValidationError, ex.ParseError, ex.EvaluationError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INVALID
    except (CapExceeded, BudgetExceeded) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CAP
    except InconsistencyError as err:
        print(f"internal error: {err}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
