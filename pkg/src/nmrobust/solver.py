"""Measure computation for inputs without a closed form.

The continuity intervals of ``f`` get two sign labels: ``sa`` for the
companion and ``sb`` for the mixture. For each compatible pair the companion
is built from a small set of rules. On a run it either stays flat or moves
as ``-df / D`` with ``D = p / (1 - p)``, which makes the mixture flat there.
At each jump its ratio is fixed (1 or the lower end of the admissible
interval) or left as a free parameter. On intervals where the two labels
differ, it shrinks by a free fraction of its entering magnitude. For each
parameter choice the smallest feasible ``p`` is found by scan and bisection.
Feasibility is decided on samples with the O(N) running check. The winner
is re-checked by the pairwise oracle.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import charfun as cfm
from . import exprparse as ex
from .charfun import CharacteristicFunction, MonotoneRun
from .companion import (Companion, Segment, build_continuous_companion,
                        build_positive_companion, materialize, measure_closed_form)
from .family import ZERO_TRAP, running_violation
from .gaps import GapReport, extract_gaps
from .markov import (MarkovVerdict, TractabilityClass, classify_tractable, is_markovian,
                     lower_bound_pstar, pstar_available)
from .oracle import verify_markovian_grid

SignVector = tuple[int, ...]


class CapExceeded(RuntimeError):
    """More jumps than the enumeration cap allows."""


@dataclass(frozen=True)
class SolveOptions:
    max_jumps: int = 10
    tol_p: float = 1e-6
    xi_points: int = 33
    refinements: int = 2
    refine_factor: int = 10
    p_scan: int = 33
    n_points: int = 800
    tol: float = 1e-9
    oracle_points: int = 2000
    extra_breaks: tuple[float, ...] = ()
    enumerate_always: bool = False


@dataclass
class PabResult:
    p: float
    companion: Companion | None
    params: dict = field(default_factory=dict)
    reason: str = ""


@dataclass
class MeasureResult:
    p: float
    p_star: float
    p_star_available: bool
    tractability: TractabilityClass
    companion: Companion | None
    gaps: GapReport
    verdict: MarkovVerdict
    sign_vectors: tuple[SignVector, SignVector] | None = None
    params: dict = field(default_factory=dict)
    pathway: str = ""
    notes: list[str] = field(default_factory=list)
    pairs: list[tuple[SignVector, SignVector, float, str]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# interval layout shared by all sign-vector pairs


@dataclass
class _Cut:
    time: float
    left: float
    right: float
    markovian: bool


@dataclass
class _Layout:
    cf: CharacteristicFunction
    cuts: list[_Cut]
    intervals: list[tuple[float, float]]
    runs: list[list[MonotoneRun]]
    nm: list[bool]
    ts: np.ndarray
    f: np.ndarray
    first: list[int]
    last: list[int]
    seg_sign: np.ndarray
    seg_nm: np.ndarray
    seg_interval: np.ndarray


def _split_run(r: MonotoneRun, t: float, cf: CharacteristicFunction) -> list[MonotoneRun]:
    if not r.t_in < t < r.t_fin:
        return [r]
    mid = cf.value(t)
    return [MonotoneRun(r.t_in, t, r.sign, r.abs_increasing and r.sign * (mid - r.start) > cfm.RUN_TOL, r.start, mid),
            MonotoneRun(t, r.t_fin, r.sign, r.abs_increasing and r.sign * (r.end - mid) > cfm.RUN_TOL, mid, r.end)]


def _layout(cf: CharacteristicFunction, opts: SolveOptions) -> _Layout:
    fam = cf.family
    extra = sorted(t for t in opts.extra_breaks if 0 < t < cf.horizon and cf.jump_at(t, cfm.TIME_TOL) is None)
    cuts = []
    for t in sorted(cf.jump_times + extra):
        j = cf.jump_at(t, cfm.TIME_TOL)
        if j is None:
            v = cf.value(t)
            cuts.append(_Cut(t, v, v, True))
        else:
            cuts.append(_Cut(t, j.left, j.right, fam.lo <= j.ratio <= fam.hi))
    bounds = [0.0] + [c.time for c in cuts] + [cf.horizon]
    intervals = list(zip(bounds[:-1], bounds[1:]))
    runs = cf.runs()
    for t in extra:
        runs = [piece for r in runs for piece in _split_run(r, t, cf)]
    per = [[r for r in runs if a - cfm.TIME_TOL <= r.t_in and r.t_fin <= b + cfm.TIME_TOL] for a, b in intervals]
    nm = [any(r.abs_increasing for r in rs) for rs in per]

    grid = np.unique(np.concatenate([
        np.linspace(0.0, cf.horizon, opts.n_points), bounds,
        [r.t_in for r in runs], [r.t_fin for r in runs]]))
    ts, f = [], []
    first, last = [], []
    seg_sign, seg_nm, seg_int = [], [], []
    for i, (a, b) in enumerate(intervals):
        sel = grid[(grid >= a) & (grid <= b)]
        vals = cf.value(sel)
        if i > 0:
            vals[0] = cuts[i - 1].right
        if i < len(intervals) - 1:
            vals[-1] = cuts[i].left
        first.append(len(ts))
        ts.extend(sel.tolist())
        f.extend(vals.tolist())
        last.append(len(ts) - 1)
        starts = np.array([r.t_in for r in per[i]])
        mids = 0.5 * (sel[:-1] + sel[1:])
        idx = np.clip(np.searchsorted(starts, mids, side="right") - 1, 0, len(per[i]) - 1)
        seg_sign.extend(per[i][k].sign for k in idx)
        seg_nm.extend(per[i][k].abs_increasing for k in idx)
        seg_int.extend([i] * len(idx))
        if i < len(intervals) - 1:
            # placeholder for the jump step between intervals
            seg_sign.append(0)
            seg_nm.append(False)
            seg_int.append(-1)
    return _Layout(cf, cuts, intervals, per, nm, np.array(ts), np.array(f), first, last,
                   np.array(seg_sign), np.array(seg_nm, dtype=bool), np.array(seg_int))


# ---------------------------------------------------------------------------
# sign vectors


def enumerate_sign_vectors(cf: CharacteristicFunction, opts: SolveOptions = SolveOptions()) -> list[SignVector]:
    """All sign vectors with a leading +1, in binary order of the remaining
    entries with the second entry as the fastest-changing one."""
    n = len(cf.jumps) + len([t for t in opts.extra_breaks if 0 < t < cf.horizon
                             and cf.jump_at(t, cfm.TIME_TOL) is None])
    if n > opts.max_jumps:
        raise CapExceeded(f"{n} discontinuities exceed the enumeration cap of {opts.max_jumps}")
    return [(1,) + tuple(-1 if (a >> k) & 1 else 1 for k in range(n)) for a in range(2 ** n)]


def compatible(sa: Sequence[int], sb: Sequence[int], cf: CharacteristicFunction,
               opts: SolveOptions = SolveOptions()) -> bool:
    """False when the labels differ on an interval where ``f`` is non-Markovian."""
    if len(sa) != len(sb):
        raise ValueError("sign vectors differ in length")
    lay = _layout(cf, opts)
    return _compatible(lay, sa, sb)


def _compatible(lay: _Layout, sa, sb) -> bool:
    return all(not (lay.nm[i] and sa[i] != sb[i]) for i in range(len(sa)))


# ---------------------------------------------------------------------------
# companion rules


@dataclass(frozen=True)
class _Param:
    name: str
    lo: float
    hi: float


def _jump_rule(lay: _Layout, k: int, sa, sb):
    """Fixed ratio or free-parameter range for the companion at cut ``k``."""
    lo = lay.cf.family.lo
    cut = lay.cuts[k]
    keep = sa[k + 1] == sa[k]
    if sa[k] == sb[k] and sa[k + 1] == sb[k + 1]:
        s = sa[k]
        if cut.markovian:
            key = 1 if cut.left * s >= -ZERO_TRAP else -1
            if key > 0:
                return 1.0 if keep else lo
            return _Param(f"xi_{k + 1}", 0.0, 1.0) if keep else _Param(f"xi_{k + 1}", lo, 0.0)
        key = 1 if cut.right * s > 0 else -1
        if key > 0:
            return _Param(f"xi_{k + 1}", 0.0, 1.0) if keep else lo
        return 1.0 if keep else _Param(f"xi_{k + 1}", lo, 0.0)
    return _Param(f"xibar_{k + 1}", 0.0, 1.0) if keep else _Param(f"xibar_{k + 1}", lo, 0.0)


def _plan(lay: _Layout, sa, sb):
    """Jump rules, mixed-interval parameters and the list of free parameters."""
    n = len(lay.intervals)
    jumps = [_jump_rule(lay, k, sa, sb) for k in range(n - 1)]
    mixed: list[_Param | None] = []
    for i in range(n):
        if sa[i] == sb[i]:
            mixed.append(None)
            continue
        signs = {r.sign for r in lay.runs[i] if r.sign != 0}
        if signs - {sb[i]}:
            return None
        mixed.append(_Param(f"lambda_{i + 1}", 0.0, 1.0))
    free = [j for j in jumps if isinstance(j, _Param)] + [m for m in mixed if m is not None]
    return jumps, mixed, free


def _slope_factor(sign: int, nm: bool, s: int, inv_d: float) -> float:
    """``k`` in ``dc = k * df`` on a run of the given sign for a same-label interval."""
    if sign == 0:
        return 0.0
    if sign == s:
        return -inv_d if nm else 0.0
    return 0.0 if nm else -inv_d


def _interval_decrease(lay: _Layout, i: int) -> float:
    a, b = lay.first[i], lay.last[i]
    return abs(lay.f[a]) - abs(lay.f[b])


def _companion_values(lay: _Layout, sa, sb, plan, values: dict, p: float):
    jumps, mixed, _ = plan
    inv_d = (1.0 - p) / p
    df = np.diff(lay.f)
    c = np.empty_like(lay.f)
    val = 1.0
    for i in range(len(lay.intervals)):
        a, b = lay.first[i], lay.last[i]
        if i > 0:
            rule = jumps[i - 1]
            ratio = values[rule.name] if isinstance(rule, _Param) else rule
            val = ratio * val
        c[a] = val
        if mixed[i] is None:
            k = np.array([_slope_factor(s, nm, sa[i], inv_d)
                          for s, nm in zip(lay.seg_sign[a:b], lay.seg_nm[a:b])])
        else:
            dec = _interval_decrease(lay, i)
            r = values[mixed[i].name] * abs(val) / dec if dec > cfm.RUN_TOL else 0.0
            k = np.full(b - a, -r)
        if b > a:
            c[a + 1:b + 1] = val + np.cumsum(k * df[a:b])
        val = c[b]
    return c


def _with_crossings(lay: _Layout, v: np.ndarray) -> np.ndarray:
    """Insert an exact zero wherever a continuous stretch changes sign between samples."""
    cross = (v[:-1] * v[1:] < 0) & (lay.seg_interval >= 0)
    if not cross.any():
        return v
    return np.insert(v, np.nonzero(cross)[0] + 1, 0.0)


def _violation(lay: _Layout, v: np.ndarray) -> float:
    return float(np.max(running_violation(lay.cf.family, _with_crossings(lay, v))))


def _feasible(lay: _Layout, sa, sb, plan, values, p: float, tol: float) -> bool:
    fam = lay.cf.family
    if p <= 0.0:
        return _violation(lay, lay.f) <= tol
    c = _companion_values(lay, sa, sb, plan, values, p)
    if c.min() < fam.lo - tol or c.max() > fam.hi + tol:
        return False
    if _violation(lay, c) > tol:
        return False
    return _violation(lay, (1.0 - p) * lay.f + p * c) <= tol


def _min_p(lay, sa, sb, plan, values, opts: SolveOptions, tol: float, below: float = math.inf) -> float:
    """Smallest feasible ``p`` (scan, then bisection); ``inf`` if none below ``below``."""
    prev = 0.0
    if _feasible(lay, sa, sb, plan, values, 0.0, tol):
        return 0.0
    for q in np.linspace(0.0, 1.0, opts.p_scan)[1:]:
        if q >= below + opts.tol_p:
            break
        if _feasible(lay, sa, sb, plan, values, float(q), tol):
            lo, hi = prev, float(q)
            while hi - lo > opts.tol_p:
                mid = 0.5 * (lo + hi)
                if _feasible(lay, sa, sb, plan, values, mid, tol):
                    hi = mid
                else:
                    lo = mid
            return hi
        prev = float(q)
    return math.inf


def _search(lay, sa, sb, plan, opts: SolveOptions, tol: float):
    """Grid search over the free parameters followed by local refinement."""
    free = plan[2]
    if not free:
        return _min_p(lay, sa, sb, plan, {}, opts, tol), {}
    grids = [np.linspace(q.lo, q.hi, opts.xi_points) for q in free]
    best_p, best = math.inf, {q.name: q.lo for q in free}

    def consider(vals):
        nonlocal best_p, best
        p = _min_p(lay, sa, sb, plan, vals, opts, tol, best_p)
        if p < best_p - opts.tol_p:
            best_p, best = p, dict(vals)

    if len(free) <= 2:
        for combo in itertools.product(*grids):
            consider({q.name: float(v) for q, v in zip(free, combo)})
    else:
        current = {q.name: float(g[len(g) // 2]) for q, g in zip(free, grids)}
        for _ in range(3):
            for q, g in zip(free, grids):
                for v in g:
                    consider({**(best if math.isfinite(best_p) else current), q.name: float(v)})
    step = [(q.hi - q.lo) / (opts.xi_points - 1) for q in free]
    for _ in range(opts.refinements):
        if not math.isfinite(best_p):
            break
        step = [s / opts.refine_factor for s in step]
        for q, s in zip(free, step):
            centre = best[q.name]
            for v in centre + s * np.arange(-opts.refine_factor, opts.refine_factor + 1):
                if q.lo <= v <= q.hi:
                    consider({**best, q.name: float(v)})
    return best_p, best


def _materialize(lay: _Layout, sa, sb, plan, values: dict, p: float) -> CharacteristicFunction:
    """Closed-form companion matching :func:`_companion_values`."""
    cf = lay.cf
    jumps, mixed, _ = plan
    inv_d = (1.0 - p) / p
    segs: list[Segment] = []
    val = 1.0
    for i, (a, b) in enumerate(lay.intervals):
        if i > 0:
            rule = jumps[i - 1]
            val = (values[rule.name] if isinstance(rule, _Param) else rule) * val
        if mixed[i] is not None:
            dec = _interval_decrease(lay, i)
            r = values[mixed[i].name] * abs(val) / dec if dec > cfm.RUN_TOL else 0.0
        for run in lay.runs[i]:
            k = -r if mixed[i] is not None else _slope_factor(run.sign, run.abs_increasing, sa[i], inv_d)
            for piece in cf.pieces:
                u, v = max(run.t_in, piece.t_start, a), min(run.t_fin, piece.t_end, b)
                if v <= u:
                    continue
                if k == 0.0:
                    seg = Segment(u, v, piece.expr, val)
                else:
                    seg = Segment(u, v, piece.expr, val, k, float(ex.evaluate(piece.expr, u)))
                segs.append(seg)
                val = seg.end_value()
    return materialize(cf, segs, validate=False)


def _fast_tol(cf: CharacteristicFunction, tol: float) -> float:
    # the running check measures violations in units of f; the pairwise
    # residual scales them by up to 2(d^2 - 1)
    if cf.family.kind == "depolarizing":
        return tol / (2 * (cf.family.d ** 2 - 1))
    return tol / 2


def solve_pab(cf: CharacteristicFunction, sa: SignVector, sb: SignVector,
              opts: SolveOptions = SolveOptions(), _lay: _Layout | None = None) -> PabResult:
    """Smallest mixing weight for one pair of sign vectors."""
    lay = _lay or _layout(cf, opts)
    if len(sa) != len(lay.intervals) or len(sb) != len(lay.intervals):
        raise ValueError("sign vector length must equal the number of continuity intervals")
    if not _compatible(lay, sa, sb):
        return PabResult(1.0, None, reason="labels differ on a non-Markovian interval")
    plan = _plan(lay, sa, sb)
    if plan is None:
        return PabResult(1.0, None, reason="mixture sign cannot follow the labels")
    tol = _fast_tol(cf, opts.tol)
    p, values = _search(lay, sa, sb, plan, opts, tol)
    if not math.isfinite(p):
        return PabResult(1.0, None, reason="no feasible parameters")
    if p <= 0.0:
        const = materialize(cf, [Segment(0.0, cf.horizon, ex.ONE, 1.0)], validate=False)
        return PabResult(0.0, Companion(const, "solver", math.inf), values)
    comp = _materialize(lay, sa, sb, plan, values, p)
    params = dict(values)
    params["D"] = p / (1.0 - p) if p < 1.0 else math.inf
    return PabResult(float(p), Companion(comp, "solver", params["D"], params), params)


# ---------------------------------------------------------------------------
# top level


def _constant_companion(cf: CharacteristicFunction) -> Companion:
    return Companion(materialize(cf, [Segment(0.0, cf.horizon, ex.ONE, 1.0)], validate=False),
                     "constant", math.inf)


def _enumerate(cf, opts, result: MeasureResult):
    vectors = enumerate_sign_vectors(cf, opts)
    lay = _layout(cf, opts)
    best: tuple[float, SignVector, SignVector, PabResult] | None = None
    for sa in vectors:
        for sb in vectors:
            res = solve_pab(cf, sa, sb, opts, lay)
            result.pairs.append((sa, sb, res.p, res.reason))
            if res.companion is None:
                continue
            if best is None or res.p < best[0] - opts.tol_p:
                best = (res.p, sa, sb, res)
    if best is None:
        return 1.0, None, None, {}
    return best[0], best[3].companion, (best[1], best[2]), best[3].params


def measure_general(cf: CharacteristicFunction, opts: SolveOptions = SolveOptions()) -> MeasureResult:
    """Robustness measure with the pathway chosen by :func:`classify_tractable`."""
    n_disc = len(cf.jumps)
    if n_disc > opts.max_jumps:
        raise CapExceeded(f"{n_disc} jumps exceed the enumeration cap of {opts.max_jumps}")
    verdict = is_markovian(cf, opts.oracle_points, opts.tol)
    gaps = extract_gaps(cf)
    cls = classify_tractable(cf)
    result = MeasureResult(0.0, lower_bound_pstar(cf, opts.oracle_points, opts.tol), pstar_available(cf),
                           cls, None, gaps, verdict)
    if verdict.markovian and not opts.enumerate_always:
        result.companion = _constant_companion(cf)
        result.pathway = "markovian"
        return result
    if cls is not TractabilityClass.GENERAL and not opts.enumerate_always:
        p = measure_closed_form(gaps, cls)
        result.p, result.pathway = p, "closed_form"
        if p >= 1.0:
            result.companion = _constant_companion(cf)
            if gaps.divergent:
                result.notes.append(f"gap sum diverges (periodic tail with period {gaps.period:.12g})")
            return result
        if cls is TractabilityClass.POSITIVE:
            comp = build_positive_companion(cf, gaps)
        else:
            comp = build_continuous_companion(cf, gaps.gamma)
        mixed = cfm.mix(cf, comp.function, p)
        if verify_markovian_grid(mixed, opts.oracle_points, opts.tol).markovian:
            result.companion = comp
            return result
        if cls is TractabilityClass.CONTINUOUS:
            raise RuntimeError("closed-form companion failed the oracle on a continuous input")
        result.notes.append(f"{cls.value} companion failed the oracle at p={p:.6g}; enumerating instead")
    p, comp, vectors, params = _enumerate(cf, opts, result)
    result.p, result.companion, result.sign_vectors, result.params = p, comp, vectors, params
    result.pathway = "enumeration"
    if comp is None:
        result.companion = _constant_companion(cf)
        result.notes.append("no feasible companion found; p set to 1")
    return result


@dataclass(frozen=True)
class CrossCheck:
    p: float
    passes_at_p: bool
    residual_at_p: float
    p_below: float | None
    fails_below: bool | None

    @property
    def agrees(self) -> bool:
        return self.passes_at_p and self.fails_below is not False

    def to_dict(self) -> dict:
        return {"p": self.p, "passes_at_p": self.passes_at_p, "residual_at_p": self.residual_at_p,
                "p_below": self.p_below, "fails_below": self.fails_below, "agrees": self.agrees}


def cross_check(cf: CharacteristicFunction, result: MeasureResult, opts: SolveOptions = SolveOptions(),
                margin: float = 1e-3) -> CrossCheck:
    """Pairwise-oracle check that the mixture passes at ``p`` and fails just below it."""
    comp = result.companion.function
    at = verify_markovian_grid(cfm.mix(cf, comp, result.p), opts.oracle_points, opts.tol)
    below = result.p - max(margin, 2 * opts.tol_p)
    if below < 0:
        return CrossCheck(result.p, at.markovian, at.worst_residual, None, None)
    under = verify_markovian_grid(cfm.mix(cf, comp, below), opts.oracle_points, opts.tol)
    return CrossCheck(result.p, at.markovian, at.worst_residual, below, not under.markovian)
