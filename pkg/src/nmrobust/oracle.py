"""Brute-force verification used to corroborate every closed form.

Everything here works on sampled values: the exhaustive pairwise residual
scan, bisection for the smallest feasible mixing weight with a fixed
companion, and a search over simple companion families that does not use
any gap bookkeeping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import charfun as cfm
from . import exprparse as ex
from .charfun import CharacteristicFunction, Piece
from .family import ChannelFamily, divisibility_residual, running_violation

GRID_POINTS = 2000
GRID_TOL = 1e-9
BISECTION_TOL = 1e-4


@dataclass
class PairScan:
    max_residual: float
    worst: tuple[int, int]
    row_max: np.ndarray
    row_arg: np.ndarray

    def top(self, k: int, tol: float):
        """Up to ``k`` violating pairs from distinct rows, worst first."""
        order = np.argsort(-self.row_max, kind="stable")
        out = []
        for i in order[:k]:
            if self.row_max[i] <= tol:
                break
            out.append((int(i), int(self.row_arg[i]), float(self.row_max[i])))
        return out


def pairwise_scan(family: ChannelFamily, values: np.ndarray, block: int = 256) -> PairScan:
    """Maximum of the divisibility residual over all ordered pairs ``i <= j``."""
    v = np.asarray(values, dtype=float)
    n = v.size
    row_max = np.full(n, -np.inf)
    row_arg = np.zeros(n, dtype=int)
    cols = np.arange(n)
    for i0 in range(0, n, block):
        i1 = min(i0 + block, n)
        res = divisibility_residual(family, v[i0:i1, None], v[None, i0:])
        res = np.where(cols[None, i0:] >= cols[i0:i1, None], res, -np.inf)
        arg = np.argmax(res, axis=1)
        row_arg[i0:i1] = arg + i0
        row_max[i0:i1] = res[np.arange(i1 - i0), arg]
    i = int(np.argmax(row_max))
    return PairScan(float(row_max[i]), (i, int(row_arg[i])), row_max, row_arg)


def check_times(cf: CharacteristicFunction, n_points: int = GRID_POINTS,
                extra: Sequence[float] = ()) -> np.ndarray:
    """Uniform grid plus piece boundaries, run boundaries and ``extra`` times."""
    pts = [np.linspace(0.0, cf.horizon, max(int(n_points), 2)), cf.breakpoints(), extra]
    pts.append([r.t_in for r in cf.runs()] + [r.t_fin for r in cf.runs()])
    ts = np.unique(np.concatenate([np.asarray(p, dtype=float) for p in pts]))
    return ts[(ts >= 0) & (ts <= cf.horizon)]


@dataclass(frozen=True)
class GridVerdict:
    markovian: bool
    worst_residual: float
    worst_pair: tuple[float, float]
    grid_size: int


def verify_markovian_grid(cf: CharacteristicFunction, n_points: int = GRID_POINTS,
                          tol: float = GRID_TOL) -> GridVerdict:
    """Exhaustive pairwise check including both sides of every jump."""
    ts, vs = cfm.with_sides(cf, check_times(cf, n_points))
    scan = pairwise_scan(cf.family, vs)
    i, j = scan.worst
    return GridVerdict(scan.max_residual <= tol, scan.max_residual, (float(ts[i]), float(ts[j])), len(ts))


class CompanionInvalid(ValueError):
    """The companion itself is not Markovian."""


@dataclass
class BisectionResult:
    p: float
    monotone: bool = True
    spot_checks: list[tuple[float, bool]] = field(default_factory=list)
    evaluations: int = 0

    def __float__(self):
        return self.p


def minimal_p_bisection(cf: CharacteristicFunction, companion: CharacteristicFunction,
                        tol_p: float = BISECTION_TOL, n_points: int = GRID_POINTS,
                        tol: float = GRID_TOL, spot_checks: int = 5) -> BisectionResult:
    """Smallest ``p`` for which ``mix(cf, companion, p)`` passes the grid check.

    Feasibility is assumed monotone in ``p``; ``spot_checks`` interior points
    above the answer are re-verified and any failure flags the result.
    """
    count = 0

    def feasible(p: float) -> bool:
        nonlocal count
        count += 1
        return verify_markovian_grid(cfm.mix(cf, companion, p), n_points, tol).markovian

    if not verify_markovian_grid(companion, n_points, tol).markovian:
        raise CompanionInvalid("mixture at p=1 is not Markovian")
    if feasible(0.0):
        return BisectionResult(0.0, evaluations=count)
    lo, hi = 0.0, 1.0
    while hi - lo > tol_p:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    checks = []
    for q in np.linspace(hi, 1.0, spot_checks + 2)[1:-1]:
        checks.append((float(q), feasible(float(q))))
    return BisectionResult(hi, all(ok for _, ok in checks), checks, count)


# ---------------------------------------------------------------------------
# brute-force search over companion families


@dataclass(frozen=True)
class CompanionSpace:
    """Search family for :func:`brute_force_measure`.

    ``kind="levels"``: piecewise-linear companions with nodes at the run
    boundaries of the input, node values drawn from ``levels`` evenly spaced
    points of the admissible interval, jumps only at the input's jump times.

    ``kind="dense"``: continuous non-increasing piecewise-linear companions on
    a uniform grid of ``n_points`` nodes. For fixed ``p`` the pointwise
    largest feasible companion is built greedily, so the search is exact on
    the grid. Only for continuous inputs.
    """

    kind: str = "levels"
    levels: int = 9
    n_points: int = 400
    budget: int = 200_000


class BudgetExceeded(RuntimeError):
    pass


@dataclass
class BruteForceResult:
    p: float
    companion: CharacteristicFunction | None
    candidates: int


def brute_force_measure(cf: CharacteristicFunction, space: CompanionSpace = CompanionSpace(),
                        tol_p: float = BISECTION_TOL, tol: float = GRID_TOL) -> BruteForceResult:
    """Upper bound on the measure from an exhaustive search over ``space``."""
    if space.kind == "dense":
        return _dense_search(cf, space, tol_p, tol)
    if space.kind == "levels":
        return _levels_search(cf, space, tol_p, tol)
    raise ValueError(f"unknown companion space {space.kind!r}")


def _linear_pieces(segs: Sequence[tuple[float, float, float, float]]) -> list[Piece]:
    """Pieces interpolating ``(t0, t1, c0, c1)`` segments linearly in time."""
    pieces = []
    for t0, t1, c0, c1 in segs:
        if c1 == c0:
            e = ex.const(c0)
        else:
            slope = (c1 - c0) / (t1 - t0)
            e = ex.add(ex.const(c0), ex.mul(ex.const(slope), ex.sub(ex.T, ex.const(t0))))
        pieces.append(Piece(t0, t1, e))
    return pieces


def _feasible(family, f_vals, c_vals, p, tol) -> bool:
    m = (1.0 - p) * f_vals + p * c_vals
    return pairwise_scan(family, m).max_residual <= tol


def _bisect_values(family, f_vals, c_vals, tol_p, tol, upper: float = 1.0) -> float:
    if not _feasible(family, f_vals, c_vals, upper, tol):
        return math.inf
    if _feasible(family, f_vals, c_vals, 0.0, tol):
        return 0.0
    lo, hi = 0.0, upper
    while hi - lo > tol_p:
        mid = 0.5 * (lo + hi)
        if _feasible(family, f_vals, c_vals, mid, tol):
            hi = mid
        else:
            lo = mid
    return hi


def _levels_search(cf, space, tol_p, tol) -> BruteForceResult:
    fam = cf.family
    runs = cf.runs()
    knots = sorted({0.0, cf.horizon, *cf.jump_times, *(r.t_in for r in runs), *(r.t_fin for r in runs)})
    knots = [k for i, k in enumerate(knots) if i == 0 or k - knots[i - 1] > cfm.TIME_TOL]
    # one node per knot, two at a jump (left and right limits)
    slots: list[tuple[float, bool]] = []
    for k in knots:
        if cf.jump_at(k, cfm.TIME_TOL) is not None:
            slots.append((k, False))
            slots.append((k, True))
        else:
            slots.append((k, False))
    levels = [float(v) for v in np.linspace(fam.lo, fam.hi, space.levels)]
    times = np.unique(np.concatenate([np.linspace(0, cf.horizon, space.n_points), knots]))
    ts, f_vals = cfm.with_sides(cf, times)
    sides = cfm.side_flags(ts)
    if pairwise_scan(fam, f_vals).max_residual <= tol:
        return BruteForceResult(0.0, None, 0)

    def companion(nodes):
        segs = [(slots[i][0], slots[i + 1][0], nodes[i], nodes[i + 1])
                for i in range(len(slots) - 1) if slots[i + 1][0] > slots[i][0]]
        return cfm.assemble(fam, _linear_pieces(segs), cf.horizon, cf.tol)

    best_p, best_nodes, count = math.inf, None, 0

    def visit(prefix: list[float]):
        nonlocal best_p, best_nodes, count
        if len(prefix) == len(slots):
            count += 1
            if count > space.budget:
                raise BudgetExceeded(f"more than {space.budget} candidate companions")
            c_vals = cfm.values_at(companion(prefix), ts, sides)
            if math.isfinite(best_p):
                if not _feasible(fam, f_vals, c_vals, max(best_p - tol_p, 0.0), tol):
                    return
                p = _bisect_values(fam, f_vals, c_vals, tol_p, tol, best_p)
            else:
                p = _bisect_values(fam, f_vals, c_vals, tol_p, tol)
            if p < best_p:
                best_p, best_nodes = p, list(prefix)
            return
        if best_p == 0.0:
            return
        prev = prefix[-1]
        jump_side = slots[len(prefix)][1]
        for v in levels:
            if jump_side:
                ok = _ratio_ok(fam, prev, v)
            else:
                ok = abs(v) <= abs(prev) + 1e-15 and v * prev >= 0
            if ok and np.max(running_violation(fam, np.array(prefix + [v]))) <= tol:
                visit(prefix + [v])

    visit([1.0])
    if best_nodes is None:
        return BruteForceResult(1.0, None, count)
    return BruteForceResult(float(best_p), companion(best_nodes), count)


def _ratio_ok(fam, before, after) -> bool:
    if abs(before) <= 1e-12:
        return abs(after) <= 1e-12
    return fam.lo <= after / before <= fam.hi


def _dense_search(cf, space, tol_p, tol) -> BruteForceResult:
    if cf.jumps:
        raise ValueError("the dense companion space needs a continuous input")
    ts = np.linspace(0.0, cf.horizon, space.n_points)
    f = cf.value(ts)
    df = np.diff(f)

    def greedy(p: float):
        # largest non-increasing companion keeping the mixture non-increasing
        r = (1.0 - p) / p
        c = np.empty_like(f)
        c[0] = 1.0
        for k in range(len(df)):
            c[k + 1] = min(c[k], c[k] - r * df[k])
        m = (1.0 - p) * f + p * c
        if c.min() < -tol or m.min() < -tol:
            return None
        return c

    if pairwise_scan(cf.family, f).max_residual <= tol:
        return BruteForceResult(0.0, None, 1)
    lo, hi, count = 0.0, 1.0, 0
    while hi - lo > tol_p:
        mid = 0.5 * (lo + hi)
        count += 1
        if greedy(mid) is not None:
            hi = mid
        else:
            lo = mid
    c = np.maximum(greedy(hi), 0.0)
    if not _feasible(cf.family, f, c, hi, tol):
        raise RuntimeError("greedy companion failed the pairwise check")
    segs = []
    for a, b, u, v in zip(ts[:-1], ts[1:], c[:-1], c[1:]):
        if segs and u == v and segs[-1][2] == segs[-1][3] == u:
            segs[-1] = (segs[-1][0], float(b), u, v)
        else:
            segs.append((float(a), float(b), float(u), float(v)))
    comp = cfm.assemble(cf.family, _linear_pieces(segs), cf.horizon, cf.tol)
    return BruteForceResult(hi, comp, count)
