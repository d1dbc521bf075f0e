"""Piecewise characteristic functions with explicit jumps.

A characteristic function is a list of closed-form pieces tiling
``[0, horizon]``. Boundaries where neighbouring pieces disagree are jumps.
Values are right-continuous at jumps; the left limit is available separately.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from . import exprparse as ex
from .exprparse import Expr
from .family import ZERO_TRAP, ChannelFamily

TIME_TOL = 1e-9
VALUE_TOL = 1e-9
SLOPE_TOL = 1e-12
RUN_TOL = 1e-10


class ValidationError(ValueError):
    """Input does not describe a valid characteristic function."""


class RangeViolation(ValidationError):
    def __init__(self, t: float, value: float, lo: float, hi: float):
        self.t, self.value = t, value
        super().__init__(
            f"range violation at t={t:.12g}: value {value:.12g} outside [{lo:.12g}, {hi:.12g}]"
        )


class InitialConditionViolation(ValidationError):
    def __init__(self, value: float):
        self.value = value
        super().__init__(f"initial condition violated: f(0)={value:.12g}, expected 1")


class TilingError(ValidationError):
    pass


@dataclass(frozen=True)
class Piece:
    t_start: float
    t_end: float
    expr: Expr

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise TilingError(f"empty piece [{self.t_start}, {self.t_end}]")


@dataclass(frozen=True)
class JumpEvent:
    time: float
    left: float
    right: float
    ratio: float


def ratio_of(left: float, right: float) -> float:
    """Jump ratio with the conventions for vanishing left limits."""
    if abs(left) <= ZERO_TRAP:
        if abs(right) <= ZERO_TRAP:
            return 1.0
        return math.copysign(math.inf, right)
    return right / left


@dataclass(frozen=True)
class MonotoneRun:
    """Maximal stretch of a continuity interval where ``f`` keeps its sign
    and ``|f|`` is either non-increasing or increasing."""

    t_in: float
    t_fin: float
    sign: int
    abs_increasing: bool
    start: float
    end: float

    @property
    def increment(self) -> float:
        return self.end - self.start

    @property
    def rising(self) -> bool:
        """Whether ``f`` itself increases over the run."""
        return self.increment > RUN_TOL


@dataclass(frozen=True)
class CharacteristicFunction:
    family: ChannelFamily
    pieces: tuple[Piece, ...]
    jumps: tuple[JumpEvent, ...]
    horizon: float
    tol: float = VALUE_TOL
    _derivs: tuple[Expr, ...] = field(default=(), repr=False, compare=False)
    _runs: list = field(default_factory=list, repr=False, compare=False)

    # -- structure ---------------------------------------------------------

    @property
    def starts(self) -> np.ndarray:
        return np.array([p.t_start for p in self.pieces])

    @property
    def jump_times(self) -> list[float]:
        return [j.time for j in self.jumps]

    def derivative_expr(self, k: int) -> Expr:
        return self._derivs[k]

    def continuity_intervals(self) -> list[tuple[float, float]]:
        cuts = [0.0] + self.jump_times + [self.horizon]
        return list(zip(cuts[:-1], cuts[1:]))

    def breakpoints(self) -> list[float]:
        return [p.t_start for p in self.pieces] + [self.horizon]

    def jump_at(self, t: float, atol: float = 1e-12) -> JumpEvent | None:
        for j in self.jumps:
            if abs(j.time - t) <= atol:
                return j
        return None

    # -- evaluation --------------------------------------------------------

    def _index(self, t: np.ndarray, side: str) -> np.ndarray:
        idx = np.searchsorted(self.starts, t, side="right" if side == "right" else "left") - 1
        return np.clip(idx, 0, len(self.pieces) - 1)

    def _eval_by_index(self, exprs, t: np.ndarray, idx: np.ndarray) -> np.ndarray:
        out = np.empty(t.shape, dtype=float)
        for k in np.unique(idx):
            mask = idx == k
            out[mask] = ex.evaluate(exprs[k], t[mask])
        return out

    def value(self, t, side: str = "right"):
        """Evaluate at ``t``; ``side`` selects the limit used at piece boundaries."""
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        idx = self._index(arr, side)
        out = self._eval_by_index([p.expr for p in self.pieces], arr, idx)
        return float(out[0]) if np.ndim(t) == 0 else out

    __call__ = value

    def left(self, t: float) -> float:
        return self.value(t, "left")

    def right(self, t: float) -> float:
        return self.value(t, "right")

    def slope(self, t, side: str = "right"):
        """One-sided time derivative from the adjacent piece's symbolic derivative."""
        arr = np.atleast_1d(np.asarray(t, dtype=float))
        idx = self._index(arr, side)
        out = self._eval_by_index(self._derivs, arr, idx)
        return float(out[0]) if np.ndim(t) == 0 else out

    def restrict(self, horizon: float) -> "CharacteristicFunction":
        """Truncate to ``[0, horizon]``."""
        if not 0 < horizon <= self.horizon:
            raise ValueError("new horizon must lie in (0, horizon]")
        pieces = [
            Piece(p.t_start, min(p.t_end, horizon), p.expr)
            for p in self.pieces if p.t_start < horizon
        ]
        return assemble(self.family, pieces, horizon, self.tol, validate=False)

    def runs(self) -> list[MonotoneRun]:
        if not self._runs:
            self._runs.extend(decompose_runs(self))
        return list(self._runs)


# ---------------------------------------------------------------------------
# construction


def build(
    family: ChannelFamily,
    pieces: Sequence[Piece],
    declared_jumps: Iterable[float] = (),
    horizon: float | None = None,
    tol: float = VALUE_TOL,
) -> CharacteristicFunction:
    """Validate pieces and assemble a characteristic function.

    Boundary mismatches larger than ``tol`` become jumps. Every time in
    ``declared_jumps`` must coincide with one of them.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    pieces = list(pieces)
    if not pieces:
        raise TilingError("no pieces")
    if horizon is None:
        horizon = pieces[-1].t_end
    cf = assemble(family, pieces, float(horizon), tol, validate=True)
    for tau in declared_jumps:
        if cf.jump_at(tau, atol=TIME_TOL) is None:
            raise ValidationError(f"declared jump at t={tau:.12g} has matching one-sided values")
    return cf


def assemble(family: ChannelFamily, pieces: Sequence[Piece], horizon: float,
             tol: float = VALUE_TOL, validate: bool = False) -> CharacteristicFunction:
    """Assemble pieces, detecting jumps; ``validate`` adds range and initial-value checks."""
    if abs(pieces[0].t_start) > TIME_TOL:
        raise TilingError(f"first piece starts at {pieces[0].t_start:.12g}, not 0")
    fixed = [Piece(0.0, pieces[0].t_end, pieces[0].expr)] if pieces[0].t_start != 0 else [pieces[0]]
    for prev, cur in zip(pieces[:-1], pieces[1:]):
        gap = cur.t_start - prev.t_end
        if abs(gap) > TIME_TOL:
            kind = "gap" if gap > 0 else "overlap"
            raise TilingError(f"tiling {kind} between {prev.t_end:.12g} and {cur.t_start:.12g}")
        fixed.append(Piece(fixed[-1].t_end, cur.t_end, cur.expr) if gap else cur)
    if abs(fixed[-1].t_end - horizon) > TIME_TOL:
        raise TilingError(f"pieces end at {fixed[-1].t_end:.12g}, horizon is {horizon:.12g}")

    jumps = []
    for prev, cur in zip(fixed[:-1], fixed[1:]):
        tau = cur.t_start
        a = _eval_checked(prev.expr, tau)
        b = _eval_checked(cur.expr, tau)
        if abs(a - b) > tol:
            jumps.append(JumpEvent(tau, a, b, ratio_of(a, b)))
    derivs = tuple(ex.differentiate(p.expr) for p in fixed)
    cf = CharacteristicFunction(family, tuple(fixed), tuple(jumps), horizon, tol, derivs)
    if validate:
        _check_range(cf)
        f0 = _eval_checked(fixed[0].expr, 0.0)
        if abs(f0 - 1.0) > tol:
            raise InitialConditionViolation(f0)
    return cf


def _eval_checked(e: Expr, t):
    try:
        v = ex.evaluate(e, t)
    except ex.EvaluationError as err:
        raise ValidationError(f"expression undefined near t={np.min(t):.12g}: {err}") from None
    if not np.all(np.isfinite(v)):
        raise ValidationError("expression is not finite on its piece")
    return v


def _piece_samples(p: Piece) -> np.ndarray:
    n = int(min(max(257, math.ceil(64 * (p.t_end - p.t_start)) + 1), 200_001))
    return np.linspace(p.t_start, p.t_end, n)


def _check_range(cf: CharacteristicFunction):
    lo, hi = cf.family.lo - cf.tol, cf.family.hi + cf.tol
    worst = None
    for k, p in enumerate(cf.pieces):
        ts = _piece_samples(p)
        crit = _roots(cf._derivs[k], ts, SLOPE_TOL)
        ts = np.sort(np.concatenate([ts, crit]))
        vs = _eval_checked(p.expr, ts)
        bad = np.nonzero((vs < lo) | (vs > hi))[0]
        if bad.size:
            i = bad[0]
            if worst is None or ts[i] < worst[0]:
                worst = (float(ts[i]), float(vs[i]))
    if worst is not None:
        raise RangeViolation(worst[0], worst[1], cf.family.lo, cf.family.hi)


def _signs(v: np.ndarray, thresh: float) -> np.ndarray:
    return np.where(v > thresh, 1, np.where(v < -thresh, -1, 0))


def _roots(e: Expr, ts: np.ndarray, thresh: float, xtol: float = TIME_TOL) -> np.ndarray:
    """Sign changes of ``e`` on the sample grid ``ts`` refined by bracketing."""
    vals = ex.evaluate(e, ts)
    s = _signs(vals, thresh)
    nz = np.nonzero(s)[0]
    if nz.size < 2:
        return np.empty(0)
    flips = np.nonzero(s[nz[:-1]] != s[nz[1:]])[0]
    out = []
    for k in flips:
        a, b = ts[nz[k]], ts[nz[k + 1]]
        try:
            r = brentq(lambda x: ex.evaluate(e, x), a, b, xtol=min(xtol, 1e-12))
        except ValueError:
            r = 0.5 * (a + b)
        out.append(r)
    return np.array(out)


# ---------------------------------------------------------------------------
# runs


def decompose_runs(cf: CharacteristicFunction, tol: float = TIME_TOL) -> list[MonotoneRun]:
    """Split every continuity interval into maximal signed monotone runs.

    Cuts are placed at sign changes of the derivative (interior extrema), at
    sign changes of ``f`` and at piece boundaries; neighbouring pieces of the
    same kind are then merged. Increments below ``RUN_TOL`` count as flat.
    """
    runs: list[MonotoneRun] = []
    for a, b in cf.continuity_intervals():
        segs = []
        for k, p in enumerate(cf.pieces):
            if p.t_end <= a or p.t_start >= b:
                continue
            ts = _piece_samples(p)
            cuts = np.concatenate([
                _roots(cf._derivs[k], ts, SLOPE_TOL, tol),
                _roots(p.expr, ts, ZERO_TRAP, tol),
            ])
            cuts = np.unique(cuts[(cuts > p.t_start + tol) & (cuts < p.t_end - tol)])
            edges = np.concatenate([[p.t_start], cuts, [p.t_end]])
            vals = ex.evaluate(p.expr, edges)
            mids = ex.evaluate(p.expr, 0.5 * (edges[:-1] + edges[1:]))
            for i in range(len(edges) - 1):
                sign = int(_signs(np.array([mids[i]]), ZERO_TRAP)[0])
                inc = vals[i + 1] - vals[i]
                abs_inc = sign != 0 and sign * inc > RUN_TOL
                segs.append(MonotoneRun(float(edges[i]), float(edges[i + 1]), sign, bool(abs_inc),
                                        float(vals[i]), float(vals[i + 1])))
        merged: list[MonotoneRun] = []
        for s in segs:
            if merged and merged[-1].sign == s.sign and merged[-1].abs_increasing == s.abs_increasing:
                m = merged[-1]
                merged[-1] = MonotoneRun(m.t_in, s.t_fin, m.sign, m.abs_increasing, m.start, s.end)
            else:
                merged.append(s)
        runs.extend(merged)
    return runs


def jump_ratio(cf: CharacteristicFunction, tau: float) -> float:
    j = cf.jump_at(tau, atol=TIME_TOL)
    return 1.0 if j is None else j.ratio


# ---------------------------------------------------------------------------
# mixtures and sampling


def mix(cf_a: CharacteristicFunction, cf_b: CharacteristicFunction, p: float) -> CharacteristicFunction:
    """Pointwise convex combination ``(1 - p) * a + p * b``."""
    if cf_a.family != cf_b.family:
        raise ValueError(f"family mismatch: {cf_a.family} vs {cf_b.family}")
    if abs(cf_a.horizon - cf_b.horizon) > TIME_TOL:
        raise ValueError("horizon mismatch")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    cuts = sorted(set(cf_a.breakpoints()) | set(cf_b.breakpoints()))
    cuts = [c for i, c in enumerate(cuts) if i == 0 or c - cuts[i - 1] > TIME_TOL]
    cuts[-1] = cf_a.horizon
    wa, wb = ex.const(1.0 - p), ex.const(p)
    pieces: list[Piece] = []
    for u, v in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (u + v)
        ea = cf_a.pieces[int(cf_a._index(np.array([mid]), "right")[0])].expr
        eb = cf_b.pieces[int(cf_b._index(np.array([mid]), "right")[0])].expr
        e = ex.add(ex.mul(wa, ea), ex.mul(wb, eb))
        if pieces and pieces[-1].expr == e and not _is_cut_jump(cf_a, cf_b, u):
            pieces[-1] = Piece(pieces[-1].t_start, v, e)
        else:
            pieces.append(Piece(u, v, e))
    return assemble(cf_a.family, pieces, cf_a.horizon, cf_a.tol, validate=False)


def _is_cut_jump(a: CharacteristicFunction, b: CharacteristicFunction, t: float) -> bool:
    return a.jump_at(t, TIME_TOL) is not None or b.jump_at(t, TIME_TOL) is not None


def with_sides(cf: CharacteristicFunction, times: Iterable[float]) -> tuple[np.ndarray, np.ndarray]:
    """Sorted times and values; jump times appear twice, left limit first."""
    ts = np.unique(np.asarray(list(times), dtype=float))
    jt = np.array(cf.jump_times)
    vals = cf.value(ts)
    if jt.size == 0:
        return ts, vals
    pos = np.searchsorted(ts, jt)
    present = (pos < ts.size) & (np.abs(ts[np.minimum(pos, ts.size - 1)] - jt) <= 1e-12)
    jt = jt[present]
    lefts = np.array([cf.left(t) for t in jt])
    ins = np.searchsorted(ts, jt)
    return np.insert(ts, ins, jt), np.insert(vals, ins, lefts)


def side_flags(ts: np.ndarray) -> np.ndarray:
    """True where a sample is the left limit of a duplicated (jump) time."""
    flags = np.zeros(ts.shape, dtype=bool)
    flags[:-1] = ts[:-1] == ts[1:]
    return flags


def values_at(cf: CharacteristicFunction, ts: np.ndarray, left: np.ndarray) -> np.ndarray:
    """Values at ``ts`` taking the left limit where ``left`` is set."""
    out = cf.value(ts)
    if left.any():
        out[left] = cf.value(ts[left], "left")
    return out


def sample(cf: CharacteristicFunction, grid: Iterable[float]) -> list[tuple[float, float]]:
    """``(t, value)`` rows; a jump time inside ``grid`` yields its left then right value."""
    ts, vs = with_sides(cf, grid)
    return [(float(t), float(v)) for t, v in zip(ts, vs)]


def from_constants(family: ChannelFamily, breaks: Sequence[float], levels: Sequence[float],
                   tol: float = VALUE_TOL) -> CharacteristicFunction:
    """Piecewise-constant function: ``levels[i]`` on ``[breaks[i], breaks[i+1]]``."""
    pieces = [Piece(float(a), float(b), ex.const(v)) for a, b, v in zip(breaks[:-1], breaks[1:], levels)]
    return build(family, pieces, horizon=breaks[-1], tol=tol)


def from_texts(family: ChannelFamily, spec: Sequence[tuple[float, float, str]],
               tol: float = VALUE_TOL) -> CharacteristicFunction:
    """Build from ``(t_start, t_end, expression text)`` triples."""
    pieces = [Piece(float(a), float(b), ex.parse(s)) for a, b, s in spec]
    return build(family, pieces, horizon=pieces[-1].t_end, tol=tol)
