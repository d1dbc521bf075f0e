"""Markovian companions that make a mixture Markovian, and closed-form weights.

Every companion built here is affine in ``f`` on each stretch where it moves:
``c(t) = c0 + k * (f(t) - f(t0))``. Mixing ``(1 - p) f + p c`` then cancels
the growth of ``f`` exactly when ``k = -(1 - p) / p``, which keeps mixtures in
closed form and the oracle checks exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from . import charfun as cfm
from . import exprparse as ex
from .charfun import CharacteristicFunction, Piece
from .exprparse import Expr
from .gaps import GapReport, extract_gaps
from .markov import TractabilityClass

DIVERGENCE_CAP = 1e6


class ClassMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    """Companion on ``[t0, t1]``: ``c0 + k * (expr(t) - f0)``."""

    t0: float
    t1: float
    expr: Expr
    c0: float
    k: float = 0.0
    f0: float = 0.0

    def end_value(self) -> float:
        if self.k == 0.0:
            return self.c0
        return self.c0 + self.k * (ex.evaluate(self.expr, self.t1) - self.f0)

    def to_expr(self) -> Expr:
        if self.k == 0.0:
            return ex.const(self.c0)
        shifted = ex.add(self.expr, ex.const(-self.f0)) if self.f0 < 0 else ex.sub(self.expr, ex.const(self.f0))
        moving = ex.mul(ex.const(abs(self.k)), shifted)
        if self.k < 0:
            return ex.sub(ex.const(self.c0), moving)
        return ex.add(ex.const(self.c0), moving)


@dataclass
class Companion:
    function: CharacteristicFunction
    kind: str
    normalizer: float
    params: dict = field(default_factory=dict)


def materialize(cf: CharacteristicFunction, segments: Sequence[Segment],
                validate: bool = True) -> CharacteristicFunction:
    """Turn a tiling list of segments into a characteristic function."""
    pieces: list[Piece] = []
    for s in segments:
        e = s.to_expr()
        if pieces and s.k == 0.0 and pieces[-1].expr == e:
            pieces[-1] = Piece(pieces[-1].t_start, s.t1, e)
        else:
            pieces.append(Piece(s.t0, s.t1, e))
    if validate:
        return cfm.build(cf.family, pieces, horizon=cf.horizon, tol=cf.tol)
    return cfm.assemble(cf.family, pieces, cf.horizon, cf.tol)


def run_segments(cf: CharacteristicFunction, rule, start: float = 1.0,
                 at_interval_start=None) -> tuple[list[Segment], float]:
    """Walk the runs of ``cf`` piece by piece.

    ``rule(run)`` returns the factor ``k`` applied on that run.
    ``at_interval_start(time, value)`` may reset the companion value when a
    new continuity interval begins (used for companion jumps).
    """
    segs: list[Segment] = []
    c = start
    starts = {a for a, _ in cf.continuity_intervals()}
    for run in cf.runs():
        if at_interval_start is not None and run.t_in in starts and run.t_in > 0:
            c = at_interval_start(run.t_in, c)
        k = rule(run)
        for piece in cf.pieces:
            a, b = max(run.t_in, piece.t_start), min(run.t_fin, piece.t_end)
            if b <= a:
                continue
            if k == 0.0:
                seg = Segment(a, b, piece.expr, c)
            else:
                seg = Segment(a, b, piece.expr, c, k, float(ex.evaluate(piece.expr, a)))
            segs.append(seg)
            c = seg.end_value()
    return segs, c


def build_continuous_companion(cf: CharacteristicFunction, gamma: float) -> Companion:
    """Companion that falls by ``df / gamma`` wherever ``f`` rises, flat elsewhere.

    With ``gamma`` the total non-Markovian gap, the companion ends at
    ``1 - (delta + rebound) / gamma`` and the mixture at ``gamma / (1 + gamma)``
    is flat wherever ``f`` rises.
    """
    if not gamma > 0:
        raise ValueError("normalizer must be positive")
    segs, end = run_segments(cf, lambda r: -1.0 / gamma if r.increment > cfm.RUN_TOL else 0.0)
    if end < -cf.tol:
        raise ValueError(f"normalizer {gamma:.12g} too small: companion ends at {end:.12g}")
    return Companion(materialize(cf, segs), "h_continuous", float(gamma))


def build_positive_companion(cf: CharacteristicFunction, report: GapReport | None = None) -> Companion:
    """Companion for non-negative ``f``: falls by ``df / N`` on increases and by
    ``pi / N`` at each upward non-Markovian jump, ``N`` being their total."""
    report = report or extract_gaps(cf)
    if any(min(r.start, r.end) < -cf.tol for r in cf.runs()):
        raise ClassMismatch("function takes negative values")
    norm = report.positive_total
    if not norm > 0:
        raise ValueError("no non-Markovian increase to compensate")
    drops = {g.t_in: g.value / norm for g in report.jump}

    def rule(run):
        return -1.0 / norm if run.sign > 0 and run.abs_increasing else 0.0

    def at_start(t, c):
        return c - drops.get(t, 0.0)

    segs, end = run_segments(cf, rule, at_interval_start=at_start)
    if end < -cf.tol:
        raise ValueError(f"companion ends at {end:.12g}")
    return Companion(materialize(cf, segs), "g_positive", float(norm))


def closed_form_weight(x: float, divergent: bool = False, cap: float = DIVERGENCE_CAP) -> float:
    """``x / (1 + x)``, saturating to 1 for divergent or capped totals."""
    if divergent or not math.isfinite(x) or x > cap:
        return 1.0
    return x / (1.0 + x)


def measure_closed_form(report: GapReport, cls: TractabilityClass, cap: float = DIVERGENCE_CAP) -> float:
    if cls is TractabilityClass.GENERAL:
        raise ClassMismatch("no closed form for this class")
    total = report.positive_total if cls is TractabilityClass.POSITIVE else report.gamma
    return closed_form_weight(total, report.divergent, cap)
