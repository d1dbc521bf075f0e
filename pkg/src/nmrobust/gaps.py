"""Non-Markovian increments and Markovian rebounds of a characteristic function."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import charfun as cfm
from .charfun import CharacteristicFunction, MonotoneRun
from .exprparse import evaluate


@dataclass(frozen=True)
class Gap:
    value: float
    t_in: float
    t_fin: float


@dataclass
class GapReport:
    """Gap lists and their totals, at the truncation horizon.

    ``positive`` holds increases of a positive ``f``, ``negative`` the
    decreases of a negative ``f`` (stored as negative numbers), ``rebound``
    the increases of a negative ``f`` and ``jump`` the upward non-Markovian
    jumps of a non-negative ``f``. ``divergent`` is set when the last piece
    repeats periodically with a non-zero gap per period, so the totals grow
    without bound as the horizon grows.
    """

    positive: list[Gap] = field(default_factory=list)
    negative: list[Gap] = field(default_factory=list)
    rebound: list[Gap] = field(default_factory=list)
    jump: list[Gap] = field(default_factory=list)
    horizon: float = 0.0
    divergent: bool = False
    period: float | None = None

    @property
    def delta(self) -> float:
        return float(sum(g.value for g in self.positive))

    @property
    def theta(self) -> float:
        return float(sum(g.value for g in self.negative))

    @property
    def rebound_total(self) -> float:
        return float(sum(g.value for g in self.rebound))

    @property
    def jump_total(self) -> float:
        return float(sum(g.value for g in self.jump))

    @property
    def gamma(self) -> float:
        return self.delta + abs(self.theta)

    @property
    def positive_total(self) -> float:
        return self.delta + self.jump_total

    def to_dict(self) -> dict:
        def rows(gs):
            return [{"value": g.value, "t_in": g.t_in, "t_fin": g.t_fin} for g in gs]

        return {
            "positive": rows(self.positive), "negative": rows(self.negative),
            "rebound": rows(self.rebound), "jump": rows(self.jump),
            "delta": self.delta, "theta": self.theta, "rebound_total": self.rebound_total,
            "jump_total": self.jump_total, "gamma": self.gamma, "horizon": self.horizon,
            "divergent": self.divergent, "period": self.period,
        }


def extract_gaps(cf: CharacteristicFunction) -> GapReport:
    report = GapReport(horizon=cf.horizon)
    runs = cf.runs()
    for r in runs:
        inc = r.increment
        if abs(inc) <= cfm.RUN_TOL:
            continue
        g = Gap(float(inc), r.t_in, r.t_fin)
        if r.sign > 0 and inc > 0:
            report.positive.append(g)
        elif r.sign < 0 and inc < 0:
            report.negative.append(g)
        elif r.sign < 0 and inc > 0:
            report.rebound.append(g)
    fam = cf.family
    for j in cf.jumps:
        nm = not (fam.lo <= j.ratio <= fam.hi)
        if nm and j.left >= -cf.tol and j.right >= -cf.tol:
            report.jump.append(Gap(float(j.right - j.left), j.time, j.time))
    report.period = _tail_period(cf, [r for r in runs if r.abs_increasing])
    report.divergent = report.period is not None
    return report


def _tail_period(cf: CharacteristicFunction, nm_runs: list[MonotoneRun]) -> float | None:
    """Period of a non-Markovian periodic tail, if the last piece has one.

    The candidate period is the spacing of the last non-Markovian runs; it is
    accepted when the spacing is regular and the last piece repeats itself
    under that shift to within the value tolerance.
    """
    last = cf.pieces[-1]
    starts = [r.t_in for r in nm_runs if r.t_in >= last.t_start - cfm.TIME_TOL]
    if len(starts) < 3:
        return None
    steps = np.diff(starts)
    period = float(steps[-1])
    if period <= 0 or np.max(np.abs(steps - period)) > 1e-6 * max(1.0, period):
        return None
    if last.t_end - last.t_start < 2 * period:
        return None
    ts = np.linspace(last.t_start, last.t_end - period, 65)
    a = evaluate(last.expr, ts)
    b = evaluate(last.expr, ts + period)
    if np.max(np.abs(a - b)) > cfm.VALUE_TOL:
        return None
    return period
