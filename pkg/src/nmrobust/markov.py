"""Markovianity verdicts, the model-independent lower bound, and class detection."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import charfun as cfm
from .charfun import CharacteristicFunction, MonotoneRun
from .family import ZERO_TRAP, divisibility_residual
from .oracle import check_times, pairwise_scan

MARKOV_TOL = 1e-9
INCONSISTENCY_FACTOR = 100.0


class InconsistencyError(RuntimeError):
    """Local and pairwise checks disagree by more than the tolerance."""


class Status(str, enum.Enum):
    CM1 = "CM1-satisfied"
    CM2 = "CM2-satisfied"
    VIOLATED = "violated"


class TractabilityClass(str, enum.Enum):
    CONTINUOUS = "ContinuousClosedForm"
    POSITIVE = "PositiveClosedForm"
    EXTENDED = "ExtendedContinuous"
    GENERAL = "GeneralEnumeration"


@dataclass(frozen=True)
class LocalVerdict:
    time: float
    status: Status
    slope_sign: int = 0
    ratio: float = 1.0


@dataclass(frozen=True)
class Witness:
    s: float
    t: float
    residual: float


@dataclass
class MarkovVerdict:
    markovian: bool
    witnesses: list[Witness] = field(default_factory=list)
    max_residual: float = 0.0
    local_violations: list[float] = field(default_factory=list)
    grid_size: int = 0

    def __bool__(self):
        return self.markovian


def _clean(x: float, thresh: float) -> float:
    return 0.0 if abs(x) <= thresh else x


def classify_local(cf: CharacteristicFunction, tau: float) -> LocalVerdict:
    """Local Markovian conditions at ``tau``.

    At a jump the ratio must lie in the admissible interval (and differ from 1);
    elsewhere ``|f|`` must not grow on either side.
    """
    j = cf.jump_at(tau, atol=cfm.TIME_TOL)
    if j is not None:
        ok = cf.family.lo <= j.ratio <= cf.family.hi and j.ratio != 1.0
        return LocalVerdict(tau, Status.CM2 if ok else Status.VIOLATED, ratio=j.ratio)
    f = _clean(cf.value(tau), ZERO_TRAP)
    worst = 0
    for side in ("left", "right"):
        if (side == "left" and tau <= 0) or (side == "right" and tau >= cf.horizon):
            continue
        s = _clean(cf.slope(tau, side), cfm.SLOPE_TOL)
        worst = max(worst, int(np.sign(f * s)))
    return LocalVerdict(tau, Status.VIOLATED if worst > 0 else Status.CM1, slope_sign=worst)


def _run_residual(cf: CharacteristicFunction, r: MonotoneRun) -> float:
    if not r.abs_increasing:
        return 0.0
    return float(divisibility_residual(cf.family, r.start, r.end))


def _local_sweep(cf: CharacteristicFunction, times: np.ndarray, tol: float):
    """Violating times and the largest residual they imply.

    A violating continuity point is charged the residual across its run, so
    that sub-tolerance wiggles do not count against the function.
    """
    runs = cf.runs()
    t_in = np.array([r.t_in for r in runs])
    run_res = np.array([_run_residual(cf, r) for r in runs])
    jt = set(cf.jump_times)
    cont = np.array([t for t in times if t not in jt])
    f = cf.value(cont)
    f = np.where(np.abs(f) <= ZERO_TRAP, 0.0, f)
    worst = np.zeros_like(cont)
    for side in ("left", "right"):
        s = cf.slope(cont, side)
        s = np.where(np.abs(s) <= cfm.SLOPE_TOL, 0.0, s)
        if side == "left":
            s = np.where(cont <= 0, 0.0, s)
        else:
            s = np.where(cont >= cf.horizon, 0.0, s)
        worst = np.maximum(worst, f * s)
    violated = cont[worst > 0]
    magnitude = 0.0
    for t in violated:
        k = int(np.searchsorted(t_in, t, side="right")) - 1
        for kk in (k - 1, k):
            if 0 <= kk < len(runs) and runs[kk].t_in <= t <= runs[kk].t_fin:
                magnitude = max(magnitude, run_res[kk])
    bad = [float(t) for t in violated]
    for j in cf.jumps:
        v = classify_local(cf, j.time)
        if v.status is Status.VIOLATED:
            bad.append(j.time)
            res = float(divisibility_residual(cf.family, j.left, j.right))
            if abs(j.left) <= ZERO_TRAP:
                res = max(res, abs(j.right))
            magnitude = max(magnitude, res)
    return sorted(bad), magnitude


def is_markovian(cf: CharacteristicFunction, grid_resolution: int = 2000,
                 tol: float = MARKOV_TOL, n_witnesses: int = 5) -> MarkovVerdict:
    """Combined local and pairwise Markovianity test.

    Raises :class:`InconsistencyError` when the two checks disagree by more
    than ``INCONSISTENCY_FACTOR * tol``.
    """
    times = check_times(cf, grid_resolution)
    local_bad, local_mag = _local_sweep(cf, times, tol)
    ts, vs = cfm.with_sides(cf, times)
    scan = pairwise_scan(cf.family, vs)
    local_ok = local_mag <= tol
    pair_ok = scan.max_residual <= tol
    if local_ok != pair_ok:
        gap = abs(scan.max_residual - local_mag)
        if gap > INCONSISTENCY_FACTOR * tol:
            raise InconsistencyError(
                f"local check {'passes' if local_ok else 'fails'} (magnitude {local_mag:.3g}) "
                f"but pairwise residual is {scan.max_residual:.3g}"
            )
    witnesses = []
    if not pair_ok:
        for i, j, r in scan.top(n_witnesses, tol):
            witnesses.append(Witness(float(ts[i]), float(ts[j]), float(r)))
    return MarkovVerdict(pair_ok, witnesses, float(max(scan.max_residual, 0.0)),
                         local_bad if not local_ok else [], len(ts))


def pstar_available(cf: CharacteristicFunction) -> bool:
    return cf.family.kind == "depolarizing"


def lower_bound_pstar(cf: CharacteristicFunction, grid_resolution: int = 2000,
                      tol: float = MARKOV_TOL) -> float:
    """Lower bound on the measure from the worst pairwise violation.

    Returns 0 for Markovian inputs and for the dephasing family, where no such
    bound is available (see :func:`pstar_available`).
    """
    if not pstar_available(cf):
        return 0.0
    ts, vs = cfm.with_sides(cf, check_times(cf, grid_resolution))
    c = pairwise_scan(cf.family, vs).max_residual
    if c <= tol:
        return 0.0
    return float(c / (c + 4 * (cf.family.d ** 2 - 1)))


def _is_nm_jump(cf: CharacteristicFunction, j) -> bool:
    return not (cf.family.lo <= j.ratio <= cf.family.hi)


def classify_tractable(cf: CharacteristicFunction) -> TractabilityClass:
    """Which closed-form pathway applies, checked in priority order.

    A non-negative function is only routed to the positive pathway when it
    has at least one non-Markovian jump; otherwise its jumps are all
    sign-preserving Markovian ones and the extended continuous pathway gives
    the same value.
    """
    if not cf.jumps:
        return TractabilityClass.CONTINUOUS
    runs = cf.runs()
    tol = cf.tol
    nonneg = all(min(r.start, r.end) >= -tol for r in runs) and all(
        min(j.left, j.right) >= -tol for j in cf.jumps
    )
    nm_jumps = [j for j in cf.jumps if _is_nm_jump(cf, j)]
    if nonneg and nm_jumps:
        return TractabilityClass.POSITIVE
    if nm_jumps:
        return TractabilityClass.GENERAL
    nm_runs = [r for r in runs if r.abs_increasing]
    last_nm = max((r.t_fin for r in nm_runs), default=0.0)
    for j in cf.jumps:
        if j.time >= last_nm:
            continue
        if not (j.left > ZERO_TRAP and 0.0 <= j.ratio <= 1.0):
            return TractabilityClass.GENERAL
    return TractabilityClass.EXTENDED
