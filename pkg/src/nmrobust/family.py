"""Channel families described by a single characteristic function.

A depolarizing channel in dimension ``d`` keeps a fraction ``f`` of the input
and replaces the rest with the maximally mixed state. A qubit dephasing
channel scales the off-diagonal elements by ``phi``. Both are fixed by one
real number, admissible on a closed interval that contains 0 and 1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ZERO_TRAP = 1e-12


@dataclass(frozen=True)
class ChannelFamily:
    """Depolarizing (``kind="depolarizing"``, ``d >= 2``) or qubit dephasing."""

    kind: str
    d: int = 2

    def __post_init__(self):
        if self.kind not in ("depolarizing", "dephasing"):
            raise ValueError(f"unknown family {self.kind!r}")
        if self.kind == "depolarizing" and (int(self.d) != self.d or self.d < 2):
            raise ValueError(f"dimension must be an integer >= 2, got {self.d!r}")
        if self.kind == "dephasing" and self.d != 2:
            raise ValueError("dephasing is defined for qubits only")

    @property
    def lo(self) -> float:
        if self.kind == "dephasing":
            return -1.0
        return -1.0 / (self.d ** 2 - 1)

    @property
    def hi(self) -> float:
        return 1.0

    def to_json(self):
        if self.kind == "dephasing":
            return "dephasing"
        return {"depolarizing": {"d": self.d}}

    @classmethod
    def from_json(cls, obj) -> "ChannelFamily":
        if obj == "dephasing" or obj == {"dephasing": {}}:
            return dephasing()
        if isinstance(obj, dict) and set(obj) == {"depolarizing"}:
            inner = obj["depolarizing"] or {}
            return depolarizing(int(inner.get("d", 2)))
        raise ValueError(f"unrecognized family selector {obj!r}")

    def __str__(self):
        return "dephasing" if self.kind == "dephasing" else f"depolarizing(d={self.d})"


def depolarizing(d: int = 2) -> ChannelFamily:
    return ChannelFamily("depolarizing", d)


def dephasing() -> ChannelFamily:
    return ChannelFamily("dephasing", 2)


def admissible_interval(family: ChannelFamily) -> tuple[float, float]:
    return family.lo, family.hi


def intermediate_cptp(family: ChannelFamily, f_s: float, f_t: float) -> bool:
    """Whether the map taking time ``s`` to time ``t`` is a channel of the family.

    The intermediate map has characteristic value ``f_t / f_s``; when ``f_s``
    vanishes, the output carries no memory of the input and ``f_t`` must vanish too.
    """
    if abs(f_s) <= ZERO_TRAP:
        return abs(f_t) <= ZERO_TRAP
    ratio = f_t / f_s
    return family.lo <= ratio <= family.hi


def divisibility_residual(family: ChannelFamily, f_s, f_t):
    """Signed residual of the two-time divisibility inequality.

    Non-positive exactly when the intermediate map is admissible. Accepts
    scalars or broadcastable arrays.
    """
    f_s = np.asarray(f_s, dtype=float)
    f_t = np.asarray(f_t, dtype=float)
    if family.kind == "dephasing":
        out = np.abs(f_t) - np.abs(f_s)
    else:
        d2 = family.d ** 2
        out = np.abs(2 * (d2 - 1) * f_t - (d2 - 2) * f_s) - d2 * np.abs(f_s)
    return float(out) if out.ndim == 0 else out


def running_violation(family: ChannelFamily, values: np.ndarray) -> np.ndarray:
    """Per-sample violation of the pairwise condition against all earlier samples.

    For each index ``j`` the earlier values ``f_s`` confine ``f_j`` to the
    intersection of ``[min(f_s, lo*f_s), max(f_s, lo*f_s)]``. The returned
    array holds the distance of ``f_j`` outside that intersection (0 when
    inside). Runs in O(N); used as the fast feasibility check of the solver.
    """
    v = np.asarray(values, dtype=float)
    lo = family.lo
    upper = np.maximum(v, lo * v)
    lower = np.minimum(v, lo * v)
    cap_hi = np.minimum.accumulate(upper)
    cap_lo = np.maximum.accumulate(lower)
    out = np.zeros_like(v)
    if v.size > 1:
        out[1:] = np.maximum(
            np.maximum(v[1:] - cap_hi[:-1], cap_lo[:-1] - v[1:]), 0.0
        )
    return out
