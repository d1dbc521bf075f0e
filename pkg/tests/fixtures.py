"""Characteristic functions shared by the test modules."""
import math

import numpy as np

from nmrobust import charfun as cfm
from nmrobust.family import dephasing, depolarizing

D2 = depolarizing(2)
HALF_PI = math.pi / 2


def damped_cosine(horizon=3.5 * math.pi, family=D2):
    return cfm.from_texts(family, [(0.0, horizon, "exp(-2*t/5)*cos(t)")])


def constant_one(horizon=10.0, family=D2):
    return cfm.from_texts(family, [(0.0, horizon, "1")])


def staircase():
    # Markovian piecewise-constant evolution with jump ratios 0.83, -0.33, -0.27, 0
    return cfm.from_constants(D2, [0, 1, 2, 5, 8, 10], [1, 0.83, -0.2739, 0.073953, 0])


def single_bump():
    return cfm.from_texts(D2, [(0, 1, "1-0.5*t"), (1, 2, "0.5+0.2*(t-1)"), (2, 4, "0.7")])


def theta_dip(theta, d=2):
    lo = f"(-1/{d * d - 1})"
    return cfm.from_texts(depolarizing(d), [
        (0, 1, "1"), (1, 2, f"{lo}+{theta!r}*(t-1)"), (2, 3, f"{lo}+{theta!r}*(3-t)"), (3, 4, lo)])


def theta_branch_one(theta):
    return 3 * theta / (1 + 3 * theta)


def theta_branch_two(theta):
    return (1 / 3 + theta) / (4 / 3 + theta)


def positive_jump(pi_gap, d=2):
    """Linear decay from 1 to 0.2, then an upward jump of ``pi_gap``."""
    return cfm.from_texts(depolarizing(d), [(0, 1, "1-0.8*t"), (1, 3, repr(0.2 + pi_gap))])


def periodic_pair(periods=6):
    """Two evolutions that are 1 on [0,1] and then oscillate as cos^2 and sin^2."""
    h = 1 + periods * math.pi
    a = cfm.from_texts(D2, [(0, 1, "1"), (1, h, "cos(t-1)^2")])
    b = cfm.from_texts(D2, [(0, 1, "1"), (1, h, "sin(t-1)^2")])
    return a, b


def markov_staircases():
    a = cfm.from_texts(D2, [(0, 3, "1")])
    b = cfm.from_texts(D2, [(0, 1, "1"), (1, 2, "-1/3"), (2, 3, "1/9")])
    return a, b


def random_continuous(rng: np.random.Generator):
    """Damped oscillation kept inside the admissible interval of its family."""
    kind = rng.choice(["depolarizing", "depolarizing", "dephasing"])
    a = rng.uniform(0.15, 0.8)
    w = rng.uniform(0.6, 2.5)
    phase = rng.uniform(0.0, 1.0)
    horizon = float(rng.uniform(4.0, 12.0))
    if kind == "dephasing":
        fam = dephasing()
        b = rng.uniform(0.3, 1.0)
    else:
        fam = D2
        b = rng.uniform(0.7, 1.0)
    shape = f"(cos({w!r}*t+{phase!r})+{b!r})/(cos({phase!r})+{b!r})"
    # the normalization keeps f(0)=1; damping faster than the bound on the shape keeps the range
    scale = (1 + b) / (math.cos(phase) + b)
    rate = max(a, math.log(scale) + 0.05)
    text = f"exp(-{rate!r}*t)*{shape}"
    return cfm.from_texts(fam, [(0.0, horizon, text)])
