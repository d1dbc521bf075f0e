import math

import pytest

from nmrobust import charfun as cfm
from nmrobust.markov import (Status, TractabilityClass, classify_local, classify_tractable,
                             is_markovian, lower_bound_pstar, pstar_available)
from nmrobust.family import dephasing

import fixtures as fx


def test_classify_local_examples():
    assert classify_local(cfm.from_texts(fx.D2, [(0, 3, "exp(-t)")]), 1.3).status is Status.CM1
    assert classify_local(fx.damped_cosine(), 5.0).status is Status.VIOLATED
    v = classify_local(fx.staircase(), 2.0)
    assert v.status is Status.CM2 and v.ratio == pytest.approx(-0.33, abs=5e-3)


def test_classify_local_nm_jump():
    cf = cfm.from_texts(fx.D2, [(0, 1, "1-0.8*t"), (1, 2, "0.5")])
    assert classify_local(cf, 1.0).status is Status.VIOLATED


def test_is_markovian_examples():
    v = is_markovian(fx.constant_one())
    assert v.markovian and not v.witnesses and v.max_residual == 0.0
    assert is_markovian(fx.staircase()).markovian
    v = is_markovian(fx.damped_cosine())
    assert not v.markovian
    w = v.witnesses[0]
    assert math.pi / 2 - 1e-6 <= w.s < w.t <= 2.7611


def test_pstar():
    assert lower_bound_pstar(fx.constant_one()) == 0.0
    # one violating pair with residual 0.6 for d=2
    cf = cfm.from_texts(fx.D2, [(0, 1, "1-0.5*t"), (1, 2, "0.6")])
    assert lower_bound_pstar(cf) == pytest.approx(0.6 / 12.6)
    p = lower_bound_pstar(fx.damped_cosine())
    assert 0 < p <= 0.2959


def test_pstar_dephasing_unavailable():
    cf = fx.damped_cosine(family=dephasing())
    assert not pstar_available(cf)
    assert lower_bound_pstar(cf) == 0.0


def test_tractability_examples():
    assert classify_tractable(fx.damped_cosine()) is TractabilityClass.CONTINUOUS
    _, sin_branch = fx.periodic_pair()
    assert classify_tractable(sin_branch) is TractabilityClass.EXTENDED
    assert classify_tractable(fx.theta_dip(0.1)) is TractabilityClass.GENERAL
    assert classify_tractable(fx.positive_jump(0.3)) is TractabilityClass.POSITIVE
