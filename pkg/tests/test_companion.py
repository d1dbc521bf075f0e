import numpy as np
import pytest

from nmrobust import charfun as cfm
from nmrobust.companion import (ClassMismatch, build_continuous_companion, build_positive_companion,
                                closed_form_weight, measure_closed_form)
from nmrobust.gaps import extract_gaps
from nmrobust.markov import TractabilityClass, is_markovian
from nmrobust.oracle import minimal_p_bisection

import fixtures as fx


def test_single_bump_companion_shape():
    cf = fx.single_bump()
    h = build_continuous_companion(cf, extract_gaps(cf).gamma).function
    assert h.value(np.array([0.0, 0.5, 1.0])) == pytest.approx([1, 1, 1])
    ts = np.linspace(1, 2, 11)
    assert h.value(ts) == pytest.approx(1 - (cf.value(ts) - 0.5) / 0.2)
    assert h.value(np.array([2.0, 3.0, 4.0])) == pytest.approx([0, 0, 0], abs=1e-12)


def test_damped_cosine_companion_shape():
    cf = fx.damped_cosine()
    h = build_continuous_companion(cf, extract_gaps(cf).gamma).function
    assert is_markovian(h).markovian
    assert h.value(2.0) == pytest.approx(1.0)
    assert h.value(3.5) < 1.0 and h.value(5.5) < h.value(4.7)
    assert h.value(9.0) == pytest.approx(h.value(6.0))


def test_markovian_input_companion_is_one():
    cf = cfm.from_texts(fx.D2, [(0, 3, "exp(-t)")])
    segs = build_continuous_companion(cf, 1.0).function
    assert segs.value(np.linspace(0, 3, 7)) == pytest.approx(1.0)


def test_bisection_matches_closed_form():
    cf = fx.single_bump()
    h = build_continuous_companion(cf, 0.2).function
    assert minimal_p_bisection(cf, h).p == pytest.approx(1 / 6, abs=1e-3)


def test_positive_companion_single_jump():
    cf = cfm.from_texts(fx.D2, [(0, 1, "1"), (1, 2, "1-0.7*(t-1)"), (2, 3, "0.6")])
    g = build_positive_companion(cf).function
    assert g.value(np.array([0.5, 1.5])) == pytest.approx([1, 1])
    assert g.left(2.0) == pytest.approx(1.0)
    assert g.right(2.0) == pytest.approx(0.0, abs=1e-12)
    assert measure_closed_form(extract_gaps(cf), TractabilityClass.POSITIVE) == pytest.approx(0.3 / 1.3)
    assert minimal_p_bisection(cf, g).p == pytest.approx(0.3 / 1.3, abs=1e-3)


def test_positive_companion_jump_and_bump():
    cf = cfm.from_texts(fx.D2, [(0, 1, "1-0.6*t"), (1, 2, "0.7"), (2, 3, "0.7-0.5*(t-2)"),
                                (3, 4, "0.2+0.2*(t-3)"), (4, 5, "0.4")])
    rep = extract_gaps(cf)
    assert rep.jump_total == pytest.approx(0.3) and rep.delta == pytest.approx(0.2)
    g = build_positive_companion(cf, rep).function
    assert g.left(1.0) - g.right(1.0) == pytest.approx(0.6)
    assert g.value(3.0) - g.value(4.0) == pytest.approx(0.4)
    assert is_markovian(g).markovian


def test_positive_companion_rejects_negative():
    with pytest.raises(ClassMismatch):
        build_positive_companion(fx.damped_cosine())


def test_closed_form_weights():
    assert closed_form_weight(0.42) == pytest.approx(0.2958, abs=1e-4)
    assert closed_form_weight(0.0) == 0.0
    assert closed_form_weight(0.3) == pytest.approx(0.2308, abs=1e-4)
    assert closed_form_weight(2e6) == 1.0
    assert closed_form_weight(0.1, divergent=True) == 1.0
    with pytest.raises(ClassMismatch):
        measure_closed_form(extract_gaps(fx.theta_dip(0.1)), TractabilityClass.GENERAL)
