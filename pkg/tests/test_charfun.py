import math

import numpy as np
import pytest

from nmrobust import charfun as cfm
from nmrobust import exprparse as ex
from nmrobust.charfun import Piece
from nmrobust.family import depolarizing

import fixtures as fx


def test_constant_is_valid():
    cf = fx.constant_one()
    assert not cf.jumps
    assert cf.horizon == 10.0


def test_range_violation_at_zero():
    with pytest.raises(cfm.RangeViolation) as info:
        cfm.from_texts(fx.D2, [(0, 5, "2*cos(t)")])
    assert info.value.t == pytest.approx(0.0)


def test_initial_condition():
    with pytest.raises(cfm.InitialConditionViolation):
        cfm.from_texts(fx.D2, [(0, 1, "0.5")])


def test_tiling_errors():
    with pytest.raises(cfm.TilingError):
        cfm.from_texts(fx.D2, [(0, 1, "1"), (1.5, 2, "1")])
    with pytest.raises(cfm.TilingError):
        Piece(1.0, 1.0, ex.ONE)


def test_staircase_jumps():
    cf = fx.staircase()
    assert [j.time for j in cf.jumps] == [1, 2, 5, 8]
    ratios = [j.ratio for j in cf.jumps]
    assert ratios == pytest.approx([0.83, -0.33, -0.27, 0.0], abs=5e-3)


@pytest.mark.parametrize("left, right, ratio", [(0.5, 0.25, 0.5), (0.0, 0.1, math.inf),
                                                (0.0, -0.1, -math.inf), (0.0, 0.0, 1.0)])
def test_ratio_conventions(left, right, ratio):
    assert cfm.ratio_of(left, right) == ratio


def test_jump_ratio_lookup():
    cf = fx.staircase()
    assert cfm.jump_ratio(cf, 1.0) == pytest.approx(0.83)


def test_runs_of_damped_cosine():
    runs = fx.damped_cosine().runs()
    cuts = [r.t_fin for r in runs][:-1]
    ext = [math.atan(-0.4) + k * math.pi for k in (1, 2, 3)]
    expected = sorted([math.pi / 2, 1.5 * math.pi, 2.5 * math.pi] + ext)
    assert cuts == pytest.approx(expected, abs=1e-8)
    increasing = [(round(r.t_in, 3), r.sign) for r in runs if r.abs_increasing]
    assert increasing == [(1.571, -1), (4.712, 1), (7.854, -1)]


def test_runs_trivial():
    runs = fx.constant_one().runs()
    assert len(runs) == 1 and runs[0].sign == 1 and not runs[0].abs_increasing
    runs = cfm.from_texts(fx.D2, [(0, 3, "exp(-t)")]).runs()
    assert len(runs) == 1 and runs[0].sign == 1 and not runs[0].abs_increasing


def test_mix_identity_and_periodic_pair():
    f = fx.damped_cosine()
    ts = np.linspace(0, f.horizon, 50)
    assert np.allclose(cfm.mix(f, fx.constant_one(f.horizon), 0.0).value(ts), f.value(ts))
    a, b = fx.periodic_pair()
    m = cfm.mix(a, b, 0.5)
    assert np.allclose(m.value(np.linspace(1.01, m.horizon, 200)), 0.5)
    assert len(m.jumps) == 1 and m.jumps[0].ratio == pytest.approx(0.5)


def test_mix_staircases_ratio():
    a, b = fx.markov_staircases()
    m = cfm.mix(a, b, 0.75)
    j = m.jump_at(2.0, 1e-9)
    assert j is not None and j.ratio == math.inf


def test_sample_emits_both_sides():
    assert cfm.sample(fx.constant_one(), [0, 1, 2]) == [(0, 1.0), (1, 1.0), (2, 1.0)]
    rows = cfm.sample(fx.staircase(), [1.0])
    assert rows == [(1.0, 1.0), (1.0, 0.83)]
    v = fx.damped_cosine().value(math.pi)
    assert v == pytest.approx(-math.exp(-2 * math.pi / 5))
    assert v == pytest.approx(-0.2846, abs=1e-4)


def test_declared_jumps():
    fam = depolarizing(2)
    pieces = [Piece(0, 1, ex.ONE), Piece(1, 2, ex.const(0.5))]
    cf = cfm.build(fam, pieces, declared_jumps=[1.0])
    assert len(cf.jumps) == 1 and cf.jumps[0].ratio == pytest.approx(0.5)
    with pytest.raises(cfm.ValidationError):
        cfm.build(fam, [Piece(0, 1, ex.ONE), Piece(1, 2, ex.ONE)], declared_jumps=[1.0])
