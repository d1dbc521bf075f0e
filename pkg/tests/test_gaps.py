import math

import pytest

from nmrobust.gaps import extract_gaps

import fixtures as fx


def test_damped_cosine_gaps():
    g = extract_gaps(fx.damped_cosine())
    assert [x.value for x in g.positive] == pytest.approx([0.0876], abs=5e-4)
    assert [x.value for x in g.negative] == pytest.approx([-0.3077, -0.0249], abs=5e-4)
    assert g.gamma == pytest.approx(0.4202, abs=5e-4)
    assert g.rebound and all(x.value > 0 for x in g.rebound)
    assert not g.divergent


def test_gap_values_are_exact_increments():
    g = extract_gaps(fx.damped_cosine())
    t0 = math.pi / 2
    t1 = math.atan(-0.4) + math.pi
    f = lambda t: math.exp(-0.4 * t) * math.cos(t)
    assert g.negative[0].value == pytest.approx(f(t1) - f(t0), abs=1e-10)


def test_constant_has_no_gaps():
    g = extract_gaps(fx.constant_one())
    assert g.gamma == 0 and not (g.positive or g.negative or g.rebound or g.jump)


def test_positive_jump_gap():
    cf = fx.positive_jump(0.3)
    g = extract_gaps(cf)
    assert g.delta == 0 and g.jump_total == pytest.approx(0.3)
    assert g.positive_total == pytest.approx(0.3)


def test_markovian_jumps_are_not_gaps():
    g = extract_gaps(fx.staircase())
    assert g.gamma == 0 and not g.jump


def test_periodic_tail_diverges():
    for cf in fx.periodic_pair():
        g = extract_gaps(cf)
        assert g.divergent and g.period == pytest.approx(math.pi)


def test_horizon_truncation_grows():
    totals = [extract_gaps(fx.damped_cosine(h)).gamma for h in (3.5 * math.pi, 5.5 * math.pi, 7.5 * math.pi)]
    assert totals[0] < totals[1] < totals[2]


def test_gap_sequence_is_geometric():
    # successive extrema of exp(-2t/5)cos t shrink by exp(-2*pi/5) per half period
    q = math.exp(-0.4 * math.pi)
    t1 = math.atan(-0.4) + math.pi
    first = math.exp(-0.4 * t1) * abs(math.cos(t1))
    limit = first / (1 - q)
    g = extract_gaps(fx.damped_cosine(7.5 * math.pi))
    values = [abs(x.value) for x in sorted(g.positive + g.negative, key=lambda x: x.t_in)]
    assert values == pytest.approx([first * q ** k for k in range(len(values))], rel=1e-8)
    p_limit = limit / (1 + limit)
    assert p_limit == pytest.approx(0.301, abs=1e-3)
    assert g.gamma / (1 + g.gamma) == pytest.approx(p_limit, abs=1e-3)
