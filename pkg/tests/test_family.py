import json

import numpy as np
import pytest

from nmrobust.family import (ChannelFamily, admissible_interval, dephasing, depolarizing,
                             divisibility_residual, intermediate_cptp, running_violation)


def test_admissible_intervals():
    assert admissible_interval(depolarizing(2)) == pytest.approx((-1 / 3, 1))
    assert admissible_interval(depolarizing(3)) == pytest.approx((-1 / 8, 1))
    assert admissible_interval(dephasing()) == (-1.0, 1.0)


def test_json_round_trip():
    fam = depolarizing(3)
    assert ChannelFamily.from_json(json.loads(json.dumps(fam.to_json()))) == fam


@pytest.mark.parametrize("fs, ft, ok", [(0.5, 0.5, True), (0.5, 0.6, False), (0.0, 0.1, False),
                                        (0.0, 0.0, True), (0.5, -1 / 6, True), (0.5, -0.2, False)])
def test_intermediate_cptp(fs, ft, ok):
    assert intermediate_cptp(depolarizing(2), fs, ft) is ok


@pytest.mark.parametrize("fs, ft, value", [(1, 1, 0.0), (0.5, 0.6, 0.6), (0.5, -1 / 6, 0.0)])
def test_residual_examples(fs, ft, value):
    assert divisibility_residual(depolarizing(2), fs, ft) == pytest.approx(value, abs=1e-12)


def test_residual_sign_matches_cptp():
    fam = depolarizing(3)
    rng = np.random.default_rng(3)
    fs = rng.uniform(fam.lo, 1, 500)
    ft = rng.uniform(fam.lo, 1, 500)
    res = divisibility_residual(fam, fs, ft)
    for a, b, r in zip(fs, ft, res):
        if abs(r) > 1e-9:
            assert (r <= 0) == intermediate_cptp(fam, a, b)


def test_dephasing_residual():
    assert divisibility_residual(dephasing(), 0.5, -0.4) == pytest.approx(-0.1)
    assert divisibility_residual(dephasing(), 0.5, -0.6) == pytest.approx(0.1)


def test_running_violation_agrees_with_pairs():
    fam = depolarizing(2)
    rng = np.random.default_rng(7)
    for _ in range(50):
        v = np.concatenate([[1.0], rng.uniform(fam.lo, 1, 12)])
        run = running_violation(fam, v)
        pairs = max(divisibility_residual(fam, v[i], v[j]) for i in range(len(v)) for j in range(i, len(v)))
        assert (run.max() <= 1e-12) == (pairs <= 1e-12)
