import math

import numpy as np
import pytest

from hypmnnr.analytics import PathlossModel
from hypmnnr.errors import InvalidArgumentError
from hypmnnr.marks import DegenerateMarks, EmptyControl, FullControl, MinProduct, UniformMarks
from hypmnnr.pointprocess import Window
from hypmnnr.simharness import (ExperimentConfig, pair_fraction_ratio_of_means, replicate_rng,
                                run_interference, run_interference_sweep, run_pair_fraction, summarize)

P_DEG = math.pi / (4 * math.pi / 3 + math.sqrt(3) / 2)
DEG = DegenerateMarks(0.5)


def cfg(**kw):
    base = dict(lam=1.0, window=Window(20, 20, "torus"), marks=DEG, control=FullControl(), replicates=50)
    base.update(kw)
    return ExperimentConfig(**base)


def test_summarize_examples():
    s = summarize([1.0, 2.0, 3.0])
    assert s.mean == 2.0 and s.stderr == pytest.approx(1 / math.sqrt(3)) and s.replicates == 3
    assert s.ci95 == pytest.approx((2 - 1.96 / math.sqrt(3), 2 + 1.96 / math.sqrt(3)))
    z = summarize([0.0, 0.0])
    assert (z.mean, z.stderr) == (0.0, 0.0)
    with pytest.raises(InvalidArgumentError):
        summarize([1.0])


def test_replicate_streams_independent_of_order():
    a = replicate_rng(7, 3).random(5)
    b = replicate_rng(7, 3).random(5)
    c = replicate_rng(7, 4).random(5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_empty_control_gives_zero():
    s = run_pair_fraction(cfg(control=EmptyControl()))
    assert (s.mean, s.stderr) == (0.0, 0.0)


def test_degenerate_ci_covers_closed_form():
    s = run_pair_fraction(cfg(window=Window(30, 30, "torus"), replicates=200, master_seed=11))
    assert s.covers(P_DEG)
    assert pair_fraction_ratio_of_means(cfg(window=Window(30, 30, "torus"), replicates=200,
                                            master_seed=11)) == pytest.approx(P_DEG, abs=0.01)


def test_open_window_with_guard_covers_closed_form():
    s = run_pair_fraction(cfg(window=Window(30, 30, "open"), replicates=200, guard=3.0, master_seed=2))
    assert s.covers(P_DEG)


def test_worker_count_does_not_change_results():
    one = run_pair_fraction(cfg(marks=UniformMarks(0.5, 1.5), workers=1, master_seed=5))
    two = run_pair_fraction(cfg(marks=UniformMarks(0.5, 1.5), workers=2, master_seed=5))
    assert one == two
    pl = PathlossModel(2.5, 1.0)
    assert run_interference(cfg(pathloss=pl, workers=1)) == run_interference(cfg(pathloss=pl, workers=3))


def test_control_subset_monotone_in_simulation():
    m = UniformMarks(0.5, 1.5)
    vals = [run_pair_fraction(cfg(marks=m, control=MinProduct(t), master_seed=9)).mean for t in (1.0, 0.6, 0.0)]
    assert vals[0] <= vals[1] <= vals[2]


def test_interference_conservation_and_far_radius():
    pl = PathlossModel(2.5, 1.0)
    res = run_interference_sweep(cfg(pathloss=pl, replicates=30), [1.0, 2.0, 15.0])
    (s1, p1), (s2, p2), (s3, p3) = res
    assert s1.mean + p1.mean >= s2.mean + p2.mean
    # every atom is within half the window side of the center, so R beyond that sees nothing
    assert s3.mean == 0.0 and p3.mean == 0.0


def test_interference_requires_pathloss():
    with pytest.raises(InvalidArgumentError):
        run_interference(cfg())
    with pytest.raises(InvalidArgumentError):
        run_interference_sweep(cfg(pathloss=PathlossModel(2.5, 1.0)), [])


def test_config_validation_and_warning():
    for bad in (dict(lam=0.0), dict(replicates=0), dict(workers=0), dict(guard=10.0), dict(master_seed=-1)):
        with pytest.raises(InvalidArgumentError):
            cfg(**bad)
    with pytest.warns(RuntimeWarning):
        cfg(lam=0.01)
