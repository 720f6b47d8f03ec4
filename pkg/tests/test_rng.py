import numpy as np
import pytest

from nerula.rng import ALGORITHM, RngStream


def test_identical_seed_identical_sequence():
    a = RngStream(42)
    b = RngStream(42)
    assert np.array_equal(a.normal(100), b.normal(100))
    assert np.array_equal(a.integers(0, 1000, 50), b.integers(0, 1000, 50))


def test_split_is_stateless_for_parent():
    parent = RngStream(7)
    before = RngStream(7).normal(10)
    _ = parent.split("child", 3)
    assert np.array_equal(parent.normal(10), before)


def test_split_labels_give_distinct_streams():
    root = RngStream(0)
    seeds = {root.split("mask", i).seed for i in range(200)}
    seeds |= {root.split("signal", i).seed for i in range(200)}
    assert len(seeds) == 400


def test_split_same_labels_same_stream():
    root = RngStream(123)
    x = root.split("epoch", 4).uniform(size=20)
    y = root.split("epoch", 4).uniform(size=20)
    assert np.array_equal(x, y)


def test_split_order_sensitivity():
    root = RngStream(5)
    assert root.split("a", "b").seed != root.split("b", "a").seed


def test_split_requires_labels():
    with pytest.raises(ValueError):
        RngStream(1).split()


def test_bad_label_type_rejected():
    with pytest.raises(TypeError):
        RngStream(1).split(3.14)


def test_named_algorithm():
    assert ALGORITHM == "philox4x64"


def test_permutation_and_choice_shapes():
    s = RngStream(9)
    perm = s.permutation(10)
    assert sorted(perm.tolist()) == list(range(10))
    picks = s.choice(20, 5, replace=False)
    assert len(set(picks.tolist())) == 5
