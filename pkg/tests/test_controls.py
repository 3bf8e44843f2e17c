import math

import numpy as np
import pytest

from ctrlcomm.controls import (
    BilinearMap,
    ControlSignal,
    bh_series,
    eval_signal,
    fb_diagonal,
    fb_map,
    map_norm_bound_check,
    pair_output,
    signal_energy,
)
from ctrlcomm.errors import InvalidInputError, PreconditionError


def test_alice_and_bob_basis_functions():
    t = np.linspace(0, 1, 7)
    assert np.allclose(ControlSignal("alice", [1.0])(t), math.sqrt(2) * np.sin(2 * np.pi * t))
    assert np.allclose(ControlSignal("alice", [0.0, 1.0])(t), math.sqrt(2) * np.cos(2 * np.pi * t))
    assert np.allclose(ControlSignal("bob", [1.0])(t), -math.sqrt(2) * np.cos(2 * np.pi * t))
    assert np.allclose(ControlSignal("bob", [0.0, 0.0, 0.0, 1.0])(t), math.sqrt(2) * np.sin(4 * np.pi * t))
    assert np.allclose(eval_signal(ControlSignal("alice", [0.0]), t), 0.0)


def test_energy_is_parseval(rng):
    c = rng.standard_normal(7)
    sig = ControlSignal("bob", c)
    t = np.linspace(0, 1, 20001)
    quad = np.trapezoid(sig(t) ** 2, t)
    assert signal_energy(sig) == pytest.approx(quad, rel=1e-10)
    assert ControlSignal("alice", [1.0]).energy == 1.0


def test_fb_diagonal_values():
    assert np.allclose(fb_diagonal(4), [1 / np.pi, 1 / np.pi, 1 / (2 * np.pi), 1 / (2 * np.pi)])
    assert np.allclose(fb_diagonal(1), [1 / np.pi])


def test_pair_output_examples():
    f = fb_map(4)
    one = ControlSignal("alice", [1.0]), ControlSignal("bob", [1.0])
    assert pair_output(*one, f) == pytest.approx(1 / np.pi, abs=1e-15)
    assert pair_output(ControlSignal("alice", [1.0]), ControlSignal("bob", [0.0, 1.0]), f) == 0.0
    assert pair_output(ControlSignal("alice", [0.0] * 4), ControlSignal("bob", [0.0] * 4), f) == 0.0
    with pytest.raises(InvalidInputError):
        pair_output(one[1], one[0], f)


def test_bh_series_against_matrix_form(rng):
    a, b = rng.standard_normal(8), rng.standard_normal(8)
    assert bh_series(a, b) == pytest.approx(a @ np.diag(fb_diagonal(8)) @ b, abs=1e-14)


def test_generic_map_pairing(rng):
    m = rng.standard_normal((3, 3))
    f = BilinearMap(m)
    a, b = rng.standard_normal(3), rng.standard_normal(3)
    assert pair_output(ControlSignal("alice", a), ControlSignal("bob", b), f) == pytest.approx(a @ m @ b)


def test_short_signal_is_padded_but_long_is_rejected():
    f = fb_map(2)
    assert pair_output(ControlSignal("alice", [1.0]), ControlSignal("bob", [1.0, 0.0]), f) == pytest.approx(1 / np.pi)
    with pytest.raises(PreconditionError):
        pair_output(ControlSignal("alice", [1.0, 0, 0]), ControlSignal("bob", [1.0]), f)


def test_map_properties():
    f = fb_map(6)
    assert f.is_strongly_regular() and f.is_regular() and f.unbounded_rank
    assert map_norm_bound_check(f)
    g = BilinearMap(np.array([[0.0, 1.0], [1.0, 0.0]]))
    assert not g.is_diagonal() and not g.is_regular()
    assert BilinearMap(np.diag([1.0, 2.0])).is_regular()
    assert not BilinearMap(np.diag([1.0, 2.0])).is_strongly_regular()
    with pytest.raises(PreconditionError):
        map_norm_bound_check(g)
    with pytest.raises(InvalidInputError):
        BilinearMap(np.ones((2, 3)))
    with pytest.raises(InvalidInputError):
        ControlSignal("carol", [1.0])
    with pytest.raises(InvalidInputError):
        ControlSignal("alice", [np.inf])


@pytest.mark.parametrize("l", [1, 2, 5, 40])
def test_truncated_map_norm(l):
    assert np.all(fb_map(l).singular_values() <= 1 / np.pi + 1e-15)
