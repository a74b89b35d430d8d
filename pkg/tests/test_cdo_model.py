import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cdorate.cdo_model import (CdoSource, Mode, coin_ensemble, common_randomness_columns,
                               erasure_bound, joint_xz, mi_lower_bound, outcome_entropy_bound,
                               read_ensemble, state_entropy_bound, view)
from cdorate.prob_core import Channel, Pmf, entropy

from conftest import random_channel, random_pmf

H_THIRD = 0.918295834054489515  # h(1/3), mpmath
# entropy of (1/2, 3/16, 5/16), mpmath
ERASURE_EXAMPLE = 1.47721700146248248


def test_coin_ensemble():
    s = coin_ensemble(0.5, 0.1, 0.9)
    assert s.prior.probs.tolist() == [0.5, 0.5]
    assert np.allclose(s.measurement.rows, [[0.1, 0.9], [0.9, 0.1]])
    assert coin_ensemble(1.0, 0.2, 0.7).prior.probs[1] == 0.0
    same = coin_ensemble(0.5, 1 / 3, 1 / 3).measurement.rows
    assert np.array_equal(same[0], same[1])
    with pytest.raises(ValueError):
        coin_ensemble(0.5, 1.1, 0.2)


def test_source_validates_dimensions():
    with pytest.raises(ValueError):
        CdoSource(Pmf([0.5, 0.5]), Channel([[1.0, 0.0]]))
    assert coin_ensemble(0.5, 0.1, 0.9, "hidden").mode is Mode.HIDDEN


def test_joint_xz():
    assert np.allclose(joint_xz(coin_ensemble(0.5, 0.1, 0.9)).probs, [[.05, .45], [.45, .05]])
    perm = CdoSource(Pmf([0.3, 0.7]), Channel([[0, 1], [1, 0]]))
    assert np.allclose(joint_xz(perm).probs, [[0, 0.3], [0.7, 0]])
    assert np.allclose(joint_xz(coin_ensemble(0.5, 1 / 3, 1 / 3)).probs,
                       [[1 / 6, 1 / 3], [1 / 6, 1 / 3]])


def test_view():
    assert np.array_equal(view(coin_ensemble(0.5, 0.1, 0.9)).v_channel.rows, np.eye(2))
    hidden = coin_ensemble(0.5, 1 / 3, 2 / 3, "hidden")
    vs = view(hidden)
    assert vs.v_size == 2
    assert np.allclose(vs.v_channel.rows, [[1 / 3, 2 / 3], [2 / 3, 1 / 3]])


def test_entropy_bounds():
    uniform4 = CdoSource(Pmf(np.full(4, 0.25)), Channel(np.eye(4)))
    assert state_entropy_bound(uniform4) == pytest.approx(2.0)
    assert state_entropy_bound(coin_ensemble(1.0, 0.5, 0.5)) == 0.0
    assert state_entropy_bound(coin_ensemble(0.5, 0.1, 0.9)) == 1.0
    assert outcome_entropy_bound(coin_ensemble(0.5, 0.1, 0.9)) == pytest.approx(1.0, abs=1e-12)
    assert outcome_entropy_bound(coin_ensemble(0.5, 1.0, 1.0)) == 0.0
    assert outcome_entropy_bound(coin_ensemble(0.5, 1 / 3, 1 / 3)) == pytest.approx(H_THIRD,
                                                                                    abs=1e-12)


def test_erasure_bound():
    assert erasure_bound(coin_ensemble(0.5, 0.3, 0.3)) == 0.0
    s = coin_ensemble(0.5, 0.1, 0.9)
    assert erasure_bound(s) == outcome_entropy_bound(s)
    three = CdoSource(Pmf([0.5, 0.5]), Channel([[.5, .25, .25], [.5, .125, .375]]))
    assert common_randomness_columns(three).tolist() == [0]
    assert erasure_bound(three) == pytest.approx(ERASURE_EXAMPLE, abs=1e-12)


def test_erasure_tolerance():
    near = CdoSource(Pmf([0.5, 0.5]), Channel([[0.5, 0.5], [0.5 + 1e-11, 0.5 - 1e-11]]))
    assert erasure_bound(near) == 0.0
    assert erasure_bound(near, tol=0.0) > 0.0
    with pytest.raises(ValueError):
        erasure_bound(near, tol=-1.0)


def test_mi_lower_bound():
    assert mi_lower_bound(coin_ensemble(0.5, 0.1, 0.9)) == pytest.approx(0.5310, abs=5e-5)
    assert mi_lower_bound(coin_ensemble(0.4, 0.3, 0.3)) == pytest.approx(0.0, abs=1e-15)
    assert mi_lower_bound(coin_ensemble(0.5, 1 / 3, 2 / 3)) == pytest.approx(1 - H_THIRD,
                                                                            abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4))
def test_bound_ordering(seed, m, n):
    rng = np.random.default_rng(seed)
    w = random_channel(rng, m, n)
    if n > 1 and rng.random() < 0.5:
        w[:, 0] = w[0, 0] * rng.random()  # force a common-randomness column
        w[:, 1:] *= ((1 - w[:, :1]) / w[:, 1:].sum(axis=1, keepdims=True))
    s = CdoSource(Pmf(random_pmf(rng, m)), Channel(w, normalize=True), Mode.HIDDEN)
    assert erasure_bound(s) <= outcome_entropy_bound(s) + 1e-12
    assert mi_lower_bound(s) <= min(state_entropy_bound(s), outcome_entropy_bound(s)) + 1e-12
    vs = view(s)
    pz = s.prior.probs @ vs.v_channel.rows
    assert np.allclose(pz, joint_xz(s).marginal_b().probs, atol=1e-14)


@given(st.integers(0, 2**32 - 1))
def test_mi_zero_exactly_for_identical_rows(seed):
    rng = np.random.default_rng(seed)
    row = random_pmf(rng, 3)
    s = CdoSource(Pmf(random_pmf(rng, 3)), Channel(np.tile(row, (3, 1))))
    assert mi_lower_bound(s) < 1e-14
    s2 = CdoSource(s.prior, Channel(random_channel(rng, 3, 3, floor=0.0)))
    assert mi_lower_bound(s2) > 0.0


def test_read_ensemble(tmp_path):
    f = tmp_path / "ens.txt"
    f.write_text("# two coins\n2 2\n0.5 0.5\n0.1 0.9\n0.9 0.1\n")
    s = read_ensemble(f, "hidden")
    assert s.mode is Mode.HIDDEN
    assert np.allclose(s.measurement.rows, [[0.1, 0.9], [0.9, 0.1]])
    f.write_text("2 3\n0.5 0.5\n0.1 0.9\n0.9 0.1\n")
    with pytest.raises(ValueError):
        read_ensemble(f)
    assert entropy(s.prior) == 1.0
