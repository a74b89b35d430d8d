"""Monte Carlo of random block codes for a CDO source.

Each trial draws a source string, draws a fresh i.i.d. codebook from the
reconstruction marginal of a target joint ``P_VY``, and encodes the view
string to the codeword whose empirical joint with it is closest (in max
absolute deviation) to ``P_VY``.  The trial then records the string
distortion and whether the squared overlap between the empirical state /
reconstruction joint and ``P_XZ`` fell below ``1 - epsilon``.

A code of rate R at block length L needs ``ceil(2**(L*R))`` words, which is
only affordable for small ``L*R``.  With ``sub_block`` set, the block is cut
into pieces of that length and every piece gets its own random code of rate
R; the concatenation is a code of rate R (up to the rounding of the word
count) for the whole block.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .cdo_model import CdoSource, Mode, joint_xz
from .distortion import BW, ID, DistortionMeasure, overlap_squared, string_distortion
from .prob_core import Channel, JointPmf, Pmf, empirical_joint_arrays
from .rd_solver import induced_joints

DEFAULT_BUDGET = 2**26  # letters held by one codebook


class BudgetError(ValueError):
    """A requested codebook would hold more letters than the budget allows."""


@dataclass(frozen=True)
class Codebook:
    block_len: int
    num_words: int
    words: np.ndarray  # num_words x block_len, letters of Y

    def __post_init__(self):
        if self.num_words < 1 or self.words.shape != (self.num_words, self.block_len):
            raise ValueError("codebook words must form a num_words x block_len array")


@dataclass(frozen=True)
class SimReport:
    trials: int
    mean_distortion: float
    overlap_fail_rate: float
    rate_bits: float
    epsilon: float
    block_len: int
    sub_block: int | None = None


def num_words(block_len: int, rate: float) -> int:
    """``ceil(2**(block_len * rate))``, with ``block_len * rate`` snapped to an
    integer when it is one up to rounding (400 * 0.3 is not exactly 120)."""
    x = block_len * rate
    if abs(x - round(x)) < 1e-9:
        return 2 ** round(x)
    if x > 1000:
        raise BudgetError(f"2**{x:g} codewords is beyond any budget")
    return max(math.ceil(2.0**x), 1)


def sample_source(s: CdoSource, block_len: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """(x_str, v_str): i.i.d. states and what the encoder sees of them."""
    if block_len < 1:
        raise ValueError("block_len must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.choice(s.num_states, size=block_len, p=s.prior.probs)
    if s.mode is Mode.VISIBLE:
        return x, x.copy()
    # inverse-cdf draw of one outcome per state letter
    cdf = np.cumsum(s.measurement.rows, axis=1)
    u = rng.random(block_len)
    v = (u[:, None] >= cdf[x]).sum(axis=1)
    return x, np.minimum(v, s.num_outcomes - 1)


def _check_budget(k: int, block_len: int, budget: int) -> None:
    if k * block_len > budget:
        raise BudgetError(f"codebook of {float(k):.4g} words x {block_len} letters exceeds "
                          f"the budget of {budget} letters")


def generate_codebook(py: Pmf, block_len: int, rate: float, seed,
                      budget: int = DEFAULT_BUDGET) -> Codebook:
    if block_len < 1:
        raise ValueError("block_len must be >= 1")
    if not rate >= 0:
        raise ValueError("rate must be >= 0")
    k = num_words(block_len, rate)
    _check_budget(k, block_len, budget)
    rng = np.random.default_rng(seed)
    words = rng.choice(len(py), size=(k, block_len), p=py.probs).astype(np.int64)
    return Codebook(block_len, k, words)


def encode(v_str, cb: Codebook, target_pvy: JointPmf) -> int:
    """Index of the codeword whose empirical joint with ``v_str`` deviates
    least from ``target_pvy`` in the max norm; ties go to the lowest index."""
    return _encode(np.asarray(v_str, dtype=np.int64), cb, target_pvy)[0]


def _encode(v: np.ndarray, cb: Codebook, target: JointPmf) -> tuple[int, float]:
    if v.shape != (cb.block_len,):
        raise ValueError(f"string of length {v.size} for a block length of {cb.block_len}")
    k, dev = kernels.encode_argmin(v, cb.words, np.ascontiguousarray(target.probs))
    return int(k), float(dev)


def _pieces(block_len: int, sub_block: int | None) -> list[tuple[int, int]]:
    if sub_block is None or sub_block >= block_len:
        return [(0, block_len)]
    return [(a, min(a + sub_block, block_len)) for a in range(0, block_len, sub_block)]


def _trial(s, m, pvy, py, pxz, block_len, rate, epsilon, pieces, budget, seed, trial):
    src_seq, cb_seq = np.random.SeedSequence(seed, spawn_key=(trial,)).spawn(2)
    x, v = sample_source(s, block_len, src_seq)
    y = np.empty(block_len, dtype=np.int64)
    for (a, b), piece_seq in zip(pieces, cb_seq.spawn(len(pieces))):
        cb = generate_codebook(py, b - a, rate, piece_seq, budget)
        y[a:b] = cb.words[_encode(v[a:b], cb, pvy)[0]]
    dist = string_distortion(m, s, x, y)
    emp = empirical_joint_arrays(x, y, pxz.shape)
    return dist, overlap_squared(emp, pxz) < 1.0 - epsilon


def simulate(s: CdoSource, m: DistortionMeasure, channel: Channel, block_len: int,
             rate: float, trials: int, epsilon: float, seed: int,
             sub_block: int | None = None, budget: int = DEFAULT_BUDGET) -> SimReport:
    """Average the random-code experiment over ``trials`` independent trials.

    Trial ``t`` draws everything from ``SeedSequence(seed, spawn_key=(t,))``
    so each trial's numbers do not depend on the others, and runs at two
    rates share their source strings.
    """
    if block_len < 1 or trials < 1:
        raise ValueError("block_len and trials must be >= 1")
    if not rate >= 0:
        raise ValueError("rate must be >= 0")
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if sub_block is not None and sub_block < 1:
        raise ValueError("sub_block must be >= 1")
    if m.kind not in (BW, ID):
        raise ValueError("simulate supports the bw and id measures")
    pvy, _ = induced_joints(s, channel)
    py = pvy.marginal_b()
    pxz = joint_xz(s).probs
    pieces = _pieces(block_len, sub_block)
    # reject oversized runs before any work is done
    for n in {b - a for a, b in pieces}:
        _check_budget(num_words(n, rate), n, budget)
    results = [
        _trial(s, m, pvy, py, pxz, block_len, rate, epsilon, pieces, budget, seed, t)
        for t in range(trials)
    ]
    dists = np.array([r[0] for r in results])
    fails = np.array([r[1] for r in results])
    return SimReport(
        trials=trials,
        mean_distortion=float(dists.mean()),
        overlap_fail_rate=float(fails.mean()),
        rate_bits=float(rate),
        epsilon=float(epsilon),
        block_len=block_len,
        sub_block=sub_block,
    )
