"""Finite-alphabet probability arithmetic and information measures (in bits).

Alphabets are index based: letter ``a`` of a size-``n`` alphabet is the
integer ``a`` in ``range(n)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

ATOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_nonneg(a: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} has non-finite entries")
    if np.any(a < 0):
        raise ValueError(f"{what} has negative entries")


@dataclass(frozen=True)
class Pmf:
    """Probability vector over ``range(len(probs))``."""

    probs: np.ndarray

    def __init__(self, probs, normalize: bool = False):
        a = np.asarray(probs, dtype=float)
        if a.ndim != 1 or a.size == 0:
            raise ValueError("Pmf needs a non-empty 1-d array")
        _check_nonneg(a, "Pmf")
        total = a.sum()
        if normalize:
            if total <= 0:
                raise ValueError("cannot normalize an all-zero vector")
            a = a / total
        elif abs(total - 1.0) > ATOL:
            raise ValueError(f"Pmf sums to {total!r}, not 1")
        object.__setattr__(self, "probs", _frozen(a))

    def __len__(self) -> int:
        return self.probs.size

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)


@dataclass(frozen=True)
class JointPmf:
    """Joint distribution on ``range(m) x range(n)`` stored as an m-by-n matrix."""

    probs: np.ndarray

    def __init__(self, probs, normalize: bool = False):
        a = np.asarray(probs, dtype=float)
        if a.ndim != 2 or a.size == 0:
            raise ValueError("JointPmf needs a non-empty 2-d array")
        _check_nonneg(a, "JointPmf")
        total = a.sum()
        if normalize:
            if total <= 0:
                raise ValueError("cannot normalize an all-zero matrix")
            a = a / total
        elif abs(total - 1.0) > ATOL:
            raise ValueError(f"JointPmf sums to {total!r}, not 1")
        object.__setattr__(self, "probs", _frozen(a))

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape

    def marginal_a(self) -> Pmf:
        return Pmf(self.probs.sum(axis=1), normalize=True)

    def marginal_b(self) -> Pmf:
        return Pmf(self.probs.sum(axis=0), normalize=True)

    def swap(self) -> "JointPmf":
        return JointPmf(self.probs.T)


@dataclass(frozen=True)
class Channel:
    """Row-stochastic matrix; row ``a`` is the output law given input ``a``."""

    rows: np.ndarray

    def __init__(self, rows, normalize: bool = False):
        a = np.asarray(rows, dtype=float)
        if a.ndim != 2 or a.size == 0:
            raise ValueError("Channel needs a non-empty 2-d array")
        _check_nonneg(a, "Channel")
        sums = a.sum(axis=1)
        if normalize:
            if np.any(sums <= 0):
                raise ValueError("cannot normalize an all-zero row")
            a = a / sums[:, None]
        elif np.any(np.abs(sums - 1.0) > ATOL):
            raise ValueError("Channel rows must each sum to 1")
        object.__setattr__(self, "rows", _frozen(a))

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape

    @classmethod
    def identity(cls, n: int) -> "Channel":
        return cls(np.eye(n))


def _plogp_sum(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum()) + 0.0  # + 0.0 turns -0.0 into 0.0


def entropy(p: Pmf) -> float:
    return max(_plogp_sum(p.probs), 0.0)


def binary_entropy(a: float) -> float:
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"binary_entropy argument {a!r} outside [0, 1]")
    return _plogp_sum(np.array([a, 1.0 - a]))


def conditional_entropy(j: JointPmf) -> float:
    """H(A|B) for the joint ``j`` over A x B."""
    p = j.probs
    pb = p.sum(axis=0)
    mask = p > 0
    ratio = p[mask] / np.broadcast_to(pb, p.shape)[mask]
    return max(float(-(p[mask] * np.log2(ratio)).sum()), 0.0)


def divergence(p: Pmf, q: Pmf) -> float:
    """D(p||q) in bits; ``inf`` when q misses part of the support of p."""
    if len(p) != len(q):
        raise ValueError("divergence needs equal alphabet sizes")
    return _divergence_arr(p.probs, q.probs)


def _divergence_arr(p: np.ndarray, q: np.ndarray) -> float:
    mask = p > 0
    if np.any(q[mask] <= 0):
        return float("inf")
    return max(float((p[mask] * np.log2(p[mask] / q[mask])).sum()), 0.0)


def mutual_information(j: JointPmf) -> float:
    p = j.probs
    prod = np.outer(p.sum(axis=1), p.sum(axis=0))
    return _divergence_arr(p.ravel(), prod.ravel())


def compose(p: Pmf, c: Channel) -> JointPmf:
    if c.shape[0] != len(p):
        raise ValueError(f"channel has {c.shape[0]} rows, Pmf has {len(p)} letters")
    return JointPmf(p.probs[:, None] * c.rows, normalize=True)


def empirical_joint(pairs: Iterable[tuple[int, int]], sizes: tuple[int, int]) -> JointPmf:
    pairs = np.asarray(list(pairs), dtype=np.int64)
    if pairs.size == 0:
        raise ValueError("empirical_joint needs at least one pair")
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("pairs must be a sequence of (a, b) letters")
    return empirical_joint_arrays(pairs[:, 0], pairs[:, 1], sizes)


def empirical_joint_arrays(a: np.ndarray, b: np.ndarray, sizes: tuple[int, int]) -> JointPmf:
    """Same as :func:`empirical_joint` for two equal-length letter arrays."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("letter strings must be 1-d and of equal length")
    if a.size == 0:
        raise ValueError("empirical_joint needs at least one pair")
    m, n = sizes
    if a.min() < 0 or a.max() >= m or b.min() < 0 or b.max() >= n:
        raise ValueError("letter outside its alphabet")
    counts = np.bincount(a * n + b, minlength=m * n).reshape(m, n)
    return JointPmf(counts / a.size)


def mix(weights: Pmf, joints: Sequence[JointPmf]) -> JointPmf:
    if len(weights) != len(joints):
        raise ValueError("one weight per joint is required")
    shapes = {jt.shape for jt in joints}
    if len(shapes) != 1:
        raise ValueError(f"joints have different shapes: {sorted(shapes)}")
    stack = np.stack([jt.probs for jt in joints])
    return JointPmf(np.tensordot(weights.probs, stack, axes=1), normalize=True)
