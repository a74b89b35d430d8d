"""Convex distortion measures on joint distributions over states x outcomes.

Both quantum-motivated measures compare a joint ``pxy`` over X x Y (with Y
the outcome alphabet Z) against the source's own ``P_XZ``:

* Bhattacharyya-Wootters: ``1 - (sum sqrt(P_XZ * pxy))**2``
* informational divergence: ``D(P_X^e * P_Z|X || pxy)`` where ``P_X^e`` is
  the X-marginal of ``pxy`` itself.

``ExpectedLetter`` is the classical average letter distortion.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cdo_model import CdoSource, joint_xz
from .prob_core import empirical_joint_arrays

LN2 = np.log(2.0)

BW, ID, LETTER = 0, 1, 2
_NAMES = {BW: "bw", ID: "id", LETTER: "letter"}


@dataclass(frozen=True)
class DistortionMeasure:
    kind: int
    letter: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in _NAMES:
            raise ValueError(f"unknown distortion kind {self.kind!r}")
        if self.kind == LETTER:
            d = np.array(self.letter, dtype=float)
            if d.ndim != 2 or not np.all(np.isfinite(d)) or np.any(d < 0):
                raise ValueError("letter distortion must be a finite non-negative matrix")
            d.setflags(write=False)
            object.__setattr__(self, "letter", d)

    @property
    def name(self) -> str:
        return _NAMES[self.kind]

    @classmethod
    def bw(cls) -> "DistortionMeasure":
        return cls(BW)

    @classmethod
    def id(cls) -> "DistortionMeasure":
        return cls(ID)

    @classmethod
    def expected_letter(cls, matrix) -> "DistortionMeasure":
        return cls(LETTER, matrix)

    @classmethod
    def from_name(cls, name: str) -> "DistortionMeasure":
        name = name.lower()
        if name == "bw":
            return cls.bw()
        if name == "id":
            return cls.id()
        raise ValueError(f"unknown measure {name!r} (expected 'bw' or 'id')")


def _as_array(pxy) -> np.ndarray:
    return np.asarray(getattr(pxy, "probs", pxy), dtype=float)


def _check_shape(m: DistortionMeasure, s: CdoSource, p: np.ndarray) -> None:
    if m.kind == LETTER:
        if p.shape != m.letter.shape:
            raise ValueError(f"joint shape {p.shape} != letter matrix shape {m.letter.shape}")
    elif p.shape != (s.num_states, s.num_outcomes):
        raise ValueError(
            f"joint shape {p.shape} != states x outcomes {(s.num_states, s.num_outcomes)}"
        )


def overlap(emp, ref) -> float:
    """Unsquared Bhattacharyya coefficient ``sum sqrt(emp * ref)``."""
    e, r = _as_array(emp), _as_array(ref)
    if e.shape != r.shape:
        raise ValueError("overlap needs equal shapes")
    return float(np.sqrt(e * r).sum())


def overlap_squared(emp, ref) -> float:
    return min(overlap(emp, ref) ** 2, 1.0)


def _id_reference(s: CdoSource, p: np.ndarray) -> np.ndarray:
    return p.sum(axis=1)[:, None] * s.measurement.rows


def evaluate(m: DistortionMeasure, s: CdoSource, pxy) -> float:
    p = _as_array(pxy)
    _check_shape(m, s, p)
    if m.kind == BW:
        return max(1.0 - overlap_squared(p, joint_xz(s).probs), 0.0)
    if m.kind == ID:
        r = _id_reference(s, p)
        mask = r > 0
        if np.any(p[mask] <= 0):
            return float("inf")
        return max(float((r[mask] * np.log2(r[mask] / p[mask])).sum()), 0.0)
    return float((p * m.letter).sum())


def string_distortion(m: DistortionMeasure, s: CdoSource, x_str, y_str) -> float:
    x = np.asarray(x_str)
    y = np.asarray(y_str)
    if x.shape != y.shape:
        raise ValueError("strings must have equal length")
    if x.size == 0:
        raise ValueError("strings must be non-empty")
    ny = m.letter.shape[1] if m.kind == LETTER else s.num_outcomes
    return evaluate(m, s, empirical_joint_arrays(x, y, (s.num_states, ny)))


def gradient(m: DistortionMeasure, s: CdoSource, pxy) -> np.ndarray:
    """Partial derivatives of ``evaluate`` with respect to each entry of ``pxy``.

    ``pxy`` is treated as a free point of the positive orthant, so the
    informational-divergence gradient includes the dependence of its
    reference ``P_X^e * P_Z|X`` on the row sums of ``pxy``.
    """
    p = _as_array(pxy)
    _check_shape(m, s, p)
    if m.kind == LETTER:
        return m.letter.copy()
    if m.kind == BW:
        ref = joint_xz(s).probs
        if np.any((p <= 0) & (ref > 0)):
            raise ValueError("BW gradient undefined where pxy is zero but P_XZ is not")
        ratio = np.divide(ref, p, out=np.zeros_like(p), where=ref > 0)
        return -overlap(p, ref) * np.sqrt(ratio)
    w = s.measurement.rows
    rows = p.sum(axis=1)
    r = rows[:, None] * w
    if np.any((p <= 0) & (r > 0)):
        raise ValueError("ID gradient undefined where pxy is zero but its reference is not")
    g = np.zeros_like(p)
    for x in np.flatnonzero(rows > 0):
        wx, px, mx = w[x], p[x], rows[x]
        sup = wx > 0
        wlogw = (wx[sup] * np.log(wx[sup])).sum()
        wlogp = (wx[sup] * np.log(px[sup])).sum()
        g[x] = np.log(mx) + 1.0 + wlogw - wlogp
        g[x, sup] -= mx * wx[sup] / px[sup]
    return g / LN2
