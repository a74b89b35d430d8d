"""Commuting-density-operator sources and the naive rate bounds."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .prob_core import Channel, JointPmf, Pmf, compose, entropy, mutual_information


class Mode(enum.Enum):
    VISIBLE = "visible"
    HIDDEN = "hidden"


@dataclass(frozen=True)
class CdoSource:
    """Prior over M states plus the M-by-N measurement channel.

    In visible mode the encoder sees the state letter itself; in hidden
    mode it sees only the measurement outcome.
    """

    prior: Pmf
    measurement: Channel
    mode: Mode = Mode.VISIBLE

    def __post_init__(self):
        if self.measurement.shape[0] != len(self.prior):
            raise ValueError(
                f"measurement has {self.measurement.shape[0]} rows for {len(self.prior)} states"
            )
        if not isinstance(self.mode, Mode):
            object.__setattr__(self, "mode", Mode(self.mode))

    @property
    def num_states(self) -> int:
        return len(self.prior)

    @property
    def num_outcomes(self) -> int:
        return self.measurement.shape[1]

    def with_mode(self, mode: Mode | str) -> "CdoSource":
        return CdoSource(self.prior, self.measurement, Mode(mode))


@dataclass(frozen=True)
class ViewSpec:
    v_size: int
    v_channel: Channel


def coin_ensemble(p: float, a1: float, a2: float, mode: Mode | str = Mode.VISIBLE) -> CdoSource:
    """Two biased coins: state 0 has prior ``p`` and lands heads (outcome 0)
    with probability ``a1``; state 1 has prior ``1 - p`` and heads
    probability ``a2``."""
    for name, val in (("p", p), ("alpha1", a1), ("alpha2", a2)):
        if not 0.0 <= val <= 1.0:
            raise ValueError(f"{name}={val!r} outside [0, 1]")
    return CdoSource(
        Pmf([p, 1.0 - p]),
        Channel([[a1, 1.0 - a1], [a2, 1.0 - a2]]),
        Mode(mode),
    )


def joint_xz(s: CdoSource) -> JointPmf:
    return compose(s.prior, s.measurement)


def view(s: CdoSource) -> ViewSpec:
    if s.mode is Mode.VISIBLE:
        return ViewSpec(s.num_states, Channel.identity(s.num_states))
    return ViewSpec(s.num_outcomes, s.measurement)


def state_entropy_bound(s: CdoSource) -> float:
    return entropy(s.prior)


def outcome_entropy_bound(s: CdoSource) -> float:
    return entropy(joint_xz(s).marginal_b())


def common_randomness_columns(s: CdoSource, tol: float = 1e-9) -> np.ndarray:
    w = s.measurement.rows
    spread = w.max(axis=0) - w.min(axis=0)
    return np.flatnonzero(spread <= tol)


def erasure_bound(s: CdoSource, tol: float = 1e-9) -> float:
    """Entropy of the outcome stream after all common-randomness outcomes
    are replaced by a single erasure letter."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    pz = joint_xz(s).marginal_b().probs
    common = common_randomness_columns(s, tol)
    keep = np.setdiff1d(np.arange(pz.size), common)
    merged = np.append(pz[keep], pz[common].sum()) if common.size else pz
    return entropy(Pmf(merged, normalize=True))


def mi_lower_bound(s: CdoSource) -> float:
    return mutual_information(joint_xz(s))


def read_ensemble(path, mode: Mode | str = Mode.VISIBLE) -> CdoSource:
    """Parse ``M N`` / prior / M measurement rows, whitespace separated."""
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if len(lines) < 2:
        raise ValueError(f"{path}: expected a size line and a prior line")
    try:
        m, n = (int(t) for t in lines[0])
        prior = [float(t) for t in lines[1]]
        rows = [[float(t) for t in ln] for ln in lines[2:]]
    except ValueError as exc:
        raise ValueError(f"{path}: malformed ensemble file ({exc})") from None
    if len(prior) != m or len(rows) != m or any(len(r) != n for r in rows):
        raise ValueError(f"{path}: dimensions do not match header {m} {n}")
    return CdoSource(Pmf(prior), Channel(rows), Mode(mode))
