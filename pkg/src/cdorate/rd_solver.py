"""Rate-distortion function of a CDO source.

``R(delta)`` is the minimum of ``I(V;Y)`` over test channels ``P_Y|V`` whose
induced state/reconstruction joint ``P_XY`` has distortion at most
``delta``.  The convex program is traced by a Lagrangian sweep: for each
multiplier ``lam`` the inner solver minimizes ``I(V;Y) + lam * d(P_XY)``,
and bisection on ``lam`` turns the sweep into a value at a requested
distortion.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .cdo_model import CdoSource, Mode, view
from .distortion import BW, ID, LETTER, DistortionMeasure
from .prob_core import Channel, JointPmf, Pmf, compose

log = logging.getLogger(__name__)

HIDDEN_ZERO_DELTA = 1e-9
BISECT_TOL = 1e-6


def default_lambda_grid() -> np.ndarray:
    return np.geomspace(2.0**-10, 2.0**10, 64)


@dataclass(frozen=True)
class SolverOptions:
    lambda_grid: np.ndarray = field(default_factory=default_lambda_grid)
    max_iters: int = 20000
    obj_tol: float = 1e-10
    inner_damping: float = 1.0
    restarts: int = 3
    seed: int = 0
    mult_iters: int = 200
    lambda_cap: float = 2.0**48

    def __post_init__(self):
        grid = np.array(self.lambda_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
            raise ValueError("lambda_grid must be positive and strictly increasing")
        grid.setflags(write=False)
        object.__setattr__(self, "lambda_grid", grid)
        if self.max_iters < 1 or self.restarts < 1 or self.mult_iters < 0:
            raise ValueError("max_iters and restarts must be >= 1")
        if not self.obj_tol > 0:
            raise ValueError("obj_tol must be > 0")
        if not 0 < self.inner_damping <= 1:
            raise ValueError("inner_damping must lie in (0, 1]")


@dataclass(frozen=True)
class RdPoint:
    delta: float
    rate: float
    lam: float
    channel: Channel
    distortion: float
    converged: bool = True
    feasible: bool = True


@dataclass(frozen=True)
class RdCurve:
    points: tuple[RdPoint, ...]

    @property
    def deltas(self) -> np.ndarray:
        return np.array([p.delta for p in self.points])

    @property
    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    @property
    def converged(self) -> bool:
        return all(p.converged for p in self.points)


@dataclass(frozen=True)
class LagrangianResult:
    channel: np.ndarray
    rate: float
    distortion: float
    objective: float
    converged: bool
    iterations: int
    trace: np.ndarray


class _Problem:
    """Arrays the kernels need, derived once per (source, measure)."""

    def __init__(self, s: CdoSource, m: DistortionMeasure):
        self.source = s
        self.measure = m
        vs = view(s)
        self.nv = vs.v_size
        self.ny = m.letter.shape[1] if m.kind == LETTER else s.num_outcomes
        if m.kind == LETTER and m.letter.shape[0] != s.num_states:
            raise ValueError("letter matrix needs one row per state")
        self.kind = m.kind
        self.px = s.prior.probs
        self.pxv = np.ascontiguousarray(self.px[:, None] * vs.v_channel.rows)
        self.pv = np.ascontiguousarray(self.pxv.sum(axis=0))
        self.pxz = np.ascontiguousarray(self.px[:, None] * s.measurement.rows)
        self.w = np.ascontiguousarray(s.measurement.rows)
        if m.kind == LETTER:
            self.letter = np.ascontiguousarray(m.letter)
        else:
            self.letter = np.zeros((s.num_states, self.ny))

    def rate(self, c: np.ndarray) -> float:
        q = self.pv @ c
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(c > 0, self.pv[:, None] * c * np.log(c / q[None, :]), 0.0)
        return max(float(t.sum()) / kernels.LN2, 0.0)

    def distortion(self, c: np.ndarray) -> float:
        pxy = self.pxv @ c
        if self.kind == ID:
            r = pxy.sum(axis=1)[:, None] * self.w
            if np.any((r > 0) & (pxy <= 0)):
                return float("inf")
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(r > 0, r * np.log(r / pxy), 0.0)
            return max(float(t.sum()) / kernels.LN2, 0.0)
        return float(kernels.dist_value(self.kind, pxy, self.pxz, self.w, self.letter))

    def zero_rate(self) -> tuple[float, np.ndarray]:
        """Best distortion reachable with identical channel rows, and the row."""
        if self.kind == BW:
            a = np.sqrt(self.pxz * self.px[:, None]).sum(axis=0)
            q = a**2 / (a**2).sum()
        elif self.kind == ID:
            q = self.pxz.sum(axis=0)
        else:
            q = np.zeros(self.ny)
            q[int(np.argmin(self.px @ self.letter))] = 1.0
        c = np.tile(q, (self.nv, 1))
        return self.distortion(c), c


def induced_joints(s: CdoSource, c: Channel) -> tuple[JointPmf, JointPmf]:
    """(P_VY, P_XY) for the test channel ``c`` = P_Y|V."""
    vs = view(s)
    if c.shape[0] != vs.v_size:
        raise ValueError(f"channel needs {vs.v_size} rows, got {c.shape[0]}")
    pxv = s.prior.probs[:, None] * vs.v_channel.rows
    pvy = compose(Pmf(pxv.sum(axis=0), normalize=True), c)
    return pvy, JointPmf(pxv @ c.rows, normalize=True)


def _starts(shape, opts: SolverOptions):
    rng = np.random.default_rng(opts.seed)
    uniform = np.full(shape, 1.0 / shape[1])
    yield uniform
    for _ in range(opts.restarts - 1):
        c = uniform + rng.uniform(0.0, 1e-3, size=shape)
        yield c / c.sum(axis=1, keepdims=True)


def _minimize(prob: _Problem, lam: float, opts: SolverOptions) -> LagrangianResult:
    best = None
    for c0 in _starts((prob.nv, prob.ny), opts):
        trace = np.empty(opts.max_iters + 1)
        c, f, iters, ok, nt = kernels.lagrangian_kernel(
            prob.kind, prob.pv, prob.pxv, prob.pxz, prob.w, prob.letter,
            float(lam), np.ascontiguousarray(c0), opts.max_iters, opts.obj_tol,
            opts.inner_damping, opts.mult_iters, trace,
        )
        if best is None or f < best[1]:
            best = (c, f, iters, ok, trace[:nt].copy())
    c, f, iters, ok, trace = best
    if not ok:
        log.debug("lagrangian solve at lam=%g did not converge in %d iterations", lam, iters)
    return LagrangianResult(c, prob.rate(c), prob.distortion(c), f, bool(ok), iters, trace)


def lagrangian_minimize(s: CdoSource, m: DistortionMeasure, lam: float,
                        opts: SolverOptions | None = None) -> LagrangianResult:
    """Minimize ``I(V;Y) + lam * d(P_XY)`` over test channels P_Y|V."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    return _minimize(_Problem(s, m), lam, opts or SolverOptions())


class _Sweep:
    """Memoized Lagrangian solutions for one problem."""

    def __init__(self, prob: _Problem, opts: SolverOptions):
        self.prob = prob
        self.opts = opts
        self._cache: dict[float, LagrangianResult] = {}

    def __call__(self, lam: float) -> LagrangianResult:
        lam = float(lam)
        if lam not in self._cache:
            self._cache[lam] = _minimize(self.prob, lam, self.opts)
        return self._cache[lam]


def _point(prob, delta, lam, c, converged=True, feasible=True) -> RdPoint:
    return RdPoint(
        delta=float(delta),
        rate=prob.rate(c),
        lam=float(lam),
        channel=Channel(c, normalize=True),
        distortion=prob.distortion(c),
        converged=converged,
        feasible=feasible,
    )


def _zero_distortion_channel(prob: _Problem) -> np.ndarray | None:
    """Minimum-rate channel with distortion exactly zero, when it can be built directly."""
    s = prob.source
    if prob.kind in (BW, ID):
        if s.mode is Mode.VISIBLE:
            return s.measurement.rows.copy()
        return None
    allowed = (prob.pxv.T @ prob.letter) <= 0
    active = prob.pv > 0
    if not np.all(allowed[active].any(axis=1)):
        return None
    mask = allowed.astype(float)
    mask[~active] = 1.0
    c = mask / mask.sum(axis=1, keepdims=True)
    for _ in range(100000):
        q = prob.pv @ c
        cn = mask * q[None, :]
        cn /= cn.sum(axis=1, keepdims=True)
        if np.abs(cn - c).max() < 1e-15:
            c = cn
            break
        c = cn
    return c


def _mixture_refine(prob: _Problem, delta: float, c_lo: np.ndarray, c_hi: np.ndarray) -> np.ndarray:
    """Largest mix t*c_lo + (1-t)*c_hi still within ``delta``; convexity keeps
    its rate under the chord between the two endpoints."""
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if prob.distortion(mid * c_lo + (1 - mid) * c_hi) <= delta:
            lo = mid
        else:
            hi = mid
    c = lo * c_lo + (1 - lo) * c_hi
    return c if prob.rate(c) <= prob.rate(c_hi) else c_hi


def _solve(prob: _Problem, delta: float, sweep: _Sweep) -> RdPoint:
    opts = sweep.opts
    if not delta >= 0:
        raise ValueError(f"delta must be >= 0, got {delta!r}")
    d0, c0 = prob.zero_rate()
    if delta >= d0:
        return _point(prob, delta, 0.0, c0)
    target = delta
    if delta == 0:
        cz = _zero_distortion_channel(prob)
        if cz is not None:
            return _point(prob, delta, math.inf, cz)
        if prob.source.mode is Mode.HIDDEN and prob.kind in (BW, ID):
            target = HIDDEN_ZERO_DELTA

    grid = list(opts.lambda_grid)
    results = [sweep(lam) for lam in grid]
    feasible = [i for i, r in enumerate(results) if r.distortion <= target]
    lam_hi = None
    if feasible:
        lam_hi = grid[feasible[0]]
    else:
        lam = grid[-1]
        while lam < opts.lambda_cap:
            lam *= 2.0
            if sweep(lam).distortion <= target:
                lam_hi = lam
                break
    if lam_hi is None:
        best = min(results + [sweep(lam)], key=lambda r: r.distortion)
        log.warning("delta=%g infeasible; smallest distortion found %g", delta, best.distortion)
        return _point(prob, best.distortion, lam, best.channel,
                      converged=best.converged, feasible=False)

    # lam_lo: largest known multiplier whose solution violates the target
    lam_lo, c_lo = 0.0, c0
    r_lo_rate = 0.0
    lower = [lam for lam in grid if lam < lam_hi]
    if lower:
        lam_lo = lower[-1]
    else:
        lam = lam_hi
        while lam > 2.0**-60:
            lam *= 0.5
            if sweep(lam).distortion > target:
                lam_lo = lam
                break
    if lam_lo > 0:
        c_lo, r_lo_rate = sweep(lam_lo).channel, sweep(lam_lo).rate

    hi = sweep(lam_hi)
    for _ in range(80):
        if target - hi.distortion <= BISECT_TOL or hi.rate - r_lo_rate <= BISECT_TOL:
            break
        mid = math.sqrt(lam_lo * lam_hi) if lam_lo > 0 else 0.5 * lam_hi
        r = sweep(mid)
        if r.distortion <= target:
            lam_hi, hi = mid, r
        else:
            lam_lo, c_lo, r_lo_rate = mid, r.channel, r.rate
    c = _mixture_refine(prob, target, c_lo, hi.channel)
    converged = hi.converged and (lam_lo == 0 or sweep(lam_lo).converged)
    return _point(prob, delta, lam_hi, c, converged=converged)


def solve_point(s: CdoSource, m: DistortionMeasure, delta: float,
                opts: SolverOptions | None = None) -> RdPoint:
    prob = _Problem(s, m)
    return _solve(prob, float(delta), _Sweep(prob, opts or SolverOptions()))


def sweep_lambda(s: CdoSource, m: DistortionMeasure,
                 opts: SolverOptions | None = None) -> list[tuple[float, float, float]]:
    """(lam, distortion, rate) for every multiplier on the grid."""
    opts = opts or SolverOptions()
    prob = _Problem(s, m)
    sweep = _Sweep(prob, opts)
    return [(lam, sweep(lam).distortion, sweep(lam).rate) for lam in opts.lambda_grid]


def _envelope(prob: _Problem, pts: list[RdPoint]) -> list[RdPoint]:
    pts = list(pts)
    for i in range(1, len(pts)):
        prev = pts[i - 1]
        if pts[i].rate > prev.rate and prev.feasible:
            pts[i] = _point(prob, pts[i].delta, prev.lam, prev.channel.rows, prev.converged)
    for _ in range(len(pts)):
        changed = False
        for i in range(1, len(pts) - 1):
            a, b, c = pts[i - 1], pts[i], pts[i + 1]
            span = c.delta - a.delta
            if span <= 0 or not (a.feasible and c.feasible):
                continue
            t = (c.delta - b.delta) / span
            chord = t * a.rate + (1 - t) * c.rate
            if b.rate > chord + 1e-12:
                mixed = t * a.channel.rows + (1 - t) * c.channel.rows
                if prob.rate(mixed) < b.rate and prob.distortion(mixed) <= b.delta + 1e-12:
                    pts[i] = _point(prob, b.delta, b.lam, mixed, a.converged and c.converged)
                    changed = True
        if not changed:
            break
    return pts


def solve_curve(s: CdoSource, m: DistortionMeasure, deltas,
                opts: SolverOptions | None = None) -> RdCurve:
    deltas = [float(d) for d in deltas]
    if any(not d >= 0 for d in deltas):
        raise ValueError("deltas must be >= 0")
    opts = opts or SolverOptions()
    prob = _Problem(s, m)
    sweep = _Sweep(prob, opts)
    pts = [_solve(prob, d, sweep) for d in sorted(deltas)]
    return RdCurve(tuple(_envelope(prob, pts)))


def grid_oracle(s: CdoSource, m: DistortionMeasure, delta: float, step: float = 1e-3,
                slack: float | None = None) -> float:
    """Brute-force minimum of I(V;Y) over a grid of binary-output channels.

    Every row of P_Y|V takes values on {0, step, ..., 1}; channels with
    distortion up to ``delta + slack`` count as feasible (``slack`` defaults
    to ``step``).  With ``slack=0`` only truly feasible channels are counted,
    so the result is an upper bound on the true rate.
    """
    slack = step if slack is None else float(slack)
    if slack < 0:
        raise ValueError("slack must be >= 0")
    prob = _Problem(s, m)
    if prob.nv > 2 or prob.ny != 2:
        raise ValueError("grid_oracle needs |V| <= 2 and |Y| = 2")
    if not 0 < step <= 1e-2:
        raise ValueError("step must lie in (0, 1e-2]")
    n = int(round(1.0 / step)) + 1
    best, _, _ = kernels.scan_grid(
        prob.kind, prob.pv, prob.pxv, prob.pxz, prob.w, prob.letter, float(delta) + slack, n
    )
    return float(best)


def classical_rd(px, letter, delta: float, opts: SolverOptions | None = None) -> float:
    """Shannon rate-distortion function of a memoryless source under a
    letter-to-letter distortion matrix (states x reconstructions)."""
    px = px if isinstance(px, Pmf) else Pmf(px)
    letter = np.asarray(letter, dtype=float)
    n = letter.shape[1]
    src = CdoSource(px, Channel(np.full((len(px), n), 1.0 / n)), Mode.VISIBLE)
    return solve_point(src, DistortionMeasure.expected_letter(letter), delta, opts).rate
