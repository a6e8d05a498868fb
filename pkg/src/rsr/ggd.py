"""Geodesic gradient descent for robust subspace recovery.

Iterates V^{k+1} = geodesic_step(V^k, grad F(V^k), t^k) from a PCA, random,
or user-supplied initialization.  Three step-size rules are provided:

* ``SqrtSchedule(s)``             -- t^k = s / sqrt(k)
* ``PiecewiseConstantSchedule``   -- t^k = s * shrink^floor(k / K)
* ``AdaptiveShrinkSchedule``      -- constant step, halved by the smallest
  power of two that strictly decreases the energy; the halved value becomes
  the new constant.

A run stops when the angle between consecutive iterates drops to ``tau``,
when the gradient spectral norm reaches the critical-point floor, when
``max_iters`` is exhausted, or (adaptive rule only) when no halving can
decrease the energy.  Every iteration is recorded in a trace.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Union

import numpy as np

from .energy import DEFAULT_TOL_ACTIVE, energy, grass_gradient
from .grassmann import Subspace, geodesic_step, random_subspace, theta1

__all__ = [
    "SqrtSchedule",
    "PiecewiseConstantSchedule",
    "AdaptiveShrinkSchedule",
    "StepSchedule",
    "AdaptiveState",
    "GGDConfig",
    "GGDStep",
    "GGDTrace",
    "pca_subspace",
    "step_size",
    "run_ggd",
    "save_trace",
    "load_trace",
]

GRAD_NORM_FLOOR = 1e-14
TRACE_HEADER = ["k", "step", "energy", "grad_norm", "theta_prev", "theta_truth", "stopped_reason"]


@dataclass(frozen=True)
class SqrtSchedule:
    """t^k = s / sqrt(k)."""

    s: float

    def __post_init__(self) -> None:
        if self.s <= 0:
            raise ValueError("initial step s must be positive")


@dataclass(frozen=True)
class PiecewiseConstantSchedule:
    """t^k = s * shrink^floor(k / K)."""

    s: float
    K: int = 20
    shrink: float = 0.5

    def __post_init__(self) -> None:
        if self.s <= 0:
            raise ValueError("initial step s must be positive")
        if self.K < 1:
            raise ValueError("shrink interval K must be >= 1")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink factor must lie in (0, 1)")


@dataclass(frozen=True)
class AdaptiveShrinkSchedule:
    """Constant step, halved only when it fails to decrease the energy."""

    s: float
    max_halvings: int = 40

    def __post_init__(self) -> None:
        if self.s <= 0:
            raise ValueError("initial step s must be positive")
        if self.max_halvings < 1:
            raise ValueError("max_halvings must be >= 1")


StepSchedule = Union[SqrtSchedule, PiecewiseConstantSchedule, AdaptiveShrinkSchedule]


@dataclass
class AdaptiveState:
    """Trial-evaluation state for the adaptive rule: the current constant."""

    current: float


def step_size(schedule: StepSchedule, k: int, state: AdaptiveState | None = None) -> float:
    """Step size at iteration k (k >= 1).

    Deterministic closed form for the sqrt and piecewise-constant rules; for
    the adaptive rule, returns the current constant from ``state`` (the value
    a trial evaluation starts from).
    """
    if k < 1:
        raise ValueError("iteration index k starts at 1")
    if isinstance(schedule, SqrtSchedule):
        return schedule.s / math.sqrt(k)
    if isinstance(schedule, PiecewiseConstantSchedule):
        return schedule.s * schedule.shrink ** (k // schedule.K)
    if isinstance(schedule, AdaptiveShrinkSchedule):
        return state.current if state is not None else schedule.s
    raise TypeError(f"unknown schedule {schedule!r}")


@dataclass(frozen=True)
class GGDConfig:
    """Configuration for a descent run.

    ``schedule=None`` resolves at run time to the piecewise-constant rule
    with s = 1/D, K = 20, shrink = 1/2.  ``init`` is "pca", "random", or an
    explicit Subspace.
    """

    schedule: StepSchedule | None = None
    tau: float = 1e-10
    max_iters: int = 10_000
    tol_active: float = DEFAULT_TOL_ACTIVE
    init: Union[Subspace, Literal["pca", "random"]] = "pca"

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True)
class GGDStep:
    """One iteration record; angles to the previous iterate / ground truth
    are NaN when unavailable."""

    k: int
    step: float
    energy: float
    grad_norm: float
    theta_prev: float
    theta_truth: float


@dataclass
class GGDTrace:
    records: list[GGDStep] = field(default_factory=list)
    stopped_reason: str = "max_iters"

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])


def pca_subspace(X: np.ndarray, d: int) -> Subspace:
    """Span of the top-d left singular vectors of the data matrix.

    Points are rows of X; the data matrix has them as columns, so the result
    is the span of the top right singular vectors of X itself.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"points must be 2-D, got shape {X.shape}")
    N, D = X.shape
    if not 1 <= d <= D:
        raise ValueError(f"need 1 <= d <= D, got d={d}, D={D}")
    s, vt = np.linalg.svd(X, full_matrices=False)[1:]
    rank_tol = (s[0] if s.size else 0.0) * max(N, D) * np.finfo(float).eps
    rank = int(np.sum(s > rank_tol))
    if rank < d:
        raise ValueError(f"insufficient rank: data rank {rank} < {d}")
    gap = s[d - 1] - (s[d] if s.size > d else 0.0)
    if gap < 1e-12:
        warnings.warn(
            f"singular gap at index {d} is {gap:.3e}; the PCA subspace is "
            "numerically non-unique",
            RuntimeWarning,
            stacklevel=2,
        )
    return Subspace(np.ascontiguousarray(vt[:d].T))


def _resolve_schedule(cfg: GGDConfig, D: int) -> StepSchedule:
    if cfg.schedule is not None:
        return cfg.schedule
    return PiecewiseConstantSchedule(s=1.0 / D, K=20, shrink=0.5)


def _resolve_init(
    cfg: GGDConfig, X: np.ndarray, d: int, rng: np.random.Generator | None
) -> Subspace:
    if isinstance(cfg.init, Subspace):
        if cfg.init.ambient_dim != X.shape[1] or cfg.init.dim != d:
            raise ValueError(
                f"init subspace has shape ({cfg.init.ambient_dim},{cfg.init.dim}), "
                f"expected ({X.shape[1]},{d})"
            )
        return cfg.init
    if cfg.init == "pca":
        return pca_subspace(X, d)
    if cfg.init == "random":
        if rng is None:
            raise ValueError("random init requires an rng")
        return random_subspace(X.shape[1], d, rng)
    raise ValueError(f"unknown init {cfg.init!r}")


def run_ggd(
    X: np.ndarray,
    d: int,
    cfg: GGDConfig | None = None,
    rng: np.random.Generator | None = None,
    truth: Subspace | None = None,
) -> tuple[Subspace, GGDTrace]:
    """Run geodesic gradient descent on a point set (rows are points).

    Returns the final subspace and the per-iteration trace.  ``truth``, when
    given, populates the trace's angle-to-ground-truth column.
    Non-convergence within ``max_iters`` is not an error; the trace's
    ``stopped_reason`` says how the run ended.
    """
    cfg = cfg or GGDConfig()
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("data must be a nonempty (N, D) array")
    schedule = _resolve_schedule(cfg, X.shape[1])
    adaptive = isinstance(schedule, AdaptiveShrinkSchedule)
    state = AdaptiveState(current=schedule.s) if adaptive else None

    V = _resolve_init(cfg, X, d, rng)
    V_prev: Subspace | None = None
    trace = GGDTrace()

    for k in range(1, cfg.max_iters + 1):
        G = grass_gradient(V, X, cfg.tol_active)
        grad_norm = float(np.linalg.norm(G, 2))
        E = energy(V, X, cfg.tol_active).value
        theta_prev = theta1(V, V_prev) if V_prev is not None else math.nan
        theta_truth = theta1(V, truth) if truth is not None else math.nan

        if grad_norm <= GRAD_NORM_FLOOR:
            trace.records.append(
                GGDStep(k, step_size(schedule, k, state), E, grad_norm, theta_prev, theta_truth)
            )
            trace.stopped_reason = "critical_point"
            return V, trace

        if adaptive:
            t_k, V_next = _adaptive_trial(schedule, state, V, G, E, X, cfg.tol_active)
            if V_next is None:
                trace.records.append(GGDStep(k, t_k, E, grad_norm, theta_prev, theta_truth))
                trace.stopped_reason = "step_underflow"
                return V, trace
        else:
            t_k = step_size(schedule, k, state)
            V_next = geodesic_step(V, G, t_k)

        trace.records.append(GGDStep(k, t_k, E, grad_norm, theta_prev, theta_truth))

        if theta1(V_next, V) <= cfg.tau:
            trace.stopped_reason = "converged"
            return V_next, trace
        V_prev, V = V, V_next

    trace.stopped_reason = "max_iters"
    return V, trace


def _adaptive_trial(
    schedule: AdaptiveShrinkSchedule,
    state: AdaptiveState,
    V: Subspace,
    G: np.ndarray,
    E: float,
    X: np.ndarray,
    tol_active: float,
) -> tuple[float, Subspace | None]:
    """Find the largest step current / 2^n (n >= 0) that strictly decreases
    the energy; a halved step becomes the new constant.  Returns
    (step, None) when even 2^-max_halvings fails."""
    t = state.current
    for n in range(schedule.max_halvings + 1):
        V_next = geodesic_step(V, G, t)
        if energy(V_next, X, tol_active).value < E:
            if n > 0:
                state.current = t
            return t, V_next
        t *= 0.5
    return state.current, None


def save_trace(trace: GGDTrace, path: str | Path) -> None:
    """Trace CSV; NaN angles are written as empty fields."""

    def fmt(v: float) -> str:
        return "" if math.isnan(v) else f"{v:.17g}"

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for r in trace.records:
            writer.writerow(
                [r.k, f"{r.step:.17g}", f"{r.energy:.17g}", f"{r.grad_norm:.17g}",
                 fmt(r.theta_prev), fmt(r.theta_truth), trace.stopped_reason]
            )


def load_trace(path: str | Path) -> GGDTrace:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {header!r}")
        trace = GGDTrace()
        for row in reader:
            trace.records.append(
                GGDStep(
                    k=int(row[0]),
                    step=float(row[1]),
                    energy=float(row[2]),
                    grad_norm=float(row[3]),
                    theta_prev=float(row[4]) if row[4] else math.nan,
                    theta_truth=float(row[5]) if row[5] else math.nan,
                )
            )
            trace.stopped_reason = row[6]
    return trace
