"""Shared linear reward model with UCB exploration.

A single ridge regression over arm context vectors holds everything the
tuner has learned: the scatter matrix ``V`` accumulates context outer
products, ``b`` accumulates reward-weighted contexts, and the coefficient
estimate is ``theta = V^-1 b``.  Scores are upper confidence bounds

    ucb(x) = theta' x + alpha_t * sqrt(x' V^-1 x)

so arms whose contexts lie in underexplored directions of context space get
an exploration boost.  Because the coefficients are shared between arms,
two arms with identical contexts always receive identical scores and a
brand-new arm can be scored without ever having been played.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "LinearModelState",
    "UcbParameters",
    "ArmScore",
    "constant_alpha",
    "sqrt_log_alpha",
    "estimate_theta",
    "ucb_score",
    "update",
    "forget",
]


@dataclass
class LinearModelState:
    """Sufficient statistics of the shared ridge regression.

    ``v`` is a positive-definite (d, d) matrix, initialised to ``lam * I``
    and grown by one outer product per observation.  ``b`` is the matching
    (d,) response vector.  ``t`` counts completed rounds, not individual
    observations: one :func:`update` call covers one round of semi-bandit
    feedback.
    """

    v: np.ndarray
    b: np.ndarray
    d: int
    lam: float
    t: int = 0

    @classmethod
    def fresh(cls, d: int, lam: float = 1.0) -> "LinearModelState":
        if d < 1:
            raise ValueError(f"context dimension must be >= 1, got {d}")
        if lam <= 0:
            raise ValueError(f"ridge regularisation must be > 0, got {lam}")
        return cls(v=lam * np.eye(d), b=np.zeros(d), d=d, lam=float(lam), t=0)


@dataclass(frozen=True)
class UcbParameters:
    """Exploration schedule and regularisation for UCB scoring.

    ``alpha_schedule`` maps a 1-based round index to a non-negative
    exploration boost factor.
    """

    alpha_schedule: Callable[[int], float]
    lam: float = 1.0


@dataclass(frozen=True)
class ArmScore:
    arm_id: str
    expected: float
    ucb: float


def constant_alpha(alpha: float = 1.0) -> Callable[[int], float]:
    """Schedule with the same exploration boost every round."""
    if alpha < 0:
        raise ValueError(f"exploration boost must be >= 0, got {alpha}")
    return lambda t: alpha


def sqrt_log_alpha(alpha: float = 1.0) -> Callable[[int], float]:
    """Schedule that grows as ``alpha * sqrt(log t)``."""
    if alpha < 0:
        raise ValueError(f"exploration boost must be >= 0, got {alpha}")
    return lambda t: alpha * math.sqrt(math.log(max(t, 1)))


def _as_context(state: LinearModelState, context: Sequence[float] | np.ndarray) -> np.ndarray:
    x = np.asarray(context, dtype=float).ravel()
    if x.shape != (state.d,):
        raise ValueError(f"context has dimension {x.size}, model expects {state.d}")
    return x


def estimate_theta(state: LinearModelState) -> np.ndarray:
    """Return the ridge coefficient estimate ``V^-1 b``.  Pure."""
    try:
        return np.linalg.solve(state.v, state.b)
    except np.linalg.LinAlgError as exc:  # unreachable while lam > 0
        raise FloatingPointError(f"scatter matrix numerically singular: {exc}") from exc


def ucb_score(
    state: LinearModelState,
    params: UcbParameters,
    context: Sequence[float] | np.ndarray,
    arm_id: str = "",
) -> ArmScore:
    """Score one context: expected reward plus the exploration boost.  Pure.

    The boost is ``alpha_t * sqrt(x' V^-1 x)`` evaluated at round
    ``state.t + 1``, the round currently being recommended.
    """
    x = _as_context(state, context)
    alpha = params.alpha_schedule(state.t + 1)
    if alpha < 0:
        raise ValueError(f"alpha schedule produced a negative boost: {alpha}")
    expected = float(estimate_theta(state) @ x)
    width = float(x @ np.linalg.solve(state.v, x))
    ucb = expected + alpha * math.sqrt(max(width, 0.0))
    return ArmScore(arm_id=arm_id, expected=expected, ucb=ucb)


def update(
    state: LinearModelState,
    observations: Iterable[tuple[Sequence[float] | np.ndarray, float]],
) -> LinearModelState:
    """Fold one round of (context, reward) pairs into a new state.

    ``V += sum x x'`` and ``b += sum r x``; the round counter advances by
    one even when no arms were played.  Summation commutes, so observation
    order is irrelevant.  The input state is left untouched.
    """
    v = state.v.copy()
    b = state.b.copy()
    for context, reward in observations:
        x = _as_context(state, context)
        v += np.outer(x, x)
        b += float(reward) * x
    return LinearModelState(v=v, b=b, d=state.d, lam=state.lam, t=state.t + 1)


def forget(state: LinearModelState) -> LinearModelState:
    """Reset learned knowledge to the prior.

    Dimension, regularisation and the round counter are preserved; the
    scatter matrix and response vector go back to their initial values.
    Used when the workload shifts hard enough that past observations would
    mislead more than inform.
    """
    return LinearModelState(
        v=state.lam * np.eye(state.d),
        b=np.zeros(state.d),
        d=state.d,
        lam=state.lam,
        t=state.t,
    )
