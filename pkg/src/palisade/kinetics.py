"""Pointwise reaction terms of the coupled tumor/acid model and their partials.

Both rates share the damping denominator ``(1 + u1^2 + u2^2)^2``, which keeps
them (and their first partials) bounded on the whole nonnegative quadrant.
Derivatives are closed-form quotient-rule expressions, not autodiff, so the
backward solve and the cost gradient carry no hidden dependencies; a
finite-difference lattice test guards them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["eval_f1", "eval_f2", "partials_f1", "partials_f2", "KineticsEval", "evaluate"]


def eval_f1(u1, u2):
    """Bounded logistic-type growth rate ``u1 (1-u1) (1-u2) / (1+u1^2+u2^2)^2``."""
    den = 1.0 + u1 * u1 + u2 * u2
    return u1 * (1.0 - u1) * (1.0 - u2) / (den * den)


def eval_f2(u1, u2):
    """Proton efflux rate ``u1 u2 / (1+u1^2+u2^2)^2``."""
    den = 1.0 + u1 * u1 + u2 * u2
    return u1 * u2 / (den * den)


def partials_f1(u1, u2):
    """First partials of :func:`eval_f1` with respect to ``u1`` and ``u2``."""
    den = 1.0 + u1 * u1 + u2 * u2
    den2 = den * den
    den3 = den2 * den
    num = u1 * (1.0 - u1) * (1.0 - u2)
    d1 = (1.0 - 2.0 * u1) * (1.0 - u2) / den2 - 4.0 * u1 * num / den3
    d2 = -u1 * (1.0 - u1) / den2 - 4.0 * u2 * num / den3
    return d1, d2


def partials_f2(u1, u2):
    """First partials of :func:`eval_f2` with respect to ``u1`` and ``u2``."""
    den = 1.0 + u1 * u1 + u2 * u2
    den2 = den * den
    den3 = den2 * den
    d1 = u2 / den2 - 4.0 * u1 * u1 * u2 / den3
    d2 = u1 / den2 - 4.0 * u1 * u2 * u2 / den3
    return d1, d2


@dataclass(frozen=True)
class KineticsEval:
    """Reaction values and the four first partials at one state."""

    f1: np.ndarray
    f2: np.ndarray
    d1f1: np.ndarray
    d2f1: np.ndarray
    d1f2: np.ndarray
    d2f2: np.ndarray


def evaluate(u1, u2) -> KineticsEval:
    d1f1, d2f1 = partials_f1(u1, u2)
    d1f2, d2f2 = partials_f2(u1, u2)
    return KineticsEval(eval_f1(u1, u2), eval_f2(u1, u2), d1f1, d2f1, d1f2, d2f2)
