"""Per-step content constraints tying the clean estimate to the
degraded observation: null-space projection or distance-gradient
guidance. The two modes are mutually exclusive per run.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .operators import DegradationOperator

NORMS = ("l2", "charbonnier")
CHARBONNIER_EPS = 1e-3


def ddnm_project(x0_hat: np.ndarray, y: np.ndarray, op: DegradationOperator) -> np.ndarray:
    """Replace the observable component of x0_hat with the observation.

    Returns A+ y + (I - A+ A) x0_hat; keeps whatever A cannot see.
    """
    if not op.has_pseudo_inverse:
        raise ConfigurationError(f"operator {op.name!r} has no pseudo-inverse; projection unavailable")
    return op.pseudo_inverse(y) + x0_hat - op.pseudo_inverse(op.apply(x0_hat))


def distance_gradient(
    x0_hat: np.ndarray,
    y: np.ndarray,
    op: DegradationOperator,
    norm: str = "l2",
    eps: float = CHARBONNIER_EPS,
):
    """Observation-distance loss and its gradient with respect to x0_hat.

    l2 is the squared norm (gradient 2 At r); charbonnier is the smoothed
    L1 sum sqrt(r^2 + eps^2) - eps with gradient At (r / sqrt(r^2 + eps^2)).
    """
    if not op.has_adjoint:
        raise ConfigurationError(f"operator {op.name!r} has no adjoint; gradient guidance unavailable")
    r = op.apply(x0_hat) - y
    if norm == "l2":
        loss = float((r**2).sum())
        grad = op.adjoint(2.0 * r)
    elif norm == "charbonnier":
        root = np.sqrt(r**2 + eps**2)
        loss = float((root - eps).sum())
        grad = op.adjoint(r / root)
    else:
        raise ConfigurationError(f"unknown norm {norm!r}; expected one of {NORMS}")
    return grad, loss
