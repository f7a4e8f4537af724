"""DDPM noise schedule and the closed-form forward/reverse identities.

All per-step arrays are indexed directly by timestep t in 1..T (index 0
is a placeholder except alpha_bar, where alpha_bar[0] = 1 so the
posterior coefficients are well defined at t = 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, ContractError


@dataclass(frozen=True)
class DiffusionSchedule:
    steps: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    posterior_variance: np.ndarray
    posterior_coef_x0: np.ndarray
    posterior_coef_xt: np.ndarray

    def check_t(self, t: int):
        if not 1 <= t <= self.steps:
            raise ContractError(f"timestep {t} outside 1..{self.steps}")


def make_schedule(steps: int, beta_start: float = 1e-4, beta_end: float = 0.02) -> DiffusionSchedule:
    """Linear beta schedule with every derived array precomputed."""
    if steps < 1:
        raise ConfigurationError(f"steps must be >= 1, got {steps}")
    if not (0.0 < beta_start <= beta_end < 1.0):
        raise ConfigurationError(f"betas must satisfy 0 < start <= end < 1, got ({beta_start}, {beta_end})")

    beta = np.zeros(steps + 1)
    beta[1:] = np.linspace(beta_start, beta_end, steps)
    alpha = 1.0 - beta
    alpha_bar = np.ones(steps + 1)
    alpha_bar[1:] = np.cumprod(alpha[1:])

    t = np.arange(steps + 1)
    prev_bar = alpha_bar[np.maximum(t - 1, 0)]
    denom = np.where(t >= 1, 1.0 - alpha_bar, 1.0)
    posterior_variance = np.where(t >= 1, (1.0 - prev_bar) / denom * beta, 0.0)
    posterior_coef_x0 = np.where(t >= 1, np.sqrt(prev_bar) * beta / denom, 0.0)
    posterior_coef_xt = np.where(t >= 1, np.sqrt(alpha) * (1.0 - prev_bar) / denom, 0.0)

    return DiffusionSchedule(
        steps=steps,
        beta=beta,
        alpha=alpha,
        alpha_bar=alpha_bar,
        posterior_variance=posterior_variance,
        posterior_coef_x0=posterior_coef_x0,
        posterior_coef_xt=posterior_coef_xt,
    )


def forward_sample(sched: DiffusionSchedule, x0: np.ndarray, t: int, eps: np.ndarray) -> np.ndarray:
    """x_t = sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps."""
    sched.check_t(t)
    if eps.shape != x0.shape:
        raise ContractError(f"eps shape {eps.shape} != x0 shape {x0.shape}")
    ab = sched.alpha_bar[t]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps


def predict_x0(sched: DiffusionSchedule, x_t: np.ndarray, t: int, eps_hat: np.ndarray, clamp: bool = True) -> np.ndarray:
    """Invert the forward closed form to the one-step clean estimate.

    Clamping to [-1, 1] is the standard stabilization; pass clamp=False
    for the raw algebraic inverse.
    """
    sched.check_t(t)
    if eps_hat.shape != x_t.shape:
        raise ContractError(f"eps_hat shape {eps_hat.shape} != x_t shape {x_t.shape}")
    ab = sched.alpha_bar[t]
    x0 = x_t / np.sqrt(ab) - np.sqrt(1.0 - ab) * eps_hat / np.sqrt(ab)
    if clamp:
        x0 = np.clip(x0, -1.0, 1.0)
    return x0


def posterior_mean_var(sched: DiffusionSchedule, x_t: np.ndarray, x0_hat: np.ndarray, t: int):
    """Gaussian posterior q(x_{t-1} | x_t, x0_hat): (mean, variance)."""
    sched.check_t(t)
    if x0_hat.shape != x_t.shape:
        raise ContractError(f"x0_hat shape {x0_hat.shape} != x_t shape {x_t.shape}")
    mean = sched.posterior_coef_x0[t] * x0_hat + sched.posterior_coef_xt[t] * x_t
    return mean, float(sched.posterior_variance[t])
