"""Flow-coupled temporal mechanisms: the warped-difference consistency
loss/gradient and per-timestep noise sharing with flow-aligned blending.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError
from .flow import warp

CHARBONNIER_EPS = 1e-3


class NoiseBank:
    """Deterministic keyed Gaussian fields, identical in any call order.

    Stream 0 is the noise shared by every frame; stream i >= 1 gives a
    frame its own independent draws when sharing is disabled. Keys are
    (kind, stream, t) spawn paths of one master seed.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)

    def _field(self, kind: int, stream: int, t: int, shape) -> np.ndarray:
        ss = np.random.SeedSequence(self.seed, spawn_key=(kind, stream, t))
        rng = np.random.Generator(np.random.PCG64(ss))
        return rng.standard_normal(shape)

    def init_state(self, shape, stream: int = 0) -> np.ndarray:
        """The x_T field a trajectory starts from."""
        return self._field(0, stream, 0, shape)

    def z(self, t: int, shape, stream: int = 0) -> np.ndarray:
        """The update noise for timestep t."""
        return self._field(1, stream, int(t), shape)


def tc_loss_and_grad(
    x0_cur: np.ndarray,
    x0_prev: np.ndarray,
    flow: np.ndarray,
    mask: np.ndarray,
    eps_s: float = CHARBONNIER_EPS,
):
    """Masked warped-difference loss (smoothed L1) and its gradient.

    The previous frame is warped toward the current one and treated as a
    constant; the loss is the mean over valid elements, so the guidance
    scale absorbs resolution. eps_s = 0 falls back to the L1 subgradient
    (zero at kinks).
    """
    if x0_cur.shape != x0_prev.shape:
        raise ContractError(f"frame shapes differ: {x0_cur.shape} vs {x0_prev.shape}")
    if mask.shape != x0_cur.shape[:2]:
        raise ContractError(f"mask shape {mask.shape} != frame {x0_cur.shape[:2]}")
    denom = float(mask.sum()) * x0_cur.shape[2]
    if denom == 0.0:
        return 0.0, np.zeros_like(x0_cur)
    m = mask[:, :, None]
    r = x0_cur - warp(x0_prev, flow)
    if eps_s > 0:
        root = np.sqrt(r**2 + eps_s**2)
        loss = float((m * (root - eps_s)).sum() / denom)
        grad = m * (r / root) / denom
    else:
        loss = float((m * np.abs(r)).sum() / denom)
        grad = m * np.sign(r) / denom
    return loss, grad


def blend_noise(
    z_cur: np.ndarray,
    z_prev: np.ndarray,
    flow: np.ndarray,
    mask: np.ndarray,
    lam: float,
    warp_prev: bool = True,
) -> np.ndarray:
    """Share noise between corresponding pixels of consecutive frames.

    Computes mask * (lam * z_cur + (1 - lam) * aligned_prev) +
    (1 - mask) * z_cur, written as z_cur + mask * (1 - lam) * (aligned -
    z_cur) so that mask = 0, lam = 1, or aligned == z_cur reproduce
    z_cur bit for bit. warp_prev=False blends the unaligned field.
    """
    if not 0.0 <= lam <= 1.0:
        raise ContractError(f"lambda must be in [0, 1], got {lam}")
    if z_prev.shape != z_cur.shape:
        raise ContractError(f"noise shapes differ: {z_cur.shape} vs {z_prev.shape}")
    aligned = warp(z_prev, flow) if warp_prev else z_prev
    return z_cur + mask[:, :, None] * (1.0 - lam) * (aligned - z_cur)
