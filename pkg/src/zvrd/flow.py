"""Desk-scale optical flow: coarse-to-fine Lucas-Kanade, backward
warping, and forward-backward occlusion masking.

Flow convention: a field F of shape (h, w, 2) holds (u, v) pixel
displacements such that pixel p in the current frame corresponds to
p + F(p) in the previous frame. warp(prev, F) therefore aligns the
previous frame to the current one.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import map_coordinates, median_filter, uniform_filter

from .errors import ConfigurationError, ContractError

MIN_PYRAMID_DIM = 8
RIDGE = 1e-6
STEP_CAP = 1.0


def bilinear_sample(src: np.ndarray, gy: np.ndarray, gx: np.ndarray) -> np.ndarray:
    """Sample src at float coordinates (gy, gx) with clamp-to-edge."""
    h, w = src.shape[:2]
    gy = np.clip(gy, 0.0, h - 1.0)
    gx = np.clip(gx, 0.0, w - 1.0)
    y0 = np.floor(gy).astype(np.intp)
    x0 = np.floor(gx).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = gy - y0
    fx = gx - x0
    if src.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    return (
        (1 - fy) * (1 - fx) * src[y0, x0]
        + (1 - fy) * fx * src[y0, x1]
        + fy * (1 - fx) * src[y1, x0]
        + fy * fx * src[y1, x1]
    )


def warp(src: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Backward warp: out(p) = bilinear(src, p + flow(p))."""
    h, w = src.shape[:2]
    if flow.shape[:2] != (h, w) or flow.shape[-1] != 2:
        raise ContractError(f"flow shape {flow.shape} incompatible with src {src.shape}")
    gy = np.arange(h, dtype=np.float64)[:, None] + flow[..., 1]
    gx = np.arange(w, dtype=np.float64)[None, :] + flow[..., 0]
    return bilinear_sample(src, gy, gx)


def _luminance01(frame: np.ndarray) -> np.ndarray:
    lum = frame.mean(axis=2) if frame.ndim == 3 else frame
    return (lum + 1.0) / 2.0


def _downsample2(img: np.ndarray) -> np.ndarray:
    h2, w2 = img.shape[0] // 2, img.shape[1] // 2
    return img[: h2 * 2, : w2 * 2].reshape(h2, 2, w2, 2).mean(axis=(1, 3))


def _upsample_flow(flow: np.ndarray, shape) -> np.ndarray:
    h, w = shape
    sh, sw = flow.shape[:2]
    gy = (np.arange(h) + 0.5) * (sh / h) - 0.5
    gx = (np.arange(w) + 0.5) * (sw / w) - 0.5
    up = bilinear_sample(flow, gy[:, None] * np.ones((1, w)), gx[None, :] * np.ones((h, 1)))
    return up * np.array([w / sw, h / sh])


def _gradients(img: np.ndarray):
    gy, gx = np.gradient(img)
    return gx, gy


def _warp_est(src2d: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Cubic resampling used only inside the estimator: its derivative is
    smooth at integer offsets, which removes the bilinear-kink bias from
    the refinement."""
    h, w = src2d.shape
    gy = np.broadcast_to(np.arange(h, dtype=np.float64)[:, None] + flow[..., 1], (h, w))
    gx = np.broadcast_to(np.arange(w, dtype=np.float64)[None, :] + flow[..., 0], (h, w))
    return map_coordinates(src2d, [gy, gx], order=3, mode="nearest")


def _lk_refine(ref: np.ndarray, tgt: np.ndarray, flow: np.ndarray, window: int, iters: int) -> np.ndarray:
    """Iterative LK on one pyramid level; solves for tgt(p) ~ ref(p + F(p)).

    A ridge keeps degenerate windows bounded, the step cap is a trust
    region for the linearization, and the median filter suppresses
    outlier pockets that would otherwise contaminate their neighborhood
    through the window sums.
    """
    for _ in range(iters):
        warped = _warp_est(ref, flow)
        ix, iy = _gradients(warped)
        it = tgt - warped
        sxx = uniform_filter(ix * ix, size=window, mode="nearest") + RIDGE
        sxy = uniform_filter(ix * iy, size=window, mode="nearest")
        syy = uniform_filter(iy * iy, size=window, mode="nearest") + RIDGE
        sxt = uniform_filter(ix * it, size=window, mode="nearest")
        syt = uniform_filter(iy * it, size=window, mode="nearest")
        det = sxx * syy - sxy * sxy
        du = np.clip((syy * sxt - sxy * syt) / det, -STEP_CAP, STEP_CAP)
        dv = np.clip((sxx * syt - sxy * sxt) / det, -STEP_CAP, STEP_CAP)
        flow = flow + np.stack([du, dv], axis=-1)
        flow = np.stack(
            [
                median_filter(flow[..., 0], size=3, mode="nearest"),
                median_filter(flow[..., 1], size=3, mode="nearest"),
            ],
            axis=-1,
        )
    return flow


def _pyramid_lk(ref: np.ndarray, tgt: np.ndarray, levels: int, window: int, iters: int) -> np.ndarray:
    pyr_ref, pyr_tgt = [ref], [tgt]
    while len(pyr_ref) < levels and min(pyr_ref[-1].shape) // 2 >= MIN_PYRAMID_DIM:
        pyr_ref.append(_downsample2(pyr_ref[-1]))
        pyr_tgt.append(_downsample2(pyr_tgt[-1]))

    flow = np.zeros(pyr_ref[-1].shape + (2,))
    for lvl in range(len(pyr_ref) - 1, -1, -1):
        if flow.shape[:2] != pyr_ref[lvl].shape:
            flow = _upsample_flow(flow, pyr_ref[lvl].shape)
        flow = _lk_refine(pyr_ref[lvl], pyr_tgt[lvl], flow, window, iters)
    return flow


def estimate_flow(
    prev: np.ndarray,
    cur: np.ndarray,
    levels: int = 3,
    window: int = 7,
    iters: int = 3,
    alpha1: float = 0.01,
    alpha2: float = 0.5,
):
    """Estimate flow from cur to prev plus a validity mask.

    Returns (flow, mask) where warp(prev, flow) approximates cur and
    mask is 1 where the forward-backward consistency check passes.
    """
    if prev.shape != cur.shape:
        raise ContractError(f"frame shapes differ: {prev.shape} vs {cur.shape}")
    if min(prev.shape[:2]) < MIN_PYRAMID_DIM:
        raise ConfigurationError(f"frames smaller than {MIN_PYRAMID_DIM}px cannot be matched")
    if np.array_equal(prev, cur):
        # identical frames are their own fixed point; return it exactly
        h, w = prev.shape[:2]
        return np.zeros((h, w, 2)), np.ones((h, w))
    ref = _luminance01(prev)
    tgt = _luminance01(cur)
    fwd = _pyramid_lk(ref, tgt, levels, window, iters)
    bwd = _pyramid_lk(tgt, ref, levels, window, iters)
    mask = fb_occlusion(fwd, bwd, alpha1, alpha2)
    return fwd, mask


def fb_occlusion(fwd: np.ndarray, bwd: np.ndarray, alpha1: float = 0.01, alpha2: float = 0.5) -> np.ndarray:
    """Forward-backward consistency mask: 1 = valid correspondence."""
    if fwd.shape != bwd.shape:
        raise ContractError(f"flow shapes differ: {fwd.shape} vs {bwd.shape}")
    bwd_at = warp(bwd, fwd)
    sq_sum = ((fwd + bwd_at) ** 2).sum(axis=-1)
    bound = alpha1 * ((fwd**2).sum(axis=-1) + (bwd_at**2).sum(axis=-1)) + alpha2
    return (sq_sum <= bound).astype(np.float64)
