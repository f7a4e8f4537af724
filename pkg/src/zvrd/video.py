"""Core image/video value conventions and synthetic test fixtures.

A frame is a float64 numpy array of shape (h, w, c) with c in {1, 3}
and values in [-1, 1]; a video stacks frames along axis 0 to shape
(n, h, w, c). 8-bit conversion lives only at the I/O boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigurationError, ContractError

FIXTURE_KINDS = ("static", "translating-texture", "moving-square", "brightness-ramp")


def validate_frame(frame: np.ndarray) -> np.ndarray:
    if frame.ndim != 3 or frame.shape[2] not in (1, 3):
        raise ContractError(f"frame must have shape (h, w, 1|3), got {frame.shape}")
    if not np.all(np.isfinite(frame)):
        raise ContractError("frame contains non-finite values")
    return frame


def validate_video(video: np.ndarray) -> np.ndarray:
    if video.ndim != 4 or video.shape[0] < 1:
        raise ContractError(f"video must have shape (n>=1, h, w, c), got {video.shape}")
    validate_frame(video[0])
    if not np.all(np.isfinite(video)):
        raise ContractError("video contains non-finite values")
    return video


def to_unit_range(raw: np.ndarray) -> np.ndarray:
    """Map 8-bit samples in [0, 255] to floats in [-1, 1] via v/127.5 - 1."""
    arr = np.asarray(raw, dtype=np.float64)
    if arr.size and (arr.min() < 0 or arr.max() > 255):
        raise ContractError("8-bit input outside [0, 255]")
    return arr / 127.5 - 1.0


def from_unit_range(frame: np.ndarray) -> np.ndarray:
    """Inverse of to_unit_range: round half away from zero, clamp to [0, 255]."""
    val = (np.asarray(frame, dtype=np.float64) + 1.0) * 127.5
    # values are nonnegative pre-clamp, so floor(x + 0.5) rounds half away from zero
    out = np.floor(val + 0.5)
    return np.clip(out, 0, 255).astype(np.uint8)


@dataclass(frozen=True)
class FixtureSpec:
    """Recipe for a deterministic synthetic test video.

    motion is interpreted per kind: (dx, dy) pixels/frame for the moving
    kinds, and (gain delta/frame, unused) for brightness-ramp.
    """

    kind: str
    size: tuple[int, int]  # (h, w)
    frame_count: int
    motion: tuple[float, float] = (0.0, 0.0)
    seed: int = 0
    channels: int = 3

    def validate(self):
        h, w = self.size
        if self.kind not in FIXTURE_KINDS:
            raise ConfigurationError(f"unknown fixture kind {self.kind!r}")
        if h < 8 or w < 8:
            raise ConfigurationError(f"fixture size {self.size} too small")
        if self.frame_count < 2:
            raise ConfigurationError("fixture needs frame_count >= 2")
        if self.kind != "brightness-ramp":
            dx, dy = self.motion
            if abs(dx) >= min(h, w) / 4 or abs(dy) >= min(h, w) / 4:
                raise ConfigurationError(f"fixture motion {self.motion} too large for {self.size}")
        if self.channels not in (1, 3):
            raise ConfigurationError("fixture channels must be 1 or 3")


def _texture(rng, h, w, c, smooth=1.5, amplitude=0.8):
    # smoothed noise renormalized to +-amplitude: rich gradients for flow estimation
    field = rng.uniform(-1.0, 1.0, size=(h, w, c))
    field = gaussian_filter(field, sigma=(smooth, smooth, 0), mode="wrap")
    peak = np.abs(field).max()
    if peak > 0:
        field = field * (amplitude / peak)
    return field


def _sample_shifted(base: np.ndarray, shift_x: float, shift_y: float) -> np.ndarray:
    """base sampled at (y - shift_y, x - shift_x), bilinear, clamp-to-edge."""
    h, w = base.shape[:2]
    gy = np.clip(np.arange(h, dtype=np.float64) - shift_y, 0, h - 1)[:, None]
    gx = np.clip(np.arange(w, dtype=np.float64) - shift_x, 0, w - 1)[None, :]
    y0 = np.floor(gy).astype(np.intp)
    x0 = np.floor(gx).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (gy - y0)[..., None]
    fx = (gx - x0)[..., None]
    out = (
        (1 - fy) * (1 - fx) * base[y0, x0]
        + (1 - fy) * fx * base[y0, x1]
        + fy * (1 - fx) * base[y1, x0]
        + fy * fx * base[y1, x1]
    )
    return out


def make_fixture(spec: FixtureSpec) -> np.ndarray:
    """Render a deterministic synthetic video for the given spec."""
    spec.validate()
    h, w = spec.size
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    base = _texture(rng, h, w, spec.channels)
    dx, dy = spec.motion
    frames = []

    if spec.kind == "static":
        frames = [base.copy() for _ in range(spec.frame_count)]

    elif spec.kind == "translating-texture":
        for i in range(spec.frame_count):
            sx, sy = i * dx, i * dy
            if sx == int(sx) and sy == int(sy):
                # integer shifts stay bit-exact: index instead of interpolate
                gy = np.clip(np.arange(h) - int(sy), 0, h - 1)
                gx = np.clip(np.arange(w) - int(sx), 0, w - 1)
                frames.append(base[gy][:, gx].copy())
            else:
                frames.append(_sample_shifted(base, sx, sy))

    elif spec.kind == "moving-square":
        side = max(4, min(h, w) // 4)
        square = _texture(rng, side, side, spec.channels, smooth=1.0, amplitude=0.9)
        y0_, x0_ = h // 8, w // 8
        for i in range(spec.frame_count):
            fr = base.copy()
            ty = int(round(y0_ + i * dy))
            tx = int(round(x0_ + i * dx))
            ty = max(0, min(h - side, ty))
            tx = max(0, min(w - side, tx))
            fr[ty : ty + side, tx : tx + side] = square
            frames.append(fr)

    elif spec.kind == "brightness-ramp":
        for i in range(spec.frame_count):
            gain = float(np.clip(1.0 + i * dx, 0.05, 1.0))
            lum01 = (base + 1.0) / 2.0
            frames.append(gain * lum01 * 2.0 - 1.0)

    video = np.stack(frames, axis=0)
    return validate_video(video)


def square_disocclusion_mask(spec: FixtureSpec, pair_index: int) -> np.ndarray:
    """Ground-truth disocclusion for a moving-square fixture.

    Returns an (h, w) bool array, True on pixels of frame `pair_index`
    that were covered by the square in frame `pair_index - 1` but show
    background now: these have no valid correspondence.
    """
    if spec.kind != "moving-square":
        raise ContractError("disocclusion oracle only defined for moving-square")
    h, w = spec.size
    side = max(4, min(h, w) // 4)
    dx, dy = spec.motion
    y0_, x0_ = h // 8, w // 8

    def rect(i):
        ty = max(0, min(h - side, int(round(y0_ + i * dy))))
        tx = max(0, min(w - side, int(round(x0_ + i * dx))))
        return ty, tx

    prev_y, prev_x = rect(pair_index - 1)
    cur_y, cur_x = rect(pair_index)
    covered_prev = np.zeros((h, w), dtype=bool)
    covered_prev[prev_y : prev_y + side, prev_x : prev_x + side] = True
    covered_cur = np.zeros((h, w), dtype=bool)
    covered_cur[cur_y : cur_y + side, cur_x : cur_x + side] = True
    return covered_prev & ~covered_cur


def fixture_gt_flow(spec: FixtureSpec) -> np.ndarray:
    """Exact per-pair flow of a translating-texture fixture.

    Under the flow convention (pixel p in the current frame corresponds
    to p + F(p) in the previous frame), content moving by (dx, dy) per
    frame gives the constant field (-dx, -dy).
    """
    if spec.kind != "translating-texture":
        raise ContractError("flow oracle only defined for translating-texture")
    h, w = spec.size
    dx, dy = spec.motion
    flow = np.empty((h, w, 2), dtype=np.float64)
    flow[..., 0] = -dx
    flow[..., 1] = -dy
    return flow
