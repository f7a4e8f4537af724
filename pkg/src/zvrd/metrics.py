"""Quality metrics: PSNR, windowed SSIM, and the temporal warping error.

Frames are compared in the [0, 1] range (shifted from the internal
[-1, 1]). Warping error estimates flow and occlusion on a designated
flow source (normally the clean video, so blur is not rewarded) and
averages the masked L1 residual between each frame and its warped
predecessor. The ZVRD_THREADS environment variable caps how many
frame pairs are processed concurrently.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError, ContractError
from .flow import estimate_flow, warp

PSNR_CAP_DB = 99.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def _thread_cap() -> int:
    raw = os.environ.get("ZVRD_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            raise ConfigurationError(f"ZVRD_THREADS must be an integer, got {raw!r}")
    return os.cpu_count() or 1


def _to01(frame: np.ndarray) -> np.ndarray:
    return (np.asarray(frame, dtype=np.float64) + 1.0) / 2.0


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ContractError(f"frame shapes differ: {a.shape} vs {b.shape}")
    mse = float(((_to01(a) - _to01(b)) ** 2).mean())
    if mse == 0.0:
        return PSNR_CAP_DB
    return float(min(10.0 * np.log10(1.0 / mse), PSNR_CAP_DB))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size) - size // 2
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


def _filter_valid(x2d: np.ndarray, win: np.ndarray) -> np.ndarray:
    view = sliding_window_view(x2d, win.shape)
    return np.einsum("hwij,ij->hw", view, win)


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean local SSIM, 11x11 Gaussian window (sigma 1.5), channel-averaged."""
    if a.shape != b.shape:
        raise ContractError(f"frame shapes differ: {a.shape} vs {b.shape}")
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ConfigurationError(f"frames smaller than the {SSIM_WINDOW}px SSIM window")
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    a01, b01 = _to01(a), _to01(b)
    vals = []
    for c in range(a.shape[2]):
        x, y = a01[..., c], b01[..., c]
        mu_x = _filter_valid(x, win)
        mu_y = _filter_valid(y, win)
        var_x = _filter_valid(x * x, win) - mu_x * mu_x
        var_y = _filter_valid(y * y, win) - mu_y * mu_y
        cov = _filter_valid(x * y, win) - mu_x * mu_y
        num = (2 * mu_x * mu_y + SSIM_C1) * (2 * cov + SSIM_C2)
        den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
        vals.append((num / den).mean())
    return float(np.mean(vals))


def _pair_warp_error(out_prev, out_cur, src_prev, src_cur) -> float:
    flow, mask = estimate_flow(src_prev, src_cur)
    denom = float(mask.sum()) * out_cur.shape[2]
    if denom == 0.0:
        return 0.0
    resid = np.abs(out_cur - warp(out_prev, flow)) * mask[:, :, None]
    return float(resid.sum() / denom)


def warping_error(video: np.ndarray, flow_source: np.ndarray) -> float:
    """Mean masked L1 residual against the flow-warped previous frame.

    Flow and occlusion are computed on flow_source frame pairs; callers
    display the value scaled by 100.
    """
    if video.shape[0] < 2:
        raise ContractError("warping error needs at least 2 frames")
    if flow_source.shape[0] != video.shape[0]:
        raise ContractError(f"flow source has {flow_source.shape[0]} frames, video has {video.shape[0]}")
    pairs = [
        (video[i - 1], video[i], flow_source[i - 1], flow_source[i])
        for i in range(1, video.shape[0])
    ]
    cap = min(_thread_cap(), len(pairs))
    if cap > 1:
        with ThreadPoolExecutor(max_workers=cap) as pool:
            errs = list(pool.map(lambda p: _pair_warp_error(*p), pairs))
    else:
        errs = [_pair_warp_error(*p) for p in pairs]
    return float(np.mean(errs))


@dataclass
class MetricsReport:
    psnr_per_frame: list = field(default_factory=list)
    ssim_per_frame: list = field(default_factory=list)
    mean_psnr: float = 0.0
    mean_ssim: float = 0.0
    warping_error: float = 0.0

    def to_dict(self) -> dict:
        return {
            "psnr_per_frame": [round(v, 6) for v in self.psnr_per_frame],
            "ssim_per_frame": [round(v, 6) for v in self.ssim_per_frame],
            "mean_psnr": round(self.mean_psnr, 6),
            "mean_ssim": round(self.mean_ssim, 6),
            "warping_error": self.warping_error,
            "we_x100": self.warping_error * 100.0,
        }

    def to_csv(self) -> str:
        lines = ["frame,psnr,ssim"]
        for i, (p, s) in enumerate(zip(self.psnr_per_frame, self.ssim_per_frame)):
            lines.append(f"{i},{p:.6f},{s:.6f}")
        lines.append(f"mean_psnr,{self.mean_psnr:.6f}")
        lines.append(f"mean_ssim,{self.mean_ssim:.6f}")
        lines.append(f"we_x100,{self.warping_error * 100.0:.6f}")
        return "\n".join(lines) + "\n"


def evaluate(video: np.ndarray, reference: np.ndarray, flow_source: np.ndarray | None = None) -> MetricsReport:
    """Full per-frame + temporal report of a restored video against its
    reference; flow defaults to the reference."""
    if video.shape != reference.shape:
        raise ContractError(f"video shape {video.shape} != reference shape {reference.shape}")
    report = MetricsReport()
    for i in range(video.shape[0]):
        report.psnr_per_frame.append(psnr(video[i], reference[i]))
        report.ssim_per_frame.append(ssim(video[i], reference[i]))
    report.mean_psnr = float(np.mean(report.psnr_per_frame))
    report.mean_ssim = float(np.mean(report.ssim_per_frame))
    if video.shape[0] >= 2:
        src = reference if flow_source is None else flow_source
        report.warping_error = warping_error(video, src)
    return report
