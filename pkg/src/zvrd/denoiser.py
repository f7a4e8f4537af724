"""Pluggable noise-prediction models.

Three concrete models share one interface: an oracle that inverts the
forward process against known ground truth, an analytic shrinkage model
(blur prior whose radius shrinks as t -> 0), and a small seeded U-Net
with a bottleneck attention layer that supports key/value injection
from the previous frame. predict() returns (eps_hat, context) where the
context carries this frame's cached attention keys/values for reuse by
the next frame at the same timestep.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.ndimage import gaussian_filter

from .errors import ConfigurationError, ContractError
from .schedule import DiffusionSchedule


@dataclass(frozen=True)
class PrevFrameContext:
    """Cached per-layer (key, value) projections of the previous frame's
    features, valid only at the timestep they were computed for."""

    t: int
    layers: tuple


class EpsilonModel:
    """Interface: predict(x_t, t, ctx, frame) -> (eps_hat, new_ctx)."""

    uses_context = False

    def predict(self, x_t: np.ndarray, t: int, ctx: PrevFrameContext | None = None, frame: int = 0):
        raise NotImplementedError


# ---------------------------------------------------------------------------
# attention primitives


def attention(q: np.ndarray, k: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Softmax(q k^T / sqrt(d)) v over flattened spatial positions."""
    d = q.shape[-1]
    logits = q @ k.T / np.sqrt(d)
    logits = logits - logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    w = w / w.sum(axis=-1, keepdims=True)
    return w @ v


@dataclass(frozen=True)
class AttentionLayer:
    """Single-head projection weights for one attention site."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray

    def kv(self, feat: np.ndarray):
        return feat @ self.wk, feat @ self.wv

    def self_attn(self, feat: np.ndarray) -> np.ndarray:
        k, v = self.kv(feat)
        return attention(feat @ self.wq, k, v)

    def cross_attn(self, feat: np.ndarray, kv_prev: tuple) -> np.ndarray:
        """Queries from the current frame, keys/values from the cached
        previous-frame projections."""
        k, v = kv_prev
        if k.shape[1] != self.wk.shape[1] or k.shape != v.shape:
            raise ContractError(f"cached k/v shapes {k.shape}/{v.shape} do not fit this layer")
        if k.shape[0] != feat.shape[0]:
            raise ContractError(f"cached context has {k.shape[0]} positions, features have {feat.shape[0]}")
        return attention(feat @ self.wq, k, v)


# ---------------------------------------------------------------------------
# convolution helpers


def conv2d3x3(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """3x3 multi-channel convolution, clamp-to-edge padding."""
    xp = np.pad(x, ((1, 1), (1, 1), (0, 0)), mode="edge")
    win = sliding_window_view(xp, (3, 3), axis=(0, 1))
    return np.einsum("hwcij,ijcd->hwd", win, w[::-1, ::-1]) + b


def conv_1x3x3(frames, w: np.ndarray, b: np.ndarray):
    """Inflated spatial convolution: the 3x3 kernel applied to each
    frame independently (the time extent of the kernel is 1)."""
    return [conv2d3x3(f, w, b) for f in frames]


def silu(x):
    return x / (1.0 + np.exp(-x))


def sinusoidal_embedding(t: int, dim: int) -> np.ndarray:
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    ang = t * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)])


def _avgpool2(x):
    h2, w2 = x.shape[0] // 2, x.shape[1] // 2
    return x.reshape(h2, 2, w2, 2, x.shape[2]).mean(axis=(1, 3))


def _upsample2(x):
    return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)


# ---------------------------------------------------------------------------
# tiny U-Net


@dataclass(frozen=True)
class TinyUNetSpec:
    base_channels: int = 8
    levels: int = 2
    head_dim: int = 16
    emb_dim: int = 32
    in_channels: int = 3
    seed: int = 0
    weight_file: str | None = None

    def validate(self):
        if self.head_dim <= 0 or self.base_channels <= 0 or self.levels < 1:
            raise ConfigurationError(f"invalid U-Net spec {self}")


class TinyUNet(EpsilonModel):
    """Seeded-random encoder/decoder with bottleneck attention.

    Weights come from the spec's seed (quantized to float32 so that a
    save/load roundtrip is bit-exact) or from a weight file.
    """

    uses_context = True

    def __init__(self, spec: TinyUNetSpec):
        spec.validate()
        self.spec = spec
        if spec.weight_file is not None:
            self.weights = load_weights(spec.weight_file)
        else:
            self.weights = _init_unet_weights(spec)
        cb = spec.base_channels * 2**spec.levels
        self.attn = AttentionLayer(
            wq=self.weights["attn_wq"],
            wk=self.weights["attn_wk"],
            wv=self.weights["attn_wv"],
        )
        self._cb = cb

    def _block(self, h, emb, prefix):
        w = self.weights
        a = conv2d3x3(h, w[f"{prefix}_c1_w"], w[f"{prefix}_c1_b"])
        a = a + (emb @ w[f"{prefix}_emb_w"] + w[f"{prefix}_emb_b"])
        a = silu(a)
        a = conv2d3x3(a, w[f"{prefix}_c2_w"], w[f"{prefix}_c2_b"])
        return silu(a) + h

    def predict(self, x_t, t, ctx=None, frame=0):
        spec = self.spec
        h_img, w_img, c = x_t.shape
        div = 2**spec.levels
        if h_img % div or w_img % div:
            raise ConfigurationError(f"input dims {x_t.shape[:2]} not divisible by {div}")
        if c != spec.in_channels:
            raise ContractError(f"model expects {spec.in_channels} channels, got {c}")
        if ctx is not None:
            if ctx.t != t:
                raise ContractError(f"context was cached at t={ctx.t}, consumed at t={t}")
            if len(ctx.layers) != 1:
                raise ContractError("context must carry exactly one attention layer")

        w = self.weights
        emb = sinusoidal_embedding(t, spec.emb_dim)
        emb = silu(emb @ w["emb1_w"] + w["emb1_b"])
        emb = emb @ w["emb2_w"] + w["emb2_b"]

        h = conv2d3x3(x_t, w["stem_w"], w["stem_b"])
        skips = []
        for lvl in range(spec.levels):
            h = self._block(h, emb, f"down{lvl}")
            skips.append(h)
            h = _avgpool2(h)
            h = silu(conv2d3x3(h, w[f"down{lvl}_tr_w"], w[f"down{lvl}_tr_b"]))

        h = self._block(h, emb, "mid1")
        feat = h.reshape(-1, self._cb)
        kv_here = self.attn.kv(feat)
        if ctx is not None:
            attended = self.attn.cross_attn(feat, ctx.layers[0])
        else:
            attended = self.attn.self_attn(feat)
        h = h + (attended @ w["attn_wo"]).reshape(h.shape)
        h = self._block(h, emb, "mid2")

        for lvl in reversed(range(spec.levels)):
            h = _upsample2(h)
            h = silu(conv2d3x3(h, w[f"up{lvl}_tr_w"], w[f"up{lvl}_tr_b"]))
            h = h + skips[lvl]
            h = self._block(h, emb, f"up{lvl}")

        eps = conv2d3x3(h, w["head_w"], w["head_b"])
        new_ctx = PrevFrameContext(t=t, layers=(kv_here,))
        return eps, new_ctx


def _init_unet_weights(spec: TinyUNetSpec) -> dict:
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    weights: dict[str, np.ndarray] = {}

    def conv(name, cin, cout, scale=1.0):
        weights[f"{name}_w"] = rng.normal(0.0, scale / np.sqrt(9 * cin), size=(3, 3, cin, cout))
        weights[f"{name}_b"] = np.zeros(cout)

    def dense(name, din, dout, scale=1.0):
        weights[f"{name}_w"] = rng.normal(0.0, scale / np.sqrt(din), size=(din, dout))
        weights[f"{name}_b"] = np.zeros(dout)

    e = spec.emb_dim
    dense("emb1", e, e)
    dense("emb2", e, e)
    conv("stem", spec.in_channels, spec.base_channels)
    for lvl in range(spec.levels):
        ch = spec.base_channels * 2**lvl
        conv(f"down{lvl}_c1", ch, ch)
        dense(f"down{lvl}_emb", e, ch)
        conv(f"down{lvl}_c2", ch, ch)
        conv(f"down{lvl}_tr", ch, ch * 2)
    cb = spec.base_channels * 2**spec.levels
    for prefix in ("mid1", "mid2"):
        conv(f"{prefix}_c1", cb, cb)
        dense(f"{prefix}_emb", e, cb)
        conv(f"{prefix}_c2", cb, cb)
    d = spec.head_dim
    weights["attn_wq"] = rng.normal(0.0, 1.0 / np.sqrt(cb), size=(cb, d))
    weights["attn_wk"] = rng.normal(0.0, 1.0 / np.sqrt(cb), size=(cb, d))
    weights["attn_wv"] = rng.normal(0.0, 1.0 / np.sqrt(cb), size=(cb, d))
    weights["attn_wo"] = rng.normal(0.0, 0.2 / np.sqrt(d), size=(d, cb))
    for lvl in range(spec.levels):
        ch = spec.base_channels * 2**lvl
        conv(f"up{lvl}_tr", ch * 2, ch)
        conv(f"up{lvl}_c1", ch, ch)
        dense(f"up{lvl}_emb", e, ch)
        conv(f"up{lvl}_c2", ch, ch)
    conv("head", spec.base_channels, spec.in_channels, scale=0.1)

    # quantize to the storage dtype so save -> load is an exact roundtrip
    return {k: v.astype(np.float32).astype(np.float64) for k, v in weights.items()}


def save_weights(weights: dict, stem: str | Path):
    """Write <stem>.json (names/shapes, in order) and <stem>.bin
    (concatenated little-endian float32)."""
    stem = Path(stem)
    names = sorted(weights)
    manifest = {
        "dtype": "float32",
        "byte_order": "little",
        "tensors": [{"name": n, "shape": list(weights[n].shape)} for n in names],
    }
    stem.with_suffix(".json").write_text(json.dumps(manifest, indent=1))
    blob = np.concatenate([np.ascontiguousarray(weights[n], dtype="<f4").ravel() for n in names])
    blob.astype("<f4").tofile(stem.with_suffix(".bin"))


def load_weights(stem: str | Path) -> dict:
    stem = Path(stem)
    manifest = json.loads(stem.with_suffix(".json").read_text())
    if manifest.get("dtype") != "float32" or manifest.get("byte_order") != "little":
        raise ConfigurationError(f"unsupported weight manifest {stem}.json")
    blob = np.fromfile(stem.with_suffix(".bin"), dtype="<f4")
    weights = {}
    offset = 0
    for entry in manifest["tensors"]:
        size = int(np.prod(entry["shape"])) if entry["shape"] else 1
        weights[entry["name"]] = blob[offset : offset + size].reshape(entry["shape"]).astype(np.float64)
        offset += size
    if offset != blob.size:
        raise ConfigurationError(f"weight blob size {blob.size} does not match manifest ({offset})")
    return weights


# ---------------------------------------------------------------------------
# analytic models


def oracle_predict(sched: DiffusionSchedule, x_t: np.ndarray, t: int, x0_true: np.ndarray) -> np.ndarray:
    """The exact noise consistent with x_t and a known clean frame."""
    sched.check_t(t)
    if x0_true.shape != x_t.shape:
        raise ContractError(f"x0_true shape {x0_true.shape} != x_t shape {x_t.shape}")
    ab = sched.alpha_bar[t]
    if not ab < 1.0:
        raise ContractError(f"alpha_bar must be < 1 for noise inversion (t={t})")
    return (x_t - np.sqrt(ab) * x0_true) / np.sqrt(1.0 - ab)


class OracleDenoiser(EpsilonModel):
    def __init__(self, sched: DiffusionSchedule, clean_video: np.ndarray):
        self.sched = sched
        self.clean = clean_video

    def predict(self, x_t, t, ctx=None, frame=0):
        if frame >= self.clean.shape[0]:
            raise ContractError(f"oracle has {self.clean.shape[0]} frames, asked for {frame}")
        return oracle_predict(self.sched, x_t, t, self.clean[frame]), None


def shrinkage_predict(
    sched: DiffusionSchedule,
    x_t: np.ndarray,
    t: int,
    strength: float = 0.7,
    sigma_max: float = 3.0,
) -> np.ndarray:
    """Noise estimate whose implied clean image is a blurred rescale of
    x_t; the blur radius shrinks linearly to zero as t -> 0."""
    sched.check_t(t)
    if not 0.0 <= strength <= 1.0:
        raise ContractError(f"strength must be in [0, 1], got {strength}")
    ab = sched.alpha_bar[t]
    base = x_t / np.sqrt(ab)
    sigma = strength * sigma_max * t / sched.steps
    x0 = gaussian_filter(base, sigma=(sigma, sigma, 0), mode="nearest") if sigma > 0 else base
    return (x_t - np.sqrt(ab) * x0) / np.sqrt(1.0 - ab)


class ShrinkageDenoiser(EpsilonModel):
    def __init__(self, sched: DiffusionSchedule, strength: float = 0.7, sigma_max: float = 3.0):
        self.sched = sched
        self.strength = strength
        self.sigma_max = sigma_max

    def predict(self, x_t, t, ctx=None, frame=0):
        return shrinkage_predict(self.sched, x_t, t, self.strength, self.sigma_max), None
