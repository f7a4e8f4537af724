"""Linear degradation operators with pseudo-inverse and adjoint maps.

Each operator defines the restoration task: apply() is the (affine-)
linear measurement map A, degrade() is the synthesis path used to build
test observations (identical to apply except for the noise operator),
pseudo_inverse() is A+ where a closed form exists, and adjoint() is the
transpose of the homogeneous part (what gradient guidance needs).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError, ContractError


class DegradationOperator:
    name = "abstract"
    linear = True

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def degrade(self, x: np.ndarray, index: int = 0) -> np.ndarray:
        return self.apply(x)

    def pseudo_inverse(self, y: np.ndarray) -> np.ndarray:
        raise ConfigurationError(f"operator {self.name!r} provides no pseudo-inverse")

    def adjoint(self, r: np.ndarray) -> np.ndarray:
        raise ConfigurationError(f"operator {self.name!r} provides no adjoint")

    @property
    def has_pseudo_inverse(self) -> bool:
        return type(self).pseudo_inverse is not DegradationOperator.pseudo_inverse

    @property
    def has_adjoint(self) -> bool:
        return type(self).adjoint is not DegradationOperator.adjoint

    def obs_shape(self, frame_shape: tuple) -> tuple:
        return tuple(frame_shape)

    def frame_shape(self, obs_shape: tuple) -> tuple:
        return tuple(obs_shape)


class SRAveragePool(DegradationOperator):
    """n x n average pooling; pseudo-inverse replicates each observation
    pixel back into its patch."""

    def __init__(self, n: int):
        if n < 1:
            raise ConfigurationError(f"pool factor must be >= 1, got {n}")
        self.n = int(n)
        self.name = f"sr-avgpool-{n}"

    def _check(self, x):
        h, w = x.shape[:2]
        if h % self.n or w % self.n:
            raise ConfigurationError(f"frame dims {x.shape[:2]} not divisible by {self.n}")

    def apply(self, x):
        self._check(x)
        n = self.n
        h, w, c = x.shape
        return x.reshape(h // n, n, w // n, n, c).mean(axis=(1, 3))

    def pseudo_inverse(self, y):
        return np.repeat(np.repeat(y, self.n, axis=0), self.n, axis=1)

    def adjoint(self, r):
        return self.pseudo_inverse(r) / float(self.n**2)

    def obs_shape(self, frame_shape):
        h, w, c = frame_shape
        return (h // self.n, w // self.n, c)

    def frame_shape(self, obs_shape):
        h, w, c = obs_shape
        return (h * self.n, w * self.n, c)


class InpaintMask(DegradationOperator):
    """Diagonal projector: elementwise multiply by a {0,1} pixel mask."""

    def __init__(self, mask: np.ndarray):
        mask = np.asarray(mask, dtype=np.float64)
        if mask.ndim != 2:
            raise ConfigurationError(f"mask must be (h, w), got {mask.shape}")
        if mask.min() < 0 or mask.max() > 1:
            raise ConfigurationError("mask values must lie in [0, 1]")
        self.mask = mask
        self.name = "inpaint-mask"

    def _mul(self, x):
        if x.shape[:2] != self.mask.shape:
            raise ContractError(f"mask shape {self.mask.shape} != frame {x.shape[:2]}")
        return x * self.mask[:, :, None]

    apply = _mul
    pseudo_inverse = _mul
    adjoint = _mul


class Grayscale(DegradationOperator):
    """Channel mean (r+g+b)/3 -> 1 channel; pseudo-inverse replicates."""

    name = "grayscale"

    def apply(self, x):
        if x.shape[2] != 3:
            raise ContractError(f"grayscale operator needs 3 channels, got {x.shape[2]}")
        return x.mean(axis=2, keepdims=True)

    def pseudo_inverse(self, y):
        return np.repeat(y, 3, axis=2)

    def adjoint(self, r):
        return np.repeat(r, 3, axis=2) / 3.0

    def obs_shape(self, frame_shape):
        h, w, _ = frame_shape
        return (h, w, 1)

    def frame_shape(self, obs_shape):
        h, w, _ = obs_shape
        return (h, w, 3)


def _conv_edge(x2d: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    r = kernel.shape[0] // 2
    xp = np.pad(x2d, r, mode="edge")
    win = sliding_window_view(xp, kernel.shape)
    return np.einsum("hwij,ij->hw", win, kernel[::-1, ::-1])


def _fold_edge(g: np.ndarray, r: int) -> np.ndarray:
    """Adjoint of edge padding: accumulate pad bands back onto the border."""
    if r == 0:
        return g
    g = g.copy()
    g[:, r] += g[:, :r].sum(axis=1)
    g[:, -r - 1] += g[:, -r:].sum(axis=1)
    g = g[:, r:-r]
    g[r] += g[:r].sum(axis=0)
    g[-r - 1] += g[-r:].sum(axis=0)
    return g[r:-r]


class BlurConv(DegradationOperator):
    """2D convolution with clamp-to-edge padding.

    The adjoint is exact for that padding (full convolution followed by
    folding the pad bands back). No pseudo-inverse: deconvolution is
    ill-conditioned, so this task pairs with gradient guidance.
    """

    def __init__(self, kernel: np.ndarray):
        kernel = np.asarray(kernel, dtype=np.float64)
        if kernel.ndim != 2 or kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
            raise ConfigurationError(f"kernel must be odd-sized 2D, got {kernel.shape}")
        if kernel.shape[0] != kernel.shape[1]:
            raise ConfigurationError("kernel must be square")
        if abs(kernel.sum() - 1.0) > 1e-8:
            raise ConfigurationError(f"kernel must sum to 1, got {kernel.sum():.6g}")
        self.kernel = kernel
        self.name = f"blur-{kernel.shape[0]}x{kernel.shape[1]}"

    def apply(self, x):
        return np.stack([_conv_edge(x[..., c], self.kernel) for c in range(x.shape[2])], axis=-1)

    def adjoint(self, r):
        m = self.kernel.shape[0]
        rad = m // 2
        out = []
        for c in range(r.shape[2]):
            rp = np.pad(r[..., c], m - 1, mode="constant")
            win = sliding_window_view(rp, self.kernel.shape)
            g = np.einsum("hwij,ij->hw", win, self.kernel)
            out.append(_fold_edge(g, rad))
        return np.stack(out, axis=-1)


class Awgn(DegradationOperator):
    """Identity measurement with seeded Gaussian noise at synthesis time.

    The linear map is the identity (the noise belongs to the observation
    model, not A), so gradient guidance sees A = I with a known sigma.
    Null-space projection is refused: it would copy the noise verbatim.
    """

    def __init__(self, sigma: float, seed: int = 0):
        if sigma < 0:
            raise ConfigurationError(f"sigma must be >= 0, got {sigma}")
        self.sigma = float(sigma)
        self.seed = int(seed)
        self.name = f"awgn-{sigma:g}"

    def apply(self, x):
        return x

    def degrade(self, x, index: int = 0):
        if self.sigma == 0:
            return x
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=(index,))))
        return x + self.sigma * rng.standard_normal(x.shape)

    def adjoint(self, r):
        return r


class LowLight(DegradationOperator):
    """Scalar-gain exposure model, linear in [0, 1] luminance.

    On [-1, 1] frames the map is affine (x -> g*x + g - 1); adjoint()
    is the transpose of its homogeneous part, which is what distance
    guidance differentiates.
    """

    linear = False

    def __init__(self, gain: float):
        if not gain > 0:
            raise ConfigurationError(f"gain must be > 0, got {gain}")
        self.gain = float(gain)
        self.name = f"lowlight-{gain:g}"

    def apply(self, x):
        y01 = self.gain * (x + 1.0) / 2.0
        return np.clip(y01 * 2.0 - 1.0, -1.0, 1.0)

    def pseudo_inverse(self, y):
        x01 = ((y + 1.0) / 2.0) / self.gain
        return np.clip(x01 * 2.0 - 1.0, -1.0, 1.0)

    def adjoint(self, r):
        return self.gain * r


def estimate_gain(y: np.ndarray, reference: np.ndarray | None = None, assumed_mean: float = 0.5) -> float:
    """Fit the exposure gain of an observation as a ratio of means."""
    obs_mean = float(((y + 1.0) / 2.0).mean())
    ref_mean = float(((reference + 1.0) / 2.0).mean()) if reference is not None else assumed_mean
    if ref_mean <= 0:
        raise ConfigurationError("reference mean must be positive to estimate gain")
    return float(np.clip(obs_mean / ref_mean, 1e-4, 1.0))


def gaussian_kernel(size: int = 33, sigma: float = 2.0) -> np.ndarray:
    if size % 2 == 0:
        raise ConfigurationError("kernel size must be odd")
    ax = np.arange(size) - size // 2
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    k = np.outer(g, g)
    return k / k.sum()


TASKS = ("sr2", "sr4", "inpaint", "color", "deblur", "denoise", "lowlight")


def make_operator(
    task: str,
    mask: np.ndarray | None = None,
    kernel: np.ndarray | None = None,
    sigma: float = 50.0 / 255.0,
    gain: float = 0.25,
    noise_seed: int = 0,
) -> DegradationOperator:
    """Build the degradation operator named by a task string."""
    if task == "sr2":
        return SRAveragePool(2)
    if task == "sr4":
        return SRAveragePool(4)
    if task == "inpaint":
        if mask is None:
            raise ConfigurationError("inpaint task needs a pixel mask")
        return InpaintMask(mask)
    if task == "color":
        return Grayscale()
    if task == "deblur":
        return BlurConv(gaussian_kernel() if kernel is None else kernel)
    if task == "denoise":
        return Awgn(sigma, seed=noise_seed)
    if task == "lowlight":
        return LowLight(gain)
    raise ConfigurationError(f"unknown task {task!r}; expected one of {TASKS}")
