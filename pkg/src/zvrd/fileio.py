"""Disk formats: 8-bit PNG frames, raw float32 observation blobs with a
JSON shape manifest, Middlebury-style .flo flow files, 8-bit mask PNGs
(255 = valid/kept), and plain-text blur kernels.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigurationError
from .video import from_unit_range, to_unit_range

FRAME_PATTERN = "frame_%05d.png"
BLOB_PATTERN = "frame_%05d.bin"
FLO_MAGIC = 202021.25


def write_frame_png(path, frame: np.ndarray):
    data = from_unit_range(frame)
    if data.shape[2] == 1:
        img = Image.fromarray(data[:, :, 0], mode="L")
    else:
        img = Image.fromarray(data, mode="RGB")
    img.save(path)


def read_frame_png(path) -> np.ndarray:
    try:
        img = Image.open(path)
    except FileNotFoundError:
        raise ConfigurationError(f"missing frame file {path}")
    arr = np.asarray(img.convert("L" if img.mode in ("L", "1", "I;16") else "RGB"), dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return to_unit_range(arr)


def _indexed_files(directory, pattern) -> list[Path]:
    directory = Path(directory)
    rx = re.compile("^" + pattern.replace("%05d", r"(\d{5})") + "$")
    found = sorted(p for p in directory.iterdir() if rx.match(p.name)) if directory.is_dir() else []
    if not found:
        raise ConfigurationError(f"no {pattern} files in {directory}")
    return found


def write_video_pngs(directory, video: np.ndarray, pattern: str = FRAME_PATTERN):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(video):
        write_frame_png(directory / (pattern % i), frame)


def read_video_pngs(directory, pattern: str = FRAME_PATTERN) -> np.ndarray:
    frames = [read_frame_png(p) for p in _indexed_files(directory, pattern)]
    first = frames[0].shape
    for p, f in zip(_indexed_files(directory, pattern), frames):
        if f.shape != first:
            raise ConfigurationError(f"frame {p} has shape {f.shape}, expected {first}")
    return np.stack(frames)


def write_obs_blobs(directory, observations):
    """Non-image-shaped observations: one float32 blob per frame plus a
    shared shape manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    shape = list(np.shape(observations[0]))
    manifest = {
        "dtype": "float32",
        "byte_order": "little",
        "shape": shape,
        "count": len(observations),
        "pattern": BLOB_PATTERN,
    }
    (directory / "frames_manifest.json").write_text(json.dumps(manifest, indent=1))
    for i, obs in enumerate(observations):
        np.ascontiguousarray(obs, dtype="<f4").tofile(directory / (BLOB_PATTERN % i))


def read_obs_blobs(directory) -> np.ndarray:
    directory = Path(directory)
    manifest_path = directory / "frames_manifest.json"
    if not manifest_path.exists():
        raise ConfigurationError(f"missing {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    shape = tuple(manifest["shape"])
    frames = []
    for i in range(manifest["count"]):
        path = directory / (manifest.get("pattern", BLOB_PATTERN) % i)
        if not path.exists():
            raise ConfigurationError(f"missing observation blob {path}")
        raw = np.fromfile(path, dtype="<f4")
        if raw.size != int(np.prod(shape)):
            raise ConfigurationError(f"blob {path} has {raw.size} values, expected shape {shape}")
        frames.append(raw.reshape(shape).astype(np.float64))
    return np.stack(frames)


def write_flo(path, flow: np.ndarray):
    h, w = flow.shape[:2]
    with open(path, "wb") as f:
        np.array([FLO_MAGIC], dtype="<f4").tofile(f)
        np.array([w, h], dtype="<i4").tofile(f)
        np.ascontiguousarray(flow, dtype="<f4").tofile(f)


def read_flo(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"missing flow file {path}")
    with open(path, "rb") as f:
        magic = np.fromfile(f, dtype="<f4", count=1)
        if magic.size != 1 or abs(float(magic[0]) - FLO_MAGIC) > 1e-3:
            raise ConfigurationError(f"{path} is not a .flo file (bad magic)")
        w, h = np.fromfile(f, dtype="<i4", count=2)
        data = np.fromfile(f, dtype="<f4", count=int(w) * int(h) * 2)
    if data.size != int(w) * int(h) * 2:
        raise ConfigurationError(f"{path} truncated")
    return data.reshape(int(h), int(w), 2).astype(np.float64)


def write_mask_png(path, mask: np.ndarray):
    """mask in [0, 1], 1 = valid/kept pixel, stored as 8-bit (255 = valid)."""
    data = np.clip(np.round(np.asarray(mask, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(data, mode="L").save(path)


def read_mask_png(path, threshold: float = 0.5) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"missing mask file {path}")
    arr = np.asarray(Image.open(path).convert("L"), dtype=np.float64) / 255.0
    return (arr >= threshold).astype(np.float64)


def write_kernel_txt(path, kernel: np.ndarray):
    lines = [" ".join(f"{v:.12g}" for v in row) for row in np.asarray(kernel, dtype=np.float64)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_kernel_txt(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"missing kernel file {path}")
    rows = [
        [float(v) for v in line.split()]
        for line in path.read_text().strip().splitlines()
        if line.strip()
    ]
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ConfigurationError(f"kernel file {path} has ragged rows")
    return np.asarray(rows, dtype=np.float64)
