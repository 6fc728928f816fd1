"""Saliency detection features.

Each saliency frame is reduced to 556 numbers: a 300-dim spatio-angular
gradient block (12 orientation pivots x 5 x-position pivots x 5 y-position
pivots, amplitude-weighted, l2-normalized) plus a 256-dim low-resolution
intensity gist (16x16 area-weighted average pooling, l1-normalized).  A
video's frames are then summarized by the multi-moment descriptor.

Pixel indexing convention: i is the column (x position, normalized by
W-1), j is the row (y position, normalized by H-1).  The gradient block is
laid out angular-major: index = a*25 + x*5 + y.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernel import INTERVAL_UNIT, RING_UNIT, FeatureMapConfig, feature_map_batch
from .moments import FeatureBag, MultiMomentDescriptor, multi_moment

SALIENCY_SLOTS = ("sal1", "sal2")


@dataclass
class SaliencyFrame:
    """One grayscale saliency map with values in [0, 1]."""

    values: np.ndarray  # (H, W)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("saliency frame must be 2-d")
        h, w = self.values.shape
        if h < 2 or w < 2:
            raise ValueError(f"frame must be at least 2x2, got {h}x{w}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("frame contains non-finite values")
        if self.values.min() < 0.0 or self.values.max() > 1.0:
            raise ValueError("frame values must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SdfConfig:
    angular_map: FeatureMapConfig = field(
        default_factory=lambda: FeatureMapConfig(12, 0.5, RING_UNIT)
    )
    spatial_map: FeatureMapConfig = field(
        default_factory=lambda: FeatureMapConfig(5, 0.5, INTERVAL_UNIT)
    )
    gist_size: int = 16
    eps: float = 1e-12

    @property
    def gradient_dim(self) -> int:
        return self.angular_map.pivot_count * self.spatial_map.pivot_count**2

    @property
    def dim(self) -> int:
        return self.gradient_dim + self.gist_size**2


def gradients(frame: SaliencyFrame) -> tuple[np.ndarray, np.ndarray]:
    """Centered-difference gradients with replicate boundary.

    Returns (amplitude, orientation) maps; orientation is atan2(gy, gx)
    mapped to [0, 1) as a fraction of a full turn, with 0 wherever the
    amplitude vanishes.
    """
    v = frame.values
    h, w = v.shape
    gx = np.empty_like(v)
    gx[:, 1:-1] = v[:, 2:] - v[:, :-2]
    gx[:, 0] = v[:, 1] - v[:, 0]
    gx[:, -1] = v[:, -1] - v[:, -2]
    gy = np.empty_like(v)
    gy[1:-1, :] = v[2:, :] - v[:-2, :]
    gy[0, :] = v[1, :] - v[0, :]
    gy[-1, :] = v[-1, :] - v[-2, :]

    amplitude = np.hypot(gx, gy)
    theta = np.arctan2(gy, gx)
    theta = np.where(theta < 0.0, theta + 2.0 * np.pi, theta)
    orientation = theta / (2.0 * np.pi)
    orientation = np.where(orientation >= 1.0, 0.0, orientation)
    orientation = np.where(amplitude == 0.0, 0.0, orientation)
    return amplitude, orientation


def encode_gradient_field(
    amplitude: np.ndarray, orientation: np.ndarray, cfg: SdfConfig
) -> np.ndarray:
    """Amplitude-weighted sum over pixels of
    phi_ring(orientation) (x) phi(x position) (x) phi(y position)."""
    amplitude = np.asarray(amplitude, dtype=np.float64)
    orientation = np.asarray(orientation, dtype=np.float64)
    if amplitude.shape != orientation.shape or amplitude.ndim != 2:
        raise ValueError("amplitude and orientation must be equal-shape 2-d maps")
    h, w = amplitude.shape
    ang = feature_map_batch(orientation, cfg.angular_map)          # (H, W, A)
    phi_x = feature_map_batch(np.arange(w) / (w - 1), cfg.spatial_map)  # (W, X)
    phi_y = feature_map_batch(np.arange(h) / (h - 1), cfg.spatial_map)  # (H, Y)
    tensor = np.einsum("hw,hwa,wx,hy->axy", amplitude, ang, phi_x, phi_y)
    return tensor.reshape(-1)


def _pool_weights(n_pixels: int, n_bins: int) -> np.ndarray:
    """(n_bins, n_pixels) area weights; each row averages one uniform bin,
    splitting pixels fractionally at bin borders."""
    width = n_pixels / n_bins
    weights = np.zeros((n_bins, n_pixels))
    for b in range(n_bins):
        lo, hi = b * width, (b + 1) * width
        for p in range(int(np.floor(lo)), min(int(np.ceil(hi)), n_pixels)):
            overlap = min(p + 1.0, hi) - max(float(p), lo)
            if overlap > 0:
                weights[b, p] = overlap / width
    return weights


def gist(values: np.ndarray, size: int) -> np.ndarray:
    """Area-weighted average pooling to a size x size grid, row-major flat."""
    h, w = values.shape
    rows = _pool_weights(h, size)
    cols = _pool_weights(w, size)
    return (rows @ values @ cols.T).reshape(-1)


def encode_frame(frame: SaliencyFrame, cfg: SdfConfig) -> np.ndarray:
    """Per-frame feature: [gradient block / max(l2, eps); gist / max(l1, eps)]."""
    amplitude, orientation = gradients(frame)
    grad_block = encode_gradient_field(amplitude, orientation, cfg)
    grad_block = grad_block / max(float(np.linalg.norm(grad_block)), cfg.eps)
    gist_block = gist(frame.values, cfg.gist_size)
    gist_block = gist_block / max(float(np.abs(gist_block).sum()), cfg.eps)
    return np.concatenate([grad_block, gist_block])


def sdf_descriptor(
    frames: list[SaliencyFrame], cfg: SdfConfig, n_dagger: int = 3
) -> MultiMomentDescriptor:
    """Multi-moment descriptor over per-frame features (one group per frame)."""
    if not frames:
        raise ValueError("no saliency frames")
    encoded = [encode_frame(f, cfg).reshape(1, -1) for f in frames]
    bag = FeatureBag(dim=cfg.dim, frames=encoded)
    return multi_moment(bag, n_dagger)


_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def read_pgm(path) -> SaliencyFrame:
    """Read a binary (P5) PGM; values are rescaled to [0, 1] by maxval.
    16-bit samples are big-endian per the PNM convention."""
    data = Path(path).read_bytes()
    try:
        pos = 0
        tokens = []
        while len(tokens) < 4:
            m = _TOKEN.match(data, pos)
            if m is None:
                raise ValueError("truncated header")
            tokens.append(m.group(1))
            pos = m.end()
        if tokens[0] != b"P5":
            raise ValueError(f"unsupported PNM type {tokens[0]!r}, expected P5")
        width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
        if width < 2 or height < 2:
            raise ValueError(f"frame must be at least 2x2, got {height}x{width}")
        if not 0 < maxval < 65536:
            raise ValueError(f"maxval {maxval} outside [1, 65535]")
        pos += 1  # single whitespace byte separates header from raster
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        count = width * height
        if len(data) - pos < count * dtype.itemsize:
            raise ValueError("truncated raster")
        raster = np.frombuffer(data, dtype, count, pos)
        values = raster.reshape(height, width).astype(np.float64) / maxval
        return SaliencyFrame(np.clip(values, 0.0, 1.0))
    except ValueError as exc:
        raise ValueError(f"{path}: corrupt PGM: {exc}") from exc


def write_pgm(path, values: np.ndarray, maxval: int = 255) -> None:
    """Write a binary (P5) PGM from values in [0, 1]."""
    values = np.asarray(values, dtype=np.float64)
    if not 0 < maxval < 65536:
        raise ValueError(f"maxval {maxval} outside [1, 65535]")
    quant = np.rint(np.clip(values, 0.0, 1.0) * maxval)
    h, w = values.shape
    header = f"P5\n{w} {h}\n{maxval}\n".encode()
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    Path(path).write_bytes(header + quant.astype(dtype).tobytes())


def read_saliency_manifest(path) -> dict[tuple[str, str], list[Path]]:
    """Read a manifest of saliency frames.

    Each non-comment line holds three whitespace-separated fields:
    video id, saliency source id, frame path (relative to the manifest).
    Line order defines frame order within each (video, source) group.
    """
    path = Path(path)
    groups: dict[tuple[str, str], list[Path]] = {}
    with open(path, "r", encoding="utf-8") as fp:
        for lineno, line in enumerate(fp, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}: line {lineno}: expected 'video source path'")
            video, source, rel = parts
            groups.setdefault((video, source), []).append(path.parent / rel)
    return groups
