"""Gaussian feature maps over fixed pivots on the unit interval or unit ring.

A scalar in [0, 1] is embedded as its Gaussian responses at Z equally
spaced pivots.  The inner product of two such embeddings, scaled by a
fitted constant, approximates a Gaussian RBF kernel between the scalars,
which is what makes these maps usable as positional encodings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INTERVAL_UNIT = "interval_unit"
RING_UNIT = "ring_unit"


@dataclass(frozen=True)
class FeatureMapConfig:
    """Pivot layout and bandwidth of a 1-d Gaussian feature map.

    ``sigma`` is the bandwidth of the kernel being approximated; the map's
    Gaussians use sigma/sqrt(2), i.e. entries are exp(-(x - pivot)^2 / sigma^2).
    """

    pivot_count: int = 7
    sigma: float = 0.5
    domain: str = INTERVAL_UNIT

    def __post_init__(self):
        if self.pivot_count < 1:
            raise ValueError(f"pivot_count must be >= 1, got {self.pivot_count}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.domain not in (INTERVAL_UNIT, RING_UNIT):
            raise ValueError(f"unknown domain {self.domain!r}")

    def pivots(self) -> np.ndarray:
        """Pivot locations. Interval: endpoints included (center for Z=1);
        ring: spacing 1/Z with the duplicate endpoint excluded."""
        z = self.pivot_count
        if self.domain == RING_UNIT:
            return np.arange(z) / z
        if z == 1:
            return np.array([0.5])
        return np.arange(z) / (z - 1)


def _distances(x: np.ndarray, cfg: FeatureMapConfig) -> np.ndarray:
    d = np.abs(x[..., None] - cfg.pivots())
    if cfg.domain == RING_UNIT:
        d = np.minimum(d, 1.0 - d)
    return d


def feature_map(x: float, cfg: FeatureMapConfig) -> np.ndarray:
    """Embed a scalar as its Gaussian responses at the pivots.

    Returns a vector of length ``cfg.pivot_count`` with entries
    exp(-dist(x, pivot)^2 / sigma^2), where dist wraps around on the ring.
    """
    x = float(x)
    if not np.isfinite(x):
        raise ValueError("feature_map input must be finite")
    if cfg.domain == RING_UNIT:
        if not 0.0 <= x < 1.0:
            raise ValueError(f"ring input must lie in [0, 1), got {x}")
    elif not 0.0 <= x <= 1.0:
        raise ValueError(f"interval input must lie in [0, 1], got {x}")
    d = _distances(np.asarray(x), cfg)
    return np.exp(-(d * d) / (cfg.sigma * cfg.sigma))


def feature_map_batch(xs: np.ndarray, cfg: FeatureMapConfig) -> np.ndarray:
    """Vectorized :func:`feature_map`: maps shape (...,) to (..., Z).

    Assumes inputs already lie in the domain; used on bulk data such as
    per-pixel orientations where the range is guaranteed by construction.
    """
    xs = np.asarray(xs, dtype=np.float64)
    d = _distances(xs, cfg)
    return np.exp(-(d * d) / (cfg.sigma * cfg.sigma))


def _domain_grid(cfg: FeatureMapConfig, grid_size: int) -> np.ndarray:
    if cfg.domain == RING_UNIT:
        return np.arange(grid_size) / grid_size
    return np.linspace(0.0, 1.0, grid_size)


def kernel_gram(xs: np.ndarray, cfg: FeatureMapConfig) -> np.ndarray:
    """Target RBF kernel matrix G_sigma(x - x') over a set of scalars,
    using the wrap-around distance on the ring."""
    d = np.abs(xs[:, None] - xs[None, :])
    if cfg.domain == RING_UNIT:
        d = np.minimum(d, 1.0 - d)
    return np.exp(-(d * d) / (2.0 * cfg.sigma * cfg.sigma))


def kernel_approx_constant(cfg: FeatureMapConfig, grid_size: int) -> float:
    """Least-squares scale c such that c * <phi(x), phi(x')> best matches
    the RBF kernel G_sigma(x - x') over a uniform grid of pairs.

    The closed-form minimizer of sum((c*k - g)^2) is sum(k*g)/sum(k*k).
    """
    if grid_size < 2:
        raise ValueError(f"grid_size must be >= 2, got {grid_size}")
    xs = _domain_grid(cfg, grid_size)
    feats = feature_map_batch(xs, cfg)
    k = feats @ feats.T
    denom = float((k * k).sum())
    if denom <= 0.0 or not np.isfinite(denom):
        raise ValueError("degenerate feature inner products; cannot fit scale")
    g = kernel_gram(xs, cfg)
    return float((k * g).sum() / denom)


def kernel_approx_error(cfg: FeatureMapConfig, grid_size: int) -> tuple[float, float]:
    """Fitted scale c and the relative RMS error of c * <phi, phi> against
    the RBF kernel over the grid: ||c*K - G||_F / ||G||_F."""
    c = kernel_approx_constant(cfg, grid_size)
    xs = _domain_grid(cfg, grid_size)
    feats = feature_map_batch(xs, cfg)
    k = feats @ feats.T
    g = kernel_gram(xs, cfg)
    err = float(np.sqrt(((c * k - g) ** 2).mean()) / np.sqrt((g * g).mean()))
    return c, err
