"""Power normalization operators.

MaxExp pools a count-like vector in [0, 1] via g = 1 - (1 - psi)^eta.
SigmE is its smooth, sign-preserving extension for real-valued inputs:
g = 2 / (1 + exp(-eta * psi / (||psi||_2 + eps))) - 1, which equals
tanh(eta * psi / (2 * (||psi||_2 + eps))).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGME = "sigme"
MAXEXP = "maxexp"


@dataclass(frozen=True)
class PnConfig:
    eta: float = 20.0          # SigmE slope eta'
    epsilon: float = 1e-12     # norm guard eps'
    variant: str = SIGME
    maxexp_eta: float = 2.0    # MaxExp exponent, > 1

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.variant not in (SIGME, MAXEXP):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.variant == MAXEXP and not self.maxexp_eta > 1:
            raise ValueError(f"maxexp_eta must be > 1, got {self.maxexp_eta}")


def sigme(psi: np.ndarray, cfg: PnConfig) -> np.ndarray:
    """SigmE normalization along the last axis.

    For the all-zero vector the denominator is eps and the output is
    exactly zero by odd symmetry; no special-casing needed.
    """
    psi = np.asarray(psi, dtype=np.float64)
    if not np.all(np.isfinite(psi)):
        raise ValueError("sigme input must be finite")
    norm = np.linalg.norm(psi, axis=-1, keepdims=True)
    return np.tanh(cfg.eta * psi / (2.0 * (norm + cfg.epsilon)))


def sigme_grad(psi: np.ndarray, upstream: np.ndarray, cfg: PnConfig) -> np.ndarray:
    """Vector-Jacobian product of :func:`sigme`, including the dependence
    of the normalizing ||psi||_2 on psi. Batched along leading axes."""
    psi = np.asarray(psi, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if psi.shape != upstream.shape:
        raise ValueError(f"shape mismatch: {psi.shape} vs {upstream.shape}")
    norm = np.linalg.norm(psi, axis=-1, keepdims=True)
    n = norm + cfg.epsilon
    g = np.tanh(cfg.eta * psi / (2.0 * n))
    sech2 = 1.0 - g * g
    half_eta = 0.5 * cfg.eta
    direct = half_eta * sech2 * upstream / n
    # Norm term: d(psi_i/n)/dpsi_j has -psi_i*psi_j/(n^2*norm); zero subgradient at psi = 0.
    inner = (upstream * sech2 * psi).sum(axis=-1, keepdims=True)
    safe_norm = np.where(norm > 0.0, norm, 1.0)
    norm_term = np.where(norm > 0.0, half_eta * inner * psi / (n * n * safe_norm), 0.0)
    return direct - norm_term


def maxexp(psi: np.ndarray, cfg: PnConfig) -> np.ndarray:
    """MaxExp pooling g = 1 - (1 - psi)^eta for psi in [0, 1]."""
    psi = np.asarray(psi, dtype=np.float64)
    if not np.all(np.isfinite(psi)):
        raise ValueError("maxexp input must be finite")
    if psi.size and (psi.min() < 0.0 or psi.max() > 1.0):
        raise ValueError("maxexp input must lie in [0, 1]")
    return 1.0 - (1.0 - psi) ** cfg.maxexp_eta
