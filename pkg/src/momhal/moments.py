"""Multi-moment descriptors of bags of feature vectors.

A bag holds per-frame groups of d-dimensional vectors.  Its descriptor
concatenates the l2-normalized mean, the leading left singular vectors of
the frame-weighted centered matrix, element-wise skewness and kurtosis,
and the trace-normalized squared-singular-value spectrum, for a flat
length of d * (4 + n_leading).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

MAGIC = b"MMD1"


class EmptyBagError(ValueError):
    """Raised when a descriptor is requested for a bag with no vectors."""


@dataclass
class FeatureBag:
    """Per-frame groups of feature vectors; groups may be empty."""

    dim: int
    frames: list[np.ndarray]  # frame j: array of shape (K_j, dim)

    def __post_init__(self):
        if not self.frames:
            raise ValueError("bag must contain at least one frame")
        frames = []
        for f in self.frames:
            f = np.asarray(f, dtype=np.float64)
            if f.size == 0:
                f = f.reshape(0, self.dim)
            if f.ndim != 2 or f.shape[1] != self.dim:
                raise ValueError(f"frame shape {f.shape} incompatible with dim {self.dim}")
            frames.append(f)
        self.frames = frames

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def total(self) -> int:
        return sum(f.shape[0] for f in self.frames)

    def stacked(self) -> np.ndarray:
        return np.concatenate(self.frames, axis=0)


@dataclass
class MultiMomentDescriptor:
    mean_dir: np.ndarray      # (d,), unit norm or exactly zero
    eigvecs: np.ndarray       # (n_prime, d), unit rows or zero rows
    skewness: np.ndarray      # (d,)
    kurtosis: np.ndarray      # (d,)
    eig_spectrum: np.ndarray  # (d,), nonnegative, sums to 1 or all zero
    n_prime: int

    @property
    def dim(self) -> int:
        return self.mean_dir.shape[0]

    def flat(self) -> np.ndarray:
        """Concatenation [mean_dir; eigvec_1; ...; eigvec_n'; skew; kurt;
        spectrum], length d * (4 + n_prime)."""
        return np.concatenate(
            [self.mean_dir, self.eigvecs.ravel(), self.skewness, self.kurtosis, self.eig_spectrum]
        )


def assemble_upsilon(bag: FeatureBag, mu: np.ndarray) -> np.ndarray:
    """Frame-weighted centered matrix: the column for detection i of frame j
    is (v_ij - mu) / (J * K_j), frame-major.  Empty frames contribute no
    columns but still count toward J."""
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape != (bag.dim,):
        raise ValueError(f"mu must have length {bag.dim}")
    j_total = bag.n_frames
    cols = []
    for frame in bag.frames:
        k = frame.shape[0]
        if k == 0:
            continue
        cols.append((frame - mu).T / (j_total * k))
    if not cols:
        return np.zeros((bag.dim, 0))
    return np.concatenate(cols, axis=1)


def _fix_sign(u: np.ndarray) -> np.ndarray:
    # Deterministic orientation: largest-magnitude component made positive.
    j = int(np.argmax(np.abs(u)))
    return -u if u[j] < 0 else u


def rank_tolerance(lam2: np.ndarray, d: int, n: int, eps: float = 1e-12) -> float:
    """Singular-value cutoff below which a direction counts as rank noise.

    Eigenvalues of the squared problem carry a noise floor of about
    machine-eps times the top eigenvalue; after the square root that is
    ~1e-8 times the top singular value, so an absolute guard alone cannot
    separate true rank from noise.
    """
    if lam2.size == 0:
        return eps
    s_max = float(np.sqrt(max(lam2[0], 0.0)))
    return max(eps, s_max * np.sqrt(max(d, n) * np.finfo(np.float64).eps))


def _left_singular(upsilon: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Left singular vectors (columns) and squared singular values of the
    d x N matrix, descending.  Uses the N x N Gram matrix when N < d.
    Vectors below the rank tolerance are returned as zeros."""
    d, n = upsilon.shape
    if n == 0:
        return np.zeros((d, 0)), np.zeros(0)
    if n < d:
        gram = upsilon.T @ upsilon
        w, v = np.linalg.eigh(gram)
        order = np.argsort(w)[::-1]
        lam2 = np.clip(w[order], 0.0, None)
        v = v[:, order]
        sv = np.sqrt(lam2)
        u = np.zeros((d, n))
        ok = sv > rank_tolerance(lam2, d, n)
        if ok.any():
            u[:, ok] = (upsilon @ v[:, ok]) / sv[ok]
        return u, lam2
    u, sv, _ = np.linalg.svd(upsilon, full_matrices=False)
    lam2 = sv * sv
    u = u.copy()
    u[:, sv <= rank_tolerance(lam2, d, n)] = 0.0
    return u, lam2


def multi_moment(
    bag: FeatureBag,
    n_prime: int,
    eps: float = 1e-12,
    weighted_cumulants: bool = False,
) -> MultiMomentDescriptor:
    """Compute the multi-moment descriptor of a bag.

    Skewness and kurtosis are the element-wise cumulant ratios
    kappa3 / kappa2^1.5 and kappa4 / kappa2^2, computed by default over the
    plain (unweighted) centered vectors; ``weighted_cumulants`` switches to
    the same 1/(J*K_j) frame weighting used for the singular subspace.
    Degenerate quantities (zero mean, deficient rank, zero variance)
    come out as exact zeros via the eps guard.
    """
    if n_prime < 1:
        raise ValueError(f"n_prime must be >= 1, got {n_prime}")
    n = bag.total
    if n == 0:
        raise EmptyBagError("bag holds no vectors")
    data = bag.stacked()
    if not np.all(np.isfinite(data)):
        raise ValueError("bag contains non-finite values")

    d = bag.dim
    mu = data.mean(axis=0)
    mu_norm = float(np.linalg.norm(mu))
    mean_dir = mu / mu_norm if mu_norm >= eps else np.zeros(d)

    upsilon = assemble_upsilon(bag, mu)
    u, lam2 = _left_singular(upsilon)

    eigvecs = np.zeros((n_prime, d))
    tol = rank_tolerance(lam2, d, upsilon.shape[1], eps)
    for i in range(min(n_prime, lam2.shape[0])):
        if np.sqrt(lam2[i]) > tol:
            eigvecs[i] = _fix_sign(u[:, i])

    centered = data - mu
    if weighted_cumulants:
        w = np.concatenate(
            [np.full(f.shape[0], 1.0 / (bag.n_frames * f.shape[0])) for f in bag.frames if f.shape[0]]
        )
        k2 = w @ centered**2
        k3 = w @ centered**3
        k4 = w @ centered**4
    else:
        k2 = (centered**2).mean(axis=0)
        k3 = (centered**3).mean(axis=0)
        k4 = (centered**4).mean(axis=0)
    guard = np.maximum(k2, eps)
    skewness = k3 / guard**1.5
    kurtosis = k4 / guard**2

    spectrum = np.zeros(d)
    take = min(d, lam2.shape[0])
    spectrum[:take] = lam2[:take]
    spectrum /= max(float(spectrum.sum()), eps)

    return MultiMomentDescriptor(mean_dir, eigvecs, skewness, kurtosis, spectrum, n_prime)


def descriptor_to_bytes(desc: MultiMomentDescriptor) -> bytes:
    """Serialize: magic "MMD1", u32 d, u32 n', then the five blocks as
    little-endian f32 in flat() order."""
    return b"".join(
        [
            MAGIC,
            np.uint32(desc.dim).tobytes(),
            np.uint32(desc.n_prime).tobytes(),
            desc.flat().astype("<f4").tobytes(),
        ]
    )


def descriptor_from_bytes(data: bytes) -> MultiMomentDescriptor:
    if data[:4] != MAGIC:
        raise ValueError("bad descriptor magic")
    d = int(np.frombuffer(data, "<u4", 1, 4)[0])
    n_prime = int(np.frombuffer(data, "<u4", 1, 8)[0])
    body = np.frombuffer(data, "<f4", d * (4 + n_prime), 12).astype(np.float64)
    blocks = body.reshape(4 + n_prime, d)
    return MultiMomentDescriptor(
        mean_dir=blocks[0],
        eigvecs=blocks[1 : 1 + n_prime].copy(),
        skewness=blocks[1 + n_prime],
        kurtosis=blocks[2 + n_prime],
        eig_spectrum=blocks[3 + n_prime],
        n_prime=n_prime,
    )


def write_descriptor(desc: MultiMomentDescriptor, fp: BinaryIO) -> None:
    fp.write(descriptor_to_bytes(desc))


def read_descriptor(fp: BinaryIO) -> MultiMomentDescriptor:
    return descriptor_from_bytes(fp.read())
