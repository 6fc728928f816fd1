"""Count sketches: signed random bucket projections for dimensionality reduction.

A sketch maps R^d to R^d' by routing coordinate i to bucket h_i with sign
s_i, so the projection matrix has exactly one +-1 per column.  Inner
products survive in expectation, with variance shrinking as 1/d', which is
why each modality gets its own independent sketch.

Randomness comes from a fixed splitmix64 generator so that a given
(d, d', seed) triple yields the same sketch on every platform.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import BinaryIO, NamedTuple

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

MAGIC = b"CSK1"


def splitmix64(seed: int, count: int) -> np.ndarray:
    """First ``count`` outputs of the splitmix64 stream seeded by ``seed``."""
    ks = np.uint64(seed & _MASK64) + np.arange(1, count + 1, dtype=np.uint64) * np.uint64(_GAMMA)
    z = (ks ^ (ks >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def derive_stream_seed(base_seed: int, name: str, role: str = "gt") -> int:
    """Stable per-modality seed: hash of (base_seed, role, name).

    ``role`` separates ground-truth sketches from hallucination-stream
    sketches of the same modality.
    """
    payload = (base_seed & _MASK64).to_bytes(8, "little") + f"{role}:{name}".encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class CountSketch:
    """Hash/sign pair defining the projection; immutable once built."""

    input_dim: int
    output_dim: int
    h: np.ndarray  # uint32, 1-based bucket indices, length input_dim
    s: np.ndarray  # int8 signs in {-1, +1}, length input_dim
    seed: int

    def __post_init__(self):
        if len(self.h) != self.input_dim or len(self.s) != self.input_dim:
            raise ValueError("h and s must have length input_dim")
        if self.input_dim and (self.h.min() < 1 or self.h.max() > self.output_dim):
            raise ValueError("h entries must lie in [1, output_dim]")
        if self.input_dim and not np.all(np.abs(self.s.astype(np.int64)) == 1):
            raise ValueError("s entries must be +-1")

    def dense(self) -> np.ndarray:
        """Dense d' x d projection matrix; for tests and inspection only."""
        p = np.zeros((self.output_dim, self.input_dim))
        p[self.h.astype(np.int64) - 1, np.arange(self.input_dim)] = self.s
        return p


def sketch_new(d: int, d_prime: int, seed: int) -> CountSketch:
    """Draw a sketch: h uniform on [1, d'], s uniform on {-1, +1}."""
    if d < 1 or d_prime < 1:
        raise ValueError(f"dimensions must be >= 1, got d={d}, d'={d_prime}")
    z = splitmix64(seed, 2 * d)
    h = (z[:d] % np.uint64(d_prime)).astype(np.uint32) + np.uint32(1)
    s = ((z[d:] >> np.uint64(63)).astype(np.int8) * 2 - 1).astype(np.int8)
    return CountSketch(d, d_prime, h, s, seed & _MASK64)


def project(sk: CountSketch, psi: np.ndarray) -> np.ndarray:
    """Apply the sketch: out[j] = sum over {i : h_i = j} of s_i * psi_i."""
    psi = np.asarray(psi, dtype=np.float64)
    if psi.shape != (sk.input_dim,):
        raise ValueError(f"expected vector of length {sk.input_dim}, got shape {psi.shape}")
    return np.bincount(sk.h.astype(np.int64) - 1, weights=sk.s * psi, minlength=sk.output_dim)


def project_rows(sk: CountSketch, psis: np.ndarray) -> np.ndarray:
    """Row-wise projection of a (batch, d) matrix to (batch, d')."""
    psis = np.asarray(psis, dtype=np.float64)
    if psis.ndim != 2 or psis.shape[1] != sk.input_dim:
        raise ValueError(f"expected (batch, {sk.input_dim}) matrix, got shape {psis.shape}")
    out = np.zeros((psis.shape[0], sk.output_dim))
    np.add.at(out, (slice(None), sk.h.astype(np.int64) - 1), psis * sk.s)
    return out


def project_transpose_rows(sk: CountSketch, vs: np.ndarray) -> np.ndarray:
    """Row-wise P^T v: gather each bucket back to its source coordinate."""
    vs = np.asarray(vs, dtype=np.float64)
    return vs[..., sk.h.astype(np.int64) - 1] * sk.s


class UnbiasednessReport(NamedTuple):
    mean_error: float
    empirical_variance: float
    variance_bound: float


def unbiasedness_check(d: int, d_prime: int, trials: int, seed: int) -> UnbiasednessReport:
    """Monte-Carlo check of the sketched inner-product estimator.

    Draws ``trials`` independent sketches, estimates <P psi, P psi'> for a
    fixed seeded pair (psi, psi'), and reports |mean - <psi, psi'>|, the
    empirical variance, and the analytic bound
    (1/d')(<psi, psi'>^2 + ||psi||^2 ||psi'||^2).
    """
    if d < 1 or d_prime < 1:
        raise ValueError("dimensions must be >= 1")
    if trials < 1000:
        raise ValueError(f"trials must be >= 1000, got {trials}")
    rng = np.random.default_rng(seed)
    psi = rng.normal(size=d)
    psi2 = rng.normal(size=d)
    exact = float(psi @ psi2)

    # One splitmix substream per trial, identical to sketch_new(d, d', seed_k).
    trial_seeds = splitmix64(seed, trials)
    ks = trial_seeds[:, None] + np.arange(1, 2 * d + 1, dtype=np.uint64)[None, :] * np.uint64(_GAMMA)
    z = (ks ^ (ks >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    z = z ^ (z >> np.uint64(31))
    h0 = (z[:, :d] % np.uint64(d_prime)).astype(np.int64)
    s = (z[:, d:] >> np.uint64(63)).astype(np.float64) * 2.0 - 1.0

    a = np.zeros((trials, d_prime))
    b = np.zeros((trials, d_prime))
    rows = np.repeat(np.arange(trials), d)
    np.add.at(a, (rows, h0.ravel()), (s * psi).ravel())
    np.add.at(b, (rows, h0.ravel()), (s * psi2).ravel())
    est = (a * b).sum(axis=1)

    bound = (exact * exact + float(psi @ psi) * float(psi2 @ psi2)) / d_prime
    return UnbiasednessReport(
        mean_error=abs(float(est.mean()) - exact),
        empirical_variance=float(est.var(ddof=1)),
        variance_bound=bound,
    )


def sketch_to_bytes(sk: CountSketch) -> bytes:
    """Serialize: magic "CSK1", u32 d, u32 d', u64 seed, u32[d] h, i8[d] s
    (all little-endian)."""
    parts = [
        MAGIC,
        np.uint32(sk.input_dim).tobytes(),
        np.uint32(sk.output_dim).tobytes(),
        np.uint64(sk.seed).tobytes(),
        sk.h.astype("<u4").tobytes(),
        sk.s.astype("i1").tobytes(),
    ]
    return b"".join(parts)


def sketch_from_bytes(data: bytes) -> CountSketch:
    if data[:4] != MAGIC:
        raise ValueError("bad sketch magic")
    d = int(np.frombuffer(data, "<u4", 1, 4)[0])
    d_prime = int(np.frombuffer(data, "<u4", 1, 8)[0])
    seed = int(np.frombuffer(data, "<u8", 1, 12)[0])
    off = 20
    h = np.frombuffer(data, "<u4", d, off).astype(np.uint32)
    s = np.frombuffer(data, "i1", d, off + 4 * d).astype(np.int8)
    return CountSketch(d, d_prime, h, s, seed)


def write_sketch(sk: CountSketch, fp: BinaryIO) -> None:
    fp.write(sketch_to_bytes(sk))


def read_sketch(fp: BinaryIO) -> CountSketch:
    return sketch_from_bytes(fp.read())
