"""Independent reference implementations used as test oracles.

These deliberately avoid the library's own code paths: dense
eigendecompositions instead of the Gram shortcut, per-pixel loops instead
of einsum, explicit sums instead of vectorized cumulants.
"""

import numpy as np


def dense_multi_moment(frames, n_prime, eps=1e-12):
    """Brute-force multi-moment descriptor: explicit covariance
    eigendecomposition plus direct cumulant sums.  Returns the flat vector
    with the same sign convention (largest-magnitude component positive).
    """
    data = np.concatenate(frames, axis=0)
    n, d = data.shape
    j_total = len(frames)
    mu = data.sum(axis=0) / n

    mu_norm = np.sqrt(float(mu @ mu))
    mean_dir = mu / mu_norm if mu_norm >= eps else np.zeros(d)

    cols = []
    for frame in frames:
        k = frame.shape[0]
        for row in frame:
            cols.append((row - mu) / (j_total * k))
    upsilon = np.array(cols).T if cols else np.zeros((d, 0))

    cov = upsilon @ upsilon.T
    w, v = np.linalg.eigh(cov)
    order = np.argsort(w)[::-1]
    w = np.clip(w[order], 0.0, None)
    v = v[:, order]

    # same rank rule as the library: the squared problem's noise floor is
    # ~machine-eps * top eigenvalue, i.e. ~1e-8 * s_max after the sqrt
    n_cols = upsilon.shape[1]
    s_max = np.sqrt(w[0]) if len(w) else 0.0
    tol = max(eps, s_max * np.sqrt(max(d, n_cols) * np.finfo(np.float64).eps))
    eigvecs = np.zeros((n_prime, d))
    rank_limit = min(n_prime, n_cols, d)
    for i in range(rank_limit):
        if np.sqrt(w[i]) > tol:
            u = v[:, i]
            k = int(np.argmax(np.abs(u)))
            eigvecs[i] = -u if u[k] < 0 else u

    centered = data - mu
    k2 = np.zeros(d)
    k3 = np.zeros(d)
    k4 = np.zeros(d)
    for row in centered:
        k2 += row**2
        k3 += row**3
        k4 += row**4
    k2, k3, k4 = k2 / n, k3 / n, k4 / n
    guard = np.maximum(k2, eps)
    skew = k3 / guard**1.5
    kurt = k4 / guard**2

    spectrum = np.zeros(d)
    take = min(d, len(w))
    spectrum[:take] = w[:take]
    spectrum /= max(float(spectrum.sum()), eps)

    return np.concatenate([mean_dir, eigvecs.ravel(), skew, kurt, spectrum])


def pixel_loop_gradient_encoding(amplitude, orientation, z_ang=12, z_sp=5, sigma=0.5):
    """Per-pixel triple Kronecker product, summed with explicit loops."""
    h, w = amplitude.shape
    ang_pivots = np.arange(z_ang) / z_ang
    sp_pivots = np.arange(z_sp) / (z_sp - 1)

    def ring_map(x):
        d = np.abs(x - ang_pivots)
        d = np.minimum(d, 1.0 - d)
        return np.exp(-(d * d) / sigma**2)

    def interval_map(x):
        d = np.abs(x - sp_pivots)
        return np.exp(-(d * d) / sigma**2)

    out = np.zeros(z_ang * z_sp * z_sp)
    for r in range(h):
        for c in range(w):
            phi = ring_map(orientation[r, c])
            px = interval_map(c / (w - 1))
            py = interval_map(r / (h - 1))
            out += amplitude[r, c] * np.kron(phi, np.kron(px, py))
    return out
