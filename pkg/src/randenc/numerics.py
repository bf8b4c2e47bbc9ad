"""Dense linear algebra, seeded initialization, and elementwise math shared by the encoders.

Everything is float64 end to end. The random source is pinned to numpy's
PCG64 so that a (seed, documented draw order) pair fully determines every
encoder's parameters.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

__all__ = [
    "SeededRng",
    "uniform_init",
    "xavier_uniform_init",
    "softmax",
    "layer_norm",
    "SpectralRadiusEstimate",
    "spectral_radius",
    "matmul",
    "sigmoid",
    "tanh",
    "concat",
    "hadamard",
    "abs_diff",
]


class SeededRng:
    """Seeded random source (numpy PCG64, pinned).

    Two instances built from the same seed yield identical draw sequences.
    Encoder builders consume draws in a documented order, so a
    (kind, seed, dims, hyperparameters) tuple reconstructs weights
    bit-exactly. An instance is single-owner: never share one across
    concurrent tasks.
    """

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, low: float, high: float, shape) -> np.ndarray:
        """Uniform draw, cells filled in C (row-major) order."""
        return self._gen.uniform(low, high, size=shape)

    def bernoulli_mask(self, shape, density: float) -> np.ndarray:
        """Boolean mask, True with probability ``density``; one draw per cell."""
        return self._gen.random(size=shape) < density

    def permutation(self, n: int) -> np.ndarray:
        """Shuffled arange(n)."""
        return self._gen.permutation(n)

    def integers(self, low: int, high: int, shape=None) -> np.ndarray:
        """Integer draws in [low, high)."""
        return self._gen.integers(low, high, size=shape)


def uniform_init(rng: SeededRng, rows: int, cols: int, d: int) -> np.ndarray:
    """Matrix with entries uniform in [-1/sqrt(d), 1/sqrt(d)], d = fan-in."""
    if d < 1:
        raise ValueError(f"invalid fan-in d={d}; need d >= 1")
    if rows < 1 or cols < 1:
        raise ValueError(f"invalid shape {rows}x{cols}; need rows, cols >= 1")
    bound = 1.0 / math.sqrt(d)
    return rng.uniform(-bound, bound, (rows, cols))


def xavier_uniform_init(rng: SeededRng, rows: int, cols: int) -> np.ndarray:
    """Matrix with entries uniform in +-sqrt(6 / (rows + cols))."""
    if rows < 1 or cols < 1:
        raise ValueError(f"invalid shape {rows}x{cols}; need rows, cols >= 1")
    bound = math.sqrt(6.0 / (rows + cols))
    return rng.uniform(-bound, bound, (rows, cols))


def softmax(v) -> np.ndarray:
    """Probability vector exp(v)/sum(exp(v)), computed shift-invariantly."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError("softmax expects a non-empty 1-d vector")
    if not np.isfinite(v).all():
        raise ValueError("softmax input must be finite")
    e = np.exp(v - v.max())
    return e / e.sum()


def layer_norm(v, eps: float = 1e-5) -> np.ndarray:
    """Normalize the last axis to zero mean and unit population variance.

    Gain is 1 and bias is 0; eps sits inside the square root, so constant
    input maps to exact zeros.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise ValueError("layer_norm expects a non-empty input")
    mu = v.mean(axis=-1, keepdims=True)
    var = ((v - mu) ** 2).mean(axis=-1, keepdims=True)
    return (v - mu) / np.sqrt(var + eps)


class SpectralRadiusEstimate(NamedTuple):
    value: float
    converged: bool
    iterations: int


# Fixed start-vector seed; spectral_radius must be deterministic on its own.
_POWER_ITER_SEED = 0x5EED_0001


def spectral_radius(m, iters: int = 10000, tol: float = 1e-10) -> SpectralRadiusEstimate:
    """Dominant eigenvalue magnitude of a square matrix by power iteration.

    Each step fits the degree-2 recurrence A^2 x = p Ax + q x over the last
    three Krylov vectors and takes the largest root modulus, which also
    resolves a dominant complex-conjugate pair (plain power iteration
    oscillates there). Converged means the estimate moved by at most
    ``tol`` (relative) over three consecutive steps; otherwise the last
    estimate is returned flagged unconverged.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"spectral_radius needs a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n == 0:
        raise ValueError("spectral_radius needs a non-empty matrix")

    gen = np.random.Generator(np.random.PCG64(_POWER_ITER_SEED))
    x = gen.standard_normal(n)
    x /= np.linalg.norm(x)

    estimate = 0.0
    stable = 0
    for it in range(1, iters + 1):
        y = m @ x
        ny = np.linalg.norm(y)
        if ny < 1e-300:
            return SpectralRadiusEstimate(0.0, True, it)
        z = m @ y
        basis = np.stack([y, x], axis=1)
        (p, q), *_ = np.linalg.lstsq(basis, z, rcond=None)
        disc = p * p + 4.0 * q
        if disc >= 0.0:
            root = math.sqrt(disc)
            r = max(abs((p + root) / 2.0), abs((p - root) / 2.0))
        else:
            r = math.sqrt(max(-q, 0.0))
        if abs(r - estimate) <= tol * max(1.0, abs(r)):
            stable += 1
            if stable >= 3:
                return SpectralRadiusEstimate(r, True, it)
        else:
            stable = 0
        estimate = r
        x = y / ny
    return SpectralRadiusEstimate(estimate, False, iters)


def matmul(a, b) -> np.ndarray:
    """Reference matrix product with the naive triple-loop summation order.

    Accumulates rank-1 terms in inner-index order, so every output entry
    sees the exact float operation sequence of ``sum_k a[i,k] * b[k,j]``
    evaluated left to right. BLAS-backed ``@`` may differ in the last ulp;
    bit-stable oracles should use this kernel.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("matmul expects two 2-d matrices")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"shape mismatch {a.shape} @ {b.shape}")
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in range(a.shape[1]):
        out += a[:, k, None] * b[None, k, :]
    return out


def sigmoid(x) -> np.ndarray:
    """Elementwise 1 / (1 + exp(-x)), overflow-safe for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))


def tanh(x) -> np.ndarray:
    return np.tanh(np.asarray(x, dtype=np.float64))


def concat(parts) -> np.ndarray:
    """Concatenate 1-d vectors in order."""
    arrays = [np.asarray(p, dtype=np.float64) for p in parts]
    if not arrays:
        raise ValueError("concat expects at least one vector")
    for p in arrays:
        if p.ndim != 1:
            raise ValueError("concat expects 1-d vectors")
    return np.concatenate(arrays)


def _check_same_shape(u: np.ndarray, v: np.ndarray) -> None:
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch {u.shape} vs {v.shape}")


def hadamard(u, v) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_same_shape(u, v)
    return u * v


def abs_diff(u, v) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    _check_same_shape(u, v)
    return np.abs(u - v)
