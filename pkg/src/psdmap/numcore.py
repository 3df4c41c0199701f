"""Deterministic numeric primitives shared by the whole toolkit.

Everything here is a pure function of its inputs. Matrices and vectors are
plain float64 numpy arrays. Randomness always flows through an explicit
``numpy.random.Generator`` backed by PCG64, so a given master seed produces
the same draw sequence on every platform and every run.

Child-stream rule: worker streams are derived with
``SeedSequence(master_seed, spawn_key=key)`` where ``key`` is a tuple of
non-negative integers naming the consumer (snapshot index, sensor index,
noise/pilot stream id, ...). Two distinct keys give independent streams;
the same key always gives the same stream.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "rng_from_seed",
    "child_rng",
    "circulant",
    "circular_convolve",
    "gaussian_matrix",
    "solve_least_squares",
    "spectral_norm_sq",
]


def rng_from_seed(seed: int) -> np.random.Generator:
    """PCG64 generator seeded directly from a 64-bit master seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def child_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent child generator for worker ``key`` under ``seed``.

    Implements the documented splitting rule: identical (seed, key) pairs
    reproduce the same stream regardless of scheduling or worker count.
    """
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def _as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def circulant(v) -> np.ndarray:
    """Circulant matrix whose first column is ``v``.

    Entry (i, k) equals ``v[(i - k) mod n]``: each column is the previous
    one cyclically shifted down by one, so ``circulant(h) @ x`` is the
    circular convolution of ``x`` with ``h``.
    """
    col = _as_vector(v)
    n = col.size
    if n == 0:
        raise ValueError("cannot build a circulant matrix from an empty vector")
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return col[idx]


def circular_convolve(x, h) -> np.ndarray:
    """Circular (cyclic) convolution of two equal-length vectors.

    Direct O(n^2) sum: ``out[i] = sum_k x[k] * h[(i - k) mod n]``. The
    direct sum is the correctness definition at the problem sizes used
    here (n <= 512); no transform acceleration.
    """
    xv = _as_vector(x, "x")
    hv = _as_vector(h, "h")
    if xv.size != hv.size:
        raise ValueError(f"length mismatch: x has {xv.size}, h has {hv.size}")
    n = xv.size
    shift = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    # rows index output position i, columns index k: h[(i - k) mod n]
    return (hv[shift] * xv[None, :]).sum(axis=1)


def gaussian_matrix(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Random sensing matrix with i.i.d. N(0, 1/rows) entries.

    The 1/rows variance keeps ``norm(A @ x)`` close to ``norm(x)`` in
    expectation, so sensing-rate sweeps are power-calibrated.
    """
    if rows < 1 or cols < 1:
        raise ValueError(f"matrix dimensions must be positive, got {rows}x{cols}")
    return rng.normal(0.0, 1.0 / np.sqrt(rows), size=(rows, cols))


def solve_least_squares(a, b, ridge: float = 0.0) -> np.ndarray:
    """Minimizer of ``||A x - b||^2 + ridge * ||x||^2``.

    With ridge > 0 the solution is the unique Tikhonov-regularized one via
    the normal equations. With ridge == 0 a rank-deficient system raises
    instead of silently returning a minimum-norm solution.
    """
    mat = np.asarray(a, dtype=float)
    rhs = _as_vector(b, "b")
    if mat.ndim != 2:
        raise ValueError(f"A must be a matrix, got shape {mat.shape}")
    if mat.shape[0] != rhs.size:
        raise ValueError(f"shape mismatch: A is {mat.shape}, b has length {rhs.size}")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    if ridge > 0:
        gram = mat.T @ mat + ridge * np.eye(mat.shape[1])
        return np.linalg.solve(gram, mat.T @ rhs)
    sol, _, rank, _ = np.linalg.lstsq(mat, rhs, rcond=None)
    if rank < mat.shape[1]:
        raise np.linalg.LinAlgError(
            f"normal equations are rank deficient (rank {rank} < {mat.shape[1]} unknowns); "
            "pass ridge > 0 to regularize"
        )
    return sol


def spectral_norm_sq(a, iterations: int = 200, tol: float = 1e-12) -> float:
    """Upper bound on the squared spectral norm of ``a`` by power iteration.

    Runs power iteration on A^T A from a fixed deterministic start vector
    and inflates the converged Rayleigh quotient by 1% to make the result
    a safe Lipschitz constant for gradient steps.
    """
    mat = np.asarray(a, dtype=float)
    n = mat.shape[1]
    # deterministic, not axis-aligned, so it is never orthogonal to the
    # leading singular vector of a generic matrix
    v = np.cos(np.arange(n) * 0.7) + 1.0
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iterations):
        w = mat.T @ (mat @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v_next = w / norm
        if abs(norm - est) <= tol * max(est, 1.0):
            est = norm
            break
        est = norm
        v = v_next
    return 1.01 * est
