"""Pure-numpy implementations of the hot kernels.

Reference semantics for the compiled extension: both backends must produce
bit-identical outputs (same IEEE operations in the same order for the
decoder, exact integer counts for the packed-bit kernels).
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"


def popcount_packed(a: np.ndarray) -> int:
    """Total number of set bits in a uint8 array."""
    a = np.ascontiguousarray(a, dtype=np.uint8)
    return int(np.bitwise_count(a).sum())


def hamming_packed(a: np.ndarray, b: np.ndarray) -> int:
    """Hamming distance between two equal-length packed bit buffers."""
    a = np.ascontiguousarray(a, dtype=np.uint8)
    b = np.ascontiguousarray(b, dtype=np.uint8)
    if a.shape != b.shape:
        raise ValueError("packed buffers differ in length")
    return int(np.bitwise_count(a ^ b).sum())


def packed_counts(a: np.ndarray, b: np.ndarray) -> tuple:
    """(popcount(a), popcount(b), popcount(a^b)) in one pass."""
    a = np.ascontiguousarray(a, dtype=np.uint8)
    b = np.ascontiguousarray(b, dtype=np.uint8)
    if a.shape != b.shape:
        raise ValueError("packed buffers differ in length")
    return (
        int(np.bitwise_count(a).sum()),
        int(np.bitwise_count(b).sum()),
        int(np.bitwise_count(a ^ b).sum()),
    )


def _minsum_f(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    mag = np.minimum(np.abs(a), np.abs(b))
    neg = (a < 0) ^ (b < 0)
    return np.where(neg, -mag, mag)


def _sc_recurse(llr: np.ndarray, frozen: np.ndarray) -> tuple:
    """Returns (u, x) where x is the re-encoded codeword of u."""
    n = llr.shape[0]
    if n == 1:
        if frozen[0]:
            bit = 0
        else:
            bit = 1 if llr[0] < 0 else 0
        u = np.array([bit], dtype=np.uint8)
        return u, u.copy()
    half = n // 2
    a, b = llr[:half], llr[half:]
    u_first, x_first = _sc_recurse(_minsum_f(a, b), frozen[:half])
    llr_second = b + (1.0 - 2.0 * x_first) * a
    u_second, x_second = _sc_recurse(llr_second, frozen[half:])
    return (
        np.concatenate([u_first, u_second]),
        np.concatenate([x_first ^ x_second, x_second]),
    )


def sc_decode(llr: np.ndarray, frozen_mask: np.ndarray) -> np.ndarray:
    """Successive-cancellation decode (min-sum) under the butterfly transform.

    ``llr`` holds channel log-likelihood ratios (positive favours bit 0),
    ``frozen_mask`` is 1 at frozen positions (decoded as 0). Returns the
    full length-n u vector; the caller extracts information positions.
    """
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    frozen_mask = np.ascontiguousarray(frozen_mask, dtype=np.uint8)
    n = llr.shape[0]
    if n == 0 or (n & (n - 1)) != 0:
        raise ValueError(f"length must be a power of two, got {n}")
    if frozen_mask.shape[0] != n:
        raise ValueError("frozen mask length mismatch")
    u, _ = _sc_recurse(llr, frozen_mask)
    return u
