"""Polar error-correcting code: construction, encoder, SC decoder.

The frozen set is chosen by Bhattacharyya-parameter ordering for a design
binary symmetric channel; decoding is plain successive cancellation
(min-sum) driven by the kernel backend. Index convention matches the
in-place butterfly encoder with no bit reversal: the first half of the u
vector sees the degraded channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ValidationError
from .kernels import sc_decode


@dataclass(frozen=True)
class PolarCodeParams:
    """(n, k) code designed for BSC(p_design).

    ``construction_seed`` is recorded alongside the parameters for the
    wire format; the Bhattacharyya construction itself is deterministic
    (ties resolved by index), so the seed does not alter the frozen set.
    """

    n: int
    k: int
    p_design: float = 0.11
    construction_seed: int = 0

    def __post_init__(self):
        if self.n <= 1 or (self.n & (self.n - 1)) != 0:
            raise ValidationError("n must be a power of two > 1")
        if not (0 < self.k <= self.n):
            raise ValidationError("k must lie in (0, n]")
        if not (0.0 < self.p_design < 0.5):
            raise ValidationError("p_design must lie in (0, 0.5)")


def bhattacharyya_profile(n: int, p: float) -> np.ndarray:
    """Per-channel log-Bhattacharyya bounds after log2(n) polarization steps.

    Tracked in the log domain: the linear recursion underflows to exact
    zero for strongly polarized channels, which would turn the reliability
    ordering into index-order tie-breaking among unrelated channels.
    """
    lz = np.array([math.log(2.0 * math.sqrt(p * (1.0 - p)))], dtype=np.float64)
    while lz.shape[0] < n:
        # each stage is applied after all previous ones, so its bit is the
        # next less-significant index bit: interleave, don't concatenate
        nxt = np.empty(2 * lz.shape[0], dtype=np.float64)
        # log(2z - z^2), clamped at the theoretical bound Z <= 1
        nxt[0::2] = np.minimum(lz + np.log(2.0 - np.exp(lz)), 0.0)
        nxt[1::2] = 2.0 * lz  # log(z^2), upgraded
        lz = nxt
    return lz


def info_positions(params: PolarCodeParams) -> np.ndarray:
    """The k most reliable u positions, ascending."""
    z = bhattacharyya_profile(params.n, params.p_design)
    order = np.argsort(z, kind="stable")  # ties fall back to index order
    return np.sort(order[: params.k])


def frozen_mask(params: PolarCodeParams) -> np.ndarray:
    mask = np.ones(params.n, dtype=np.uint8)
    mask[info_positions(params)] = 0
    return mask


def butterfly_transform(u: np.ndarray) -> np.ndarray:
    """In-place-style polar transform over GF(2); returns a new array."""
    x = np.array(u, dtype=np.uint8)
    n = x.shape[0]
    step = 2
    while step <= n:
        half = step // 2
        view = x.reshape(-1, step)
        view[:, :half] ^= view[:, half:]
        step *= 2
    return x


def polar_encode(message: np.ndarray, params: PolarCodeParams) -> np.ndarray:
    """Map k message bits onto the information set and apply the transform."""
    message = np.asarray(message, dtype=np.uint8).ravel()
    if message.shape[0] != params.k:
        raise ValidationError(f"message must have {params.k} bits")
    if np.any(message > 1):
        raise ValidationError("message must be binary")
    u = np.zeros(params.n, dtype=np.uint8)
    u[info_positions(params)] = message
    return butterfly_transform(u)


def polar_decode(word: np.ndarray, params: PolarCodeParams) -> np.ndarray:
    """SC decode of n hard bits received over the design BSC."""
    word = np.asarray(word, dtype=np.uint8).ravel()
    if word.shape[0] != params.n:
        raise ValidationError(f"word must have {params.n} bits")
    llr_mag = math.log((1.0 - params.p_design) / params.p_design)
    llr = (1.0 - 2.0 * word.astype(np.float64)) * llr_mag
    u_hat = sc_decode(llr, frozen_mask(params))
    return u_hat[info_positions(params)]
