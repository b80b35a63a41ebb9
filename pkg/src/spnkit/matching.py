"""Similarity measures and the identification decision."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BinaryFingerprint, Fingerprint, ValidationError
from .kernels import packed_counts
from .pipeline import BlockWeightMask


@dataclass(frozen=True)
class DecisionConfig:
    tau: float
    measure: str = "ncc"

    def __post_init__(self):
        if not math.isfinite(self.tau):
            raise ValidationError("threshold must be finite")
        if self.measure not in ("ncc", "weighted-block-ncc", "pce"):
            raise ValidationError(f"unknown measure {self.measure!r}")


def _values(obj) -> np.ndarray:
    if isinstance(obj, Fingerprint):
        return obj.values.astype(np.float64)
    if isinstance(obj, BinaryFingerprint):
        return obj.unpack().astype(np.float64)
    return np.asarray(obj, dtype=np.float64)


def ncc(a, b) -> float:
    """Zero-mean normalized cross-correlation in [-1, 1]."""
    x, y = _values(a), _values(b)
    if x.shape != y.shape:
        raise ValidationError(f"dimension mismatch {x.shape} vs {y.shape}")
    x = x - x.mean()
    y = y - y.mean()
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise ValidationError("similarity undefined for constant input")
    return float(np.dot(x.ravel(), y.ravel()) / (nx * ny))


def binary_ncc(a: BinaryFingerprint, b: BinaryFingerprint) -> float:
    """NCC of two sign-quantized fingerprints, computed from bit counts.

    Equivalent to `ncc` on the unpacked +-1 arrays but runs on the packed
    representation (XOR + popcount).
    """
    if (a.width, a.height) != (b.width, b.height):
        raise ValidationError("dimension mismatch")
    n = a.n_bits
    wa, wb, wx = packed_counts(
        np.frombuffer(a.bits, dtype=np.uint8), np.frombuffer(b.bits, dtype=np.uint8)
    )
    # Padding bits are zero in both buffers: they cancel in the XOR count
    # but inflate neither wa nor wb beyond the real n bits.
    dot = n - 2 * wx
    sum_a = 2 * wa - n
    sum_b = 2 * wb - n
    var_a = n * n - sum_a * sum_a
    var_b = n * n - sum_b * sum_b
    if var_a <= 0 or var_b <= 0:
        raise ValidationError("similarity undefined for constant input")
    return float((n * dot - sum_a * sum_b) / math.sqrt(var_a * var_b))


def weighted_block_ncc(a, b, mask: BlockWeightMask) -> float:
    """Weighted average of per-block NCC over positive-weight blocks.

    Blocks where either input has zero variance are dropped; if nothing
    remains the similarity is undefined.
    """
    x, y = _values(a), _values(b)
    if x.shape != y.shape:
        raise ValidationError(f"dimension mismatch {x.shape} vs {y.shape}")
    if not mask.grid_for(x.shape):
        raise ValidationError("mask grid does not match input dimensions")
    bsz = mask.block_size
    total = 0.0
    weight_sum = 0.0
    gh, gw = mask.weights.shape
    for i in range(gh):
        for j in range(gw):
            w = mask.weights[i, j]
            if w <= 0:
                continue
            xs = x[i * bsz : (i + 1) * bsz, j * bsz : (j + 1) * bsz]
            ys = y[i * bsz : (i + 1) * bsz, j * bsz : (j + 1) * bsz]
            xc = xs - xs.mean()
            yc = ys - ys.mean()
            nx = np.linalg.norm(xc)
            nyv = np.linalg.norm(yc)
            if nx == 0 or nyv == 0:
                continue
            total += w * float(np.dot(xc.ravel(), yc.ravel()) / (nx * nyv))
            weight_sum += w
    if weight_sum == 0:
        raise ValidationError("all blocks excluded: similarity undefined")
    return total / weight_sum


def _cross_correlation_surface(residual: np.ndarray, fp: np.ndarray) -> np.ndarray:
    r = residual - residual.mean()
    f = fp - fp.mean()
    return np.real(np.fft.ifft2(np.fft.fft2(r) * np.conj(np.fft.fft2(f))))


def pce(residual, fp, exclusion: int = 11, return_peak: bool = False):
    """Peak-to-correlation-energy over circular shifts.

    PCE = peak^2 / mean(off-peak^2) with an ``exclusion`` x ``exclusion``
    window (circular) dropped around the peak.
    """
    r, f = _values(residual), _values(fp)
    if r.shape != f.shape:
        raise ValidationError(f"dimension mismatch {r.shape} vs {f.shape}")
    if not np.any(r) or not np.any(f):
        raise ValidationError("PCE undefined for all-zero input")
    surface = _cross_correlation_surface(r, f)
    peak_idx = np.unravel_index(int(np.argmax(surface)), surface.shape)
    peak = surface[peak_idx]
    h, w = surface.shape
    half = exclusion // 2
    rows = (np.arange(-half, half + 1) + peak_idx[0]) % h
    cols = (np.arange(-half, half + 1) + peak_idx[1]) % w
    mask = np.ones_like(surface, dtype=bool)
    mask[np.ix_(rows, cols)] = False
    off = surface[mask]
    energy = float(np.mean(off * off))
    if energy == 0:
        raise ValidationError("PCE undefined: zero off-peak energy")
    value = float(peak * peak / energy)
    if return_peak:
        return value, (int(peak_idx[0]), int(peak_idx[1]))
    return value


def decide(similarity: float, cfg: DecisionConfig) -> bool:
    """Match iff similarity exceeds the threshold strictly."""
    if not math.isfinite(similarity):
        raise ValidationError("similarity must be finite")
    return similarity > cfg.tau
