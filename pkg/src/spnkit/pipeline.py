"""Fingerprint estimation and hardening.

Maximum-likelihood aggregation of residuals, zero-mean / Wiener-whitening
postprocessing, odd/even row splitting, burst integration, luminance
block weighting and the variance lower-bound diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Fingerprint, ImageRaster, Part, ValidationError
from .denoise import noise_residual


def _as_values(obj) -> np.ndarray:
    if isinstance(obj, Fingerprint):
        return obj.values.astype(np.float64)
    if isinstance(obj, ImageRaster):
        return obj.astype_float()
    return np.asarray(obj, dtype=np.float64)


def estimate_fingerprint_mle(images, residuals, return_zero_count: bool = False):
    """Element-wise estimate sum(W_k * I_k) / sum(I_k^2).

    Pixels where sum(I_k^2) is zero are set to 0. Accumulation uses
    numpy's pairwise summation over the image axis, so the result does not
    depend on how callers might batch the inputs.
    """
    if len(images) == 0 or len(residuals) == 0:
        raise ValidationError("need at least one image/residual pair")
    if len(images) != len(residuals):
        raise ValidationError("images and residuals differ in length")
    imgs = [_as_values(i) for i in images]
    res = [_as_values(w) for w in residuals]
    shape = imgs[0].shape
    for arr in imgs + res:
        if arr.shape != shape:
            raise ValidationError("dimension mismatch across inputs")
    istack = np.stack(imgs)
    wstack = np.stack(res)
    num = np.sum(wstack * istack, axis=0)
    den = np.sum(istack * istack, axis=0)
    zero = den == 0
    den_safe = np.where(zero, 1.0, den)
    k_hat = np.where(zero, 0.0, num / den_safe)
    part = images[0].part if isinstance(images[0], ImageRaster) else Part.FULL
    denoiser_id = (
        residuals[0].denoiser_id if isinstance(residuals[0], Fingerprint) else ""
    )
    fp = Fingerprint(
        values=k_hat, n_images=len(images), denoiser_id=denoiser_id, part=part
    )
    if return_zero_count:
        return fp, int(zero.sum())
    return fp


def zero_mean(values: np.ndarray) -> np.ndarray:
    """Subtract each row mean, then each column mean."""
    x = np.asarray(values, dtype=np.float64)
    x = x - x.mean(axis=1, keepdims=True)
    x = x - x.mean(axis=0, keepdims=True)
    return x


def wiener_whiten(values: np.ndarray) -> np.ndarray:
    """Global-spectrum Wiener filtering that suppresses periodic artifacts.

    The flat noise floor is estimated from the median of the power
    spectrum (exponential law: median = power * ln 2); spectral peaks are
    attenuated by noise/(signal+noise).
    """
    x = np.asarray(values, dtype=np.float64)
    spec = np.fft.fft2(x)
    power = np.abs(spec) ** 2
    floor = np.median(power) / math.log(2.0)
    if floor == 0:
        return x.copy()
    excess = np.maximum(power - floor, 0.0)
    filtered = spec * (floor / (excess + floor))
    return np.real(np.fft.ifft2(filtered))


def postprocess_zm_wf(fp: Fingerprint) -> Fingerprint:
    """Zero-mean rows/columns then whiten the spectrum; sets the ZM/WF flags."""
    vals = wiener_whiten(zero_mean(fp.values.astype(np.float64)))
    return Fingerprint(
        values=vals,
        n_images=fp.n_images,
        denoiser_id=fp.denoiser_id,
        part=fp.part,
        zm=True,
        wf=True,
    )


def split_odd_even(img: ImageRaster) -> tuple:
    """(odd, even) row halves. Row 0 is even; even rows are the public part."""
    if img.height < 2:
        raise ValidationError("need at least 2 rows to split")
    if img.part is not Part.FULL:
        raise ValidationError("can only split a full raster")
    common = dict(bit_depth=img.bit_depth, camera=img.camera, burst_id=img.burst_id)
    odd = ImageRaster(
        pixels=img.pixels[1::2],
        part=Part.ODD,
        original_full_height=img.height,
        **common,
    )
    even = ImageRaster(
        pixels=img.pixels[0::2],
        part=Part.EVEN,
        original_full_height=img.height,
        **common,
    )
    return odd, even


def interleave(odd: ImageRaster, even: ImageRaster) -> ImageRaster:
    """Exact inverse of `split_odd_even`."""
    if odd.part is not Part.ODD or even.part is not Part.EVEN:
        raise ValidationError("expected an (odd, even) pair of split rasters")
    if odd.width != even.width:
        raise ValidationError("split halves differ in width")
    if odd.original_full_height != even.original_full_height:
        raise ValidationError("split halves disagree on the original height")
    if odd.bit_depth != even.bit_depth:
        raise ValidationError("split halves differ in bit depth")
    full_h = odd.original_full_height
    out = np.empty((full_h, odd.width), dtype=np.uint16)
    out[0::2] = even.pixels
    out[1::2] = odd.pixels
    return ImageRaster(
        pixels=out,
        bit_depth=odd.bit_depth,
        camera=odd.camera or even.camera,
        burst_id=odd.burst_id or even.burst_id,
        part=Part.FULL,
    )


def burst_integrate(burst, denoiser) -> Fingerprint:
    """Per-image residuals followed by the MLE over the burst."""
    if len(burst) == 0:
        raise ValidationError("empty burst")
    dims = (burst[0].height, burst[0].width)
    group = burst[0].burst_id
    cam = burst[0].camera
    for img in burst:
        if (img.height, img.width) != dims:
            raise ValidationError("mixed dimensions in burst")
        if img.burst_id != group or img.camera != cam:
            raise ValidationError("burst must come from one camera and group")
    residuals = [noise_residual(img, denoiser) for img in burst]
    return estimate_fingerprint_mle(burst, residuals)


@dataclass(frozen=True)
class BlockWeightMask:
    """Per-block weights over a ceil(h/B) x ceil(w/B) grid."""

    block_size: int
    weights: np.ndarray
    mode: str

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2:
            raise ValidationError("weights must be 2-D")
        if np.any(w < 0) or np.any(w > 1):
            raise ValidationError("weights must lie in [0, 1]")
        if not np.any(w > 0):
            raise ValidationError("mask needs at least one positive weight")
        w = np.ascontiguousarray(w)
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    def grid_for(self, shape: tuple) -> bool:
        gh = -(-shape[0] // self.block_size)
        gw = -(-shape[1] // self.block_size)
        return self.weights.shape == (gh, gw)


def _block_means(values: np.ndarray, b: int) -> np.ndarray:
    h, w = values.shape
    gh, gw = -(-h // b), -(-w // b)
    means = np.empty((gh, gw), dtype=np.float64)
    for i in range(gh):
        for j in range(gw):
            means[i, j] = values[i * b : (i + 1) * b, j * b : (j + 1) * b].mean()
    return means


def block_weights(
    img: ImageRaster,
    block_size: int = 64,
    mode: str = "percentage",
    percentage: float = 0.5,
    threshold: float = 0.25,
    saturation_frac: float = 0.95,
) -> BlockWeightMask:
    """Luminance-driven block weights.

    float: weight = mean/max, saturated blocks zeroed. threshold: 1 where
    the normalized mean reaches ``threshold``. percentage: the brightest
    ceil(p * n_blocks) unsaturated blocks get 1, ties broken by row-major
    block index (fewer if saturation leaves too few candidates).
    """
    if block_size < 8:
        raise ValidationError("block size must be >= 8")
    if block_size > max(img.height, img.width):
        raise ValidationError("block size larger than image")
    if mode not in ("float", "threshold", "percentage"):
        raise ValidationError(f"unknown block weight mode {mode!r}")
    means = _block_means(img.astype_float(), block_size)
    max_v = float(img.max_value)
    saturated = means > saturation_frac * max_v
    norm = means / max_v
    if mode == "float":
        weights = np.where(saturated, 0.0, norm)
    elif mode == "threshold":
        weights = np.where(~saturated & (norm >= threshold), 1.0, 0.0)
    else:
        if not (0.0 < percentage <= 1.0):
            raise ValidationError("percentage must lie in (0, 1]")
        n_blocks = means.size
        want = math.ceil(percentage * n_blocks)
        flat = norm.ravel()
        candidates = [i for i in range(n_blocks) if not saturated.ravel()[i]]
        candidates.sort(key=lambda i: (-flat[i], i))
        chosen = candidates[:want]
        weights = np.zeros(n_blocks)
        weights[chosen] = 1.0
        weights = weights.reshape(means.shape)
    return BlockWeightMask(block_size=block_size, weights=weights, mode=mode)


@dataclass(frozen=True)
class CrlbBound:
    """Per-pixel variance lower bound sigma^2 / sum(I_k^2) and its mean."""

    per_pixel: np.ndarray
    mean: float
    n_unbounded: int


def crlb_variance_bound(images, sigma: float | None = None, residuals=None) -> CrlbBound:
    """Variance lower bound for the MLE fingerprint estimator.

    ``sigma`` is the additive-noise scale; when unknown it is estimated
    from the supplied residuals as 1.4826 * median(|residual|).
    Pixels with sum(I_k^2) = 0 are unbounded and reported as +inf.
    """
    if len(images) == 0:
        raise ValidationError("need at least one image")
    if sigma is None:
        if not residuals:
            raise ValidationError("sigma unknown: supply residuals to estimate it")
        stacked = np.concatenate([_as_values(r).ravel() for r in residuals])
        sigma = 1.4826 * float(np.median(np.abs(stacked)))
    if sigma < 0:
        raise ValidationError("sigma must be non-negative")
    imgs = np.stack([_as_values(i) for i in images])
    denom = np.sum(imgs * imgs, axis=0)
    zero = denom == 0
    with np.errstate(divide="ignore"):
        bound = np.where(zero, np.inf, (sigma * sigma) / np.where(zero, 1.0, denom))
    return CrlbBound(
        per_pixel=bound, mean=float(bound.mean()), n_unbounded=int(zero.sum())
    )
