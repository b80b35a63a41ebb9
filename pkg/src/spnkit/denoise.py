"""Denoising filters and noise-residual extraction.

The reference filter is the classical two-stage wavelet-domain Wiener
denoiser: decompose with an orthonormal 8-tap wavelet, estimate the local
signal variance of each detail coefficient as the minimum over a bank of
sliding-window energy averages, then shrink each coefficient by
sigma^2 / (sigma^2 + sigma0^2) and reconstruct. Externally produced
(neural) denoised images enter through the SPF1 container instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

from .core import (
    FLAG_DENOISED,
    Fingerprint,
    FormatError,
    ImageRaster,
    ValidationError,
    read_fingerprint,
    write_fingerprint,
)

# Orthonormal Daubechies scaling filter, 8 taps, sum sqrt(2). The wavelet
# filter is the alternating-sign reverse; together their even shifts form
# an orthonormal basis, which the round-trip tests rely on.
_DB4_LO = np.array(
    [
        0.230377813308855230,
        0.714846570552541500,
        0.630880767929590400,
        -0.027983769416983850,
        -0.187034811718881140,
        0.030841381835986965,
        0.032883011666982945,
        -0.010597401784997278,
    ],
    dtype=np.float64,
)
_DB4_HI = (_DB4_LO[::-1] * np.array([1.0 if i % 2 == 0 else -1.0 for i in range(8)])).copy()
_FILTER_LEN = 8

_VARIANCE_WINDOWS = (3, 5, 7, 9)


@dataclass(frozen=True)
class DenoiserConfig:
    """Two-stage Wiener denoiser parameters.

    ``sigma0`` is quoted on the 0..255 range and rescaled for deeper bit
    depths. ``block_size`` bounds the tile processed in one pass; larger
    images are handled tile by tile, each tile independently.
    """

    sigma0: float = 5.0
    wavelet: str = "db4-o8"
    levels: int = 4
    block_size: int = 512

    def __post_init__(self):
        if self.sigma0 <= 0:
            raise ValidationError("sigma0 must be positive")
        if self.levels < 1:
            raise ValidationError("levels must be >= 1")
        if self.wavelet != "db4-o8":
            raise ValidationError(f"unknown wavelet family {self.wavelet!r}")
        if self.block_size < 32:
            raise ValidationError("block_size must be >= 32")

    def sigma0_for_depth(self, bit_depth: int) -> float:
        return self.sigma0 * ((1 << bit_depth) - 1) / 255.0

    @property
    def denoiser_id(self) -> str:
        return f"wavelet:{self.wavelet},levels={self.levels},sigma0={self.sigma0:g}"


def _analyze_axis(x: np.ndarray, filt: np.ndarray) -> np.ndarray:
    """Symmetric-extension decimated correlation along the last axis."""
    pad = [(0, 0)] * (x.ndim - 1) + [(_FILTER_LEN - 1, _FILTER_LEN - 1)]
    ext = np.pad(x, pad, mode="symmetric")
    m = ext.shape[-1] - _FILTER_LEN + 1
    acc = filt[0] * ext[..., 0:m]
    for u in range(1, _FILTER_LEN):
        acc = acc + filt[u] * ext[..., u : u + m]
    return acc[..., ::2]


def _synthesize_axis(a: np.ndarray, d: np.ndarray, n: int) -> np.ndarray:
    """Inverse of one `_analyze_axis` pair along the last axis."""
    k = a.shape[-1]
    full = 2 * (k - 1) + _FILTER_LEN
    rec = np.zeros(a.shape[:-1] + (full,), dtype=np.float64)
    for u in range(_FILTER_LEN):
        rec[..., u : u + 2 * k : 2] += a * _DB4_LO[u] + d * _DB4_HI[u]
    return rec[..., _FILTER_LEN - 1 : _FILTER_LEN - 1 + n]


def _dwt2(x: np.ndarray) -> tuple:
    """One 2-D level: returns (ll, (lh, hl, hh)).

    Subband naming: first letter is the row-direction band (applied along
    columns), second the column-direction band.
    """
    lo_c = _analyze_axis(x, _DB4_LO)
    hi_c = _analyze_axis(x, _DB4_HI)
    ll = _analyze_axis(lo_c.swapaxes(-1, -2), _DB4_LO).swapaxes(-1, -2)
    hl = _analyze_axis(lo_c.swapaxes(-1, -2), _DB4_HI).swapaxes(-1, -2)
    lh = _analyze_axis(hi_c.swapaxes(-1, -2), _DB4_LO).swapaxes(-1, -2)
    hh = _analyze_axis(hi_c.swapaxes(-1, -2), _DB4_HI).swapaxes(-1, -2)
    return ll, (lh, hl, hh)


def _idwt2(ll: np.ndarray, bands: tuple, shape: tuple) -> np.ndarray:
    lh, hl, hh = bands
    h, w = shape
    lo_c = _synthesize_axis(ll.swapaxes(-1, -2), hl.swapaxes(-1, -2), h).swapaxes(-1, -2)
    hi_c = _synthesize_axis(lh.swapaxes(-1, -2), hh.swapaxes(-1, -2), h).swapaxes(-1, -2)
    return _synthesize_axis(lo_c, hi_c, w)


def wavedec2(x: np.ndarray, levels: int) -> list:
    """Multi-level 2-D decomposition: [ll_L, bands_L, ..., bands_1]."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError("expected a 2-D array")
    size = min(x.shape)
    for _ in range(levels):
        if size < _FILTER_LEN:
            raise ValidationError(
                f"image side {min(x.shape)} below minimum wavelet support "
                f"for {levels} levels"
            )
        size = (size + _FILTER_LEN) // 2
    detail: list = []
    ll = x
    shapes = []
    for _ in range(levels):
        shapes.append(ll.shape)
        ll, bands = _dwt2(ll)
        detail.append(bands)
    coeffs = [ll] + detail[::-1]
    coeffs.append(tuple(shapes[::-1]))  # reconstruction shapes, innermost first
    return coeffs


def waverec2(coeffs: list) -> np.ndarray:
    shapes = coeffs[-1]
    ll = coeffs[0]
    for bands, shape in zip(coeffs[1:-1], shapes):
        ll = _idwt2(ll, bands, shape)
    return ll


def _wiener_shrink(coeff: np.ndarray, noise_var: float) -> np.ndarray:
    energy = coeff * coeff
    sig_var = None
    for win in _VARIANCE_WINDOWS:
        est = uniform_filter(energy, size=win, mode="constant") - noise_var
        np.maximum(est, 0.0, out=est)
        sig_var = est if sig_var is None else np.minimum(sig_var, est)
    return coeff * (sig_var / (sig_var + noise_var))


def _denoise_tile(tile: np.ndarray, cfg: DenoiserConfig, noise_var: float) -> np.ndarray:
    coeffs = wavedec2(tile, cfg.levels)
    out = [coeffs[0]]
    for bands in coeffs[1:-1]:
        out.append(tuple(_wiener_shrink(c, noise_var) for c in bands))
    out.append(coeffs[-1])
    return waverec2(out)


def wavelet_denoise(img, cfg: DenoiserConfig | None = None) -> np.ndarray:
    """Denoised image D for a raster (or float array on the 8-bit range).

    Tiles larger inputs at ``cfg.block_size``; each tile is denoised
    independently, so the tiled result restricted to a tile equals the
    monolithic result on that tile.
    """
    cfg = cfg or DenoiserConfig()
    if isinstance(img, ImageRaster):
        x = img.astype_float()
        noise_sd = cfg.sigma0_for_depth(img.bit_depth)
    else:
        x = np.asarray(img, dtype=np.float64)
        noise_sd = cfg.sigma0
    if x.ndim != 2:
        raise ValidationError("expected a 2-D image")
    noise_var = noise_sd * noise_sd
    b = cfg.block_size
    h, w = x.shape
    if h <= b and w <= b:
        return _denoise_tile(x, cfg, noise_var)
    out = np.empty_like(x)
    for r0 in range(0, h, b):
        for c0 in range(0, w, b):
            r1, c1 = min(r0 + b, h), min(c0 + b, w)
            out[r0:r1, c0:c1] = _denoise_tile(x[r0:r1, c0:c1], cfg, noise_var)
    return out


class WaveletDenoiser:
    """Callable denoiser wrapping `wavelet_denoise` with a stable id."""

    def __init__(self, cfg: DenoiserConfig | None = None):
        self.cfg = cfg or DenoiserConfig()
        self.denoiser_id = self.cfg.denoiser_id

    def __call__(self, img: ImageRaster) -> np.ndarray:
        return wavelet_denoise(img, self.cfg)


class IdentityDenoiser:
    """Returns the input unchanged; residuals are identically zero."""

    denoiser_id = "identity"

    def __call__(self, img: ImageRaster) -> np.ndarray:
        return img.astype_float()


class PrecomputedDenoiser:
    """Wraps an externally produced denoised image (e.g. a neural export)."""

    def __init__(self, denoised: np.ndarray, denoiser_id: str = "external"):
        denoised = np.asarray(denoised, dtype=np.float64)
        if denoised.ndim != 2:
            raise ValidationError("denoised image must be 2-D")
        if not np.all(np.isfinite(denoised)):
            raise ValidationError("denoised image must be finite")
        self.denoised = denoised
        self.denoiser_id = denoiser_id

    def __call__(self, img: ImageRaster) -> np.ndarray:
        if self.denoised.shape != (img.height, img.width):
            raise ValidationError(
                f"denoised image shape {self.denoised.shape} does not match "
                f"raster {(img.height, img.width)}"
            )
        return self.denoised


def noise_residual(img: ImageRaster, denoiser) -> Fingerprint:
    """W = I - F(I) with provenance (denoiser id, part tag)."""
    d = denoiser(img)
    if d.shape != (img.height, img.width):
        raise ValidationError("denoiser returned mismatched dimensions")
    return Fingerprint(
        values=img.astype_float() - d,
        n_images=1,
        denoiser_id=getattr(denoiser, "denoiser_id", "unknown"),
        part=img.part,
    )


def save_denoised(path: str, denoised: np.ndarray, part=None) -> None:
    """Store a denoised image in the SPF1 container (denoised flag set)."""
    from .core import Part

    fp = Fingerprint(
        values=np.asarray(denoised, dtype=np.float32),
        n_images=0,
        part=part if part is not None else Part.FULL,
        denoised_image=True,
    )
    write_fingerprint(path, fp)


def load_external_denoised(path: str) -> np.ndarray:
    """Load a denoised image written by an external extractor."""
    fp = read_fingerprint(path)
    if not fp.denoised_image:
        raise FormatError("file does not carry the denoised-image flag")
    return fp.values.astype(np.float64)
