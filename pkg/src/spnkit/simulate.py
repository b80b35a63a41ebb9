"""Synthetic camera fleet.

Implements the multiplicative imaging model: each capture is
clamp(round(I0 + I0*K + noise)) where K is the camera's fixed per-pixel
gain deviation and the additive term is i.i.d. Gaussian readout noise.
Everything is a pure function of (profile, scene, seed).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import (
    DatasetManifest,
    ImageRaster,
    ManifestEntry,
    Part,
    ValidationError,
    write_image,
    write_manifest,
)

# Purpose tags keep RNG streams for camera gain, scene content and shot
# noise independent even when built from the same user seed.
_TAG_CAMERA = 0xC0FFEE
_TAG_SCENE = 0x5CE11E
_TAG_SHOT = 0x907001


def _rng(seed: int, tag: int, *extra: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag, *map(int, extra)]))


@dataclass(frozen=True)
class CameraProfile:
    """A simulated sensor: fixed gain map plus readout noise level."""

    label: str
    k_true: np.ndarray
    sigma_k: float
    sigma_read: float
    seed: int
    bit_depth: int = 8

    def __post_init__(self):
        k = np.asarray(self.k_true, dtype=np.float64)
        if k.ndim != 2 or k.size == 0:
            raise ValidationError("k_true must be a non-empty 2-D array")
        if self.sigma_k <= 0:
            raise ValidationError("sigma_k must be positive")
        if self.sigma_read < 0:
            raise ValidationError("sigma_read must be non-negative")
        k = np.ascontiguousarray(k)
        k.flags.writeable = False
        object.__setattr__(self, "k_true", k)

    @property
    def dims(self) -> tuple:
        return self.k_true.shape

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1


def new_camera(
    seed: int,
    dims: tuple = (256, 256),
    sigma_k: float = 0.02,
    sigma_read: float = 2.0,
    label: str = "",
    bit_depth: int = 8,
    checkerboard_gain: float = 0.0,
) -> CameraProfile:
    """Draw a camera whose gain map is i.i.d. zero-mean Gaussian of scale sigma_k.

    ``checkerboard_gain`` adds a phase-dependent gain offset on the 2x2
    pixel lattice; it exists only to give the pixel-shuffle layout in the
    external trainer something to key on and defaults to off.
    """
    h, w = dims
    if h <= 0 or w <= 0:
        raise ValidationError("dims must be positive")
    if sigma_k <= 0:
        raise ValidationError("sigma_k must be positive")
    k = _rng(seed, _TAG_CAMERA).normal(0.0, sigma_k, size=(h, w))
    if checkerboard_gain:
        yy, xx = np.mgrid[0:h, 0:w]
        k = k + checkerboard_gain * (((yy % 2) * 2 + (xx % 2)) - 1.5) / 1.5
    return CameraProfile(
        label=label or f"cam{seed}",
        k_true=k,
        sigma_k=sigma_k,
        sigma_read=sigma_read,
        seed=int(seed),
        bit_depth=bit_depth,
    )


@dataclass(frozen=True)
class SceneSource:
    """Noise-free content generator.

    kinds: "flat" (constant at ``level``), "gradient" (horizontal ramp
    lo..hi), "texture" (smoothed pseudo-random field in lo..hi),
    "halves" (left half at lo, right half at hi).
    """

    kind: str = "flat"
    level: float = 200.0
    lo: float = 40.0
    hi: float = 220.0
    smoothness: float = 8.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("flat", "gradient", "texture", "halves"):
            raise ValidationError(f"unknown scene kind {self.kind!r}")

    def render(self, dims: tuple, max_value: int = 255) -> np.ndarray:
        h, w = dims
        if self.kind == "flat":
            content = np.full((h, w), float(self.level))
        elif self.kind == "gradient":
            ramp = np.linspace(self.lo, self.hi, w)
            content = np.broadcast_to(ramp, (h, w)).copy()
        elif self.kind == "halves":
            content = np.full((h, w), float(self.lo))
            content[:, w // 2 :] = self.hi
        else:
            field = _rng(self.seed, _TAG_SCENE).normal(size=(h, w))
            field = gaussian_filter(field, sigma=self.smoothness)
            lo_v, hi_v = field.min(), field.max()
            span = hi_v - lo_v
            if span == 0:
                content = np.full((h, w), (self.lo + self.hi) / 2.0)
            else:
                content = self.lo + (field - lo_v) * (self.hi - self.lo) / span
        return np.clip(content, 0.0, float(max_value))


def capture(camera: CameraProfile, scene: SceneSource, seed: int) -> ImageRaster:
    """One exposure: clamp(round(I0 + I0*K + readout noise))."""
    content = scene.render(camera.dims, camera.max_value)
    if content.shape != camera.dims:
        raise ValidationError("scene dims do not match camera dims")
    signal = content + content * camera.k_true
    if camera.sigma_read > 0:
        signal = signal + _rng(seed, _TAG_SHOT).normal(
            0.0, camera.sigma_read, size=camera.dims
        )
    pixels = np.clip(np.round(signal), 0, camera.max_value).astype(np.uint16)
    return ImageRaster(
        pixels=pixels,
        bit_depth=camera.bit_depth,
        camera=camera.label,
        part=Part.FULL,
    )


def capture_burst(
    camera: CameraProfile, scene: SceneSource, n: int, seed: int
) -> list:
    """n exposures of the same scene with independent readout noise draws."""
    if n < 1:
        raise ValidationError("burst length must be >= 1")
    burst_id = f"{camera.label}-burst{seed}"
    shots = []
    for i in range(n):
        raster = capture(camera, scene, seed=(seed << 8) + i)
        shots.append(
            ImageRaster(
                pixels=raster.pixels,
                bit_depth=raster.bit_depth,
                camera=camera.label,
                burst_id=burst_id,
                part=Part.FULL,
            )
        )
    return shots


def default_fleet_scene(index: int, seed: int) -> SceneSource:
    """Scene used for the index-th photo of every camera in a fleet.

    Mostly smooth textures with a few flats and ramps. Texture smoothness
    matters: sharper content leaves denoiser residue that correlates
    between the odd and even halves of one photo and would masquerade as
    cross-part fingerprint leakage.
    """
    cycle = index % 5
    if cycle == 0:
        return SceneSource(kind="flat", level=140.0 + 12 * (index % 7))
    if cycle == 4:
        return SceneSource(kind="gradient", lo=60.0, hi=210.0)
    return SceneSource(
        kind="texture", lo=110.0, hi=185.0, smoothness=32.0, seed=seed * 1000 + index
    )


def generate_fleet(
    out_dir: str,
    n_cameras: int = 8,
    photos_per_camera: int = 20,
    dims: tuple = (256, 256),
    sigma_k: float = 0.02,
    sigma_read: float = 2.0,
    seed: int = 0,
    burst: int = 1,
    scene_kind: str = "default",
    checkerboard_gain: float = 0.0,
) -> tuple:
    """Write a synthetic fleet to disk and return (manifest, cameras).

    ``burst`` > 1 groups photos into bursts of that size (same scene,
    independent noise). ``scene_kind`` "halves" produces luminance-varying
    scenes for the block-filtering ablation; "sharp" produces edge-rich
    textures (consistency-check regime); "textured" produces moderate
    per-photo textures (extractor-training regime); "default" mixes
    smooth textures, flats and ramps.
    """
    os.makedirs(out_dir, exist_ok=True)
    cameras = [
        new_camera(
            seed=seed * 10_000 + ci,
            dims=dims,
            sigma_k=sigma_k,
            sigma_read=sigma_read,
            label=f"cam{ci:02d}",
            checkerboard_gain=checkerboard_gain,
        )
        for ci in range(n_cameras)
    ]
    entries = []
    for ci, cam in enumerate(cameras):
        shot = 0
        while shot < photos_per_camera:
            idx = shot // max(burst, 1)
            if scene_kind == "halves":
                # one half near-dark: its blocks contribute mostly noise
                # to the estimate, which is what block filtering prunes
                side = (15.0, 150.0) if idx % 2 == 0 else (150.0, 15.0)
                scene = SceneSource(kind="halves", lo=side[0], hi=side[1])
            elif scene_kind == "sharp":
                # edge-rich content: the regime the consistency-check
                # thresholds are calibrated for
                scene = SceneSource(
                    kind="texture",
                    lo=30.0,
                    hi=230.0,
                    smoothness=2.0,
                    seed=seed * 7_000 + ci * 100 + idx,
                )
            elif scene_kind == "textured":
                # moderate content, one scene per photo: enough structure
                # to burden an untrained residual extractor while noise
                # extraction stays learnable at toy scale
                scene = SceneSource(
                    kind="texture",
                    lo=60.0,
                    hi=200.0,
                    smoothness=10.0,
                    seed=seed * 7_000 + ci * 100 + idx,
                )
            else:
                scene = default_fleet_scene(idx, seed=seed * 100 + ci)
            take = min(burst, photos_per_camera - shot)
            shots = capture_burst(cam, scene, take, seed=seed * 1_000_000 + ci * 1_000 + idx)
            for s in shots:
                name = f"{cam.label}_p{shot:03d}.spi"
                write_image(os.path.join(out_dir, name), s)
                entries.append(ManifestEntry(path=name, camera=cam.label, burst_id=s.burst_id if burst > 1 else ""))
                shot += 1
    manifest = DatasetManifest(entries=tuple(entries))
    write_manifest(os.path.join(out_dir, "manifest.tsv"), manifest)
    return manifest, cameras
