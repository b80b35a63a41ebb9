"""Shared domain types, canonical serialization and bit-exact codecs.

Every array-valued object is immutable after construction (backing numpy
buffers are marked read-only), so all operations in this package are safe
to call concurrently.
"""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import Iterable, Optional

import numpy as np

MAGIC_IMAGE = b"SPI1"
MAGIC_FINGERPRINT = b"SPF1"
MAGIC_BINARY_FP = b"SPB1"

FLAG_ZM = 0x01
FLAG_WF = 0x02
FLAG_DENOISED = 0x10  # marks a denoised-image payload inside the SPF1 container
_PART_SHIFT = 2
_PART_MASK = 0x03 << _PART_SHIFT


class FormatError(ValueError):
    """Malformed byte-stream: bad magic, truncated payload, inconsistent header."""


class ValidationError(ValueError):
    """Value violates a domain invariant (range, dimension, finiteness)."""


class Part(IntEnum):
    FULL = 0
    ODD = 1
    EVEN = 2


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class ImageRaster:
    """Single-channel pixel grid with bit depth and capture metadata.

    ``pixels`` is a (height, width) uint16 array; 8-bit images are stored
    widened. ``part`` records whether this raster is a full frame or the
    odd/even-row half of one; split rasters carry the original full height.
    """

    pixels: np.ndarray
    bit_depth: int = 8
    camera: str = ""
    burst_id: str = ""
    part: Part = Part.FULL
    original_full_height: int = 0

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise ValidationError("pixels must be a non-empty 2-D array")
        if self.bit_depth not in (8, 16):
            raise ValidationError(f"bit_depth must be 8 or 16, got {self.bit_depth}")
        if np.issubdtype(px.dtype, np.floating):
            if not np.all(px == np.round(px)):
                raise ValidationError("pixels must be integral")
        limit = (1 << self.bit_depth) - 1
        if px.min() < 0 or px.max() > limit:
            raise ValidationError(f"pixel out of range [0, {limit}]")
        object.__setattr__(self, "pixels", _freeze(px.astype(np.uint16)))
        if self.part is Part.FULL:
            if self.original_full_height != 0:
                raise ValidationError("full raster must have original_full_height 0")
        else:
            h, full = self.height, self.original_full_height
            expect = (full + 1) // 2 if self.part is Part.EVEN else full // 2
            if full <= 0 or h != expect:
                raise ValidationError(
                    f"{self.part.name.lower()} part of height {h} inconsistent "
                    f"with original full height {full}"
                )

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def max_value(self) -> int:
        return (1 << self.bit_depth) - 1

    def astype_float(self) -> np.ndarray:
        return self.pixels.astype(np.float64)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ImageRaster):
            return NotImplemented
        return (
            self.bit_depth == other.bit_depth
            and self.camera == other.camera
            and self.burst_id == other.burst_id
            and self.part == other.part
            and self.original_full_height == other.original_full_height
            and np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True, eq=False)
class Fingerprint:
    """Real-valued residual or fingerprint estimate with provenance.

    ``values`` is float32 (the serialized precision), shape (height, width).
    ``denoiser_id`` is in-memory provenance only; the wire format carries
    the ZM/WF/part flags and ``n_images``.
    """

    values: np.ndarray
    n_images: int = 1
    denoiser_id: str = ""
    part: Part = Part.FULL
    zm: bool = False
    wf: bool = False
    denoised_image: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float32)
        if vals.ndim != 2 or vals.size == 0:
            raise ValidationError("values must be a non-empty 2-D array")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("fingerprint values must be finite")
        if self.n_images < 0:
            raise ValidationError("n_images must be non-negative")
        object.__setattr__(self, "values", _freeze(vals))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def with_flags(self, **kw) -> "Fingerprint":
        return replace(self, **kw)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Fingerprint):
            return NotImplemented
        return (
            self.n_images == other.n_images
            and self.part == other.part
            and self.zm == other.zm
            and self.wf == other.wf
            and self.denoised_image == other.denoised_image
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class BinaryFingerprint:
    """Sign-quantized fingerprint: one bit per pixel, bit=1 means +1."""

    width: int
    height: int
    bits: bytes  # packed MSB-first, zero-padded to a byte boundary

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("dimensions must be positive")
        n = self.width * self.height
        expect = (n + 7) // 8
        if len(self.bits) != expect:
            raise ValidationError(
                f"expected {expect} packed bytes for {n} bits, got {len(self.bits)}"
            )
        tail = expect * 8 - n
        if tail and (self.bits[-1] & ((1 << tail) - 1)):
            raise ValidationError("padding bits must be zero")

    @property
    def n_bits(self) -> int:
        return self.width * self.height

    def unpack(self) -> np.ndarray:
        """Return the (height, width) array of {-1.0, +1.0} values."""
        flat = np.unpackbits(np.frombuffer(self.bits, dtype=np.uint8))[: self.n_bits]
        signs = flat.astype(np.float32) * 2.0 - 1.0
        return signs.reshape(self.height, self.width)

    @classmethod
    def pack(cls, signs: np.ndarray) -> "BinaryFingerprint":
        """Pack an array interpreted elementwise as +1 iff value >= 0."""
        signs = np.asarray(signs)
        if signs.ndim != 2:
            raise ValidationError("expected a 2-D array")
        bits = (signs >= 0).astype(np.uint8)
        return cls(
            width=signs.shape[1],
            height=signs.shape[0],
            bits=np.packbits(bits.ravel()).tobytes(),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryFingerprint):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and self.bits == other.bits
        )


# ---------------------------------------------------------------------------
# Codecs. All integers little-endian; payload layouts are frozen formats.
# ---------------------------------------------------------------------------

_IMG_HEADER = struct.Struct("<4sIIBBI")
_FP_HEADER = struct.Struct("<4sIIBI")
_BFP_HEADER = struct.Struct("<4sII")


def encode_image(raster: ImageRaster) -> bytes:
    header = _IMG_HEADER.pack(
        MAGIC_IMAGE,
        raster.width,
        raster.height,
        raster.bit_depth,
        int(raster.part),
        raster.original_full_height,
    )
    return header + raster.pixels.astype("<u2").tobytes()


def decode_image(data: bytes) -> ImageRaster:
    if len(data) < _IMG_HEADER.size:
        raise FormatError("image payload shorter than header")
    magic, w, h, depth, part, full_h = _IMG_HEADER.unpack_from(data)
    if magic != MAGIC_IMAGE:
        raise FormatError(f"bad image magic {magic!r}")
    if depth not in (8, 16):
        raise FormatError(f"bad bit depth {depth}")
    try:
        part = Part(part)
    except ValueError:
        raise FormatError(f"bad part tag {part}") from None
    expect = _IMG_HEADER.size + 2 * w * h
    if len(data) != expect:
        raise FormatError(f"image payload length {len(data)}, expected {expect}")
    px = np.frombuffer(data, dtype="<u2", offset=_IMG_HEADER.size).reshape(h, w)
    try:
        return ImageRaster(
            pixels=px, bit_depth=depth, part=part, original_full_height=full_h
        )
    except ValidationError as exc:
        raise FormatError(str(exc)) from None


def encode_fingerprint(fp: Fingerprint) -> bytes:
    flags = (
        (FLAG_ZM if fp.zm else 0)
        | (FLAG_WF if fp.wf else 0)
        | (int(fp.part) << _PART_SHIFT)
        | (FLAG_DENOISED if fp.denoised_image else 0)
    )
    header = _FP_HEADER.pack(MAGIC_FINGERPRINT, fp.width, fp.height, flags, fp.n_images)
    return header + fp.values.astype("<f4").tobytes()


def decode_fingerprint(data: bytes) -> Fingerprint:
    if len(data) < _FP_HEADER.size:
        raise FormatError("fingerprint payload shorter than header")
    magic, w, h, flags, n_images = _FP_HEADER.unpack_from(data)
    if magic != MAGIC_FINGERPRINT:
        raise FormatError(f"bad fingerprint magic {magic!r}")
    expect = _FP_HEADER.size + 4 * w * h
    if len(data) != expect:
        raise FormatError(f"fingerprint payload length {len(data)}, expected {expect}")
    vals = np.frombuffer(data, dtype="<f4", offset=_FP_HEADER.size).reshape(h, w)
    try:
        part = Part((flags & _PART_MASK) >> _PART_SHIFT)
    except ValueError:
        raise FormatError("bad part bits in flags") from None
    try:
        return Fingerprint(
            values=vals,
            n_images=n_images,
            part=part,
            zm=bool(flags & FLAG_ZM),
            wf=bool(flags & FLAG_WF),
            denoised_image=bool(flags & FLAG_DENOISED),
        )
    except ValidationError as exc:
        raise FormatError(str(exc)) from None


def encode_binary_fp(bfp: BinaryFingerprint) -> bytes:
    return _BFP_HEADER.pack(MAGIC_BINARY_FP, bfp.width, bfp.height) + bfp.bits


def decode_binary_fp(data: bytes) -> BinaryFingerprint:
    if len(data) < _BFP_HEADER.size:
        raise FormatError("binary fingerprint payload shorter than header")
    magic, w, h = _BFP_HEADER.unpack_from(data)
    if magic != MAGIC_BINARY_FP:
        raise FormatError(f"bad binary fingerprint magic {magic!r}")
    expect = _BFP_HEADER.size + (w * h + 7) // 8
    if len(data) != expect:
        raise FormatError(
            f"binary fingerprint payload length {len(data)}, expected {expect}"
        )
    try:
        return BinaryFingerprint(width=w, height=h, bits=data[_BFP_HEADER.size :])
    except ValidationError as exc:
        raise FormatError(str(exc)) from None


def canonical_digest(payload: bytes) -> bytes:
    """SHA-256 of the exact byte-string; 32 bytes, stable across platforms."""
    return hashlib.sha256(payload).digest()


# ---------------------------------------------------------------------------
# Dataset manifest: UTF-8 lines "path<TAB>camera<TAB>burst_id".
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    camera: str
    burst_id: str


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        groups: dict[str, str] = {}
        for e in self.entries:
            if "\t" in e.path or "\t" in e.camera or "\t" in e.burst_id:
                raise ValidationError("manifest fields must not contain tabs")
            if e.burst_id:
                owner = groups.setdefault(e.burst_id, e.camera)
                if owner != e.camera:
                    raise ValidationError(
                        f"burst group {e.burst_id!r} spans cameras "
                        f"{owner!r} and {e.camera!r}"
                    )

    @property
    def cameras(self) -> tuple:
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.camera, None)
        return tuple(seen)

    def by_camera(self, camera: str) -> tuple:
        return tuple(e for e in self.entries if e.camera == camera)

    def burst_groups(self) -> dict:
        """Map burst_id -> list of entries, in manifest order."""
        groups: dict[str, list] = {}
        for e in self.entries:
            if e.burst_id:
                groups.setdefault(e.burst_id, []).append(e)
        return groups

    def to_text(self) -> str:
        return "".join(f"{e.path}\t{e.camera}\t{e.burst_id}\n" for e in self.entries)

    @classmethod
    def from_text(cls, text: str) -> "DatasetManifest":
        entries = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise FormatError(f"manifest line {lineno}: expected 3 tab-separated fields")
            entries.append(ManifestEntry(*fields))
        return cls(entries=tuple(entries))

    def validate_files(self, base_dir: str = ".") -> None:
        """Check that every referenced file exists and decodes as an image."""
        for e in self.entries:
            path = os.path.join(base_dir, e.path)
            if not os.path.exists(path):
                raise ValidationError(f"manifest references missing file {e.path!r}")
            with open(path, "rb") as fh:
                decode_image(fh.read())


# ---------------------------------------------------------------------------
# File helpers shared by the CLI and the evaluation harness.
# ---------------------------------------------------------------------------


def read_image(path: str) -> ImageRaster:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def write_image(path: str, raster: ImageRaster) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_image(raster))


def read_fingerprint(path: str) -> Fingerprint:
    with open(path, "rb") as fh:
        return decode_fingerprint(fh.read())


def write_fingerprint(path: str, fp: Fingerprint) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_fingerprint(fp))


def read_manifest(path: str) -> DatasetManifest:
    with open(path, "r", encoding="utf-8") as fh:
        return DatasetManifest.from_text(fh.read())


def write_manifest(path: str, manifest: DatasetManifest) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(manifest.to_text())
