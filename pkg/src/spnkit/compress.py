"""Binary quantization and random-projection compression.

The registration fingerprint is compressed to n sign bits: the q
largest-magnitude source entries (outliers) are excluded, the remainder
is projected onto n pseudo-random +-1 rows, and the projection signs are
kept. Rows are generated counter-style from (seed, row index), so any row
is computable independently; (n, seed, outlier positions) travel as
public side information and are reused verbatim at generation time.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .core import BinaryFingerprint, Fingerprint, FormatError, ValidationError

MAGIC_COMPRESSED = b"SPC1"
MAGIC_SIDE_INFO = b"SPC0"

_ROW_CHUNK = 256
_SIGN_LUT = np.array([1.0, -1.0], dtype=np.float32)


def binarize(fp: Fingerprint) -> BinaryFingerprint:
    """Sign quantization: +1 where the value is >= 0, else -1."""
    return BinaryFingerprint.pack(fp.values)


@dataclass(frozen=True)
class SideInfo:
    """Public compression parameters: length, projection seed, outliers."""

    n: int
    seed: int
    outliers: tuple

    def __post_init__(self):
        if self.n <= 0 or (self.n & (self.n - 1)) != 0:
            raise ValidationError("n must be a power of two")
        if not (0 <= self.seed < 2**64):
            raise ValidationError("seed must fit in u64")
        out = tuple(int(i) for i in self.outliers)
        if any(i < 0 for i in out):
            raise ValidationError("outlier indices must be non-negative")
        if len(set(out)) != len(out):
            raise ValidationError("outlier indices must be unique")
        if tuple(sorted(out)) != out:
            raise ValidationError("outlier indices must be sorted")
        object.__setattr__(self, "outliers", out)

    def encode(self) -> bytes:
        head = struct.pack("<4sIQI", MAGIC_SIDE_INFO, self.n, self.seed, len(self.outliers))
        return head + np.asarray(self.outliers, dtype="<u4").tobytes()

    @classmethod
    def decode(cls, data: bytes) -> "SideInfo":
        base = struct.calcsize("<4sIQI")
        if len(data) < base:
            raise FormatError("side info shorter than header")
        magic, n, seed, q = struct.unpack_from("<4sIQI", data)
        if magic != MAGIC_SIDE_INFO:
            raise FormatError(f"bad side info magic {magic!r}")
        expect = base + 4 * q
        if len(data) != expect:
            raise FormatError(f"side info length {len(data)}, expected {expect}")
        outliers = np.frombuffer(data, dtype="<u4", offset=base)
        try:
            return cls(n=n, seed=seed, outliers=tuple(int(i) for i in outliers))
        except ValidationError as exc:
            raise FormatError(str(exc)) from None


@dataclass(frozen=True)
class CompressedFingerprint:
    side: SideInfo
    bits: bytes  # n bits packed MSB-first

    def __post_init__(self):
        expect = (self.side.n + 7) // 8
        if len(self.bits) != expect:
            raise ValidationError(
                f"expected {expect} packed bytes for n={self.side.n}"
            )

    @property
    def n(self) -> int:
        return self.side.n

    def bit_array(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.bits, dtype=np.uint8))[: self.side.n]

    def encode(self) -> bytes:
        head = struct.pack(
            "<4sIQI", MAGIC_COMPRESSED, self.side.n, self.side.seed, len(self.side.outliers)
        )
        return head + np.asarray(self.side.outliers, dtype="<u4").tobytes() + self.bits

    @classmethod
    def decode(cls, data: bytes) -> "CompressedFingerprint":
        base = struct.calcsize("<4sIQI")
        if len(data) < base:
            raise FormatError("compressed fingerprint shorter than header")
        magic, n, seed, q = struct.unpack_from("<4sIQI", data)
        if magic != MAGIC_COMPRESSED:
            raise FormatError(f"bad compressed fingerprint magic {magic!r}")
        nbytes = (n + 7) // 8
        expect = base + 4 * q + nbytes
        if len(data) != expect:
            raise FormatError(
                f"compressed fingerprint length {len(data)}, expected {expect}"
            )
        outliers = np.frombuffer(data, dtype="<u4", offset=base, count=q)
        try:
            side = SideInfo(n=n, seed=seed, outliers=tuple(int(i) for i in outliers))
        except ValidationError as exc:
            raise FormatError(str(exc)) from None
        return cls(side=side, bits=data[base + 4 * q :])


def _blocks_per_row(m: int) -> int:
    # one Philox counter block yields 4 x u64 = 256 bits
    return (m + 255) // 256


def _row_signs(seed: int, row0: int, rows: int, m: int) -> np.ndarray:
    """(rows, m) array of +-1 float32 projection rows.

    Row i occupies a fixed counter window of a Philox stream keyed by the
    seed (counter = i * blocks_per_row), so any row is computable
    independently and in any order; contiguous rows come out of one
    generator call.
    """
    blocks = _blocks_per_row(m)
    bitgen = np.random.Philox(counter=row0 * blocks, key=seed)
    words = bitgen.random_raw(rows * blocks * 4)
    bits = np.unpackbits(words.view(np.uint8)).reshape(rows, blocks * 256)[:, :m]
    return _SIGN_LUT[bits]


def project_signs(values: np.ndarray, n: int, seed: int) -> np.ndarray:
    """Stacked sign projections: values is (k, m), result (k, n) uint8 bits.

    Uses (1-2B) @ v = sum(v) - 2 (B @ v) with a reused cast buffer, which
    avoids materializing +-1 rows; one fixed code path keeps the output
    deterministic in (values, n, seed).
    """
    values = np.ascontiguousarray(values, dtype=np.float32)
    k, m = values.shape
    blocks = _blocks_per_row(m)
    sums = values.sum(axis=1, dtype=np.float32)
    vt = np.ascontiguousarray(values.T)
    out = np.empty((k, n), dtype=np.uint8)
    buf = np.empty((min(_ROW_CHUNK, n), m), dtype=np.float32)
    for row0 in range(0, n, _ROW_CHUNK):
        rows = min(_ROW_CHUNK, n - row0)
        bitgen = np.random.Philox(counter=row0 * blocks, key=seed)
        words = bitgen.random_raw(rows * blocks * 4)
        bits = np.unpackbits(words.view(np.uint8)).reshape(rows, blocks * 256)[:, :m]
        np.copyto(buf[:rows], bits)
        proj = sums[np.newaxis, :] - 2.0 * (buf[:rows] @ vt)  # (rows, k)
        out[:, row0 : row0 + rows] = (proj >= 0).T
    return out


def select_outliers(fp: Fingerprint, q: int) -> tuple:
    """Indices of the q largest-|value| entries, ties broken by index."""
    flat = np.abs(fp.values.astype(np.float64).ravel())
    if q == 0:
        return ()
    order = np.argsort(-flat, kind="stable")
    return tuple(sorted(int(i) for i in order[:q]))


def compress(
    fp: Fingerprint, n: int = 4096, seed: int = 0, q: int | None = None
) -> CompressedFingerprint:
    """Compress a registration fingerprint, choosing its outlier set."""
    m = fp.values.size
    if n <= 0 or (n & (n - 1)) != 0:
        raise ValidationError("n must be a power of two")
    if n > m:
        raise ValidationError(f"n={n} exceeds fingerprint length m={m}")
    if q is None:
        q = math.ceil(0.01 * m)
    if not (0 <= q < m):
        raise ValidationError("q must lie in [0, m)")
    side = SideInfo(n=n, seed=int(seed), outliers=select_outliers(fp, q))
    return compress_with_side(fp, side)


def compress_with_side(fp: Fingerprint, side: SideInfo) -> CompressedFingerprint:
    """Compress a fresh fingerprint reusing stored side information."""
    cfs = compress_many([fp], side)
    return cfs[0]


def compress_many(fps, side: SideInfo) -> list:
    """Batch variant of `compress_with_side` (one pass over the rows)."""
    if not fps:
        raise ValidationError("no fingerprints to compress")
    m = fps[0].values.size
    for fp in fps:
        if fp.values.size != m:
            raise ValidationError("fingerprints differ in length")
    if side.n > m:
        raise ValidationError(f"n={side.n} exceeds fingerprint length m={m}")
    if side.outliers and side.outliers[-1] >= m:
        raise ValidationError("outlier index beyond fingerprint length")
    vals = np.stack([fp.values.astype(np.float32).ravel() for fp in fps])
    if side.outliers:
        vals[:, list(side.outliers)] = 0.0
    bit_rows = project_signs(vals, side.n, side.seed)
    return [
        CompressedFingerprint(side=side, bits=np.packbits(row).tobytes())
        for row in bit_rows
    ]


def side_info(cf: CompressedFingerprint) -> bytes:
    """Serialize the public side information (never includes the bits)."""
    return cf.side.encode()


def restore_side_info(data: bytes) -> SideInfo:
    return SideInfo.decode(data)
