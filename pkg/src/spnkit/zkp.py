"""Proof-statement binding a public even photo to a registered fingerprint.

The statement ties together: the odd/even split of one RAW photo, bit
equality of the transmitted even part, low-level consistency between the
odd part and its denoised version (patchwise edge/contour coefficients),
correlation of the reproduced fingerprint with the registered one, and
the registered digest. prove() evaluates all clauses and hands the claim
transcript to a backend; the default transparent backend emits an
integrity-tagged transcript bound to the public inputs. It demonstrates
the protocol shape and the verifier logic only; it is NOT zero-knowledge,
and the backend interface is the seam where a circuit-based prover would
plug in.
"""

from __future__ import annotations

import base64
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate

from .core import (
    BinaryFingerprint,
    Fingerprint,
    FormatError,
    ImageRaster,
    ValidationError,
    canonical_digest,
    encode_binary_fp,
    encode_image,
)
from .matching import ncc
from .pipeline import interleave

_SOBEL_GX = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_GY = _SOBEL_GX.T

# Calibrated once on the synthetic fleet and frozen. C1 separates honest
# pairs (>= 0.78 on structured scenes) from mismatched ones (<= 0.30).
# The contour coefficient concentrates at 1 +- 0.15 for both classes on
# this corpus (pooled-luminance vs pooled-edge masks are unrelated), so
# its threshold sits above that band: the branch stays exercised but
# cannot admit mismatches the edge coefficient would reject.
DEFAULT_C1_THLD = 0.55
DEFAULT_C2_THLD = 1.30
DEFAULT_TAU_ZKP = 0.20


class StatementError(ValueError):
    """The statement is false; ``clause`` identifies which part failed."""

    def __init__(self, clause: str, reason: str):
        super().__init__(f"clause ({clause}): {reason}")
        self.clause = clause
        self.reason = reason


@dataclass(frozen=True)
class ConsistencyConfig:
    patch: int = 128
    c1_thld: float = DEFAULT_C1_THLD
    c2_thld: float = DEFAULT_C2_THLD
    count_thld: int | None = None  # None: every patch must pass
    pool_k: int = 8
    tau_zkp: float = DEFAULT_TAU_ZKP
    symmetric_c2: bool = False  # comparison-only variant; the statement
    # itself pools the odd patch without the edge operator

    def __post_init__(self):
        if self.patch < 16:
            raise ValidationError("patch size must be >= 16")
        if not (0.0 <= self.c1_thld <= 1.0):
            raise ValidationError("c1 threshold must lie in [0, 1]")
        # the contour coefficient is max(v, 1-v) of an unclamped IoA, so
        # its usable threshold range extends past 1
        if not (0.0 <= self.c2_thld <= 2.0):
            raise ValidationError("c2 threshold must lie in [0, 2]")
        if self.pool_k <= 0:
            raise ValidationError("pool kernel must be positive")
        if self.count_thld is not None and self.count_thld < 1:
            raise ValidationError("count threshold must be >= 1")


def _as_array(img) -> np.ndarray:
    if isinstance(img, ImageRaster):
        return img.astype_float()
    if isinstance(img, Fingerprint):
        return img.values.astype(np.float64)
    return np.asarray(img, dtype=np.float64)


def sobel3(img) -> np.ndarray:
    """Gradient magnitude sqrt(Gx^2 + Gy^2), 3x3 kernels, symmetric padding."""
    x = _as_array(img)
    if x.ndim != 2 or x.shape[0] < 3 or x.shape[1] < 3:
        raise ValidationError("sobel needs at least a 3x3 image")
    gx = correlate(x, _SOBEL_GX, mode="reflect")
    gy = correlate(x, _SOBEL_GY, mode="reflect")
    return np.sqrt(gx * gx + gy * gy)


def threshold_mean(img) -> np.ndarray:
    """Binary mask: pixel >= mean. A constant image maps to all ones."""
    x = _as_array(img)
    return (x >= x.mean()).astype(np.uint8)


def mean_pool(img, k: int) -> np.ndarray:
    """Non-overlapping k x k block means; symmetric padding when k does not divide."""
    if k <= 0:
        raise ValidationError("pool kernel must be positive")
    x = _as_array(img)
    if k == 1:
        return x.copy()
    h, w = x.shape
    pad_h = (-h) % k
    pad_w = (-w) % k
    if pad_h or pad_w:
        x = np.pad(x, ((0, pad_h), (0, pad_w)), mode="symmetric")
    hh, ww = x.shape
    return x.reshape(hh // k, k, ww // k, k).mean(axis=(1, 3))


def jaccard(x: np.ndarray, y: np.ndarray) -> float:
    """|X and Y| / |X or Y|; two empty masks count as identical (1)."""
    x = np.asarray(x).astype(bool)
    y = np.asarray(y).astype(bool)
    if x.shape != y.shape:
        raise ValidationError("mask dimension mismatch")
    union = np.logical_or(x, y).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(x, y).sum() / union)


def ioa(x: np.ndarray, y: np.ndarray) -> float:
    """1 - |xor(X, Y)| / |X|; faithful to the formula, may be negative."""
    x = np.asarray(x).astype(bool)
    y = np.asarray(y).astype(bool)
    if x.shape != y.shape:
        raise ValidationError("mask dimension mismatch")
    area = x.sum()
    if area == 0:
        raise ValidationError("IoA undefined for an empty reference mask")
    return float(1.0 - np.logical_xor(x, y).sum() / area)


def c1(o_patch, d_patch) -> float:
    """Close-up consistency: Jaccard of mean-thresholded edge maps."""
    return jaccard(
        threshold_mean(sobel3(o_patch)), threshold_mean(sobel3(d_patch))
    )


def c2(o_patch, d_patch, k_pool: int = 8, symmetric: bool = False) -> float:
    """Contour consistency: max(v, 1-v) of the pooled-mask IoA.

    As written the odd patch is pooled without the edge operator while the
    denoised patch is edge-filtered first; ``symmetric`` applies the edge
    operator to both sides (comparison only, not part of the statement).
    """
    left_src = sobel3(o_patch) if symmetric else _as_array(o_patch)
    left = threshold_mean(mean_pool(left_src, k_pool))
    right = threshold_mean(mean_pool(sobel3(d_patch), k_pool))
    v = ioa(left, right)
    return max(v, 1.0 - v)


def _patch_grid(shape: tuple, patch: int):
    h, w = shape
    for r0 in range(0, h, patch):
        for c0 in range(0, w, patch):
            yield r0, c0, min(r0 + patch, h), min(c0 + patch, w)


@dataclass(frozen=True)
class PatchReport:
    row: int
    col: int
    c1: float
    c2: float
    passed: bool


def check_consistency(o, d, cfg: ConsistencyConfig | None = None) -> tuple:
    """Algorithm: per-patch OR of the two coefficients against thresholds.

    Returns (ok, reports): ok is True when at least ``count_thld`` patches
    pass (all patches, when the threshold is unset).
    """
    cfg = cfg or ConsistencyConfig()
    oa, da = _as_array(o), _as_array(d)
    if oa.shape != da.shape:
        raise ValidationError("odd and denoised images differ in shape")
    if cfg.patch > min(oa.shape):
        raise ValidationError("patch size exceeds image")
    reports = []
    count = 0
    for r0, c0, r1, c1_ in _patch_grid(oa.shape, cfg.patch):
        op = oa[r0:r1, c0:c1_]
        dp = da[r0:r1, c0:c1_]
        v1 = c1(op, dp)
        v2 = c2(op, dp, cfg.pool_k, cfg.symmetric_c2)
        passed = (v1 >= cfg.c1_thld) or (v2 >= cfg.c2_thld)
        count += int(passed)
        reports.append(PatchReport(row=r0, col=c0, c1=v1, c2=v2, passed=passed))
    n_patches = len(reports)
    need = n_patches if cfg.count_thld is None else cfg.count_thld
    if need > n_patches:
        raise ValidationError(
            f"count threshold {need} exceeds patch count {n_patches}"
        )
    return count >= need, reports


def default_calibration_grid() -> tuple:
    """(c1 axis, c2 axis) grids spanning each coefficient's actual range."""
    return (
        np.round(np.linspace(0.05, 0.95, 19), 4),
        np.round(np.linspace(0.50, 2.00, 16), 4),
    )


def calibrate_thresholds(
    positive_pairs, negative_pairs, grid=None, pool_k: int = 8
) -> tuple:
    """Grid search (c1_thld, c2_thld) against the patch-level error rate.

    Each pair is (odd_patch, denoised_patch); ``grid`` is either one axis
    used for both thresholds or a (c1_axis, c2_axis) pair. The per-cell
    error is the balanced error (FAR + FRR)/2 of the OR-decision at that
    cell; the surface minimum approximates the equal error rate. Ties go
    to the smaller thresholds (lexicographic).
    Returns (c1_thld, c2_thld, surface, (c1_axis, c2_axis)).
    """
    if not positive_pairs or not negative_pairs:
        raise ValidationError("need both positive and negative pairs")
    if grid is None:
        axis1, axis2 = default_calibration_grid()
    elif isinstance(grid, tuple):
        axis1, axis2 = (np.asarray(g, dtype=np.float64) for g in grid)
    else:
        axis1 = axis2 = np.asarray(grid, dtype=np.float64)

    def coeffs(pairs):
        vals = np.empty((len(pairs), 2))
        for i, (op, dp) in enumerate(pairs):
            vals[i, 0] = c1(op, dp)
            vals[i, 1] = c2(op, dp, pool_k)
        return vals

    pos = coeffs(positive_pairs)
    neg = coeffs(negative_pairs)
    surface = np.empty((axis1.size, axis2.size))
    for i, t1 in enumerate(axis1):
        pos_pass = (pos[:, 0] >= t1)[:, np.newaxis] | (
            pos[:, 1][:, np.newaxis] >= axis2[np.newaxis, :]
        )
        neg_pass = (neg[:, 0] >= t1)[:, np.newaxis] | (
            neg[:, 1][:, np.newaxis] >= axis2[np.newaxis, :]
        )
        frr = 1.0 - pos_pass.mean(axis=0)
        far = neg_pass.mean(axis=0)
        surface[i, :] = 0.5 * (far + frr)
    best = np.argwhere(surface == surface.min())
    bi, bj = min((int(r), int(c)) for r, c in best)
    return float(axis1[bi]), float(axis2[bj]), surface, (axis1, axis2)


# ---------------------------------------------------------------------------
# Statement evaluation, proof scripts, backends.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProofScript:
    version: int
    backend: str
    h_hex: str
    even_digest_hex: str
    cfg: dict
    claims: dict
    tag_hex: str
    payload_b64: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "version": self.version,
                "backend": self.backend,
                "h_hex": self.h_hex,
                "even_digest_hex": self.even_digest_hex,
                "cfg": self.cfg,
                "claims": self.claims,
                "tag_hex": self.tag_hex,
                "payload_b64": self.payload_b64,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "ProofScript":
        try:
            raw = json.loads(text)
            return cls(
                version=int(raw["version"]),
                backend=str(raw["backend"]),
                h_hex=str(raw["h_hex"]),
                even_digest_hex=str(raw["even_digest_hex"]),
                cfg=dict(raw["cfg"]),
                claims=dict(raw["claims"]),
                tag_hex=str(raw["tag_hex"]),
                payload_b64=str(raw["payload_b64"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise FormatError("malformed proof script") from None


def _cfg_dict(cfg: ConsistencyConfig, n_patches: int) -> dict:
    return {
        "patch": cfg.patch,
        "c1_thld": cfg.c1_thld,
        "c2_thld": cfg.c2_thld,
        "count_thld": n_patches if cfg.count_thld is None else cfg.count_thld,
        "k_pool": cfg.pool_k,
        "tau_zkp": cfg.tau_zkp,
    }


class TransparentBackend:
    """Evaluates the statement in the clear and tags the transcript.

    The tag binds the claims to the public inputs (h, even digest), so a
    script replayed against different publics fails verification. No
    zero-knowledge or succinctness is provided.
    """

    name = "transparent-v1"
    _DOMAIN = b"spnkit/zkp/transparent-v1"

    def _tag(self, h_hex: str, even_hex: str, cfg: dict, claims: dict, payload: bytes) -> str:
        blob = b"\x00".join(
            [
                self._DOMAIN,
                h_hex.encode(),
                even_hex.encode(),
                json.dumps(cfg, sort_keys=True).encode(),
                json.dumps(claims, sort_keys=True).encode(),
                payload,
            ]
        )
        return hashlib.sha256(blob).hexdigest()

    def prove(self, h: bytes, even_digest: bytes, cfg: dict, claims: dict) -> ProofScript:
        payload = json.dumps(claims, sort_keys=True).encode()
        return ProofScript(
            version=1,
            backend=self.name,
            h_hex=h.hex(),
            even_digest_hex=even_digest.hex(),
            cfg=cfg,
            claims=claims,
            tag_hex=self._tag(h.hex(), even_digest.hex(), cfg, claims, payload),
            payload_b64=base64.b64encode(payload).decode(),
        )

    def verify(self, script: ProofScript, h: bytes, even_digest: bytes) -> tuple:
        if script.backend != self.name:
            return False, f"backend mismatch: {script.backend!r}"
        if script.h_hex != h.hex():
            return False, "registered digest does not match the script"
        if script.even_digest_hex != even_digest.hex():
            return False, "even photo does not match the script"
        try:
            payload = base64.b64decode(script.payload_b64.encode(), validate=True)
        except Exception:
            return False, "malformed payload"
        want = self._tag(h.hex(), even_digest.hex(), script.cfg, script.claims, payload)
        if script.tag_hex != want:
            return False, "integrity tag mismatch"
        if not script.claims.get("ncc_ok", False):
            return False, "claims report failed correlation"
        if script.claims.get("pass_count", 0) < script.cfg.get("count_thld", 0):
            return False, "claims report insufficient consistent patches"
        return True, "ok"


_BACKENDS = {TransparentBackend.name: TransparentBackend()}


def get_backend(name: str):
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ValidationError(f"unknown proof backend {name!r}") from None


@dataclass(frozen=True)
class Witness:
    """Private inputs: the split photo, its denoised version, the fingerprint."""

    odd: ImageRaster
    even: ImageRaster
    denoised: np.ndarray
    registered: BinaryFingerprint


def register_digest(registered: BinaryFingerprint) -> bytes:
    """h = digest of the canonical binary-fingerprint encoding."""
    return canonical_digest(encode_binary_fp(registered))


def prove(
    witness: Witness,
    even_public: ImageRaster,
    h: bytes,
    cfg: ConsistencyConfig | None = None,
    backend=None,
) -> ProofScript:
    """Evaluate the statement; emit a proof script only if every clause holds.

    Clauses: (a) the split halves interleave into a well-formed photo,
    (b) the even half equals the public one bit-exactly, (c) the denoised
    image is consistent with the odd half, (d) the reproduced fingerprint
    correlates with the registered one, (e) the registered digest matches.
    """
    cfg = cfg or ConsistencyConfig()
    backend = backend or get_backend(TransparentBackend.name)

    try:
        interleave(witness.odd, witness.even)
    except ValidationError as exc:
        raise StatementError("a", f"odd/even halves do not form a photo: {exc}")

    if encode_image(witness.even) != encode_image(even_public):
        raise StatementError("b", "witness even photo differs from the public one")

    denoised = np.asarray(witness.denoised, dtype=np.float64)
    if denoised.shape != (witness.odd.height, witness.odd.width):
        raise StatementError("c", "denoised image shape mismatch")
    ok, reports = check_consistency(witness.odd, denoised, cfg)
    if not ok:
        raise StatementError(
            "c", f"only {sum(r.passed for r in reports)}/{len(reports)} patches consistent"
        )

    reproduced = witness.odd.astype_float() - denoised
    if (witness.registered.height, witness.registered.width) != reproduced.shape:
        raise StatementError("d", "registered fingerprint dimension mismatch")
    similarity = ncc(reproduced, witness.registered.unpack())
    if not similarity >= cfg.tau_zkp:
        raise StatementError(
            "d", f"fingerprint correlation {similarity:.4f} below {cfg.tau_zkp}"
        )

    if register_digest(witness.registered) != h:
        raise StatementError("e", "registered digest mismatch")

    even_digest = canonical_digest(encode_image(even_public))
    claims = {
        "pass_count": int(sum(r.passed for r in reports)),
        "n_patches": len(reports),
        "ncc_ok": True,
    }
    return backend.prove(h, even_digest, _cfg_dict(cfg, len(reports)), claims)


def verify(script: ProofScript, even_public: ImageRaster, h: bytes) -> tuple:
    """(accepted, reason) binding the script to exactly these publics."""
    backend = get_backend(script.backend) if script.backend in _BACKENDS else None
    if backend is None:
        return False, f"unknown backend {script.backend!r}"
    even_digest = canonical_digest(encode_image(even_public))
    return backend.verify(script, h, even_digest)
