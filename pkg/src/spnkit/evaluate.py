"""Evaluation harness: correlation matrices, ROC/AUC, EER, leakage, ablation."""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import rankdata

from .compress import binarize
from .core import (
    DatasetManifest,
    Fingerprint,
    ImageRaster,
    ValidationError,
    read_image,
)
from .denoise import WaveletDenoiser, noise_residual
from .matching import binary_ncc, ncc, weighted_block_ncc
from .pipeline import (
    block_weights,
    burst_integrate,
    estimate_fingerprint_mle,
    postprocess_zm_wf,
    split_odd_even,
)


@dataclass(frozen=True)
class ScoreMatrix:
    """Symmetric all-pairs similarity matrix; the diagonal is excluded."""

    labels: tuple
    scores: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValidationError("scores must be square")
        if len(self.labels) != s.shape[0]:
            raise ValidationError("labels length mismatch")
        if not np.allclose(s, s.T, atol=1e-9):
            raise ValidationError("scores must be symmetric")
        object.__setattr__(self, "labels", tuple(self.labels))
        s = np.ascontiguousarray(s)
        s.flags.writeable = False
        object.__setattr__(self, "scores", s)

    def pair_scores(self) -> tuple:
        """(scores, same_label) over unordered off-diagonal pairs."""
        n = len(self.labels)
        iu = np.triu_indices(n, k=1)
        labels = np.asarray(self.labels)
        return self.scores[iu], labels[iu[0]] == labels[iu[1]]


def correlation_matrix(fps, labels, measure="ncc") -> ScoreMatrix:
    """All unordered pairs scored with the chosen similarity measure.

    ``measure`` is "ncc", "binary" or a callable(a, b) -> float.
    """
    if len(fps) < 2:
        raise ValidationError("need at least two fingerprints")
    if len(labels) != len(fps):
        raise ValidationError("labels length mismatch")
    n = len(fps)
    if measure == "ncc":
        flats = np.stack(
            [
                (f.values if isinstance(f, Fingerprint) else np.asarray(f))
                .astype(np.float64)
                .ravel()
                for f in fps
            ]
        )
        flats -= flats.mean(axis=1, keepdims=True)
        norms = np.linalg.norm(flats, axis=1)
        if np.any(norms == 0):
            raise ValidationError("similarity undefined for constant input")
        flats /= norms[:, np.newaxis]
        scores = flats @ flats.T
        np.fill_diagonal(scores, 1.0)
        scores = 0.5 * (scores + scores.T)  # exact symmetry
        return ScoreMatrix(labels=tuple(labels), scores=scores)
    if measure == "binary":
        fn = binary_ncc
    elif callable(measure):
        fn = measure
    else:
        raise ValidationError(f"unknown measure {measure!r}")
    scores = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            scores[i, j] = scores[j, i] = fn(fps[i], fps[j])
    return ScoreMatrix(labels=tuple(labels), scores=scores)


def roc_auc(scores, positive) -> float:
    """AUC by the rank statistic; ties count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = int((~positive).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("need both classes for AUC")
    ranks = rankdata(scores)  # average ranks handle ties
    r_pos = ranks[positive].sum()
    return float((r_pos - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def eer(scores, positive) -> float:
    """Equal error rate with linear interpolation between operating points."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    pos = np.sort(scores[positive])
    neg = np.sort(scores[~positive])
    if pos.size == 0 or neg.size == 0:
        raise ValidationError("need both classes for EER")
    # candidate thresholds between distinct scores
    thresholds = np.unique(scores)
    # FAR: negatives >= t (accepted); FRR: positives < t (rejected)
    far = np.array([(neg >= t).mean() for t in thresholds])
    frr = np.array([(pos < t).mean() for t in thresholds])
    diff = far - frr
    idx = np.where(diff <= 0)[0]
    if idx.size == 0:
        return float(max(far[-1], frr[-1]))
    i = idx[0]
    if i == 0 or diff[i] == 0:
        return float((far[i] + frr[i]) / 2.0)
    # interpolate between operating points i-1 and i
    d0, d1 = diff[i - 1], diff[i]
    lam = d0 / (d0 - d1)
    far_x = (1 - lam) * far[i - 1] + lam * far[i]
    frr_x = (1 - lam) * frr[i - 1] + lam * frr[i]
    return float((far_x + frr_x) / 2.0)


def matrix_auc_eer(matrix: ScoreMatrix) -> tuple:
    scores, positive = matrix.pair_scores()
    return roc_auc(scores, positive), eer(scores, positive)


# ---------------------------------------------------------------------------
# Corpus loading and fingerprint extraction over a manifest.
# ---------------------------------------------------------------------------


def load_manifest_images(manifest: DatasetManifest, base_dir: str) -> list:
    """Read every manifest entry, attaching camera/burst metadata."""
    images = []
    for entry in manifest.entries:
        img = read_image(os.path.join(base_dir, entry.path))
        images.append(
            replace(img, camera=entry.camera, burst_id=entry.burst_id)
        )
    return images


def single_photo_fingerprints(
    images, denoiser=None, part=None, post: bool = True
) -> tuple:
    """Per-photo fingerprints and their camera labels.

    ``part``: None uses the full frame; "odd"/"even" splits each photo
    and uses that half.
    """
    denoiser = denoiser or WaveletDenoiser()
    fps, labels = [], []
    for img in images:
        target = img
        if part is not None:
            odd, even = split_odd_even(img)
            target = odd if part == "odd" else even
        fp = estimate_fingerprint_mle([target], [noise_residual(target, denoiser)])
        if post:
            fp = postprocess_zm_wf(fp)
        fps.append(fp)
        labels.append(img.camera)
    return fps, labels


def registered_fingerprint(images, denoiser=None, part=None, post: bool = True):
    """Multi-photo registration fingerprint for one camera."""
    denoiser = denoiser or WaveletDenoiser()
    targets = []
    for img in images:
        if part is not None:
            odd, even = split_odd_even(img)
            targets.append(odd if part == "odd" else even)
        else:
            targets.append(img)
    residuals = [noise_residual(t, denoiser) for t in targets]
    fp = estimate_fingerprint_mle(targets, residuals)
    return postprocess_zm_wf(fp) if post else fp


# ---------------------------------------------------------------------------
# Odd/even leakage analysis.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LeakageReport:
    cross_part_ncc: dict  # camera -> list of same-photo odd-vs-even NCC
    cross_part_auc: dict  # camera -> AUC of same-photo vs cross-camera NCC
    odd_matrix_auc: float
    even_matrix_auc: float
    odd_matrix_eer: float
    even_matrix_eer: float

    @property
    def mean_cross_part_auc(self) -> float:
        return float(np.mean(list(self.cross_part_auc.values())))


def leakage_analysis(images, denoiser=None) -> LeakageReport:
    """Cross-part correlation and same-part identification quality.

    Per photo: NCC between its odd-part and even-part fingerprints.
    Per camera: AUC of those same-photo values against cross-camera
    odd-vs-even values. Plus the same-part all-pairs matrices.
    """
    denoiser = denoiser or WaveletDenoiser()
    cameras = sorted({img.camera for img in images})
    if len(cameras) < 2:
        raise ValidationError("need photos from at least two cameras")
    odd_fps, even_fps, labels = [], [], []
    for img in images:
        odd, even = split_odd_even(img)
        fo = postprocess_zm_wf(
            estimate_fingerprint_mle([odd], [noise_residual(odd, denoiser)])
        )
        fe = postprocess_zm_wf(
            estimate_fingerprint_mle([even], [noise_residual(even, denoiser)])
        )
        odd_fps.append(fo)
        even_fps.append(fe)
        labels.append(img.camera)
    labels_arr = np.asarray(labels)

    same_photo = {
        cam: [
            ncc(odd_fps[i], even_fps[i])
            for i in range(len(images))
            if labels[i] == cam
        ]
        for cam in cameras
    }
    cross_auc = {}
    rng = np.random.default_rng(0)
    for cam in cameras:
        own = np.where(labels_arr == cam)[0]
        other = np.where(labels_arr != cam)[0]
        neg = []
        for i in own:
            for j in rng.choice(other, size=min(6, other.size), replace=False):
                neg.append(ncc(odd_fps[i], even_fps[j]))
        scores = np.concatenate([same_photo[cam], neg])
        positive = np.concatenate(
            [np.ones(len(same_photo[cam]), bool), np.zeros(len(neg), bool)]
        )
        cross_auc[cam] = roc_auc(scores, positive)

    odd_auc, odd_eer = matrix_auc_eer(correlation_matrix(odd_fps, labels))
    even_auc, even_eer = matrix_auc_eer(correlation_matrix(even_fps, labels))
    return LeakageReport(
        cross_part_ncc=same_photo,
        cross_part_auc=cross_auc,
        odd_matrix_auc=odd_auc,
        even_matrix_auc=even_auc,
        odd_matrix_eer=odd_eer,
        even_matrix_eer=even_eer,
    )


# ---------------------------------------------------------------------------
# Optimization-module ablation.
# ---------------------------------------------------------------------------

ABLATION_ARMS = ("baseline", "block", "burst", "both", "binary")


@dataclass(frozen=True)
class AblationRow:
    arm: str
    auc: float
    eer: float
    n_pos: int
    n_neg: int


@dataclass(frozen=True)
class AblationReport:
    rows: tuple
    histograms: dict  # arm -> (bin_centers, pos_counts, neg_counts)

    def to_csv(self) -> str:
        lines = ["arm,auc,eer,n_pos,n_neg"]
        for r in self.rows:
            lines.append(f"{r.arm},{r.auc:.6f},{r.eer:.6f},{r.n_pos},{r.n_neg}")
        return "\n".join(lines) + "\n"

    def histogram_text(self, arm: str) -> str:
        centers, pos, neg = self.histograms[arm]
        lines = ["bin_center,pos_count,neg_count"]
        for c, p, q in zip(centers, pos, neg):
            lines.append(f"{c:.6f},{int(p)},{int(q)}")
        return "\n".join(lines) + "\n"


def _score_hist(scores: np.ndarray, positive: np.ndarray, bins: int = 100):
    lo, hi = float(scores.min()), float(scores.max())
    if lo == hi:
        hi = lo + 1e-9
    edges = np.linspace(lo, hi, bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    pos_counts, _ = np.histogram(scores[positive], bins=edges)
    neg_counts, _ = np.histogram(scores[~positive], bins=edges)
    return centers, pos_counts, neg_counts


def _pairwise_weighted(fps, labels, masks):
    n = len(fps)
    scores = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            weights = masks[i].weights * masks[j].weights
            if not np.any(weights > 0):
                s = ncc(fps[i], fps[j])
            else:
                from .pipeline import BlockWeightMask

                pair_mask = BlockWeightMask(
                    block_size=masks[i].block_size, weights=weights, mode="float"
                )
                s = weighted_block_ncc(fps[i], fps[j], pair_mask)
            scores[i, j] = scores[j, i] = s
    return ScoreMatrix(labels=tuple(labels), scores=scores)


def run_ablation(
    images,
    arms=ABLATION_ARMS,
    denoiser=None,
    block_size: int = 64,
    percentage: float = 0.5,
) -> AblationReport:
    """AUC/EER per optimization arm on a burst-structured corpus.

    Arms: baseline (per-photo fingerprints, plain NCC), block (luminance
    block weighting of the NCC), burst (burst-integrated fingerprints),
    both, binary (sign-quantized per-photo fingerprints).
    """
    if not arms:
        raise ValidationError("empty ablation arm set")
    unknown = set(arms) - set(ABLATION_ARMS)
    if unknown:
        raise ValidationError(f"unknown ablation arms {sorted(unknown)}")
    denoiser = denoiser or WaveletDenoiser()

    fps, labels = single_photo_fingerprints(images, denoiser)
    masks = [
        block_weights(img, block_size=block_size, mode="percentage", percentage=percentage)
        for img in images
    ]

    burst_fps, burst_labels, burst_masks = [], [], []
    if "burst" in arms or "both" in arms:
        groups: dict[str, list] = {}
        for img in images:
            if not img.burst_id:
                raise ValidationError("burst arm requires burst groups in the corpus")
            groups.setdefault(img.burst_id, []).append(img)
        for gid, members in groups.items():
            fp = postprocess_zm_wf(burst_integrate(members, denoiser))
            burst_fps.append(fp)
            burst_labels.append(members[0].camera)
            burst_masks.append(
                block_weights(
                    members[0],
                    block_size=block_size,
                    mode="percentage",
                    percentage=percentage,
                )
            )

    rows = []
    hists = {}
    for arm in arms:
        if arm == "baseline":
            matrix = correlation_matrix(fps, labels)
        elif arm == "block":
            matrix = _pairwise_weighted(fps, labels, masks)
        elif arm == "burst":
            matrix = correlation_matrix(burst_fps, burst_labels)
        elif arm == "both":
            matrix = _pairwise_weighted(burst_fps, burst_labels, burst_masks)
        else:  # binary
            matrix = correlation_matrix(
                [binarize(f) for f in fps], labels, measure="binary"
            )
        scores, positive = matrix.pair_scores()
        rows.append(
            AblationRow(
                arm=arm,
                auc=roc_auc(scores, positive),
                eer=eer(scores, positive),
                n_pos=int(positive.sum()),
                n_neg=int((~positive).sum()),
            )
        )
        hists[arm] = _score_hist(scores, positive)
    return AblationReport(rows=tuple(rows), histograms=hists)
