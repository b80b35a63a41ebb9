#!/usr/bin/env python3
"""Score exported residuals with the main pipeline's evaluation harness.

Usage: trend_eval.py MANIFEST EXPORT_DIR CAMERA[,CAMERA...]

Loads <stem>.residual.spf for every manifest photo of the listed
(held-out) cameras, builds the all-pairs NCC matrix and prints JSON with
the identification AUC.
"""

import json
import os
import sys

from spnkit import core, evaluate


def main() -> int:
    if len(sys.argv) != 4:
        print(__doc__, file=sys.stderr)
        return 2
    manifest_path, export_dir, cameras_arg = sys.argv[1:]
    cameras = set(cameras_arg.split(","))
    manifest = core.read_manifest(manifest_path)
    fps, labels = [], []
    for entry in manifest.entries:
        if entry.camera not in cameras:
            continue
        stem = os.path.splitext(entry.path)[0]
        fp = core.read_fingerprint(os.path.join(export_dir, f"{stem}.residual.spf"))
        fps.append(fp)
        labels.append(entry.camera)
    matrix = evaluate.correlation_matrix(fps, labels)
    auc, eer = evaluate.matrix_auc_eer(matrix)
    print(json.dumps({"auc": auc, "eer": eer, "n": len(fps)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
