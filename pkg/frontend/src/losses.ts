/**
 * Training losses: triplet hinge over residual distances, batch-hard
 * mining, and the frequency-domain consistency loss against a
 * precomputed per-camera fingerprint.
 */

import * as tf from "@tensorflow/tfjs";

/** Hinge loss max(0, dqp - dqn + margin) on scalar distances. */
export function tripletLoss(dqp: number, dqn: number, margin: number): number {
  if (dqp < 0 || dqn < 0) throw new Error("distances must be non-negative");
  return Math.max(0, dqp - dqn + margin);
}

/** Tensor variant used inside the training graph. */
export function tripletLossT(
  dqp: tf.Tensor,
  dqn: tf.Tensor,
  margin: number
): tf.Tensor {
  return tf.maximum(tf.scalar(0), dqp.sub(dqn).add(tf.scalar(margin)));
}

/** Cosine distance 1 - <a,b>/(|a||b|) between flattened residuals. */
export function cosineDistance(a: tf.Tensor, b: tf.Tensor): tf.Tensor {
  const fa = a.flatten();
  const fb = b.flatten();
  const dot = fa.mul(fb).sum();
  const na = fa.square().sum().sqrt();
  const nb = fb.square().sum().sqrt();
  return tf.scalar(1).sub(dot.div(na.mul(nb).add(tf.scalar(1e-12))));
}

export interface HardPair {
  positive: number;
  negative: number;
}

/**
 * Batch-hard mining on a pairwise distance matrix: per anchor, the
 * farthest same-camera sample and the nearest different-camera sample,
 * ties resolved toward the lowest index.
 */
export function hardMine(distances: number[][], labels: string[]): HardPair[] {
  const n = labels.length;
  const out: HardPair[] = [];
  for (let i = 0; i < n; i++) {
    let pIdx = -1;
    let pBest = -Infinity;
    let nIdx = -1;
    let nBest = Infinity;
    for (let j = 0; j < n; j++) {
      if (j === i) continue;
      const d = distances[i][j];
      if (labels[j] === labels[i]) {
        if (d > pBest) {
          pBest = d;
          pIdx = j;
        }
      } else if (d < nBest) {
        nBest = d;
        nIdx = j;
      }
    }
    if (pIdx < 0) throw new Error(`anchor ${i} has no positive in batch`);
    if (nIdx < 0) throw new Error(`anchor ${i} has no negative in batch`);
    out.push({ positive: pIdx, negative: nIdx });
  }
  return out;
}

/** Real/imaginary DFT basis matrices for an N-point transform. */
export function dftMatrices(n: number): { cos: tf.Tensor2D; sin: tf.Tensor2D } {
  const cos = new Float32Array(n * n);
  const sin = new Float32Array(n * n);
  for (let k = 0; k < n; k++) {
    for (let m = 0; m < n; m++) {
      const angle = (-2 * Math.PI * k * m) / n;
      cos[k * n + m] = Math.cos(angle);
      sin[k * n + m] = Math.sin(angle);
    }
  }
  return {
    cos: tf.tensor2d(cos, [n, n]),
    sin: tf.tensor2d(sin, [n, n]),
  };
}

export interface Dft2Basis {
  rows: { cos: tf.Tensor2D; sin: tf.Tensor2D };
  cols: { cos: tf.Tensor2D; sin: tf.Tensor2D };
}

export function dft2Basis(h: number, w: number): Dft2Basis {
  return { rows: dftMatrices(h), cols: dftMatrices(w) };
}

/**
 * 2-D DFT of a real image via basis matmuls (differentiable); returns
 * the real and imaginary coefficient planes.
 */
export function dft2(x: tf.Tensor2D, basis: Dft2Basis): { re: tf.Tensor; im: tf.Tensor } {
  const cx = basis.rows.cos.matMul(x);
  const sx = basis.rows.sin.matMul(x);
  const re = cx.matMul(basis.cols.cos).sub(sx.matMul(basis.cols.sin));
  const im = cx.matMul(basis.cols.sin).add(sx.matMul(basis.cols.cos));
  return { re, im };
}

/**
 * Euclidean distance between the 2-D DFT coefficients (real and
 * imaginary parts stacked) of a residual and the camera's precomputed
 * fingerprint estimate.
 */
export function frequencyLossT(
  residual: tf.Tensor2D,
  pseudoGt: tf.Tensor2D,
  basis: Dft2Basis
): tf.Tensor {
  if (
    residual.shape[0] !== pseudoGt.shape[0] ||
    residual.shape[1] !== pseudoGt.shape[1]
  ) {
    throw new Error("residual and pseudo ground truth differ in shape");
  }
  const fr = dft2(residual, basis);
  const fg = dft2(pseudoGt, basis);
  const sq = fr.re.sub(fg.re).square().sum().add(fr.im.sub(fg.im).square().sum());
  return sq.sqrt();
}

export function frequencyLoss(residual: number[][], pseudoGt: number[][]): number {
  return tf.tidy(() => {
    const r = tf.tensor2d(residual);
    const g = tf.tensor2d(pseudoGt);
    const basis = dft2Basis(r.shape[0], r.shape[1]);
    return frequencyLossT(r, g, basis).dataSync()[0];
  });
}
