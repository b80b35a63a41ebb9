/**
 * Small residual convolutional denoiser. The trunk sees the four
 * pixel-shuffle phase planes and predicts the noise residual; the
 * denoised image is input minus prediction.
 */

import * as tf from "@tensorflow/tfjs";

export interface ModelConfig {
  channels: number;
  depth: number;
  seed: number;
  pixelShuffle: boolean;
}

export const DEFAULT_MODEL: ModelConfig = {
  channels: 8,
  depth: 3,
  seed: 1,
  pixelShuffle: true,
};

export class ResidualDenoiser {
  readonly cfg: ModelConfig;
  readonly weights: tf.Variable[] = [];
  private kernels: Array<{ w: tf.Variable; b: tf.Variable }> = [];

  constructor(cfg: ModelConfig = DEFAULT_MODEL) {
    this.cfg = cfg;
    const inC = cfg.pixelShuffle ? 4 : 1;
    const outC = inC;
    let prev = inC;
    for (let layer = 0; layer < cfg.depth; layer++) {
      const isLast = layer === cfg.depth - 1;
      const next = isLast ? outC : cfg.channels;
      const init = tf.initializers.glorotUniform({ seed: cfg.seed + layer });
      const w = tf.variable(init.apply([3, 3, prev, next]) as tf.Tensor4D, true);
      const b = tf.variable(tf.zeros([next]), true);
      this.kernels.push({ w, b });
      this.weights.push(w, b);
      prev = next;
    }
  }

  /** Phase planes (batch, h, w, c) -> predicted noise planes. */
  forward(x: tf.Tensor4D): tf.Tensor4D {
    let h: tf.Tensor4D = x;
    for (let layer = 0; layer < this.kernels.length; layer++) {
      const { w, b } = this.kernels[layer];
      h = tf.conv2d(h, w as unknown as tf.Tensor4D, 1, "same").add(b) as tf.Tensor4D;
      if (layer < this.kernels.length - 1) {
        h = tf.relu(h);
      }
    }
    return h;
  }

  /** Full-resolution residual of one normalized image (h, w) in [0, 1]. */
  residual(img: tf.Tensor2D): tf.Tensor2D {
    const [h, w] = img.shape;
    if (this.cfg.pixelShuffle) {
      const planes = phaseSplit(img); // (1, h/2, w/2, 4)
      const noise = this.forward(planes);
      return phaseMerge(noise, h, w);
    }
    const x = img.reshape([1, h, w, 1]) as tf.Tensor4D;
    return this.forward(x).reshape([h, w]) as tf.Tensor2D;
  }

  dispose(): void {
    for (const v of this.weights) v.dispose();
  }
}

/** (h, w) -> (1, h/2, w/2, 4) channels in row-major phase order. */
export function phaseSplit(img: tf.Tensor2D): tf.Tensor4D {
  const [h, w] = img.shape;
  if (h % 2 !== 0 || w % 2 !== 0) {
    throw new Error("pixel shuffle needs even dimensions");
  }
  const x = img.reshape([h / 2, 2, w / 2, 2]);
  // (h/2, w/2, 2, 2) -> channels (dy*2+dx)
  const planes = x.transpose([0, 2, 1, 3]).reshape([h / 2, w / 2, 4]);
  return planes.expandDims(0) as tf.Tensor4D;
}

/** Inverse of `phaseSplit` back to (h, w). */
export function phaseMerge(planes: tf.Tensor4D, h: number, w: number): tf.Tensor2D {
  const x = planes.squeeze([0]).reshape([h / 2, w / 2, 2, 2]);
  return x.transpose([0, 2, 1, 3]).reshape([h, w]) as tf.Tensor2D;
}
