/**
 * Pixel-shuffle layout: space-to-depth by the 2x2 phase lattice and its
 * exact inverse. Keeps each color-filter phase in its own plane so the
 * convolutional trunk is not asked to be translation-invariant across
 * phases.
 */

import * as tf from "@tensorflow/tfjs";

/** (h, w) -> (4, h/2, w/2), planes in row-major phase order. */
export function pixelShuffleDown(x: tf.Tensor2D): tf.Tensor3D {
  const [h, w] = x.shape;
  if (h % 2 !== 0 || w % 2 !== 0) {
    throw new Error(`pixel shuffle needs even dims, got ${h}x${w}`);
  }
  const planes = [
    tf.stridedSlice(x, [0, 0], [h, w], [2, 2]),
    tf.stridedSlice(x, [0, 1], [h, w], [2, 2]),
    tf.stridedSlice(x, [1, 0], [h, w], [2, 2]),
    tf.stridedSlice(x, [1, 1], [h, w], [2, 2]),
  ];
  return tf.stack(planes) as tf.Tensor3D;
}

/** Exact inverse of `pixelShuffleDown`. */
export function pixelShuffleUp(planes: tf.Tensor3D): tf.Tensor2D {
  const [c, hh, ww] = planes.shape;
  if (c !== 4) throw new Error(`expected 4 phase planes, got ${c}`);
  // interleave columns within each phase row, then interleave rows
  const p = planes.reshape([4, hh, ww]);
  const even = tf
    .stack([p.gather([0]).squeeze([0]), p.gather([1]).squeeze([0])], 2)
    .reshape([hh, 2 * ww]);
  const odd = tf
    .stack([p.gather([2]).squeeze([0]), p.gather([3]).squeeze([0])], 2)
    .reshape([hh, 2 * ww]);
  return tf.stack([even, odd], 1).reshape([2 * hh, 2 * ww]) as tf.Tensor2D;
}
