import * as tf from "@tensorflow/tfjs";
import { describe, expect, it } from "vitest";

import {
  cosineDistance,
  dft2,
  dft2Basis,
  frequencyLoss,
  hardMine,
  tripletLoss,
} from "../src/losses.js";

describe("tripletLoss", () => {
  it("is zero when the negative is far enough", () => {
    expect(tripletLoss(0.1, 0.5, 0.2)).toBe(0);
  });

  it("is the hinge value otherwise", () => {
    expect(tripletLoss(0.4, 0.3, 0.2)).toBeCloseTo(0.3, 12);
  });

  it("equals the margin at symmetric distances", () => {
    expect(tripletLoss(0.37, 0.37, 0.2)).toBeCloseTo(0.2, 12);
  });

  it("rejects negative distances", () => {
    expect(() => tripletLoss(-0.1, 0.3, 0.2)).toThrow();
  });
});

describe("hardMine", () => {
  it("picks the farthest positive and nearest negative", () => {
    const labels = ["a", "a", "a", "b", "b"];
    const d = [
      [0.0, 0.1, 0.4, 0.9, 0.3],
      [0.1, 0.0, 0.2, 0.8, 0.7],
      [0.4, 0.2, 0.0, 0.6, 0.5],
      [0.9, 0.8, 0.6, 0.0, 0.2],
      [0.3, 0.7, 0.5, 0.2, 0.0],
    ];
    const pairs = hardMine(d, labels);
    expect(pairs[0]).toEqual({ positive: 2, negative: 4 }); // 0.4 max, 0.3 min
    expect(pairs[3]).toEqual({ positive: 4, negative: 2 });
  });

  it("breaks ties toward the lowest index", () => {
    const labels = ["a", "a", "a", "b", "b"];
    const d = [
      [0.0, 0.5, 0.5, 0.7, 0.7],
      [0.5, 0.0, 0.1, 0.7, 0.8],
      [0.5, 0.1, 0.0, 0.7, 0.8],
      [0.7, 0.7, 0.7, 0.0, 0.1],
      [0.7, 0.8, 0.8, 0.1, 0.0],
    ];
    const pairs = hardMine(d, labels);
    expect(pairs[0].positive).toBe(1); // tie between 1 and 2 at 0.5
    expect(pairs[0].negative).toBe(3); // tie between 3 and 4 at 0.7
  });

  it("rejects single-camera batches", () => {
    expect(() => hardMine([[0, 1], [1, 0]], ["a", "a"])).toThrow();
  });
});

describe("frequencyLoss", () => {
  it("is zero when residual equals the pseudo ground truth", () => {
    const x = [
      [0.5, -0.25, 0.1, 0.0],
      [0.2, 0.3, -0.1, 0.4],
      [-0.3, 0.1, 0.2, -0.2],
      [0.0, 0.6, -0.4, 0.1],
    ];
    expect(frequencyLoss(x, x)).toBeCloseTo(0, 6);
  });

  it("is positive and shift-sensitive", () => {
    const a = [
      [1, 0, 0, 0],
      [0, 0, 0, 0],
      [0, 0, 0, 0],
      [0, 0, 0, 0],
    ];
    const shifted = [
      [0, 1, 0, 0],
      [0, 0, 0, 0],
      [0, 0, 0, 0],
      [0, 0, 0, 0],
    ];
    // the modulus spectra match, but DFT phase differs
    expect(frequencyLoss(a, shifted)).toBeGreaterThan(0.1);
  });

  it("matches a direct DFT computation", () => {
    // independent oracle: explicit double loop over DFT sums
    const h = 3;
    const w = 4;
    const x = [
      [0.3, -0.2, 0.5, 0.1],
      [0.0, 0.4, -0.3, 0.2],
      [-0.1, 0.2, 0.1, -0.4],
    ];
    const y = [
      [0.1, 0.0, -0.2, 0.3],
      [0.2, -0.1, 0.4, 0.0],
      [0.3, 0.1, -0.3, 0.2],
    ];
    const coeff = (img: number[][], k: number, l: number) => {
      let re = 0;
      let im = 0;
      for (let m = 0; m < h; m++) {
        for (let n = 0; n < w; n++) {
          const angle = -2 * Math.PI * ((k * m) / h + (l * n) / w);
          re += img[m][n] * Math.cos(angle);
          im += img[m][n] * Math.sin(angle);
        }
      }
      return [re, im];
    };
    let sq = 0;
    for (let k = 0; k < h; k++) {
      for (let l = 0; l < w; l++) {
        const [xr, xi] = coeff(x, k, l);
        const [yr, yi] = coeff(y, k, l);
        sq += (xr - yr) ** 2 + (xi - yi) ** 2;
      }
    }
    expect(frequencyLoss(x, y)).toBeCloseTo(Math.sqrt(sq), 4);
  });
});

describe("dft2", () => {
  it("constant image concentrates at DC", () => {
    tf.tidy(() => {
      const x = tf.fill([4, 4], 2.0) as tf.Tensor2D;
      const { re, im } = dft2(x, dft2Basis(4, 4));
      const reArr = re.arraySync() as number[][];
      expect(reArr[0][0]).toBeCloseTo(32, 4);
      expect(Math.abs(reArr[1][2])).toBeLessThan(1e-4);
      expect(tf.abs(im).max().dataSync()[0]).toBeLessThan(1e-4);
    });
  });
});

describe("cosineDistance", () => {
  it("is zero for identical and two for opposite", () => {
    tf.tidy(() => {
      const a = tf.tensor2d([
        [1, 2],
        [3, 4],
      ]);
      expect(cosineDistance(a, a).dataSync()[0]).toBeCloseTo(0, 5);
      expect(cosineDistance(a, a.mul(-1)).dataSync()[0]).toBeCloseTo(2, 5);
    });
  });
});
