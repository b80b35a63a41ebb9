/**
 * Toy-scale trainer: minimizes triplet loss (batch-hard over cosine
 * distances of predicted residuals) plus the frequency-consistency loss
 * against precomputed per-camera fingerprints, then exports denoised
 * images and residuals in the pipeline's containers.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import {
  FLAG_DENOISED,
  FingerprintFile,
  ImageRaster,
  ManifestEntry,
  encodeFingerprint,
  readFingerprint,
  readImage,
  readManifest,
  writeFileAtomic,
} from "./codec.js";
import { Dft2Basis, dft2Basis, cosineDistance, frequencyLossT, hardMine, tripletLossT } from "./losses.js";
import { DEFAULT_MODEL, ModelConfig, ResidualDenoiser } from "./model.js";

export interface TrainerConfig {
  margin: number;
  batchSize: number;
  epochs: number;
  learningRate: number;
  freqWeight: number;
  model: ModelConfig;
  seed: number;
}

export const DEFAULT_TRAINER: TrainerConfig = {
  margin: 0.2,
  batchSize: 12,
  epochs: 12,
  learningRate: 3e-3,
  freqWeight: 0.005,
  model: DEFAULT_MODEL,
  seed: 0,
};

export interface Sample {
  camera: string;
  name: string;
  image: tf.Tensor2D; // normalized to [0, 1]
  maxValue: number;
}

/** Deterministic PRNG (mulberry32) so shuffling is seed-reproducible. */
export function seededRng(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export function loadSamples(manifestPath: string): Sample[] {
  const baseDir = path.dirname(manifestPath);
  const entries: ManifestEntry[] = readManifest(manifestPath);
  return entries.map((e) => {
    const img: ImageRaster = readImage(path.join(baseDir, e.path));
    const maxValue = (1 << img.bitDepth) - 1;
    const data = new Float32Array(img.pixels.length);
    for (let i = 0; i < data.length; i++) data[i] = img.pixels[i] / maxValue;
    return {
      camera: e.camera,
      name: e.path,
      image: tf.tensor2d(data, [img.height, img.width]),
      maxValue,
    };
  });
}

/**
 * Per-camera fingerprint estimates named <camera>.spf. Cameras without a
 * file are simply absent from the map (held-out cameras are exported but
 * never trained on).
 */
export function loadPseudoGt(
  dir: string,
  cameras: string[]
): Map<string, tf.Tensor2D> {
  const out = new Map<string, tf.Tensor2D>();
  for (const cam of cameras) {
    const file = path.join(dir, `${cam}.spf`);
    if (!fs.existsSync(file)) continue; // camera not in the training set
    const fp: FingerprintFile = readFingerprint(file);
    out.set(cam, tf.tensor2d(fp.values, [fp.height, fp.width]));
  }
  return out;
}

export interface EpochStats {
  epoch: number;
  tripletLoss: number;
  frequencyLoss: number;
}

export class Trainer {
  readonly cfg: TrainerConfig;
  readonly model: ResidualDenoiser;
  private basis: Dft2Basis | null = null;

  constructor(cfg: TrainerConfig = DEFAULT_TRAINER) {
    this.cfg = cfg;
    this.model = new ResidualDenoiser(cfg.model);
  }

  private basisFor(sample: Sample): Dft2Basis {
    if (this.basis === null) {
      this.basis = dft2Basis(sample.image.shape[0], sample.image.shape[1]);
    }
    return this.basis;
  }

  /** One optimization step on a batch; returns (triplet, frequency) losses. */
  step(
    batch: Sample[],
    pseudoGt: Map<string, tf.Tensor2D>,
    optimizer: tf.Optimizer
  ): [number, number] {
    const cameras = new Set(batch.map((s) => s.camera));
    if (cameras.size < 2) throw new Error("batch needs at least two cameras");
    const basis = this.basisFor(batch[0]);
    let tripletVal = 0;
    let freqVal = 0;
    optimizer.minimize(() => {
      const residuals = batch.map((s) => this.model.residual(s.image));
      const n = batch.length;
      const dists: number[][] = [];
      const distT: tf.Tensor[][] = [];
      for (let i = 0; i < n; i++) {
        dists.push([]);
        distT.push([]);
        for (let j = 0; j < n; j++) {
          if (j < i) {
            distT[i].push(distT[j][i]);
            dists[i].push(dists[j][i]);
          } else if (j === i) {
            distT[i].push(tf.scalar(0));
            dists[i].push(0);
          } else {
            const d = cosineDistance(residuals[i], residuals[j]);
            distT[i].push(d);
            dists[i].push(d.dataSync()[0]);
          }
        }
      }
      const pairs = hardMine(dists, batch.map((s) => s.camera));
      let triplet: tf.Tensor = tf.scalar(0);
      for (let i = 0; i < n; i++) {
        triplet = triplet.add(
          tripletLossT(
            distT[i][pairs[i].positive],
            distT[i][pairs[i].negative],
            this.cfg.margin
          )
        );
      }
      triplet = triplet.div(tf.scalar(n));

      let freq: tf.Tensor = tf.scalar(0);
      for (let i = 0; i < n; i++) {
        const gt = pseudoGt.get(batch[i].camera);
        if (!gt) throw new Error(`no pseudo ground truth for ${batch[i].camera}`);
        freq = freq.add(frequencyLossT(residuals[i], gt, basis));
      }
      freq = freq.div(tf.scalar(n));

      tripletVal = triplet.dataSync()[0];
      freqVal = freq.dataSync()[0];
      return triplet.add(freq.mul(tf.scalar(this.cfg.freqWeight))) as tf.Scalar;
    });
    return [tripletVal, freqVal];
  }

  train(samples: Sample[], pseudoGt: Map<string, tf.Tensor2D>): EpochStats[] {
    const trainSet = samples.filter((s) => pseudoGt.has(s.camera));
    const cameras = [...new Set(trainSet.map((s) => s.camera))];
    if (cameras.length < 4) {
      throw new Error("training needs photos from at least 4 cameras");
    }
    const optimizer = tf.train.adam(this.cfg.learningRate);
    const rng = seededRng(this.cfg.seed + 0x5eed);
    const shuffle = <T>(arr: T[]): T[] => {
      const out = [...arr];
      for (let i = out.length - 1; i > 0; i--) {
        const j = Math.floor(rng() * (i + 1));
        [out[i], out[j]] = [out[j], out[i]];
      }
      return out;
    };
    // P-cameras x K-shots batches so every anchor has a positive
    const shots = 2;
    const perBatch = Math.max(2, Math.floor(this.cfg.batchSize / shots));
    const stats: EpochStats[] = [];
    for (let epoch = 0; epoch < this.cfg.epochs; epoch++) {
      const byCamera = new Map<string, Sample[]>();
      for (const cam of cameras) {
        byCamera.set(cam, shuffle(trainSet.filter((s) => s.camera === cam)));
      }
      const camOrder = shuffle(cameras);
      const cursor = new Map(cameras.map((c) => [c, 0]));
      let tAcc = 0;
      let fAcc = 0;
      let steps = 0;
      let camAt = 0;
      const totalBatches = Math.floor(trainSet.length / (perBatch * shots));
      for (let b = 0; b < totalBatches; b++) {
        const batch: Sample[] = [];
        for (let pi = 0; pi < perBatch; pi++) {
          const cam = camOrder[(camAt + pi) % camOrder.length];
          const pool = byCamera.get(cam)!;
          for (let ki = 0; ki < shots; ki++) {
            const at = cursor.get(cam)! % pool.length;
            batch.push(pool[at]);
            cursor.set(cam, at + 1);
          }
        }
        camAt += perBatch;
        const [tv, fv] = this.step(batch, pseudoGt, optimizer);
        tAcc += tv;
        fAcc += fv;
        steps += 1;
      }
      stats.push({
        epoch,
        tripletLoss: steps ? tAcc / steps : 0,
        frequencyLoss: steps ? fAcc / steps : 0,
      });
    }
    optimizer.dispose();
    return stats;
  }

  /** Export per-photo denoised images and residuals in SPF1 containers. */
  exportAll(samples: Sample[], outDir: string): void {
    fs.mkdirSync(outDir, { recursive: true });
    for (const s of samples) {
      const residual = tf.tidy(() =>
        this.model.residual(s.image).mul(s.maxValue)
      ) as tf.Tensor2D;
      const denoised = tf.tidy(() =>
        s.image.mul(s.maxValue).sub(residual)
      ) as tf.Tensor2D;
      const [h, w] = residual.shape;
      const stem = s.name.replace(/\.[^.]+$/, "");
      const resFile: FingerprintFile = {
        width: w,
        height: h,
        zm: false,
        wf: false,
        part: 0,
        denoisedImage: false,
        nImages: 1,
        values: new Float32Array(residual.dataSync()),
      };
      writeFileAtomic(
        path.join(outDir, `${stem}.residual.spf`),
        encodeFingerprint(resFile)
      );
      const denFile: FingerprintFile = {
        ...resFile,
        denoisedImage: true,
        nImages: 0,
        values: new Float32Array(denoised.dataSync()),
      };
      writeFileAtomic(
        path.join(outDir, `${stem}.denoised.spf`),
        encodeFingerprint(denFile)
      );
      residual.dispose();
      denoised.dispose();
    }
  }
}
