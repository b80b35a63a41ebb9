/**
 * Binary codecs for the toolkit's image/fingerprint containers and the
 * dataset manifest. Layouts are little-endian and must stay byte-exact
 * with the Python pipeline that produces and consumes these files.
 */

import * as fs from "node:fs";
import * as path from "node:path";

const MAGIC_IMAGE = "SPI1";
const MAGIC_FINGERPRINT = "SPF1";

export const FLAG_ZM = 0x01;
export const FLAG_WF = 0x02;
export const FLAG_DENOISED = 0x10;
const PART_SHIFT = 2;

export type Part = 0 | 1 | 2; // full / odd / even

export interface ImageRaster {
  width: number;
  height: number;
  bitDepth: number;
  part: Part;
  originalFullHeight: number;
  pixels: Uint16Array; // row-major
}

export interface FingerprintFile {
  width: number;
  height: number;
  zm: boolean;
  wf: boolean;
  part: Part;
  denoisedImage: boolean;
  nImages: number;
  values: Float32Array; // row-major
}

export interface ManifestEntry {
  path: string;
  camera: string;
  burstId: string;
}

function magicOf(buf: Buffer): string {
  return buf.toString("ascii", 0, 4);
}

export function decodeImage(buf: Buffer): ImageRaster {
  if (buf.length < 18 || magicOf(buf) !== MAGIC_IMAGE) {
    throw new Error(`not an ${MAGIC_IMAGE} image payload`);
  }
  const width = buf.readUInt32LE(4);
  const height = buf.readUInt32LE(8);
  const bitDepth = buf.readUInt8(12);
  const part = buf.readUInt8(13) as Part;
  const originalFullHeight = buf.readUInt32LE(14);
  const expect = 18 + 2 * width * height;
  if (buf.length !== expect) {
    throw new Error(`image payload length ${buf.length}, expected ${expect}`);
  }
  const pixels = new Uint16Array(width * height);
  for (let i = 0; i < pixels.length; i++) {
    pixels[i] = buf.readUInt16LE(18 + 2 * i);
  }
  return { width, height, bitDepth, part, originalFullHeight, pixels };
}

export function encodeImage(img: ImageRaster): Buffer {
  const buf = Buffer.alloc(18 + 2 * img.width * img.height);
  buf.write(MAGIC_IMAGE, 0, "ascii");
  buf.writeUInt32LE(img.width, 4);
  buf.writeUInt32LE(img.height, 8);
  buf.writeUInt8(img.bitDepth, 12);
  buf.writeUInt8(img.part, 13);
  buf.writeUInt32LE(img.originalFullHeight, 14);
  for (let i = 0; i < img.pixels.length; i++) {
    buf.writeUInt16LE(img.pixels[i], 18 + 2 * i);
  }
  return buf;
}

export function decodeFingerprint(buf: Buffer): FingerprintFile {
  if (buf.length < 17 || magicOf(buf) !== MAGIC_FINGERPRINT) {
    throw new Error(`not an ${MAGIC_FINGERPRINT} payload`);
  }
  const width = buf.readUInt32LE(4);
  const height = buf.readUInt32LE(8);
  const flags = buf.readUInt8(12);
  const nImages = buf.readUInt32LE(13);
  const expect = 17 + 4 * width * height;
  if (buf.length !== expect) {
    throw new Error(`fingerprint payload length ${buf.length}, expected ${expect}`);
  }
  const values = new Float32Array(width * height);
  for (let i = 0; i < values.length; i++) {
    values[i] = buf.readFloatLE(17 + 4 * i);
  }
  return {
    width,
    height,
    zm: (flags & FLAG_ZM) !== 0,
    wf: (flags & FLAG_WF) !== 0,
    part: ((flags >> PART_SHIFT) & 0x03) as Part,
    denoisedImage: (flags & FLAG_DENOISED) !== 0,
    nImages,
    values,
  };
}

export function encodeFingerprint(fp: FingerprintFile): Buffer {
  for (const v of fp.values) {
    if (!Number.isFinite(v)) throw new Error("fingerprint values must be finite");
  }
  const flags =
    (fp.zm ? FLAG_ZM : 0) |
    (fp.wf ? FLAG_WF : 0) |
    (fp.part << PART_SHIFT) |
    (fp.denoisedImage ? FLAG_DENOISED : 0);
  const buf = Buffer.alloc(17 + 4 * fp.values.length);
  buf.write(MAGIC_FINGERPRINT, 0, "ascii");
  buf.writeUInt32LE(fp.width, 4);
  buf.writeUInt32LE(fp.height, 8);
  buf.writeUInt8(flags, 12);
  buf.writeUInt32LE(fp.nImages, 13);
  for (let i = 0; i < fp.values.length; i++) {
    buf.writeFloatLE(fp.values[i], 17 + 4 * i);
  }
  return buf;
}

export function readImage(file: string): ImageRaster {
  return decodeImage(fs.readFileSync(file));
}

export function readFingerprint(file: string): FingerprintFile {
  return decodeFingerprint(fs.readFileSync(file));
}

/** Atomic write: temp file in the same directory, then rename. */
export function writeFileAtomic(file: string, data: Buffer): void {
  const tmp = path.join(
    path.dirname(file),
    `.${path.basename(file)}.tmp-${process.pid}`
  );
  fs.writeFileSync(tmp, data);
  fs.renameSync(tmp, file);
}

export function parseManifest(text: string): ManifestEntry[] {
  const entries: ManifestEntry[] = [];
  for (const line of text.split("\n")) {
    if (!line.trim()) continue;
    const fields = line.split("\t");
    if (fields.length !== 3) {
      throw new Error(`manifest line needs 3 tab-separated fields: ${line}`);
    }
    entries.push({ path: fields[0], camera: fields[1], burstId: fields[2] });
  }
  return entries;
}

export function readManifest(file: string): ManifestEntry[] {
  return parseManifest(fs.readFileSync(file, "utf-8"));
}
