/**
 * train-export entry point.
 *
 * Usage:
 *   node dist/cli.js --manifest fleet/manifest.tsv --pseudo-gt gt_dir \
 *     --out exports [--seed 0] [--epochs 12] [--untrained-out dir]
 *
 * Pseudo ground-truth fingerprints are per-camera SPF1 files named
 * <camera>.spf, produced by the main pipeline's extract command.
 */

import { DEFAULT_TRAINER, Trainer, loadPseudoGt, loadSamples } from "./train.js";

interface Args {
  manifest: string;
  pseudoGt: string;
  out: string;
  untrainedOut: string | null;
  seed: number;
  epochs: number;
}

function parseArgs(argv: string[]): Args {
  const get = (flag: string): string | null => {
    const i = argv.indexOf(flag);
    return i >= 0 && i + 1 < argv.length ? argv[i + 1] : null;
  };
  const manifest = get("--manifest");
  const pseudoGt = get("--pseudo-gt");
  const out = get("--out");
  if (!manifest || !pseudoGt || !out) {
    console.error(
      "usage: train-export --manifest M --pseudo-gt DIR --out DIR " +
        "[--seed N] [--epochs N] [--untrained-out DIR]"
    );
    process.exit(2);
  }
  return {
    manifest,
    pseudoGt,
    out,
    untrainedOut: get("--untrained-out"),
    seed: Number(get("--seed") ?? "0"),
    epochs: Number(get("--epochs") ?? String(DEFAULT_TRAINER.epochs)),
  };
}

export async function main(argv: string[]): Promise<void> {
  const args = parseArgs(argv);
  const samples = loadSamples(args.manifest);
  const cameras = [...new Set(samples.map((s) => s.camera))];
  const pseudoGt = loadPseudoGt(args.pseudoGt, cameras);
  console.log(
    `training on ${pseudoGt.size}/${cameras.length} cameras ` +
      `(${samples.length} photos total)`
  );

  const trainer = new Trainer({
    ...DEFAULT_TRAINER,
    epochs: args.epochs,
    seed: args.seed,
    model: { ...DEFAULT_TRAINER.model, seed: args.seed + 1 },
  });
  if (args.untrainedOut) {
    trainer.exportAll(samples, args.untrainedOut);
    console.log(`untrained exports -> ${args.untrainedOut}`);
  }
  const stats = trainer.train(samples, pseudoGt);
  for (const s of stats) {
    console.log(
      `epoch ${s.epoch}: triplet=${s.tripletLoss.toFixed(4)} ` +
        `frequency=${s.frequencyLoss.toFixed(4)}`
    );
  }
  trainer.exportAll(samples, args.out);
  console.log(`trained exports -> ${args.out}`);
}

main(process.argv.slice(2)).catch((err) => {
  console.error(err);
  process.exit(1);
});
