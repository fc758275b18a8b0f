/** Regenerate fixtures/sample_attention.npy, a committed attention map
 * used by the benchmark suite's interchange checks. Seeded end to end, so
 * reruns produce the same tensor up to engine math differences; the
 * consumer validates shape, value range, and per-head mass rather than
 * exact bytes.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import { fileURLToPath } from "node:url";

import * as tf from "@tensorflow/tfjs";

import { extractOne, loadImage } from "./extract.js";
import { writeNpy } from "./npy.js";
import { lookupModel } from "./registry.js";
import { Xoshiro256StarStar, deriveStreamSeed } from "./rng.js";
import { seedWeights, disposeWeights } from "./vit.js";

const FIXTURE_SEED = 7n;
const MODEL_ID = "phikon";

function packageRoot(): string {
  // dist/emit-fixture.js -> package root is one level up
  return path.dirname(path.dirname(fileURLToPath(import.meta.url)));
}

function main(): void {
  const config = lookupModel(MODEL_ID);
  const rng = new Xoshiro256StarStar(deriveStreamSeed(FIXTURE_SEED, "image", 0));
  const pixels = rng.gaussians(config.inputSize * config.inputSize * 3);
  const image = new Float32Array(pixels.length);
  for (let i = 0; i < pixels.length; i++) {
    image[i] = pixels[i];
  }

  const fixtureDir = path.join(packageRoot(), "fixtures");
  fs.mkdirSync(fixtureDir, { recursive: true });
  const imagePath = path.join(fixtureDir, "sample_image.npy");
  writeNpy(imagePath, image, [config.inputSize, config.inputSize, 3]);

  const backbone = seedWeights(config, FIXTURE_SEED);
  try {
    const features = extractOne(config, backbone, loadImage(imagePath), false);
    const outPath = path.join(fixtureDir, "sample_attention.npy");
    writeNpy(outPath, features.dataSync() as Float32Array, features.shape);
    features.dispose();
    process.stdout.write(
      `wrote ${outPath} (${config.inputSize / config.patchSize}x` +
        `${config.inputSize / config.patchSize}x${config.heads})\n`
    );
  } finally {
    disposeWeights(backbone);
  }
}

main();
