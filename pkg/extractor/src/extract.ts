/** Batch feature extraction: read images from a directory, run the seeded
 * backbone, and write one feature tensor per image plus a manifest
 * fragment describing the outputs.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import * as tf from "@tensorflow/tfjs";

import { ConfigError, DataError } from "./errors.js";
import { readNpy, writeNpy } from "./npy.js";
import { ModelConfig, lookupModel } from "./registry.js";
import {
  BackboneWeights,
  denseEmbedding,
  disposeWeights,
  forward,
  seedWeights,
} from "./vit.js";

export interface ExtractOptions {
  modelId: string;
  weights: string;
  imagesDir: string;
  outDir: string;
  dense?: boolean;
}

export interface ExtractReport {
  modelId: string;
  entries: { id: string; file: string }[];
  fragmentPath: string;
}

/** Weights are addressed as "seed:<n>"; pretrained checkpoints are out of
 * scope for this package, so anything else is a configuration error. */
export function parseWeightsSource(source: string): bigint {
  const match = /^seed:(\d+)$/.exec(source);
  if (match === null) {
    throw new ConfigError(
      `weights source must look like "seed:<n>", got "${source}"`
    );
  }
  return BigInt(match[1]);
}

/** Load one image file as [H, W, 3] float32. Accepts 2-D (grayscale,
 * replicated across channels) and 3-D with 1 or 3 channels. */
export function loadImage(filePath: string): tf.Tensor3D {
  const { dtype, shape, data } = readNpy(filePath);
  if (dtype !== "<f4") {
    throw new DataError(`${filePath}: images must be float32, got ${dtype}`);
  }
  if (shape.length === 2) {
    const plane = tf.tensor(
      data as Float32Array, [shape[0], shape[1], 1]
    ) as tf.Tensor3D;
    const tiled = tf.tile(plane, [1, 1, 3]) as tf.Tensor3D;
    plane.dispose();
    return tiled;
  }
  if (shape.length === 3) {
    if (shape[2] === 3) {
      return tf.tensor(data as Float32Array, [shape[0], shape[1], 3]) as tf.Tensor3D;
    }
    if (shape[2] === 1) {
      const plane = tf.tensor(
        data as Float32Array, [shape[0], shape[1], 1]
      ) as tf.Tensor3D;
      const tiled = tf.tile(plane, [1, 1, 3]) as tf.Tensor3D;
      plane.dispose();
      return tiled;
    }
    throw new DataError(
      `${filePath}: images must have 1 or 3 channels, got ${shape[2]}`
    );
  }
  throw new DataError(`${filePath}: images must be 2-D or 3-D, got ${shape.length}-D`);
}

function resizeToNative(image: tf.Tensor3D, size: number): tf.Tensor3D {
  if (image.shape[0] === size && image.shape[1] === size) {
    return image;
  }
  const resized = tf.tidy(() =>
    tf.reshape(
      tf.image.resizeBilinear(
        tf.reshape(image, [1, image.shape[0], image.shape[1], 3]) as tf.Tensor4D,
        [size, size],
        false,
        true
      ),
      [size, size, 3]
    ) as tf.Tensor3D
  );
  image.dispose();
  return resized;
}

function listImages(imagesDir: string): string[] {
  let names: string[];
  try {
    names = fs.readdirSync(imagesDir);
  } catch (err) {
    throw new ConfigError(`cannot read images directory ${imagesDir}: ${err}`);
  }
  const images = names.filter((n) => n.endsWith(".npy")).sort();
  if (images.length === 0) {
    throw new ConfigError(`no .npy images found in ${imagesDir}`);
  }
  return images;
}

/** Extract one image with an already-seeded backbone; returns the tensor
 * to be written (attention grid, or dense embedding when asked). */
export function extractOne(
  config: ModelConfig,
  weights: BackboneWeights,
  image: tf.Tensor3D,
  dense: boolean
): tf.Tensor3D {
  const native = resizeToNative(image, config.inputSize);
  const result = forward(config, weights, native);
  native.dispose();
  let out: tf.Tensor3D;
  if (dense) {
    out = denseEmbedding(config, weights, result);
  } else {
    out = result.clsAttention.clone() as tf.Tensor3D;
  }
  tf.dispose([result.clsAttention, result.clsSelf, result.tokens]);
  return out;
}

export function extract(opts: ExtractOptions): ExtractReport {
  const config = lookupModel(opts.modelId);
  const seed = parseWeightsSource(opts.weights);
  const dense = opts.dense ?? false;
  if (dense && config.kind !== "dense_embedding") {
    throw new ConfigError(
      `${config.modelId} does not expose a dense embedding head`
    );
  }
  const imageNames = listImages(opts.imagesDir);
  fs.mkdirSync(opts.outDir, { recursive: true });

  const backbone = seedWeights(config, seed);
  const entries: { id: string; file: string }[] = [];
  try {
    for (const name of imageNames) {
      const id = name.slice(0, -".npy".length);
      const image = loadImage(path.join(opts.imagesDir, name));
      const features = extractOne(config, backbone, image, dense);
      const outName = `${id}.${config.modelId}.npy`;
      writeNpy(
        path.join(opts.outDir, outName),
        features.dataSync() as Float32Array,
        features.shape
      );
      features.dispose();
      entries.push({ id, file: outName });
    }
  } finally {
    disposeWeights(backbone);
  }

  const fragment = {
    entries: entries.map(({ id, file }) => ({
      id,
      features: { [config.modelId]: file },
    })),
  };
  const fragmentPath = path.join(opts.outDir, "manifest_fragment.json");
  fs.writeFileSync(fragmentPath, JSON.stringify(fragment, null, 2) + "\n");
  return { modelId: config.modelId, entries, fragmentPath };
}
