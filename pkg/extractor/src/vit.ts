/** A small ViT-style encoder with seeded weights, instrumented to expose
 * the last block's post-softmax CLS-to-patch attention per head.
 *
 * Forward pass is the standard pre-LayerNorm transformer: patch embedding
 * plus learned positions and a CLS token, then depth x (attention + MLP)
 * residual blocks. The exported feature is the CLS row of the final
 * block's attention matrix, reshaped to the token grid with one channel
 * per head; dense mode instead projects the final patch tokens to a fixed
 * channel count and bilinearly upsamples them to input resolution.
 */

import * as tf from "@tensorflow/tfjs";

import { ModelError } from "./errors.js";
import { ModelConfig, tokenGrid } from "./registry.js";
import { Xoshiro256StarStar, deriveStreamSeed } from "./rng.js";

const IMAGE_CHANNELS = 3;
const WEIGHT_SCALE = 0.02;
const LN_EPSILON = 1e-6;

interface BlockWeights {
  ln1Scale: tf.Tensor1D;
  ln1Bias: tf.Tensor1D;
  wqkv: tf.Tensor2D;
  bqkv: tf.Tensor1D;
  wproj: tf.Tensor2D;
  bproj: tf.Tensor1D;
  ln2Scale: tf.Tensor1D;
  ln2Bias: tf.Tensor1D;
  wmlp1: tf.Tensor2D;
  bmlp1: tf.Tensor1D;
  wmlp2: tf.Tensor2D;
  bmlp2: tf.Tensor1D;
}

export interface BackboneWeights {
  patchEmbed: tf.Tensor2D; // [patch*patch*3, dim]
  patchBias: tf.Tensor1D;
  clsToken: tf.Tensor2D; // [1, dim]
  posEmbed: tf.Tensor2D; // [tokens+1, dim]
  blocks: BlockWeights[];
  denseProj: tf.Tensor2D; // [dim, denseChannels]
}

export interface AttentionResult {
  /** [grid, grid, heads], post-softmax CLS attention to each patch. */
  clsAttention: tf.Tensor3D;
  /** [heads], the CLS token's attention to itself (the remaining mass). */
  clsSelf: tf.Tensor1D;
  /** [tokens, dim] final patch embeddings (CLS removed). */
  tokens: tf.Tensor2D;
}

function seededTensor(
  seed: bigint,
  name: string,
  shape: number[],
  scale: number
): tf.Tensor {
  const count = shape.reduce((a, b) => a * b, 1);
  const rng = new Xoshiro256StarStar(deriveStreamSeed(seed, name));
  const raw = rng.gaussians(count);
  const values = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    values[i] = raw[i] * scale;
  }
  return tf.tensor(values, shape);
}

export function seedWeights(config: ModelConfig, seed: bigint): BackboneWeights {
  if (config.depth < 1) {
    throw new ModelError(`${config.modelId}: backbone has no attention block to hook`);
  }
  const dim = config.heads * config.headDim;
  const grid = tokenGrid(config);
  const tokens = grid * grid;
  const patchDim = config.patchSize * config.patchSize * IMAGE_CHANNELS;

  const blocks: BlockWeights[] = [];
  for (let b = 0; b < config.depth; b++) {
    blocks.push({
      ln1Scale: tf.ones([dim]),
      ln1Bias: tf.zeros([dim]),
      wqkv: seededTensor(seed, `block${b}.wqkv`, [dim, 3 * dim], WEIGHT_SCALE) as tf.Tensor2D,
      bqkv: tf.zeros([3 * dim]),
      wproj: seededTensor(seed, `block${b}.wproj`, [dim, dim], WEIGHT_SCALE) as tf.Tensor2D,
      bproj: tf.zeros([dim]),
      ln2Scale: tf.ones([dim]),
      ln2Bias: tf.zeros([dim]),
      wmlp1: seededTensor(seed, `block${b}.wmlp1`, [dim, 2 * dim], WEIGHT_SCALE) as tf.Tensor2D,
      bmlp1: tf.zeros([2 * dim]),
      wmlp2: seededTensor(seed, `block${b}.wmlp2`, [2 * dim, dim], WEIGHT_SCALE) as tf.Tensor2D,
      bmlp2: tf.zeros([dim]),
    });
  }
  return {
    patchEmbed: seededTensor(seed, "patch_embed", [patchDim, dim], WEIGHT_SCALE) as tf.Tensor2D,
    patchBias: tf.zeros([dim]),
    clsToken: seededTensor(seed, "cls_token", [1, dim], WEIGHT_SCALE) as tf.Tensor2D,
    posEmbed: seededTensor(seed, "pos_embed", [tokens + 1, dim], WEIGHT_SCALE) as tf.Tensor2D,
    blocks,
    denseProj: seededTensor(seed, "dense_proj", [dim, config.denseChannels], WEIGHT_SCALE) as tf.Tensor2D,
  };
}

export function disposeWeights(weights: BackboneWeights): void {
  tf.dispose([
    weights.patchEmbed, weights.patchBias, weights.clsToken,
    weights.posEmbed, weights.denseProj,
  ]);
  for (const block of weights.blocks) {
    tf.dispose(Object.values(block));
  }
}

function layerNorm(x: tf.Tensor2D, scale: tf.Tensor1D, bias: tf.Tensor1D): tf.Tensor2D {
  const { mean, variance } = tf.moments(x, -1, true);
  const normed = tf.div(tf.sub(x, mean), tf.sqrt(tf.add(variance, LN_EPSILON)));
  return tf.add(tf.mul(normed, scale), bias) as tf.Tensor2D;
}

function gelu(x: tf.Tensor2D): tf.Tensor2D {
  // tanh approximation of the Gaussian error linear unit
  const inner = tf.mul(
    Math.sqrt(2 / Math.PI),
    tf.add(x, tf.mul(0.044715, tf.pow(x, 3)))
  );
  return tf.mul(tf.mul(x, 0.5), tf.add(1, tf.tanh(inner))) as tf.Tensor2D;
}

/** Self-attention over [t, dim] rows; returns the residual update and the
 * full post-softmax attention matrix [heads, t, t]. */
function selfAttention(
  x: tf.Tensor2D,
  block: BlockWeights,
  heads: number,
  headDim: number
): { update: tf.Tensor2D; attention: tf.Tensor3D } {
  const t = x.shape[0];
  const qkv = tf.add(tf.matMul(x, block.wqkv), block.bqkv) as tf.Tensor2D;
  const [q, k, v] = tf.split(qkv, 3, 1);
  const toHeads = (m: tf.Tensor2D): tf.Tensor3D =>
    tf.transpose(tf.reshape(m, [t, heads, headDim]), [1, 0, 2]) as tf.Tensor3D;
  const qh = toHeads(q as tf.Tensor2D);
  const kh = toHeads(k as tf.Tensor2D);
  const vh = toHeads(v as tf.Tensor2D);
  const scores = tf.div(tf.matMul(qh, kh, false, true), Math.sqrt(headDim));
  const attention = tf.softmax(scores) as tf.Tensor3D;
  const mixed = tf.matMul(attention, vh); // [heads, t, headDim]
  const merged = tf.reshape(
    tf.transpose(mixed, [1, 0, 2]),
    [t, heads * headDim]
  ) as tf.Tensor2D;
  const update = tf.add(tf.matMul(merged, block.wproj), block.bproj) as tf.Tensor2D;
  return { update, attention };
}

/** Run the backbone on one [inputSize, inputSize, 3] image. */
export function forward(
  config: ModelConfig,
  weights: BackboneWeights,
  image: tf.Tensor3D
): AttentionResult {
  return tf.tidy(() => {
    const grid = tokenGrid(config);
    const tokens = grid * grid;
    const p = config.patchSize;
    const dim = config.heads * config.headDim;

    // [H, W, 3] -> [tokens, p*p*3], patches in row-major grid order
    const patches = tf.reshape(
      tf.transpose(
        tf.reshape(image, [grid, p, grid, p, IMAGE_CHANNELS]),
        [0, 2, 1, 3, 4]
      ),
      [tokens, p * p * IMAGE_CHANNELS]
    ) as tf.Tensor2D;

    const embedded = tf.add(
      tf.matMul(patches, weights.patchEmbed),
      weights.patchBias
    ) as tf.Tensor2D;
    let x = tf.add(
      tf.concat([weights.clsToken, embedded], 0),
      weights.posEmbed
    ) as tf.Tensor2D;

    let lastAttention: tf.Tensor3D | null = null;
    for (const block of weights.blocks) {
      const { update, attention } = selfAttention(
        layerNorm(x, block.ln1Scale, block.ln1Bias),
        block,
        config.heads,
        config.headDim
      );
      lastAttention = attention;
      x = tf.add(x, update) as tf.Tensor2D;
      const h1 = gelu(
        tf.add(
          tf.matMul(layerNorm(x, block.ln2Scale, block.ln2Bias), block.wmlp1),
          block.bmlp1
        ) as tf.Tensor2D
      );
      x = tf.add(x, tf.add(tf.matMul(h1, block.wmlp2), block.bmlp2)) as tf.Tensor2D;
    }
    if (lastAttention === null) {
      throw new ModelError(`${config.modelId}: no attention block was run`);
    }

    // CLS row: column 0 is the CLS token's attention to itself, the rest
    // map one-to-one onto the patch grid.
    const clsRow = tf.slice(lastAttention, [0, 0, 0], [config.heads, 1, tokens + 1]);
    const clsToPatches = tf.slice(
      clsRow, [0, 0, 1], [config.heads, 1, tokens]
    );
    const clsAttention = tf.transpose(
      tf.reshape(clsToPatches, [config.heads, grid, grid]),
      [1, 2, 0]
    ) as tf.Tensor3D;
    const clsSelf = tf.reshape(
      tf.slice(clsRow, [0, 0, 0], [config.heads, 1, 1]),
      [config.heads]
    ) as tf.Tensor1D;
    const patchTokens = tf.slice(x, [1, 0], [tokens, dim]) as tf.Tensor2D;
    return { clsAttention, clsSelf, tokens: patchTokens };
  });
}

/** Dense mode: project final patch tokens to a fixed channel count and
 * upsample to input resolution, half-pixel-center bilinear. */
export function denseEmbedding(
  config: ModelConfig,
  weights: BackboneWeights,
  result: AttentionResult
): tf.Tensor3D {
  return tf.tidy(() => {
    const grid = tokenGrid(config);
    const projected = tf.matMul(result.tokens, weights.denseProj);
    const asImage = tf.reshape(projected, [1, grid, grid, config.denseChannels]);
    const upsampled = tf.image.resizeBilinear(
      asImage as tf.Tensor4D,
      [config.inputSize, config.inputSize],
      false,
      true
    );
    return tf.reshape(
      upsampled,
      [config.inputSize, config.inputSize, config.denseChannels]
    ) as tf.Tensor3D;
  });
}
