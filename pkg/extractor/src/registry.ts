/** Architecture geometry per model id.
 *
 * Native input size, patch size, and head count follow each backbone's
 * published configuration — they determine the output token grid and
 * channel count, which is what the benchmarking engine consumes. The
 * embedding width and depth are deliberately small: weights here are
 * seeded, not pretrained, so only the attention geometry matters.
 */

import { ConfigError } from "./errors.js";

export type FeatureKind = "cls_attention_heads" | "dense_embedding";

export interface ModelConfig {
  modelId: string;
  displayName: string;
  inputSize: number; // square native input, pixels
  patchSize: number;
  heads: number;
  headDim: number;
  depth: number;
  kind: FeatureKind;
  denseChannels: number; // used by dense_embedding mode
}

function vit(
  modelId: string,
  displayName: string,
  inputSize: number,
  patchSize: number,
  heads: number,
  kind: FeatureKind = "cls_attention_heads"
): ModelConfig {
  return {
    modelId,
    displayName,
    inputSize,
    patchSize,
    heads,
    headDim: 8,
    depth: 2,
    kind,
    denseChannels: 64,
  };
}

export const MODEL_REGISTRY: Record<string, ModelConfig> = Object.fromEntries(
  [
    vit("virchow", "Virchow", 224, 14, 16),
    vit("phikon", "Phikon", 224, 16, 12),
    vit("uni", "UNI", 224, 16, 16),
    vit("hipt", "HIPT", 256, 16, 6),
    vit("lunit_dino", "Lunit DINO", 224, 16, 6),
    vit("pathdino", "PathDino", 512, 16, 6),
    vit("cellvit", "CellViT", 256, 16, 6, "dense_embedding"),
    vit("phikon_v2", "Phikon-v2", 224, 16, 16),
    vit("virchow2", "Virchow2", 224, 14, 16),
    vit("conch", "CONCH", 448, 16, 12),
  ].map((c) => [c.modelId, c])
);

export function lookupModel(modelId: string): ModelConfig {
  const config = MODEL_REGISTRY[modelId];
  if (config === undefined) {
    const known = Object.keys(MODEL_REGISTRY).sort().join(", ");
    throw new ConfigError(`unknown model '${modelId}' (known: ${known})`);
  }
  return config;
}

export function tokenGrid(config: ModelConfig): number {
  if (config.inputSize % config.patchSize !== 0) {
    throw new ConfigError(
      `${config.modelId}: input ${config.inputSize} not divisible by patch ${config.patchSize}`
    );
  }
  return config.inputSize / config.patchSize;
}
