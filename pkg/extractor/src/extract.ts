/**
 * Core extraction: encode every corpus keyword with two models,
 * concatenate the vectors, and write the embedding-table file consumed
 * by the atlas pipeline, plus a small metadata sidecar for audit.
 */

import { writeFileSync } from "node:fs";

import { EmbeddingBackend } from "./backends.js";
import {
  atomicWrite,
  encodeBinaryTable,
  encodeTextTable,
  readCorpusKeywords,
} from "./table.js";

export const DEFAULT_MODELS: [string, string] = [
  "BAAI/bge-large-en-v1.5",
  "Alibaba-NLP/gte-large-en-v1.5",
];

export interface ExtractorConfig {
  models: [string, string];
  batchSize: number;
  outputPath: string;
  format: "binary" | "text";
  normalizePerModel: boolean;
}

export interface ExtractResult {
  keywords: number;
  dimension: number;
  modelDimensions: [number, number];
}

function l2Normalize(vec: Float32Array): Float32Array {
  let sq = 0;
  for (let i = 0; i < vec.length; i++) sq += vec[i] * vec[i];
  const norm = Math.sqrt(sq);
  if (norm === 0) return vec;
  const out = new Float32Array(vec.length);
  for (let i = 0; i < vec.length; i++) out[i] = vec[i] / norm;
  return out;
}

export async function extract(
  keywords: string[],
  config: ExtractorConfig,
  backend: EmbeddingBackend,
): Promise<ExtractResult> {
  if (keywords.length === 0) {
    throw new Error("no keywords to encode");
  }
  const [modelA, modelB] = config.models;
  const dims: [number, number] = [
    await backend.dimension(modelA),
    await backend.dimension(modelB),
  ];
  const dimension = dims[0] + dims[1];

  const entries = new Map<string, Float32Array>();
  for (let start = 0; start < keywords.length; start += config.batchSize) {
    const batch = keywords.slice(start, start + config.batchSize);
    const [vecsA, vecsB] = await Promise.all([
      backend.encode(modelA, batch),
      backend.encode(modelB, batch),
    ]);
    batch.forEach((kw, i) => {
      let a = vecsA[i];
      let b = vecsB[i];
      if (a.length !== dims[0] || b.length !== dims[1]) {
        throw new Error(`encoding failed for keyword "${kw}": unexpected dimensions`);
      }
      if (config.normalizePerModel) {
        a = l2Normalize(a);
        b = l2Normalize(b);
      }
      const joined = new Float32Array(dimension);
      joined.set(a, 0);
      joined.set(b, dims[0]);
      entries.set(kw, joined);
    });
  }

  if (config.format === "binary") {
    atomicWrite(config.outputPath, encodeBinaryTable(entries, dimension));
  } else {
    atomicWrite(config.outputPath, encodeTextTable(entries, dimension));
  }
  const meta = {
    models: config.models,
    model_dimensions: dims,
    dimension,
    keywords: keywords.length,
    normalize_per_model: config.normalizePerModel,
    format: config.format,
  };
  writeFileSync(`${config.outputPath}.meta.json`, JSON.stringify(meta, null, 2) + "\n");
  return { keywords: keywords.length, dimension, modelDimensions: dims };
}

export async function extractFromCorpus(
  corpusPath: string,
  config: ExtractorConfig,
  backend: EmbeddingBackend,
): Promise<ExtractResult> {
  return extract(readCorpusKeywords(corpusPath), config, backend);
}
