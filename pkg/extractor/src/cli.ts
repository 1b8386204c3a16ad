#!/usr/bin/env node
/**
 * extract-embeddings: encode corpus keywords with two embedding models
 * and write the atlas embedding-table file.
 *
 *   extract-embeddings --corpus corpus.json --out embeddings.bin \
 *     [--models A B] [--format binary|text] [--backend transformers|hash] \
 *     [--batch-size 16] [--no-normalize] [--hash-dims 1024 1024]
 */

import { makeBackend } from "./backends.js";
import { DEFAULT_MODELS, ExtractorConfig, extractFromCorpus } from "./extract.js";

interface CliOptions {
  corpus: string;
  out: string;
  models: [string, string];
  format: "binary" | "text";
  backend: string;
  batchSize: number;
  normalize: boolean;
  hashDims: [number, number];
}

export function parseArgs(argv: string[]): CliOptions {
  const opts: CliOptions = {
    corpus: "",
    out: "",
    models: [...DEFAULT_MODELS],
    format: "binary",
    backend: "transformers",
    batchSize: 16,
    normalize: true,
    hashDims: [1024, 1024],
  };
  const take = (i: number, flag: string): string => {
    if (i + 1 >= argv.length) throw new UsageError(`${flag} needs a value`);
    return argv[i + 1];
  };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    switch (arg) {
      case "--corpus":
        opts.corpus = take(i, arg); i += 1; break;
      case "--out":
        opts.out = take(i, arg); i += 1; break;
      case "--models":
        opts.models = [take(i, arg), take(i + 1, arg)]; i += 2; break;
      case "--format": {
        const fmt = take(i, arg);
        if (fmt !== "binary" && fmt !== "text") throw new UsageError(`bad format "${fmt}"`);
        opts.format = fmt; i += 1; break;
      }
      case "--backend":
        opts.backend = take(i, arg); i += 1; break;
      case "--batch-size":
        opts.batchSize = Number.parseInt(take(i, arg), 10); i += 1; break;
      case "--no-normalize":
        opts.normalize = false; break;
      case "--hash-dims":
        opts.hashDims = [Number.parseInt(take(i, arg), 10),
                         Number.parseInt(take(i + 1, arg), 10)];
        i += 2; break;
      case "--help":
      case "-h":
        throw new UsageError("");
      default:
        throw new UsageError(`unknown flag ${arg}`);
    }
  }
  if (!opts.corpus || !opts.out) throw new UsageError("--corpus and --out are required");
  if (!Number.isFinite(opts.batchSize) || opts.batchSize < 1) {
    throw new UsageError("--batch-size must be a positive integer");
  }
  return opts;
}

class UsageError extends Error {}

const USAGE = `usage: extract-embeddings --corpus corpus.json --out embeddings.bin
  [--models A B] [--format binary|text] [--backend transformers|hash]
  [--batch-size N] [--no-normalize] [--hash-dims DA DB]`;

export async function main(argv: string[]): Promise<number> {
  let opts: CliOptions;
  try {
    opts = parseArgs(argv);
  } catch (err) {
    if (err instanceof UsageError) {
      if (err.message) console.error(`error: ${err.message}`);
      console.error(USAGE);
      return err.message ? 2 : 0;
    }
    throw err;
  }
  const config: ExtractorConfig = {
    models: opts.models,
    batchSize: opts.batchSize,
    outputPath: opts.out,
    format: opts.format,
    normalizePerModel: opts.normalize,
  };
  const hashDims = new Map<string, number>([
    [opts.models[0], opts.hashDims[0]],
    [opts.models[1], opts.hashDims[1]],
  ]);
  try {
    const backend = makeBackend(opts.backend, hashDims);
    const result = await extractFromCorpus(opts.corpus, config, backend);
    console.log(JSON.stringify({
      keywords: result.keywords,
      dimension: result.dimension,
      model_dimensions: result.modelDimensions,
      out: opts.out,
    }));
    return 0;
  } catch (err) {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    return 1;
  }
}

const invokedDirectly = process.argv[1] !== undefined
  && import.meta.url.endsWith(process.argv[1].split("/").pop() ?? "");
if (invokedDirectly) {
  main(process.argv.slice(2)).then((code) => process.exit(code));
}
