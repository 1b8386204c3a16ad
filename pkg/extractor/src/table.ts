/**
 * Embedding-table file formats shared with the atlas pipeline.
 *
 * Binary AXEB: magic "AXEB", u32 version, u32 dimension, u32 count,
 * then per record a u32 byte length, the UTF-8 keyword, and `dimension`
 * little-endian float32 values. Must round-trip bit-exactly.
 *
 * Text: first line `dim=<D>`, then one tab-separated record per keyword.
 */

import { createHash } from "node:crypto";
import { readFileSync, renameSync, writeFileSync } from "node:fs";

export const FORMAT_VERSION = 1;

/** Canonical keyword form used by the atlas loader: lower-cased, trimmed,
 * inner whitespace runs collapsed. Hyphens are preserved. */
export function normalizeKeyword(raw: string): string {
  return raw.trim().replace(/\s+/g, " ").toLowerCase();
}

export interface CorpusWork {
  id: string;
  keywords: Record<string, string[]>;
}

/** Distinct normalized keywords of a corpus annotation file, sorted. */
export function readCorpusKeywords(corpusPath: string): string[] {
  const doc = JSON.parse(readFileSync(corpusPath, "utf-8"));
  if (!Array.isArray(doc.works)) {
    throw new Error(`${corpusPath}: corpus document has no works array`);
  }
  const seen = new Set<string>();
  for (const work of doc.works as CorpusWork[]) {
    for (const kws of Object.values(work.keywords ?? {})) {
      for (const kw of kws) {
        const norm = normalizeKeyword(kw);
        if (norm) seen.add(norm);
      }
    }
  }
  return [...seen].sort();
}

export function encodeBinaryTable(
  entries: Map<string, Float32Array>,
  dimension: number,
): Buffer {
  const parts: Buffer[] = [];
  const header = Buffer.alloc(16);
  header.write("AXEB", 0, "ascii");
  header.writeUInt32LE(FORMAT_VERSION, 4);
  header.writeUInt32LE(dimension, 8);
  header.writeUInt32LE(entries.size, 12);
  parts.push(header);
  for (const [keyword, vec] of entries) {
    if (vec.length !== dimension) {
      throw new Error(`vector for "${keyword}" has ${vec.length} values, expected ${dimension}`);
    }
    const raw = Buffer.from(keyword, "utf-8");
    const len = Buffer.alloc(4);
    len.writeUInt32LE(raw.length, 0);
    const data = Buffer.alloc(4 * dimension);
    for (let i = 0; i < dimension; i++) {
      data.writeFloatLE(vec[i], 4 * i);
    }
    parts.push(len, raw, data);
  }
  return Buffer.concat(parts);
}

export function encodeTextTable(
  entries: Map<string, Float32Array>,
  dimension: number,
): string {
  const lines = [`dim=${dimension}`];
  for (const [keyword, vec] of entries) {
    if (vec.length !== dimension) {
      throw new Error(`vector for "${keyword}" has ${vec.length} values, expected ${dimension}`);
    }
    const values = Array.from(vec, (v) => v.toString());
    lines.push(`${keyword}\t${values.join("\t")}`);
  }
  return lines.join("\n") + "\n";
}

/** Write through a temp file and rename, so readers never see a torn file. */
export function atomicWrite(path: string, payload: Buffer | string): void {
  const digest = createHash("sha256")
    .update(typeof payload === "string" ? Buffer.from(payload) : payload)
    .digest("hex")
    .slice(0, 8);
  const tmp = `${path}.tmp-${digest}`;
  writeFileSync(tmp, payload);
  renameSync(tmp, path);
}
