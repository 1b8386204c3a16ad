import { mkdtempSync, readFileSync, readdirSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  atomicWrite,
  encodeBinaryTable,
  encodeTextTable,
  normalizeKeyword,
  readCorpusKeywords,
} from "../src/table.js";

describe("normalizeKeyword", () => {
  it("lower-cases, trims, collapses whitespace, keeps hyphens", () => {
    expect(normalizeKeyword("  Tissue   Engineering ")).toBe("tissue engineering");
    expect(normalizeKeyword("tissue-engineering")).toBe("tissue-engineering");
    expect(normalizeKeyword("Plant")).toBe("plant");
  });
});

describe("binary table layout", () => {
  it("matches the AXEB byte spec exactly", () => {
    const entries = new Map<string, Float32Array>([
      ["plant", Float32Array.from([1, 0, -0.5])],
      ["data", Float32Array.from([0.25, -1.5, 3])],
    ]);
    const buf = encodeBinaryTable(entries, 3);
    expect(buf.subarray(0, 4).toString("ascii")).toBe("AXEB");
    expect(buf.readUInt32LE(4)).toBe(1); // version
    expect(buf.readUInt32LE(8)).toBe(3); // dimension
    expect(buf.readUInt32LE(12)).toBe(2); // count
    let off = 16;
    const records: Array<[string, number[]]> = [];
    for (let r = 0; r < 2; r++) {
      const len = buf.readUInt32LE(off);
      off += 4;
      const kw = buf.subarray(off, off + len).toString("utf-8");
      off += len;
      const vec: number[] = [];
      for (let i = 0; i < 3; i++) {
        vec.push(buf.readFloatLE(off));
        off += 4;
      }
      records.push([kw, vec]);
    }
    expect(off).toBe(buf.length); // no trailing bytes
    expect(records[0][0]).toBe("plant");
    expect(records[0][1]).toEqual([1, 0, -0.5]);
    expect(records[1][0]).toBe("data");
    expect(records[1][1]).toEqual([0.25, -1.5, 3]);
  });

  it("rejects wrong-width vectors", () => {
    const entries = new Map([["x", Float32Array.from([1, 2])]]);
    expect(() => encodeBinaryTable(entries, 3)).toThrow(/expected 3/);
  });
});

describe("text table", () => {
  it("writes the dim header and tab-separated records", () => {
    const entries = new Map([["plant", Float32Array.from([1, 0.5])]]);
    const text = encodeTextTable(entries, 2);
    const lines = text.trimEnd().split("\n");
    expect(lines[0]).toBe("dim=2");
    expect(lines[1].split("\t")[0]).toBe("plant");
    expect(Number(lines[1].split("\t")[1])).toBe(1);
  });
});

describe("corpus reading + atomic write", () => {
  it("collects distinct normalized keywords and writes atomically", () => {
    const dir = mkdtempSync(join(tmpdir(), "extractor-"));
    const corpus = {
      axes: ["Materiality", "Methodology"],
      works: [
        { id: "w1", title: "t", artist: "a", year: 2000,
          keywords: { Materiality: ["Plant", "plant", "cell  culture"] } },
        { id: "w2", title: "t", artist: "a", year: 2001,
          keywords: { Methodology: ["Data Viz"] } },
      ],
    };
    const corpusPath = join(dir, "corpus.json");
    writeFileSync(corpusPath, JSON.stringify(corpus));
    expect(readCorpusKeywords(corpusPath)).toEqual(["cell culture", "data viz", "plant"]);

    const out = join(dir, "table.bin");
    atomicWrite(out, Buffer.from("payload"));
    expect(readFileSync(out).toString()).toBe("payload");
    expect(readdirSync(dir).filter((f) => f.includes(".tmp-"))).toEqual([]);
  });
});
