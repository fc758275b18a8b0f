import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ConfigError, DataError } from "../src/errors.js";
import { extract, parseWeightsSource } from "../src/extract.js";
import { main } from "../src/cli.js";
import { readNpy, writeNpy } from "../src/npy.js";
import { Xoshiro256StarStar, deriveStreamSeed } from "../src/rng.js";

let tmpDir: string;

beforeAll(() => {
  tmpDir = fs.mkdtempSync(path.join(os.tmpdir(), "extract-test-"));
});

afterAll(() => {
  fs.rmSync(tmpDir, { recursive: true, force: true });
});

function makeDir(name: string): string {
  const dir = path.join(tmpDir, name);
  fs.mkdirSync(dir, { recursive: true });
  return dir;
}

function writeImage(dir: string, name: string, size: number, seed: bigint): void {
  const rng = new Xoshiro256StarStar(seed);
  const raw = rng.gaussians(size * size * 3);
  const pixels = new Float32Array(raw.length);
  for (let i = 0; i < raw.length; i++) {
    pixels[i] = raw[i];
  }
  writeNpy(path.join(dir, name), pixels, [size, size, 3]);
}

describe("parseWeightsSource", () => {
  it("accepts seed:<n>", () => {
    expect(parseWeightsSource("seed:7")).toBe(7n);
    expect(parseWeightsSource("seed:0")).toBe(0n);
    expect(parseWeightsSource("seed:18446744073709551615")).toBe(
      18446744073709551615n
    );
  });

  it("rejects anything else as a configuration error", () => {
    for (const bad of ["7", "seed:", "seed:-1", "file:weights.bin", "seed:1.5"]) {
      expect(() => parseWeightsSource(bad)).toThrow(ConfigError);
    }
  });
});

describe("extract", () => {
  it("writes one named tensor per image plus a manifest fragment", () => {
    const images = makeDir("in-basic");
    writeImage(images, "scan_b.npy", 64, 1n);
    writeImage(images, "scan_a.npy", 64, 2n);
    const out = makeDir("out-basic");

    const report = extract({
      modelId: "lunit_dino",
      weights: "seed:7",
      imagesDir: images,
      outDir: out,
    });
    expect(report.entries.map((e) => e.id)).toEqual(["scan_a", "scan_b"]);
    expect(report.entries.map((e) => e.file)).toEqual([
      "scan_a.lunit_dino.npy",
      "scan_b.lunit_dino.npy",
    ]);

    const tensor = readNpy(path.join(out, "scan_a.lunit_dino.npy"));
    expect(tensor.dtype).toBe("<f4");
    expect(tensor.shape).toEqual([14, 14, 6]);

    const fragment = JSON.parse(
      fs.readFileSync(path.join(out, "manifest_fragment.json"), "utf8")
    );
    expect(fragment).toEqual({
      entries: [
        { id: "scan_a", features: { lunit_dino: "scan_a.lunit_dino.npy" } },
        { id: "scan_b", features: { lunit_dino: "scan_b.lunit_dino.npy" } },
      ],
    });
  });

  it("resizes non-native images to the backbone's input size", () => {
    const images = makeDir("in-resize");
    writeImage(images, "tiny.npy", 32, 3n);
    const out = makeDir("out-resize");
    extract({
      modelId: "lunit_dino",
      weights: "seed:7",
      imagesDir: images,
      outDir: out,
    });
    const tensor = readNpy(path.join(out, "tiny.lunit_dino.npy"));
    expect(tensor.shape).toEqual([14, 14, 6]);
  });

  it("accepts grayscale images by replicating the channel", () => {
    const images = makeDir("in-gray");
    const rng = new Xoshiro256StarStar(9n);
    const raw = rng.gaussians(48 * 48);
    const pixels = new Float32Array(raw.length);
    for (let i = 0; i < raw.length; i++) {
      pixels[i] = raw[i];
    }
    writeNpy(path.join(images, "gray.npy"), pixels, [48, 48]);
    const out = makeDir("out-gray");
    const report = extract({
      modelId: "lunit_dino",
      weights: "seed:7",
      imagesDir: images,
      outDir: out,
    });
    expect(report.entries).toHaveLength(1);
  });

  it("emits a dense embedding at native resolution when asked", () => {
    const images = makeDir("in-dense");
    writeImage(images, "cell.npy", 64, 4n);
    const out = makeDir("out-dense");
    extract({
      modelId: "cellvit",
      weights: "seed:7",
      imagesDir: images,
      outDir: out,
      dense: true,
    });
    const tensor = readNpy(path.join(out, "cell.cellvit.npy"));
    expect(tensor.shape).toEqual([256, 256, 64]);
  });

  it("refuses dense mode on attention-only backbones", () => {
    const images = makeDir("in-densebad");
    writeImage(images, "x.npy", 32, 5n);
    expect(() =>
      extract({
        modelId: "phikon",
        weights: "seed:7",
        imagesDir: images,
        outDir: makeDir("out-densebad"),
        dense: true,
      })
    ).toThrow(ConfigError);
  });

  it("is deterministic across runs", () => {
    const images = makeDir("in-det");
    writeImage(images, "img.npy", 64, 6n);
    const outA = makeDir("out-det-a");
    const outB = makeDir("out-det-b");
    for (const out of [outA, outB]) {
      extract({
        modelId: "lunit_dino",
        weights: "seed:11",
        imagesDir: images,
        outDir: out,
      });
    }
    const a = fs.readFileSync(path.join(outA, "img.lunit_dino.npy"));
    const b = fs.readFileSync(path.join(outB, "img.lunit_dino.npy"));
    expect(a.equals(b)).toBe(true);
  });

  it("rejects unknown model ids as configuration errors", () => {
    const images = makeDir("in-nomodel");
    writeImage(images, "x.npy", 32, 7n);
    expect(() =>
      extract({
        modelId: "resnet50",
        weights: "seed:7",
        imagesDir: images,
        outDir: makeDir("out-nomodel"),
      })
    ).toThrow(ConfigError);
  });

  it("rejects empty or missing image directories as configuration errors", () => {
    expect(() =>
      extract({
        modelId: "phikon",
        weights: "seed:7",
        imagesDir: makeDir("in-empty"),
        outDir: makeDir("out-empty"),
      })
    ).toThrow(ConfigError);
    expect(() =>
      extract({
        modelId: "phikon",
        weights: "seed:7",
        imagesDir: path.join(tmpDir, "does-not-exist"),
        outDir: makeDir("out-missing"),
      })
    ).toThrow(ConfigError);
  });

  it("rejects unreadable images as data errors", () => {
    const images = makeDir("in-baddata");
    fs.writeFileSync(path.join(images, "broken.npy"), "not an npy file");
    expect(() =>
      extract({
        modelId: "lunit_dino",
        weights: "seed:7",
        imagesDir: images,
        outDir: makeDir("out-baddata"),
      })
    ).toThrow(DataError);
  });

  it("rejects images with unsupported channel counts as data errors", () => {
    const images = makeDir("in-badchan");
    writeNpy(path.join(images, "rgba.npy"), new Float32Array(2 * 2 * 4), [2, 2, 4]);
    expect(() =>
      extract({
        modelId: "lunit_dino",
        weights: "seed:7",
        imagesDir: images,
        outDir: makeDir("out-badchan"),
      })
    ).toThrow(DataError);
  });
});

describe("cli", () => {
  it("runs an extraction end to end and exits 0", async () => {
    const images = makeDir("in-cli");
    writeImage(images, "img.npy", 64, 8n);
    const out = makeDir("out-cli");
    const code = await main([
      "extract",
      "--model", "lunit_dino",
      "--weights", "seed:7",
      "--images", images,
      "--out", out,
    ]);
    expect(code).toBe(0);
    expect(fs.existsSync(path.join(out, "img.lunit_dino.npy"))).toBe(true);
    expect(fs.existsSync(path.join(out, "manifest_fragment.json"))).toBe(true);
  });

  it("exits 2 on configuration errors", async () => {
    const images = makeDir("in-cli2");
    writeImage(images, "img.npy", 32, 9n);
    expect(
      await main([
        "extract",
        "--model", "nope",
        "--weights", "seed:7",
        "--images", images,
        "--out", makeDir("out-cli2"),
      ])
    ).toBe(2);
    expect(
      await main([
        "extract",
        "--model", "phikon",
        "--weights", "checkpoint.pt",
        "--images", images,
        "--out", makeDir("out-cli2b"),
      ])
    ).toBe(2);
  });

  it("exits 2 on missing required flags", async () => {
    expect(await main(["extract", "--model", "phikon"])).toBe(2);
    expect(await main([])).toBe(2);
  });

  it("exits 3 on data errors", async () => {
    const images = makeDir("in-cli3");
    fs.writeFileSync(path.join(images, "broken.npy"), "garbage");
    const code = await main([
      "extract",
      "--model", "lunit_dino",
      "--weights", "seed:7",
      "--images", images,
      "--out", makeDir("out-cli3"),
    ]);
    expect(code).toBe(3);
  });
});
