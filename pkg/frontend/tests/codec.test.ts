import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  base64ToBytes,
  bytesToBase64,
  decodeImagePng,
  decodeMaskPng,
  dequantizeMask,
  encodeImagePng,
  encodeMaskPng,
  quantizeMask,
} from "../src/codec";

const FIXTURES = join(__dirname, "fixtures");

function fixtureB64(name: string): string {
  return readFileSync(join(FIXTURES, name)).toString("base64");
}

describe("base64", () => {
  it("round-trips arbitrary bytes", () => {
    const bytes = new Uint8Array(1000).map((_, i) => (i * 7 + 13) % 256);
    expect(base64ToBytes(bytesToBase64(bytes))).toEqual(bytes);
  });
});

describe("png codec", () => {
  it("round-trips a grayscale mask bit-exactly", () => {
    const data = new Uint8Array(64).map((_, i) => (i * 37) % 256);
    const raster = { width: 8, height: 8, data };
    const decoded = decodeMaskPng(encodeMaskPng(raster));
    expect(decoded).toEqual(raster);
  });

  it("round-trips an RGB image bit-exactly", () => {
    const data = new Uint8Array(8 * 8 * 3).map((_, i) => (i * 11 + 3) % 256);
    const raster = { width: 8, height: 8, data };
    expect(decodeImagePng(encodeImagePng(raster))).toEqual(raster);
  });

  it("decodes a grayscale PNG written by the service stack", () => {
    const decoded = decodeMaskPng(fixtureB64("gray_noise.png"));
    const expected = new Uint8Array(readFileSync(join(FIXTURES, "gray_noise.bin")));
    expect(decoded.width).toBe(16);
    expect(decoded.height).toBe(16);
    expect(decoded.data).toEqual(expected);
  });

  it("decodes an RGB PNG written by the service stack", () => {
    const decoded = decodeImagePng(fixtureB64("rgb_noise.png"));
    const expected = new Uint8Array(readFileSync(join(FIXTURES, "rgb_noise.bin")));
    expect(decoded.width).toBe(16);
    expect(decoded.height).toBe(16);
    expect(decoded.data).toEqual(expected);
  });

  it("rejects non-PNG payloads", () => {
    expect(() => decodeMaskPng(bytesToBase64(new Uint8Array([1, 2, 3])))).toThrow(/not a PNG/);
  });
});

describe("mask quantization", () => {
  it("maps 255 to 1.0 and 0 to 0.0", () => {
    const values = dequantizeMask(new Uint8Array([0, 255, 128]));
    expect(values[0]).toBe(0);
    expect(values[1]).toBe(1);
    expect(values[2]).toBeCloseTo(128 / 255, 6);
  });

  it("changes any pixel by at most 1/255 across encode -> decode", () => {
    const values = new Float32Array(256).map(() => Math.random());
    const back = dequantizeMask(quantizeMask(values));
    for (let i = 0; i < values.length; i++) {
      expect(Math.abs(back[i] - values[i])).toBeLessThanOrEqual(1 / 255 + 1e-7);
    }
  });

  it("quantization is idempotent", () => {
    const values = new Float32Array(64).map(() => Math.random());
    const once = quantizeMask(values);
    expect(quantizeMask(dequantizeMask(once))).toEqual(once);
  });

  it("clamps out-of-range values", () => {
    expect(quantizeMask(new Float32Array([-0.5, 1.5]))).toEqual(new Uint8Array([0, 255]));
  });
});
