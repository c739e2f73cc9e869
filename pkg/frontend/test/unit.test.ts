// BoundBatch validation and blob layout; no CLI involved.

import { describe, expect, it } from "vitest";

import {
  BoundBatch,
  PipelineError,
  decodeBatch,
  encodeBatch,
} from "../src/index.js";

function counterBytes(n: number): Uint8Array {
  const a = new Uint8Array(n);
  for (let i = 0; i < n; i++) a[i] = (i * 31 + 7) & 0xff;
  return a;
}

describe("BoundBatch validation", () => {
  it("accepts a well-formed byte batch", () => {
    const b = BoundBatch.fromBytes(counterBytes(2 * 2 * 3 * 4 * 5), [2, 2, 3, 4, 5]);
    expect(b.dtype).toBe("byte");
    expect(b.shape).toEqual([2, 2, 3, 4, 5]);
  });

  it("rejects a length/shape mismatch", () => {
    expect(() => BoundBatch.fromBytes(counterBytes(10), [1, 1, 1, 2, 3]))
      .toThrowError(PipelineError);
  });

  it("rejects channel counts other than 1 and 3", () => {
    expect(() => BoundBatch.fromBytes(counterBytes(1 * 1 * 2 * 2 * 2), [1, 1, 2, 2, 2]))
      .toThrowError(/channel count/);
  });

  it("rejects zero-size dims", () => {
    expect(() => BoundBatch.fromBytes(new Uint8Array(0), [0, 1, 1, 2, 2]))
      .toThrowError(/>= 1/);
  });

  it("rejects real values outside [0, 1]", () => {
    const f = new Float32Array(1 * 1 * 1 * 2 * 2).fill(0.5);
    f[3] = 1.5;
    expect(() => BoundBatch.fromFloats(f, [1, 1, 1, 2, 2]))
      .toThrowError(/\[0, 1\]/);
    f[3] = Number.NaN;
    expect(() => BoundBatch.fromFloats(f, [1, 1, 1, 2, 2]))
      .toThrowError(PipelineError);
  });

  it("accepts real values in range", () => {
    const f = new Float32Array(1 * 1 * 3 * 2 * 2).fill(0.25);
    const b = BoundBatch.fromFloats(f, [1, 1, 3, 2, 2]);
    expect(b.dtype).toBe("real");
    expect(b.floats()[0]).toBeCloseTo(0.25);
  });
});

describe("dispose contract", () => {
  it("bytes() throws after dispose", () => {
    const b = BoundBatch.fromBytes(counterBytes(12), [1, 1, 1, 3, 4]);
    expect(b.disposed).toBe(false);
    b.dispose();
    expect(b.disposed).toBe(true);
    expect(() => b.bytes()).toThrowError(/disposed/);
  });
});

describe("blob layout", () => {
  it("round-trips a byte batch", () => {
    const data = counterBytes(2 * 1 * 3 * 5 * 4);
    const b = BoundBatch.fromBytes(data, [2, 1, 3, 5, 4]);
    const back = decodeBatch(encodeBatch(b));
    expect(back.shape).toEqual([2, 1, 3, 5, 4]);
    expect(back.dtype).toBe("byte");
    expect(Buffer.compare(back.bytes(), Buffer.from(data))).toBe(0);
  });

  it("round-trips a real batch", () => {
    const f = new Float32Array(1 * 2 * 1 * 2 * 2);
    f.forEach((_, i) => (f[i] = i / f.length));
    const b = BoundBatch.fromFloats(f, [1, 2, 1, 2, 2]);
    const back = decodeBatch(encodeBatch(b));
    expect(back.dtype).toBe("real");
    expect(Array.from(back.floats())).toEqual(Array.from(f));
  });

  it("starts with the ASCII header line", () => {
    const b = BoundBatch.fromBytes(counterBytes(4), [1, 1, 1, 2, 2]);
    const blob = encodeBatch(b);
    const header = blob.subarray(0, blob.indexOf(0x0a)).toString("ascii");
    expect(header).toBe("stackaug-batch 1 1 1 1 2 2 byte");
  });

  it("rejects foreign blobs", () => {
    expect(() => decodeBatch(Buffer.from("P6 2 2 255\n....", "ascii")))
      .toThrowError(/stackaug-batch/);
  });
});
