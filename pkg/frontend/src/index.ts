/**
 * Buffer-level bindings for the stackaug augmentation core.
 *
 * Every call shells out to the native CLI, so all randomness and all pixel
 * math live in one place; this layer only moves contiguous buffers across
 * the process boundary (one copy in, one copy out) and translates errors.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export type DtypeTag = "byte" | "real";

/** (B, S, C, H, W): batch, stacked frames, channels, rows, columns. */
export type BatchShape = readonly [number, number, number, number, number];

export interface CliOptions {
  /** Executable to invoke; defaults to $STACKAUG_BIN, then "stackaug". */
  bin?: string;
}

/** Error from the core, carrying its exit code and untouched message text. */
export class PipelineError extends Error {
  constructor(
    message: string,
    readonly kind: "config" | "numerics",
    readonly exitCode: number,
  ) {
    super(message);
    this.name = "PipelineError";
  }
}

function validateShape(shape: BatchShape, dtype: DtypeTag, length: number): void {
  if (shape.length !== 5) {
    throw new PipelineError(
      `batch shape needs 5 dims (B,S,C,H,W), got ${shape.length}`, "config", 2);
  }
  const [b, s, c, h, w] = shape;
  for (const v of shape) {
    if (!Number.isInteger(v)) {
      throw new PipelineError(`batch dims must be integers, got ${shape}`, "config", 2);
    }
  }
  if (Math.min(b, s, h, w) < 1) {
    throw new PipelineError(`B,S,H,W must be >= 1, got ${shape}`, "config", 2);
  }
  if (c !== 1 && c !== 3) {
    throw new PipelineError(`channel count must be 1 or 3, got ${c}`, "config", 2);
  }
  const want = b * s * c * h * w;
  if (length !== want) {
    throw new PipelineError(
      `buffer holds ${length} elements, shape ${shape} needs ${want}`, "config", 2);
  }
  if (dtype !== "byte" && dtype !== "real") {
    throw new PipelineError(`unsupported dtype tag ${dtype}`, "config", 2);
  }
}

/**
 * A validated batch bound to one contiguous buffer.
 *
 * Dispose contract: call dispose() when done; any access afterwards throws.
 * The class never copies the buffer it is handed.
 */
export class BoundBatch {
  #data: Buffer | null;
  readonly shape: BatchShape;
  readonly dtype: DtypeTag;

  constructor(data: Buffer, shape: BatchShape, dtype: DtypeTag) {
    const itemsize = dtype === "byte" ? 1 : 4;
    if (data.length % itemsize !== 0) {
      throw new PipelineError(
        `buffer of ${data.length} bytes is not a whole number of ${dtype} items`,
        "config", 2);
    }
    validateShape(shape, dtype, data.length / itemsize);
    if (dtype === "real") {
      const view = new Float32Array(data.buffer, data.byteOffset, data.length / 4);
      for (let i = 0; i < view.length; i++) {
        const v = view[i];
        if (!(v >= 0 && v <= 1)) {
          throw new PipelineError(
            "real batch values must lie in [0, 1]", "config", 2);
        }
      }
    }
    this.#data = data;
    this.shape = [...shape] as unknown as BatchShape;
    this.dtype = dtype;
  }

  static fromBytes(data: Uint8Array, shape: BatchShape): BoundBatch {
    return new BoundBatch(
      Buffer.from(data.buffer, data.byteOffset, data.byteLength), shape, "byte");
  }

  static fromFloats(data: Float32Array, shape: BatchShape): BoundBatch {
    return new BoundBatch(
      Buffer.from(data.buffer, data.byteOffset, data.byteLength), shape, "real");
  }

  get disposed(): boolean {
    return this.#data === null;
  }

  /** The raw little-endian payload; valid until dispose(). */
  bytes(): Buffer {
    if (this.#data === null) {
      throw new PipelineError("batch was disposed", "config", 2);
    }
    return this.#data;
  }

  floats(): Float32Array {
    if (this.dtype !== "real") {
      throw new PipelineError("floats() needs a real batch", "config", 2);
    }
    const raw = this.bytes();
    return new Float32Array(raw.buffer, raw.byteOffset, raw.length / 4);
  }

  /** Release the buffer handle; the batch is unusable afterwards. */
  dispose(): void {
    this.#data = null;
  }
}

const BATCH_MAGIC = "stackaug-batch";
const BATCH_VERSION = 1;

/** Serialize to the core's batch file layout: one ASCII header line + payload. */
export function encodeBatch(batch: BoundBatch): Buffer {
  const [b, s, c, h, w] = batch.shape;
  const header = `${BATCH_MAGIC} ${BATCH_VERSION} ${b} ${s} ${c} ${h} ${w} ${batch.dtype}\n`;
  return Buffer.concat([Buffer.from(header, "ascii"), batch.bytes()]);
}

export function decodeBatch(blob: Buffer): BoundBatch {
  const nl = blob.indexOf(0x0a);
  if (nl < 0) {
    throw new PipelineError("batch blob has no header line", "config", 2);
  }
  const fields = blob.subarray(0, nl).toString("ascii").split(" ");
  if (fields.length !== 8 || fields[0] !== BATCH_MAGIC) {
    throw new PipelineError(`not a ${BATCH_MAGIC} blob`, "config", 2);
  }
  if (Number(fields[1]) !== BATCH_VERSION) {
    throw new PipelineError(`unsupported version ${fields[1]}`, "config", 2);
  }
  const shape = fields.slice(2, 7).map(Number) as unknown as BatchShape;
  const dtype = fields[7] as DtypeTag;
  const payload = blob.subarray(nl + 1);
  return new BoundBatch(Buffer.from(payload), shape, dtype);
}

function cliBin(options?: CliOptions): string {
  return options?.bin ?? process.env.STACKAUG_BIN ?? "stackaug";
}

function runCli(args: string[], options?: CliOptions): string {
  const bin = cliBin(options);
  const res = spawnSync(bin, args, { encoding: "utf8", maxBuffer: 1 << 28 });
  if (res.error) {
    throw new PipelineError(`cannot run ${bin}: ${res.error.message}`, "config", 2);
  }
  if (res.status === 0) {
    return res.stdout;
  }
  // the core prints "config error: <text>" / "numerics error: <text>";
  // surface <text> untouched so messages match the native path
  const line = (res.stderr ?? "").trim().split("\n").pop() ?? "";
  const m = line.match(/^(config|numerics) error: (.*)$/s);
  if (m) {
    throw new PipelineError(m[2], m[1] as "config" | "numerics", res.status ?? 1);
  }
  throw new PipelineError(
    `${bin} exited with code ${res.status}: ${line}`, "config", res.status ?? 1);
}

function inTempDir<T>(fn: (dir: string) => T): T {
  const dir = mkdtempSync(join(tmpdir(), "stackaug-"));
  try {
    return fn(dir);
  } finally {
    rmSync(dir, { recursive: true, force: true });
  }
}

/**
 * Run an augmentation pipeline over a contiguous buffer.
 *
 * The buffer/shape pair is validated with the core's batch rules, handed to
 * the native CLI, and the augmented payload is returned as a new BoundBatch.
 * Identical (buffer, shape, spec, seed) always yields identical bytes.
 */
export function augmentBuffer(
  buffer: Uint8Array | Float32Array,
  shape: BatchShape,
  pipelineSpec: string,
  seed: number,
  options?: CliOptions & { workers?: number },
): BoundBatch {
  const batch = buffer instanceof Float32Array
    ? BoundBatch.fromFloats(buffer, shape)
    : BoundBatch.fromBytes(buffer, shape);
  if (!Number.isInteger(seed) || seed < 0) {
    throw new PipelineError(`seed must be a nonnegative integer, got ${seed}`, "config", 2);
  }
  return inTempDir((dir) => {
    const inPath = join(dir, "in.batch");
    const outPath = join(dir, "out.batch");
    writeFileSync(inPath, encodeBatch(batch));
    const args = ["augment", "--in", inPath, "--out", outPath,
      "--pipeline", pipelineSpec, "--seed", String(seed)];
    if (options?.workers) {
      args.push("--workers", String(options.workers));
    }
    runCli(args, options);
    return decodeBatch(readFileSync(outPath));
  });
}

export interface BenchWorkload {
  kinds: string;
  b: number;
  s: number;
  c?: number;
  h: number;
  w: number;
  iterations?: number;
  repeats?: number;
  workers?: number;
}

export interface BenchRow {
  kind: string;
  batchedItemsPerSec: number;
  naiveItemsPerSec: number;
  speedup: number;
  nsPerFrame: number;
  minutesPer100k: number;
}

export interface BenchRecord {
  workload: Required<Omit<BenchWorkload, "kinds">>;
  rows: BenchRow[];
}

/** Run the native throughput benchmark and return its report. */
export function benchHook(workload: BenchWorkload, options?: CliOptions): BenchRecord {
  for (const key of ["b", "s", "h", "w"] as const) {
    const v = workload[key];
    if (!Number.isInteger(v) || v < 1) {
      throw new PipelineError(`workload ${key} must be >= 1, got ${v}`, "config", 2);
    }
  }
  const args = ["bench", "--json",
    "--kinds", workload.kinds,
    "--b", String(workload.b), "--s", String(workload.s),
    "--height", String(workload.h), "--width", String(workload.w)];
  if (workload.c !== undefined) args.push("--c", String(workload.c));
  if (workload.iterations !== undefined) args.push("--iterations", String(workload.iterations));
  if (workload.repeats !== undefined) args.push("--repeats", String(workload.repeats));
  if (workload.workers !== undefined) args.push("--workers", String(workload.workers));
  const raw = JSON.parse(runCli(args, options));
  return {
    workload: raw.workload,
    rows: raw.rows.map((r: Record<string, unknown>) => ({
      kind: r.kind as string,
      batchedItemsPerSec: r.batched_items_per_sec as number,
      naiveItemsPerSec: r.naive_items_per_sec as number,
      speedup: r.speedup as number,
      nsPerFrame: r.ns_per_frame as number,
      minutesPer100k: r.minutes_per_100k as number,
    })),
  };
}

/** The pipeline spec grammar, as printed by the core. */
export function pipelineGrammar(options?: CliOptions): string {
  return runCli(["augment", "--print-grammar"], options);
}
