/**
 * Bound operations over the native distillation toolkit.
 *
 * Logits enter as caller-owned BufferViews, travel to the native side as
 * LGTS dumps, and come back through the CLI's stable --json schemas. Inputs
 * are borrowed only for the duration of the call; outputs (gradients,
 * per-position arrays) are fresh allocations. Parameter names follow the
 * CLI flags: method, temperature, k.
 */

import { join } from "node:path";

import { BufferView, checkPair, checkView, ViewDims } from "./buffer.js";
import { runCliJson, withScratchDir } from "./cli.js";
import { Trace, writeDump } from "./lgts.js";

export { BufferLayoutError, matrixView, vectorView } from "./buffer.js";
export type { BufferView, NumericArray, ViewDims } from "./buffer.js";
export { CliError, cliCommand, runCliJson, withScratchDir } from "./cli.js";
export {
  BadMagicError,
  BadMaskByteError,
  BadVersionError,
  decodeDump,
  encodeDump,
  FLAG_MASK_PRESENT,
  FormatError,
  HEADER_SIZE,
  MAGIC,
  NonFiniteValueError,
  readDump,
  SizeMismatchError,
  VERSION,
  writeDump,
} from "./lgts.js";
export type { Trace } from "./lgts.js";
export { checkPair, checkView } from "./buffer.js";

/** The distillation losses the native tool knows. */
export type Method = "vanilla_kl" | "reverse_kl" | "topk_kl" | "tld" | "sld" | "bild";

/** Loss selection mirroring the CLI flags (temperature/k fall back to native defaults). */
export interface LossSpec {
  method: Method;
  temperature?: number;
  k?: number;
}

export interface LossResult {
  /** Unweighted mean loss over all positions. */
  mean: number;
  /** Per-position losses, length M. */
  perPosition: Float64Array;
  /** The k actually used after clamping to the vocabulary, null for full-vocab losses. */
  effectiveK: number | null;
  /** True when k <= 2 makes a pair loss identically zero. */
  degenerate: boolean;
  /** d(mean)/d(student logits) in the student's shape, when requested. */
  gradient?: BufferView;
}

export interface OverlapResult {
  k: number;
  /** Mean over response positions of |top-k ∩ top-k| / k. */
  mean: number;
  /** One entry per response position, in trace order. */
  perPosition: Float64Array;
}

function toTrace(view: BufferView, dims: ViewDims, roleMask?: ArrayLike<number>): Trace {
  const values = Float32Array.from(view.data, Math.fround);
  const mask = new Uint8Array(dims.rows);
  if (roleMask === undefined) {
    mask.fill(1);
  } else {
    if (roleMask.length !== dims.rows) {
      throw new RangeError(
        `role mask length ${roleMask.length} does not match ${dims.rows} positions`);
    }
    for (let i = 0; i < dims.rows; i++) {
      const bit = roleMask[i]!;
      if (bit !== 0 && bit !== 1) {
        throw new RangeError(`role mask entry ${bit} at position ${i} is neither 0 nor 1`);
      }
      mask[i] = bit;
    }
  }
  return { values, rows: dims.rows, cols: dims.cols, roleMask: mask };
}

function lossArgs(teacherPath: string, studentPath: string, spec: LossSpec,
                  wantGradient: boolean): string[] {
  const args: string[] = ["loss", teacherPath, studentPath, "--method", spec.method];
  if (spec.temperature !== undefined) {
    args.push("--temperature", String(spec.temperature));
  }
  if (spec.k !== undefined) {
    args.push("--k", String(spec.k));
  }
  if (wantGradient) {
    args.push("--gradient");
  }
  return args;
}

function runLoss(teacher: BufferView, student: BufferView, spec: LossSpec,
                 wantGradient: boolean, roleMask?: ArrayLike<number>): LossResult {
  const dims = checkPair(teacher, student);
  return withScratchDir((dir) => {
    const teacherPath = join(dir, "teacher.lgts");
    const studentPath = join(dir, "student.lgts");
    writeDump(teacherPath, toTrace(teacher, dims, roleMask));
    writeDump(studentPath, toTrace(student, dims, roleMask));
    const payload = runCliJson(lossArgs(teacherPath, studentPath, spec, wantGradient));
    const result: LossResult = {
      mean: payload.mean,
      perPosition: Float64Array.from(payload.per_position),
      effectiveK: payload.effective_k,
      degenerate: payload.degenerate,
    };
    if (wantGradient) {
      const flat = new Float64Array(dims.rows * dims.cols);
      for (let i = 0; i < dims.rows; i++) {
        flat.set(payload.gradient[i], i * dims.cols);
      }
      const shape = dims.rank === 1 ? [dims.cols] : [dims.rows, dims.cols];
      result.gradient = { data: flat, shape, rowMajor: true };
    }
    return result;
  });
}

/**
 * The bi-directional logits-difference loss between two logits vectors,
 * optionally with its gradient with respect to the student logits.
 */
export function bildLoss(zt: BufferView, zs: BufferView, temperature: number, k: number,
                         wantGradient = false): LossResult {
  checkView(zt, "teacher", 1);
  checkView(zs, "student", 1);
  return runLoss(zt, zs, { method: "bild", temperature, k }, wantGradient);
}

/**
 * A loss applied across aligned [M, N] traces. Positions where the role
 * mask is 1 use the requested method; mask-0 positions always use vanilla
 * KL at the same temperature. The mask defaults to all ones.
 */
export function sequenceLoss(teacher: BufferView, student: BufferView, spec: LossSpec,
                             options: { roleMask?: ArrayLike<number>; wantGradient?: boolean }
                             = {}): LossResult {
  return runLoss(teacher, student, spec, options.wantGradient ?? false, options.roleMask);
}

/**
 * Fraction of shared top-k token indices between two traces, averaged over
 * response positions (mask defaults to all ones).
 */
export function overlapAtK(teacher: BufferView, student: BufferView, k: number,
                           roleMask?: ArrayLike<number>): OverlapResult {
  const dims = checkPair(teacher, student);
  return withScratchDir((dir) => {
    const teacherPath = join(dir, "teacher.lgts");
    const studentPath = join(dir, "student.lgts");
    writeDump(teacherPath, toTrace(teacher, dims, roleMask));
    writeDump(studentPath, toTrace(student, dims, roleMask));
    const payload = runCliJson(["overlap", teacherPath, studentPath, "--k", String(k)]);
    return {
      k: payload.k,
      mean: payload.mean,
      perPosition: Float64Array.from(payload.per_position),
    };
  });
}

function analyzeRow(z: BufferView, k: number): any {
  const dims = checkView(z, "logits", 1);
  if (Number.isInteger(k) && k > dims.cols) {
    throw new RangeError(`k must satisfy 1 <= k <= ${dims.cols}, got ${k}`);
  }
  return withScratchDir((dir) => {
    const path = join(dir, "logits.lgts");
    writeDump(path, toTrace(z, dims));
    const payload = runCliJson(["analyze", path, "--k", String(k)]);
    return payload.per_position[0];
  });
}

/** Non-excess population kurtosis of one logits vector. */
export function kurtosis(z: BufferView): number {
  return analyzeRow(z, 1).kurtosis;
}

/** Percentage of softmax probability mass on the top-k logits. */
export function topkMass(z: BufferView, k: number): number {
  return analyzeRow(z, k).topk_mass[String(k)];
}
