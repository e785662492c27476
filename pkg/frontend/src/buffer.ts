/**
 * Caller-owned numeric buffers and the checks applied before one crosses the
 * process boundary.
 *
 * Buffers are borrowed for the duration of a single call and never retained;
 * every output is a fresh allocation. Logits travel to the native side as
 * 32-bit dumps, so 64-bit inputs must hold exactly float32-representable
 * values — anything else is rejected rather than silently rounded.
 */

export type NumericArray = Float32Array | Float64Array;

/** Pointer-free descriptor of a contiguous numeric buffer. */
export interface BufferView {
  /** Element storage, 32- or 64-bit reals. */
  readonly data: NumericArray;
  /** [N] for one logits vector, [M, N] for a trace of M positions. */
  readonly shape: readonly number[];
  /** Layout flag; only row-major contiguous buffers are accepted. */
  readonly rowMajor: boolean;
}

/** A buffer violates the layout/shape/dtype contract. */
export class BufferLayoutError extends Error {}

/** Wrap a typed array as a rank-1 view. */
export function vectorView(data: NumericArray): BufferView {
  return { data, shape: [data.length], rowMajor: true };
}

/** Wrap a typed array as a row-major [rows, cols] view. */
export function matrixView(data: NumericArray, rows: number, cols: number): BufferView {
  return { data, shape: [rows, cols], rowMajor: true };
}

/** Normalized dimensions of a validated view. */
export interface ViewDims {
  rows: number;
  cols: number;
  rank: 1 | 2;
}

/**
 * Validate a view and return its dimensions, with rank-1 treated as one row.
 *
 * Rejects (never reinterprets, never copies): non-row-major layouts, wrong
 * rank, non-integer or non-positive dimensions, shape/length mismatches,
 * non-finite values, and 64-bit values that are not exactly representable
 * in the 32-bit transport.
 */
export function checkView(view: BufferView, name: string, rank?: 1 | 2): ViewDims {
  if (!(view.data instanceof Float32Array) && !(view.data instanceof Float64Array)) {
    throw new BufferLayoutError(`${name}: data must be a Float32Array or Float64Array`);
  }
  if (view.rowMajor !== true) {
    throw new BufferLayoutError(
      `${name}: buffer is not row-major contiguous; refusing to reinterpret or copy`);
  }
  const shape = view.shape;
  if (shape.length !== 1 && shape.length !== 2) {
    throw new BufferLayoutError(`${name}: shape must be [N] or [M, N], got [${shape}]`);
  }
  let product = 1;
  for (const dim of shape) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new BufferLayoutError(`${name}: shape [${shape}] has a non-positive dimension`);
    }
    product *= dim;
  }
  if (product !== view.data.length) {
    throw new BufferLayoutError(
      `${name}: shape [${shape}] needs ${product} elements, buffer holds ${view.data.length}`);
  }
  if (rank !== undefined && shape.length !== rank) {
    throw new BufferLayoutError(
      `${name}: expected a rank-${rank} buffer, got shape [${shape}]`);
  }
  for (let i = 0; i < view.data.length; i++) {
    const value = view.data[i]!;
    if (!Number.isFinite(value)) {
      throw new BufferLayoutError(`${name}: non-finite value at index ${i}`);
    }
    if (value !== Math.fround(value)) {
      throw new BufferLayoutError(
        `${name}: value ${value} at index ${i} is not exactly representable in the ` +
        `32-bit dump transport; round it with Math.fround first if that is acceptable`);
    }
  }
  const rows = shape.length === 2 ? shape[0]! : 1;
  const cols = shape.length === 2 ? shape[1]! : shape[0]!;
  return { rows, cols, rank: shape.length as 1 | 2 };
}

/** Validate that two views describe the same [M, N] logits layout. */
export function checkPair(teacher: BufferView, student: BufferView): ViewDims {
  const t = checkView(teacher, "teacher");
  const s = checkView(student, "student");
  if (t.rows !== s.rows || t.cols !== s.cols || t.rank !== s.rank) {
    throw new BufferLayoutError(
      `teacher shape [${teacher.shape}] and student shape [${student.shape}] differ`);
  }
  return t;
}
