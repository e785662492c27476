/**
 * Reader and writer for LGTS logits dumps, the binary interchange format of
 * the native toolkit:
 *
 *     bytes 0..3    magic "LGTS"
 *     bytes 4..7    version, little-endian u32, currently 1
 *     bytes 8..11   flags, little-endian u32; bit 0 set when a mask follows
 *     bytes 12..19  M, little-endian u64
 *     bytes 20..27  N, little-endian u64
 *     bytes 28..    M*N float32 values, little-endian, row-major
 *     then          M mask bytes (0 or 1), only when flag bit 0 is set
 *
 * Reads validate eagerly and throw a FormatError subclass naming the first
 * offending byte offset; writes always include the mask.
 */

import { readFileSync, writeFileSync } from "node:fs";

export const MAGIC = "LGTS";
export const VERSION = 1;
export const HEADER_SIZE = 28;
export const FLAG_MASK_PRESENT = 0x1;

/** A dump file violates the LGTS format. */
export class FormatError extends Error {}
export class BadMagicError extends FormatError {}
export class BadVersionError extends FormatError {}
export class SizeMismatchError extends FormatError {}
export class NonFiniteValueError extends FormatError {}
export class BadMaskByteError extends FormatError {}

/** An in-memory trace: [rows, cols] float32 logits plus a per-row role mask. */
export interface Trace {
  values: Float32Array;
  rows: number;
  cols: number;
  /** 1 marks a response position, 0 an instruction position. */
  roleMask: Uint8Array;
}

/** Serialize a trace to LGTS bytes (mask always included). */
export function encodeDump(trace: Trace): Uint8Array {
  const { values, rows, cols, roleMask } = trace;
  if (rows < 1 || cols < 1 || values.length !== rows * cols) {
    throw new RangeError(`values length ${values.length} does not match ${rows}x${cols}`);
  }
  if (roleMask.length !== rows) {
    throw new RangeError(`mask length ${roleMask.length} does not match ${rows} rows`);
  }
  const bytes = new Uint8Array(HEADER_SIZE + 4 * rows * cols + rows);
  const view = new DataView(bytes.buffer);
  for (let i = 0; i < 4; i++) {
    bytes[i] = MAGIC.charCodeAt(i);
  }
  view.setUint32(4, VERSION, true);
  view.setUint32(8, FLAG_MASK_PRESENT, true);
  view.setBigUint64(12, BigInt(rows), true);
  view.setBigUint64(20, BigInt(cols), true);
  for (let i = 0; i < values.length; i++) {
    const value = values[i]!;
    if (!Number.isFinite(value)) {
      throw new RangeError(`non-finite value at position (${Math.floor(i / cols)}, ${i % cols})`);
    }
    view.setFloat32(HEADER_SIZE + 4 * i, value, true);
  }
  for (let i = 0; i < rows; i++) {
    const bit = roleMask[i]!;
    if (bit !== 0 && bit !== 1) {
      throw new RangeError(`mask byte ${bit} at position ${i} is neither 0 nor 1`);
    }
    bytes[HEADER_SIZE + 4 * rows * cols + i] = bit;
  }
  return bytes;
}

/** Parse LGTS bytes, validating every field before constructing a trace. */
export function decodeDump(bytes: Uint8Array, label = "dump"): Trace {
  if (bytes.length < HEADER_SIZE) {
    throw new SizeMismatchError(
      `${label}: file is ${bytes.length} bytes, shorter than the ${HEADER_SIZE}-byte header`);
  }
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  const magic = String.fromCharCode(bytes[0]!, bytes[1]!, bytes[2]!, bytes[3]!);
  if (magic !== MAGIC) {
    throw new BadMagicError(
      `${label}: bad magic ${JSON.stringify(magic)} at byte 0, expected "${MAGIC}"`);
  }
  const version = view.getUint32(4, true);
  if (version !== VERSION) {
    throw new BadVersionError(
      `${label}: unsupported version ${version} at byte 4, expected ${VERSION}`);
  }
  const flags = view.getUint32(8, true);
  const rowsBig = view.getBigUint64(12, true);
  const colsBig = view.getBigUint64(20, true);
  if (rowsBig < 1n || colsBig < 1n) {
    throw new SizeMismatchError(
      `${label}: header at byte 12 declares empty trace (M=${rowsBig}, N=${colsBig})`);
  }
  if (rowsBig > BigInt(Number.MAX_SAFE_INTEGER) || colsBig > BigInt(Number.MAX_SAFE_INTEGER)) {
    throw new SizeMismatchError(`${label}: header dimensions overflow (M=${rowsBig}, N=${colsBig})`);
  }
  const rows = Number(rowsBig);
  const cols = Number(colsBig);
  const maskPresent = (flags & FLAG_MASK_PRESENT) !== 0;
  const expected = HEADER_SIZE + 4 * rows * cols + (maskPresent ? rows : 0);
  if (bytes.length !== expected) {
    throw new SizeMismatchError(
      `${label}: file is ${bytes.length} bytes but the header (M=${rows}, N=${cols}, ` +
      `mask=${maskPresent ? "yes" : "no"}) requires exactly ${expected}`);
  }
  const values = new Float32Array(rows * cols);
  for (let i = 0; i < values.length; i++) {
    const value = view.getFloat32(HEADER_SIZE + 4 * i, true);
    if (!Number.isFinite(value)) {
      throw new NonFiniteValueError(
        `${label}: non-finite value at position (${Math.floor(i / cols)}, ${i % cols}), ` +
        `byte ${HEADER_SIZE + 4 * i}`);
    }
    values[i] = value;
  }
  const roleMask = new Uint8Array(rows);
  if (maskPresent) {
    for (let i = 0; i < rows; i++) {
      const bit = bytes[HEADER_SIZE + 4 * rows * cols + i]!;
      if (bit > 1) {
        throw new BadMaskByteError(
          `${label}: mask byte ${bit} at position ${i} ` +
          `(byte ${HEADER_SIZE + 4 * rows * cols + i}) is neither 0 nor 1`);
      }
      roleMask[i] = bit;
    }
  } else {
    roleMask.fill(1);
  }
  return { values, rows, cols, roleMask };
}

/** Write a trace to a file in LGTS format. */
export function writeDump(path: string, trace: Trace): void {
  writeFileSync(path, encodeDump(trace));
}

/** Read and validate an LGTS file. */
export function readDump(path: string): Trace {
  return decodeDump(new Uint8Array(readFileSync(path)), path);
}
