/** Strict .npy version 1.0 reader/writer for the tensor interchange
 * profile: little-endian, C order, header padded to 64-byte alignment,
 * exactly two dtypes — float32 (rank 2 or 3) and uint8 (rank 2).
 * Everything else is rejected instead of coerced.
 */

import { readFileSync, writeFileSync } from "fs";

import { DataError, FormatError } from "./errors.js";

const MAGIC = Buffer.from("\x93NUMPY", "latin1");

export type NpyDtype = "<f4" | "|u1";

export interface NpyTensor {
  dtype: NpyDtype;
  shape: number[];
  data: Float32Array | Uint8Array;
}

function headerBlock(dtype: NpyDtype, shape: number[]): Buffer {
  const shapeStr = `(${shape.join(", ")})`;
  let header = `{'descr': '${dtype}', 'fortran_order': False, 'shape': ${shapeStr}, }`;
  const base = MAGIC.length + 2 + 2 + header.length + 1; // +2 version +2 len +1 newline
  const pad = (64 - (base % 64)) % 64;
  header = header + " ".repeat(pad) + "\n";
  const block = Buffer.alloc(MAGIC.length + 4 + header.length);
  MAGIC.copy(block, 0);
  block[6] = 1; // version 1.0
  block[7] = 0;
  block.writeUInt16LE(header.length, 8);
  block.write(header, 10, "latin1");
  return block;
}

export function writeNpy(
  path: string,
  data: Float32Array | Uint8Array,
  shape: number[]
): void {
  const count = shape.reduce((a, b) => a * b, 1);
  if (count !== data.length) {
    throw new FormatError(
      `shape (${shape.join(", ")}) holds ${count} elements, data has ${data.length}`
    );
  }
  const isFloat = data instanceof Float32Array;
  if (isFloat && shape.length !== 2 && shape.length !== 3) {
    throw new FormatError(`float32 tensors must be 2-D or 3-D, got ${shape.length}-D`);
  }
  if (!isFloat && shape.length !== 2) {
    throw new FormatError(`uint8 tensors must be 2-D, got ${shape.length}-D`);
  }
  if (isFloat) {
    for (const v of data as Float32Array) {
      if (!Number.isFinite(v)) {
        throw new DataError("refusing to write non-finite values");
      }
    }
  }

  const dtype: NpyDtype = isFloat ? "<f4" : "|u1";
  const itemSize = isFloat ? 4 : 1;
  const payload = Buffer.alloc(count * itemSize);
  if (isFloat) {
    for (let i = 0; i < count; i++) {
      payload.writeFloatLE((data as Float32Array)[i], i * 4);
    }
  } else {
    payload.set(data as Uint8Array);
  }
  writeFileSync(path, Buffer.concat([headerBlock(dtype, shape), payload]));
}

const HEADER_RE =
  /^\{'descr': '([^']*)', 'fortran_order': (True|False), 'shape': \(([^)]*)\), \}\s*$/;

export function readNpy(path: string): NpyTensor {
  let blob: Buffer;
  try {
    blob = readFileSync(path);
  } catch (err) {
    throw new DataError(`cannot read ${path}: ${(err as Error).message}`);
  }
  if (blob.length < 10 || !blob.subarray(0, 6).equals(MAGIC)) {
    throw new FormatError(`${path}: not an npy file (bad magic)`);
  }
  if (blob[6] !== 1 || blob[7] !== 0) {
    throw new FormatError(`${path}: unsupported npy version ${blob[6]}.${blob[7]}`);
  }
  const headerLen = blob.readUInt16LE(8);
  if (10 + headerLen > blob.length) {
    throw new FormatError(`${path}: truncated header`);
  }
  const header = blob.subarray(10, 10 + headerLen).toString("latin1");
  if (!header.endsWith("\n")) {
    throw new FormatError(`${path}: header does not end in newline`);
  }
  const match = HEADER_RE.exec(header);
  if (match === null) {
    throw new FormatError(`${path}: cannot parse npy header`);
  }
  const [, descr, fortran, shapeStr] = match;
  if (fortran === "True") {
    throw new FormatError(`${path}: column-major (fortran_order) not supported`);
  }
  if (descr !== "<f4" && descr !== "|u1") {
    throw new FormatError(`${path}: dtype '${descr}' not supported (supported: <f4, |u1)`);
  }
  const shape = shapeStr
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => {
      const d = Number(s);
      if (!Number.isInteger(d) || d < 1) {
        throw new FormatError(`${path}: bad dimension '${s}' in shape`);
      }
      return d;
    });
  if (descr === "<f4" && shape.length !== 2 && shape.length !== 3) {
    throw new FormatError(`${path}: float32 tensors must be 2-D or 3-D, got ${shape.length}-D`);
  }
  if (descr === "|u1" && shape.length !== 2) {
    throw new FormatError(`${path}: uint8 tensors must be 2-D, got ${shape.length}-D`);
  }

  const count = shape.reduce((a, b) => a * b, 1);
  const itemSize = descr === "<f4" ? 4 : 1;
  const offset = 10 + headerLen;
  const expected = offset + count * itemSize;
  if (blob.length < expected) {
    throw new FormatError(
      `${path}: payload truncated (${blob.length - offset} of ${count * itemSize} bytes)`
    );
  }
  if (blob.length > expected) {
    throw new FormatError(`${path}: trailing bytes after declared payload`);
  }

  if (descr === "|u1") {
    const data = new Uint8Array(count);
    data.set(blob.subarray(offset, expected));
    return { dtype: descr, shape, data };
  }
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) {
    const v = blob.readFloatLE(offset + i * 4);
    if (!Number.isFinite(v)) {
      throw new DataError(`${path}: non-finite value at element ${i}`);
    }
    data[i] = v;
  }
  return { dtype: descr, shape, data };
}
