/**
 * PTOK1 reader: turns a pruned-token manifest + pixel blob into the
 * variable-length visual input a transformer host expects.
 *
 * The adapter is a pure pass-through: it never reorders tokens or rewrites
 * assigned indices, it only decodes each index into a (row, col) position
 * pair and scales pixels to [0, 1].
 */

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";

export const PTOK_VERSION = 1;
export const PIXELS_MAGIC = Buffer.from("PTOKPX1\0", "latin1");

export class TokenParseError extends Error {}
export class FormatVersionError extends TokenParseError {}
export class TruncatedPayloadError extends TokenParseError {}
export class InvariantViolationError extends TokenParseError {}

export interface TokenEntry {
  i: number;
  r: number;
  c: number;
}

export interface TokenManifest {
  version: number;
  patch_size: number;
  grid_rows: number;
  grid_cols: number;
  image_width: number;
  image_height: number;
  strategy: string;
  pixels_file: string;
  tokens: TokenEntry[];
}

export interface AdapterInput {
  /** L rows of P*P pixel values scaled to [0, 1]. */
  pixelRows: Float64Array[];
  /** (row, col) decoded from each token's assigned index. */
  positionPairs: Array<[number, number]>;
  assignedIndices: number[];
  gridShape: [number, number];
  patchSize: number;
  strategy: string;
  /** True for an L=0 set (fully pruned image); hosts must handle it. */
  fullyPruned: boolean;
}

function parseManifest(raw: string): TokenManifest {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch (e) {
    throw new FormatVersionError(`manifest is not valid JSON: ${e}`);
  }
  const m = doc as Partial<TokenManifest>;
  if (typeof m !== "object" || m === null || m.version !== PTOK_VERSION) {
    throw new FormatVersionError(`unsupported manifest version ${m?.version}`);
  }
  const required: Array<keyof TokenManifest> = [
    "patch_size", "grid_rows", "grid_cols", "image_width",
    "image_height", "strategy", "pixels_file", "tokens",
  ];
  for (const key of required) {
    if (m[key] === undefined) {
      throw new InvariantViolationError(`manifest missing field ${key}`);
    }
  }
  if (!Array.isArray(m.tokens)) {
    throw new InvariantViolationError("tokens must be an array");
  }
  return m as TokenManifest;
}

export function decodeTokens(manifest: TokenManifest, blob: Buffer): AdapterInput {
  if (manifest.version !== PTOK_VERSION) {
    throw new FormatVersionError(`unsupported manifest version ${manifest.version}`);
  }
  if (!blob.subarray(0, PIXELS_MAGIC.length).equals(PIXELS_MAGIC)) {
    throw new FormatVersionError("bad pixel blob magic");
  }
  const P = manifest.patch_size;
  const L = manifest.tokens.length;
  const body = blob.subarray(PIXELS_MAGIC.length);
  if (body.length !== L * P * P) {
    throw new TruncatedPayloadError(
      `pixel blob has ${body.length} bytes, expected ${L * P * P}`,
    );
  }
  const area = manifest.grid_rows * manifest.grid_cols;
  const pixelRows: Float64Array[] = [];
  const positionPairs: Array<[number, number]> = [];
  const assignedIndices: number[] = [];
  manifest.tokens.forEach((tok, n) => {
    if (tok.i < 0 || tok.i >= area) {
      throw new InvariantViolationError(`assigned index ${tok.i} outside grid`);
    }
    assignedIndices.push(tok.i);
    positionPairs.push([Math.floor(tok.i / manifest.grid_cols), tok.i % manifest.grid_cols]);
    const row = new Float64Array(P * P);
    for (let j = 0; j < P * P; j++) {
      row[j] = body[n * P * P + j] / 255.0;
    }
    pixelRows.push(row);
  });
  return {
    pixelRows,
    positionPairs,
    assignedIndices,
    gridShape: [manifest.grid_rows, manifest.grid_cols],
    patchSize: P,
    strategy: manifest.strategy,
    fullyPruned: L === 0,
  };
}

/** Load a .ptok.json manifest and its sidecar pixel blob from disk. */
export function loadTokens(manifestPath: string): AdapterInput {
  const manifest = parseManifest(readFileSync(manifestPath, "utf-8"));
  const blob = readFileSync(join(dirname(manifestPath), manifest.pixels_file));
  return decodeTokens(manifest, blob);
}
