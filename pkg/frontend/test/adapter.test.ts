import { createHash } from "node:crypto";
import { readFileSync } from "node:fs";
import { join } from "node:path";
import { describe, expect, it } from "vitest";

import {
  AdapterInput,
  FormatVersionError,
  InvariantViolationError,
  TruncatedPayloadError,
  decodeTokens,
  loadTokens,
} from "../src/adapter.js";
import { MockVisionHost, PassthroughError, feedMock } from "../src/mockHost.js";

const GOLDENS = join(__dirname, "..", "goldens");
const expected = JSON.parse(readFileSync(join(GOLDENS, "expected.json"), "utf-8"));

function golden(stem: string): AdapterInput {
  return loadTokens(join(GOLDENS, `${stem}.ptok.json`));
}

function pixelSums(input: AdapterInput): number[] {
  return input.pixelRows.map((row) => Math.round(row.reduce((a, v) => a + v * 255.0, 0)));
}

describe("loadTokens on goldens emitted by the primary toolchain", () => {
  it("reproduces L, indices, and positions on the page golden", () => {
    const input = golden("page");
    const want = expected.page;
    expect(input.pixelRows.length).toBe(want.L);
    expect(input.assignedIndices).toEqual(want.assigned_indices);
    expect(input.positionPairs).toEqual(want.position_pairs);
    expect(input.gridShape).toEqual([want.grid_rows, want.grid_cols]);
    expect(input.strategy).toBe("preserved");
  });

  it("matches the recorded pixel checksums", () => {
    const blob = readFileSync(join(GOLDENS, "page.ptok.bin"));
    const sha = createHash("sha256").update(blob).digest("hex");
    expect(sha).toBe(expected.page.blob_sha256);
    expect(pixelSums(golden("page"))).toEqual(expected.page.token_pixel_sums);
  });

  it("decodes positions from assigned indices consistently with stored (r, c)", () => {
    // preserved strategy: decoded pairs must equal the manifest's own rows/cols
    const input = golden("page");
    expect(input.positionPairs).toEqual(expected.page.position_pairs);
  });

  it("flags the fully pruned golden", () => {
    const input = golden("blank");
    expect(input.fullyPruned).toBe(true);
    expect(input.pixelRows.length).toBe(0);
    expect(expected.blank.L).toBe(0);
  });

  it("decodes the hand-built diagonal golden to corner positions", () => {
    const input = golden("diag");
    expect(input.positionPairs).toEqual([
      [0, 0],
      [1, 1],
    ]);
    expect(input.assignedIndices).toEqual([0, 3]);
  });

  it("scales pixels into [0, 1]", () => {
    const input = golden("page");
    for (const row of input.pixelRows) {
      for (const v of row) {
        expect(v).toBeGreaterThanOrEqual(0);
        expect(v).toBeLessThanOrEqual(1);
      }
    }
  });
});

describe("format error handling", () => {
  const manifest = JSON.parse(readFileSync(join(GOLDENS, "diag.ptok.json"), "utf-8"));
  const blob = readFileSync(join(GOLDENS, "diag.ptok.bin"));

  it("rejects a bad blob magic", () => {
    const bad = Buffer.concat([Buffer.from("XXXX"), blob.subarray(4)]);
    expect(() => decodeTokens(manifest, bad)).toThrow(FormatVersionError);
  });

  it("rejects a version mismatch", () => {
    expect(() => decodeTokens({ ...manifest, version: 99 } as never, blob)).toThrow();
  });

  it("rejects a truncated blob", () => {
    expect(() => decodeTokens(manifest, blob.subarray(0, blob.length - 1))).toThrow(
      TruncatedPayloadError,
    );
  });

  it("rejects out-of-range assigned indices", () => {
    const tampered = {
      ...manifest,
      tokens: manifest.tokens.map((t: { i: number }) => ({ ...t, i: t.i + 100 })),
    };
    expect(() => decodeTokens(tampered, blob)).toThrow(InvariantViolationError);
  });
});

describe("feedMock passthrough", () => {
  it("echoes token count and positions unchanged", () => {
    const host = new MockVisionHost();
    const input = golden("page");
    const echo = feedMock(input, host);
    expect(echo.tokenCount).toBe(expected.page.L);
    expect(echo.positionPairs).toEqual(input.positionPairs);
    expect(echo.pixelSums).toEqual(expected.page.token_pixel_sums);
  });

  it("accepts the empty set", () => {
    const host = new MockVisionHost();
    const echo = feedMock(golden("blank"), host);
    expect(echo.tokenCount).toBe(0);
  });

  it("preserves the (index, pixels) multiset under input shuffling", () => {
    const input = golden("page");
    const order = [...input.positionPairs.keys()].reverse();
    const shuffled: AdapterInput = {
      ...input,
      pixelRows: order.map((n) => input.pixelRows[n]),
      positionPairs: order.map((n) => input.positionPairs[n]),
      assignedIndices: order.map((n) => input.assignedIndices[n]),
    };
    const host = new MockVisionHost();
    const echo = feedMock(shuffled, host);
    const seen = echo.positionPairs.map(([r, c], n) => `${r},${c}:${echo.pixelSums[n]}`).sort();
    const sent = input.positionPairs.map(([r, c], n) => `${r},${c}:${pixelSums(input)[n]}`).sort();
    expect(seen).toEqual(sent);
  });

  it("raises when the host reorders positions", () => {
    class EvilHost extends MockVisionHost {
      consume(input: AdapterInput) {
        const record = super.consume(input);
        record.positionPairs.reverse();
        return record;
      }
    }
    expect(() => feedMock(golden("diag"), new EvilHost())).toThrow(PassthroughError);
  });
});
