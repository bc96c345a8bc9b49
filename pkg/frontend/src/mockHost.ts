/**
 * Mock transformer host that records exactly what it was fed, used to
 * assert the adapter never reorders tokens or rewrites position ids.
 */

import { AdapterInput } from "./adapter.js";

export interface EchoRecord {
  tokenCount: number;
  positionPairs: Array<[number, number]>;
  pixelSums: number[];
}

export class MockVisionHost {
  records: EchoRecord[] = [];

  consume(input: AdapterInput): EchoRecord {
    const record: EchoRecord = {
      tokenCount: input.pixelRows.length,
      positionPairs: input.positionPairs.map(([r, c]) => [r, c]),
      pixelSums: input.pixelRows.map((row) =>
        Math.round(row.reduce((acc, v) => acc + v * 255.0, 0)),
      ),
    };
    this.records.push(record);
    return record;
  }
}

export class PassthroughError extends Error {}

/**
 * Feed the input to the host and assert the echo matches what was sent:
 * same token count, same position ids in the same order.
 */
export function feedMock(input: AdapterInput, host: MockVisionHost): EchoRecord {
  const echo = host.consume(input);
  if (echo.tokenCount !== input.pixelRows.length) {
    throw new PassthroughError(
      `host saw ${echo.tokenCount} tokens, adapter sent ${input.pixelRows.length}`,
    );
  }
  for (let n = 0; n < input.positionPairs.length; n++) {
    const [r, c] = input.positionPairs[n];
    const [er, ec] = echo.positionPairs[n];
    if (r !== er || c !== ec) {
      throw new PassthroughError(`position ${n} rewritten: (${r},${c}) -> (${er},${ec})`);
    }
  }
  return echo;
}
