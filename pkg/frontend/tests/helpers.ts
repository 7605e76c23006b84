// Shared fixtures: a canned obfuscation payload and a fetch mock.

import { vi } from 'vitest';
import { ObfuscationCandidate, ObfuscationResponse } from '../src/api';

export function makeCandidate(
  index: number,
  overrides: Partial<ObfuscationCandidate> = {},
): ObfuscationCandidate {
  return {
    text: `candidate ${index}`,
    source_score_before: 0.9,
    source_score_after: 0.1 + index * 0.05,
    privacy_score: 0.9 - (0.1 + index * 0.05),
    meteor: 0.9 - index * 0.1,
    sample_index: index,
    ...overrides,
  };
}

export function makeResponse(k = 5): ObfuscationResponse {
  return {
    input_score: 0.9,
    candidates: Array.from({ length: k }, (_, i) => makeCandidate(i)),
  };
}

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}

/** Install a fetch mock resolving every call with the given body. */
export function mockFetch(body: unknown, status = 200) {
  const mock = vi.fn(async () => jsonResponse(body, status));
  vi.stubGlobal('fetch', mock);
  return mock;
}
