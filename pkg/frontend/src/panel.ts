// Candidate panel state: exactly the last service response, plus a pure
// client-side sort permutation and a guard against accepting from a stale
// panel after the draft changed.

import { ObfuscationCandidate, ObfuscationResponse } from './api.js';

export type SortMode = 'meteor' | 'privacy';

export interface CandidatePanelState {
  /** Draft text the response was fetched for. */
  draft: string;
  inputScore: number;
  candidates: ObfuscationCandidate[];
  selected: number | null;
  sortMode: SortMode;
}

export function panelFromResponse(
  draft: string,
  response: ObfuscationResponse,
): CandidatePanelState {
  return {
    draft,
    inputScore: response.input_score,
    candidates: [...response.candidates],
    selected: null,
    sortMode: 'meteor',
  };
}

function sortKey(mode: SortMode): (c: ObfuscationCandidate) => number {
  return mode === 'meteor' ? (c) => c.meteor : (c) => c.privacy_score;
}

/**
 * Re-sort the panel. A permutation only: the candidate set is unchanged and
 * the selection follows its candidate to the new position.
 */
export function sortPanel(
  state: CandidatePanelState,
  mode: SortMode,
): CandidatePanelState {
  const key = sortKey(mode);
  const selectedCandidate =
    state.selected === null ? null : state.candidates[state.selected];
  const candidates = [...state.candidates].sort(
    (a, b) => key(b) - key(a) || a.sample_index - b.sample_index,
  );
  const selected =
    selectedCandidate === null ? null : candidates.indexOf(selectedCandidate);
  return { ...state, candidates, sortMode: mode, selected };
}

export function selectCandidate(
  state: CandidatePanelState,
  index: number,
): CandidatePanelState {
  if (index < 0 || index >= state.candidates.length) {
    throw new RangeError(`no candidate at index ${index}`);
  }
  return { ...state, selected: index };
}

/** Acceptance is blocked when the draft changed since the panel was fetched. */
export function isStale(state: CandidatePanelState, currentDraft: string): boolean {
  return state.draft !== currentDraft;
}
