// Session document: the append-only list of accepted rewrites, the active
// draft, and the audit-export serialization. All persistence is client-side;
// the server is never mutated.

import { ApiClient } from './api.js';
import { CandidatePanelState, isStale } from './panel.js';

export interface AcceptedRow {
  readonly original: string;
  readonly chosen: string;
  readonly sourceScoreBefore: number;
  readonly sourceScoreAfter: number;
  readonly privacyScore: number;
  readonly meteor: number;
  readonly acceptedAt: number;
}

export interface SessionSettings {
  task: string;
  target: string;
  k: number;
  seed?: number;
}

export interface DocumentScore {
  /** Source-class probability of the concatenated accepted text. */
  sourceProbability: number;
  /** Its natural log, the cumulative log-prob meter shown in the header. */
  sourceLogProb: number;
}

export interface SessionAudit {
  version: 1;
  settings: SessionSettings;
  accepted: AcceptedRow[];
  documentScore: DocumentScore | null;
}

const AUDIT_VERSION = 1;

/** Split a multi-sentence draft on terminal punctuation, keeping it. */
export function splitDraft(draft: string): string[] {
  const parts = draft.match(/[^.!?]+[.!?]*/g) ?? [];
  return parts.map((s) => s.trim()).filter((s) => s.length > 0);
}

export class SessionDocument {
  readonly settings: SessionSettings;
  draft = '';
  documentScore: DocumentScore | null = null;
  private readonly rows: AcceptedRow[] = [];

  constructor(
    private readonly api: ApiClient,
    settings: SessionSettings,
    private readonly sourceClass: string,
  ) {
    this.settings = { ...settings };
  }

  get accepted(): readonly AcceptedRow[] {
    return this.rows;
  }

  /** Concatenation of the chosen candidates, the exportable plain text. */
  get exportText(): string {
    return this.rows.map((r) => r.chosen).join(' ');
  }

  /**
   * Accept one candidate from the panel. Rejected when the panel is stale
   * (the draft changed since the candidates were fetched). Appends an
   * immutable row, refreshes the document score and clears the draft.
   */
  async acceptCandidate(
    panel: CandidatePanelState,
    index: number,
  ): Promise<AcceptedRow> {
    if (isStale(panel, this.firstSentence())) {
      throw new Error('draft changed since candidates were fetched');
    }
    const candidate = panel.candidates[index];
    if (!candidate) throw new RangeError(`no candidate at index ${index}`);
    const row: AcceptedRow = Object.freeze({
      original: panel.draft,
      chosen: candidate.text,
      sourceScoreBefore: candidate.source_score_before,
      sourceScoreAfter: candidate.source_score_after,
      privacyScore: candidate.privacy_score,
      meteor: candidate.meteor,
      acceptedAt: Date.now(),
    });
    this.rows.push(row);
    this.draft = splitDraft(this.draft).slice(1).join(' ');
    await this.refreshDocumentScore();
    return row;
  }

  /** The sentence a candidate request would be issued for. */
  firstSentence(): string {
    return splitDraft(this.draft)[0] ?? '';
  }

  async refreshDocumentScore(): Promise<void> {
    if (this.rows.length === 0) {
      this.documentScore = null;
      return;
    }
    const response = await this.api.classify(this.exportText, this.settings.task);
    const p = response.probabilities[this.sourceClass] ?? 0;
    this.documentScore = {
      sourceProbability: p,
      sourceLogProb: Math.log(Math.max(p, 1e-12)),
    };
  }

  exportAudit(): SessionAudit {
    if (this.rows.length === 0) {
      throw new Error('nothing to export: no accepted sentences');
    }
    return {
      version: AUDIT_VERSION,
      settings: { ...this.settings },
      accepted: this.rows.map((r) => ({ ...r })),
      documentScore: this.documentScore ? { ...this.documentScore } : null,
    };
  }

  static fromAudit(
    api: ApiClient,
    audit: SessionAudit,
    sourceClass: string,
  ): SessionDocument {
    if (audit.version !== AUDIT_VERSION) {
      throw new Error(`unsupported audit version ${audit.version}`);
    }
    const session = new SessionDocument(api, audit.settings, sourceClass);
    for (const row of audit.accepted) {
      session.rows.push(Object.freeze({ ...row }));
    }
    session.documentScore = audit.documentScore
      ? { ...audit.documentScore }
      : null;
    return session;
  }
}

/**
 * Fetch candidates for the current draft with single-flight semantics:
 * a newer request aborts the one still in the air.
 */
export class CandidateRequester {
  private inflight: AbortController | null = null;

  constructor(private readonly api: ApiClient) {}

  async request(session: SessionDocument) {
    const sentence = session.firstSentence();
    if (sentence === '') {
      throw new Error('draft is empty');
    }
    this.inflight?.abort();
    const controller = new AbortController();
    this.inflight = controller;
    try {
      return await this.api.obfuscate(sentence, session.settings, controller.signal);
    } finally {
      if (this.inflight === controller) this.inflight = null;
    }
  }
}
