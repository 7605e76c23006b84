// Browser entry: wires the pure session/panel modules to the DOM.
// All candidate meters are rendered straight from the API payload.

import { ApiClient, ApiError, TaskInfo } from './api.js';
import {
  CandidatePanelState,
  panelFromResponse,
  selectCandidate,
  sortPanel,
  SortMode,
} from './panel.js';
import { CandidateRequester, SessionAudit, SessionDocument } from './session.js';

const api = new ApiClient();
const requester = new CandidateRequester(api);

let session: SessionDocument | null = null;
let panel: CandidatePanelState | null = null;
let taskInfo: TaskInfo | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showBanner(message: string) {
  const banner = el<HTMLDivElement>('banner');
  banner.textContent = message;
  banner.hidden = message === '';
}

function meter(value: number): string {
  const pct = Math.round(Math.max(0, Math.min(1, value)) * 100);
  return `<span class="meter"><span class="fill" style="width:${pct}%"></span></span>
          <span class="meter-value">${value.toFixed(3)}</span>`;
}

function renderPanel() {
  const list = el<HTMLDivElement>('candidates');
  if (!panel) {
    list.innerHTML = '<p class="hint">Enter a draft and request candidates.</p>';
    return;
  }
  const rows = panel.candidates
    .map(
      (c, i) => `
    <div class="candidate ${panel!.selected === i ? 'selected' : ''}" data-index="${i}">
      <div class="candidate-text">${escapeHtml(c.text)}</div>
      <div class="meters">
        <label>similarity</label>${meter(c.meteor)}
        <label>privacy</label>${meter(c.privacy_score)}
      </div>
      <button data-accept="${i}">Accept</button>
    </div>`,
    )
    .join('');
  list.innerHTML = `<p>Input source score: ${panel.inputScore.toFixed(3)}</p>${rows}`;
  for (const button of list.querySelectorAll<HTMLButtonElement>('button[data-accept]')) {
    button.addEventListener('click', () => acceptIndex(Number(button.dataset.accept)));
  }
  for (const card of list.querySelectorAll<HTMLDivElement>('.candidate')) {
    card.addEventListener('click', () => {
      panel = selectCandidate(panel!, Number(card.dataset.index));
      renderPanel();
    });
  }
}

function renderHistory() {
  const history = el<HTMLTableSectionElement>('history-body');
  if (!session) return;
  history.innerHTML = session.accepted
    .map(
      (r) => `<tr>
        <td>${escapeHtml(r.original)}</td>
        <td>${escapeHtml(r.chosen)}</td>
        <td>${r.sourceScoreAfter.toFixed(3)}</td>
        <td>${r.meteor.toFixed(3)}</td>
      </tr>`,
    )
    .join('');
  const score = el<HTMLSpanElement>('doc-score');
  score.textContent = session.documentScore
    ? `${session.documentScore.sourceLogProb.toFixed(3)} (p=${session.documentScore.sourceProbability.toFixed(3)})`
    : 'n/a';
  el<HTMLButtonElement>('export-btn').disabled = session.accepted.length === 0;
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;');
}

async function requestCandidates() {
  if (!session) return;
  session.draft = el<HTMLTextAreaElement>('draft').value;
  if (session.firstSentence() === '') {
    showBanner('Draft is empty; type a sentence first.');
    return;
  }
  showBanner('');
  try {
    const response = await requester.request(session);
    panel = panelFromResponse(session.firstSentence(), response);
    renderPanel();
  } catch (err) {
    if (err instanceof DOMException && err.name === 'AbortError') return;
    showBanner(err instanceof ApiError ? err.banner : String(err));
  }
}

async function acceptIndex(index: number) {
  if (!session || !panel) return;
  session.draft = el<HTMLTextAreaElement>('draft').value;
  try {
    await session.acceptCandidate(panel, index);
    panel = null;
    el<HTMLTextAreaElement>('draft').value = session.draft;
    renderPanel();
    renderHistory();
  } catch (err) {
    showBanner(String(err instanceof Error ? err.message : err));
  }
}

function exportSession() {
  if (!session || session.accepted.length === 0) return;
  const audit: SessionAudit = session.exportAudit();
  download('session-audit.json', JSON.stringify(audit, null, 2));
  download('obfuscated.txt', session.exportText);
}

function download(name: string, content: string) {
  const blob = new Blob([content], { type: 'application/octet-stream' });
  const link = document.createElement('a');
  link.href = URL.createObjectURL(blob);
  link.download = name;
  link.click();
  URL.revokeObjectURL(link.href);
}

async function importSession(file: File) {
  if (!taskInfo) return;
  try {
    const audit = JSON.parse(await file.text()) as SessionAudit;
    const source = otherClass(audit.settings.target);
    session = SessionDocument.fromAudit(api, audit, source);
    el<HTMLSelectElement>('target').value = audit.settings.target;
    renderHistory();
  } catch (err) {
    showBanner(`Import failed: ${err instanceof Error ? err.message : err}`);
  }
}

function otherClass(target: string): string {
  const classes = taskInfo?.classes ?? [];
  return classes.find((c) => c !== target) ?? '';
}

function newSession() {
  if (!taskInfo) return;
  const target = el<HTMLSelectElement>('target').value;
  session = new SessionDocument(
    api,
    { task: taskInfo.task, target, k: Number(el<HTMLInputElement>('k').value) || 5 },
    otherClass(target),
  );
  panel = null;
  el<HTMLTextAreaElement>('draft').value = '';
  renderPanel();
  renderHistory();
}

async function init() {
  try {
    const { tasks } = await api.attributes();
    taskInfo = tasks[0];
    const target = el<HTMLSelectElement>('target');
    target.innerHTML = taskInfo.classes
      .map((c) => `<option value="${c}">${c}</option>`)
      .join('');
    newSession();
  } catch (err) {
    showBanner(err instanceof ApiError ? err.banner : String(err));
    return;
  }
  el<HTMLButtonElement>('request-btn').addEventListener('click', requestCandidates);
  el<HTMLButtonElement>('export-btn').addEventListener('click', exportSession);
  el<HTMLButtonElement>('new-btn').addEventListener('click', newSession);
  el<HTMLSelectElement>('sort-mode').addEventListener('change', (event) => {
    if (!panel) return;
    panel = sortPanel(panel, (event.target as HTMLSelectElement).value as SortMode);
    renderPanel();
  });
  el<HTMLInputElement>('import-file').addEventListener('change', (event) => {
    const file = (event.target as HTMLInputElement).files?.[0];
    if (file) void importSession(file);
  });
}

if (typeof document !== 'undefined') {
  document.addEventListener('DOMContentLoaded', () => void init());
}
