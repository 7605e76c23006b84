// Thin typed client for the obfuscation service HTTP API.
// The UI never recomputes meters; everything shown comes from these payloads.

export interface TaskInfo {
  task: string;
  classes: string[];
}

export interface ClassifyResponse {
  task: string;
  probabilities: Record<string, number>;
}

export interface ObfuscationCandidate {
  text: string;
  source_score_before: number;
  source_score_after: number;
  privacy_score: number;
  meteor: number;
  sample_index: number;
}

export interface ObfuscationResponse {
  input_score: number;
  candidates: ObfuscationCandidate[];
}

export interface ObfuscationSettings {
  task: string;
  target: string;
  k: number;
  seed?: number;
}

export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, detail: string) {
    super(detail);
    this.status = status;
  }

  /** User-readable message for the error banner. */
  get banner(): string {
    if (this.status === 0) return 'Service unreachable. Is the server running?';
    if (this.status === 400) return `Invalid request: ${this.message}`;
    if (this.status === 404) return `Unknown task or class: ${this.message}`;
    if (this.status === 413) return 'Text is too long for the service.';
    if (this.status >= 500) return 'The service failed; try again.';
    return this.message;
  }
}

async function request<T>(url: string, init?: RequestInit): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    if (err instanceof DOMException && err.name === 'AbortError') throw err;
    throw new ApiError(0, String(err));
  }
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const detail = typeof body.detail === 'string' ? body.detail : response.statusText;
    throw new ApiError(response.status, detail);
  }
  return body as T;
}

export class ApiClient {
  constructor(private readonly baseUrl: string = '') {}

  async health(): Promise<boolean> {
    const body = await request<{ status: string }>(`${this.baseUrl}/api/health`);
    return body.status === 'ok';
  }

  attributes(): Promise<{ tasks: TaskInfo[] }> {
    return request(`${this.baseUrl}/api/attributes`);
  }

  classify(text: string, task: string): Promise<ClassifyResponse> {
    return request(`${this.baseUrl}/api/classify`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ text, task }),
    });
  }

  obfuscate(
    text: string,
    settings: ObfuscationSettings,
    signal?: AbortSignal,
  ): Promise<ObfuscationResponse> {
    return request(`${this.baseUrl}/api/obfuscate`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ text, ...settings }),
      signal,
    });
  }
}
