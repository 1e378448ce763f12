/** Typed client for the retrieval service HTTP API. */

export type Badge = 'relevant' | 'non-relevant' | 'none';

export interface ResultEntry {
  rank: number;
  image_id: string;
  score: number;
  badge: Badge;
}

export interface Page {
  entries: ResultEntry[];
  total: number;
}

export interface QueryBody {
  modality: 'text' | 'image';
  text?: string;
  image_id?: string;
  prefix_enabled?: boolean;
}

export interface JudgmentBody {
  image_id: string;
  relevant: boolean;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = '',
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let response: Response;
    try {
      response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    } catch (err) {
      throw new ApiError(0, 'unreachable', `service unreachable: ${String(err)}`);
    }
    if (!response.ok) {
      let code = 'internal';
      let message = `HTTP ${response.status}`;
      try {
        const body = (await response.json()) as { code?: string; message?: string };
        code = body.code ?? code;
        message = body.message ?? message;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body?: unknown): Promise<T> {
    return this.request<T>(path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  }

  createSession(query: QueryBody): Promise<{ session_id: string; page: Page }> {
    return this.post('/sessions', { query });
  }

  getResults(sessionId: string, offset: number, limit: number): Promise<Page> {
    return this.request(`/sessions/${sessionId}/results?offset=${offset}&limit=${limit}`);
  }

  submitFeedback(sessionId: string, judgments: JudgmentBody[]): Promise<{ accepted_count: number }> {
    return this.post(`/sessions/${sessionId}/feedback`, { judgments });
  }

  finetune(sessionId: string): Promise<{ round: number; page: Page; notice?: string }> {
    return this.post(`/sessions/${sessionId}/finetune`);
  }

  health(): Promise<{ status: string }> {
    return this.request('/health');
  }

  imageUrl(imageId: string): string {
    return `${this.baseUrl}/images/${encodeURIComponent(imageId)}`;
  }
}
