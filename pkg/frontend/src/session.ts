/** Client-side session store: grid state, pending marks, finetune flow. */

import { ApiClient, ApiError, type Badge, type Page, type QueryBody } from './api.js';
import { bothClassesMarked, cycleMark, effectiveBadge } from './marks.js';

export const PAGE_SIZE = 50;

export interface GridEntry {
  imageId: string;
  rank: number;
  score: number;
  badge: Badge;
}

/**
 * One search session as the UI sees it. Marks accumulate locally and are
 * flushed to the feedback endpoint only when the user hits Finetune; a
 * failed request keeps every pending mark. At most one mutation is in
 * flight at a time.
 */
export class UiSession {
  sessionId: string | null = null;
  queryText = '';
  entries: GridEntry[] = [];
  total = 0;
  round = 0;
  busy = false;
  error: string | null = null;
  readonly pending = new Map<string, boolean>();
  private readonly serverJudgments = new Map<string, boolean>();

  constructor(private readonly api: ApiClient) {}

  private fail(err: unknown): void {
    if (err instanceof ApiError) {
      this.error = err.code === 'provider_unavailable'
        ? `embedder unavailable: ${err.message}`
        : err.message;
    } else {
      this.error = String(err);
    }
  }

  dismissError(): void {
    this.error = null;
  }

  private absorbPage(page: Page, reset: boolean): void {
    if (reset) this.entries = [];
    for (const entry of page.entries) {
      this.entries.push({
        imageId: entry.image_id,
        rank: entry.rank,
        score: entry.score,
        badge: entry.badge,
      });
      if (entry.badge !== 'none') {
        this.serverJudgments.set(entry.image_id, entry.badge === 'relevant');
      }
    }
    this.total = page.total;
  }

  async submitQuery(query: QueryBody): Promise<boolean> {
    if (this.busy) return false;
    this.busy = true;
    try {
      const created = await this.api.createSession(query);
      this.sessionId = created.session_id;
      this.queryText = query.text ?? query.image_id ?? '';
      this.round = 0;
      this.pending.clear();
      this.serverJudgments.clear();
      this.absorbPage(created.page, true);
      this.error = null;
      return true;
    } catch (err) {
      this.fail(err);
      return false;
    } finally {
      this.busy = false;
    }
  }

  badgeFor(imageId: string): Badge {
    const entry = this.entries.find((e) => e.imageId === imageId);
    let server: Badge = 'none';
    if (entry) {
      server = entry.badge;
    } else if (this.serverJudgments.has(imageId)) {
      // judged image currently outside the loaded pages keeps its badge
      server = this.serverJudgments.get(imageId) ? 'relevant' : 'non-relevant';
    }
    return effectiveBadge(server, this.pending.get(imageId));
  }

  toggleMark(imageId: string, shift: boolean): Badge {
    const next = cycleMark(this.badgeFor(imageId), shift);
    if (next === 'none') {
      this.pending.delete(imageId);
    } else {
      this.pending.set(imageId, next === 'relevant');
    }
    return this.badgeFor(imageId);
  }

  canFinetune(): boolean {
    return this.sessionId !== null && !this.busy
      && bothClassesMarked(this.serverJudgments, this.pending);
  }

  /** Flush pending marks, retrain, and reload page one of the new order. */
  async finetune(): Promise<boolean> {
    if (!this.canFinetune() || this.sessionId === null) return false;
    this.busy = true;
    try {
      const judgments = [...this.pending.entries()].map(([image_id, relevant]) => ({
        image_id,
        relevant,
      }));
      if (judgments.length > 0) {
        await this.api.submitFeedback(this.sessionId, judgments);
        for (const j of judgments) this.serverJudgments.set(j.image_id, j.relevant);
        this.pending.clear();
      }
      const outcome = await this.api.finetune(this.sessionId);
      this.round = outcome.round;
      this.absorbPage(outcome.page, true);
      this.error = null;
      return true;
    } catch (err) {
      this.fail(err);
      return false;
    } finally {
      this.busy = false;
    }
  }

  hasMore(): boolean {
    return this.sessionId !== null && this.entries.length < this.total;
  }

  async loadMore(): Promise<boolean> {
    if (this.busy || !this.hasMore() || this.sessionId === null) return false;
    this.busy = true;
    try {
      const page = await this.api.getResults(this.sessionId, this.entries.length, PAGE_SIZE);
      this.absorbPage(page, false);
      return true;
    } catch (err) {
      this.fail(err);
      return false;
    } finally {
      this.busy = false;
    }
  }
}
