// Review queue state machine: paging, cursor movement, and optimistic
// voting. Pure logic with an injected API so tests drive it headless.
//
// Voting contract (mirrors the server's upsert semantics):
//   - at most one vote request in flight per candidate; repeats are dropped
//   - the tally is updated optimistically, then replaced by the server's
//     answer; on failure the previous tally and my_vote are restored

import { Candidate, CandidatePage, QueueFilters, Tally, Verdict } from './api.js';

export interface QueueApi {
  list(filters: QueueFilters, page: number, pageSize: number, voter: string): Promise<CandidatePage>;
  vote(id: string, verdict: Verdict, voter: string): Promise<Tally>;
}

export type QueueListener = () => void;

export const PAGE_SIZE = 24;

function shiftTally(t: Tally, from: Verdict | null, to: Verdict): Tally {
  let face = t.face_votes;
  let notFace = t.not_face_votes;
  if (from === 'face') face -= 1;
  if (from === 'not_face') notFace -= 1;
  if (to === 'face') face += 1;
  else notFace += 1;
  // wilson bound left stale on purpose: only the server computes it
  return { ...t, face_votes: face, not_face_votes: notFace };
}

export class ReviewQueue {
  cards: Candidate[] = [];
  cursor = 0;
  total = 0;
  loading = false;
  exhausted = false;
  lastError: string | null = null;

  private page = 0;
  private inFlight = new Set<string>();
  private listeners = new Set<QueueListener>();

  constructor(
    private readonly api: QueueApi,
    private readonly voter: string,
    public filters: QueueFilters = {},
  ) {}

  subscribe(fn: QueueListener): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  get current(): Candidate | null {
    return this.cards[this.cursor] ?? null;
  }

  async reset(filters?: QueueFilters): Promise<void> {
    if (filters) this.filters = filters;
    this.cards = [];
    this.cursor = 0;
    this.page = 0;
    this.total = 0;
    this.exhausted = false;
    this.lastError = null;
    await this.loadMore();
  }

  async loadMore(): Promise<void> {
    if (this.loading || this.exhausted) return;
    this.loading = true;
    this.emit();
    try {
      const next = await this.api.list(this.filters, this.page + 1, PAGE_SIZE, this.voter);
      this.page = next.page;
      this.total = next.total;
      this.cards.push(...next.items);
      this.exhausted = this.cards.length >= next.total || next.items.length === 0;
      this.lastError = null;
    } catch (err) {
      this.lastError = String(err);
    } finally {
      this.loading = false;
      this.emit();
    }
  }

  move(delta: number): void {
    if (!this.cards.length) return;
    const next = Math.min(Math.max(this.cursor + delta, 0), this.cards.length - 1);
    if (next !== this.cursor) {
      this.cursor = next;
      this.emit();
    }
    // prefetch when the cursor closes in on the tail
    if (!this.exhausted && this.cards.length - next <= PAGE_SIZE / 2) {
      void this.loadMore();
    }
  }

  voteInFlight(id: string): boolean {
    return this.inFlight.has(id);
  }

  /** Vote on the card under the cursor. Resolves false when dropped or refused. */
  voteCurrent(verdict: Verdict): Promise<boolean> {
    const card = this.current;
    if (!card) return Promise.resolve(false);
    return this.vote(card.candidate_id, verdict);
  }

  async vote(id: string, verdict: Verdict): Promise<boolean> {
    const card = this.cards.find((c) => c.candidate_id === id);
    if (!card || this.inFlight.has(id)) return false;

    const before = { tally: card.tally, my_vote: card.my_vote };
    card.tally = shiftTally(card.tally, card.my_vote, verdict);
    card.my_vote = verdict;
    this.inFlight.add(id);
    this.emit();

    try {
      card.tally = await this.api.vote(id, verdict, this.voter);
      this.lastError = null;
      return true;
    } catch (err) {
      card.tally = before.tally;
      card.my_vote = before.my_vote;
      this.lastError = String(err);
      return false;
    } finally {
      this.inFlight.delete(id);
      this.emit();
    }
  }
}

export function handleQueueKey(queue: ReviewQueue, key: string): boolean {
  switch (key) {
    case 'f':
    case 'F':
      if (!queue.current) return false;
      void queue.voteCurrent('face');
      return true;
    case 'n':
    case 'N':
      if (!queue.current) return false;
      void queue.voteCurrent('not_face');
      return true;
    case 'ArrowRight':
    case 'ArrowDown':
      queue.move(1);
      return true;
    case 'ArrowLeft':
    case 'ArrowUp':
      queue.move(-1);
      return true;
    default:
      return false;
  }
}
