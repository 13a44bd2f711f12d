import { Candidate, CandidatePage, Tally, Verdict } from '../src/api.js';
import { QueueApi } from '../src/queue.js';

export function makeCandidate(id: string, body = 'mars', over: Partial<Candidate> = {}): Candidate {
  return {
    candidate_id: id,
    body,
    layer: 'terrain',
    lonlat: [12.5, -3.25],
    zoom: 5,
    bbox_px: [100, 200, 32, 32],
    consensus: 1,
    detector_ids: ['haar'],
    neighbor_count: 4,
    scores: { haar: 1.5 },
    job_id: 'job-1',
    created_at: '2026-08-16T00:00:00Z',
    thumbnail: `/api/v1/candidates/${id}/thumbnail.png`,
    tally: { candidate_id: id, face_votes: 0, not_face_votes: 0, wilson_lower_bound: 0 },
    my_vote: null,
    ...over,
  };
}

export interface FakeServerOptions {
  voteDelayMs?: number;
  failVotes?: boolean;
}

/** In-memory QueueApi double that tallies votes the way the real service does. */
export class FakeServer implements QueueApi {
  candidates: Candidate[];
  votes = new Map<string, Map<string, Verdict>>();
  listCalls = 0;
  voteCalls: Array<{ id: string; verdict: Verdict; voter: string }> = [];

  constructor(candidates: Candidate[], private readonly opts: FakeServerOptions = {}) {
    this.candidates = candidates;
  }

  tally(id: string): Tally {
    const byVoter = this.votes.get(id) ?? new Map();
    let face = 0;
    let notFace = 0;
    for (const v of byVoter.values()) v === 'face' ? face++ : notFace++;
    return {
      candidate_id: id,
      face_votes: face,
      not_face_votes: notFace,
      wilson_lower_bound: wilson(face, face + notFace),
    };
  }

  async list(_filters: unknown, page: number, pageSize: number): Promise<CandidatePage> {
    this.listCalls++;
    const start = (page - 1) * pageSize;
    const items = this.candidates.slice(start, start + pageSize).map((c) => ({
      ...c,
      tally: this.tally(c.candidate_id),
    }));
    return { items, page, page_size: pageSize, total: this.candidates.length };
  }

  async vote(id: string, verdict: Verdict, voter: string): Promise<Tally> {
    this.voteCalls.push({ id, verdict, voter });
    if (this.opts.voteDelayMs) await new Promise((r) => setTimeout(r, this.opts.voteDelayMs));
    if (this.opts.failVotes) throw new Error('503: unavailable');
    let byVoter = this.votes.get(id);
    if (!byVoter) this.votes.set(id, (byVoter = new Map()));
    byVoter.set(voter, verdict);
    return this.tally(id);
  }
}

export function wilson(pos: number, n: number, z = 1.96): number {
  if (n === 0) return 0;
  const p = pos / n;
  const z2 = z * z;
  return (p + z2 / (2 * n) - z * Math.sqrt((p * (1 - p) + z2 / (4 * n)) / n)) / (1 + z2 / n);
}
