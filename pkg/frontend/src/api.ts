// Typed client for the review service HTTP API. Every call goes through
// request() so tests can count and stub traffic at one seam.

export type Verdict = 'face' | 'not_face';

export interface Tally {
  candidate_id: string;
  face_votes: number;
  not_face_votes: number;
  wilson_lower_bound: number;
}

export interface Candidate {
  candidate_id: string;
  body: string;
  layer: string;
  lonlat: [number, number];
  zoom: number;
  bbox_px: [number, number, number, number];
  consensus: number;
  detector_ids: string[];
  neighbor_count: number;
  scores: Record<string, number>;
  job_id: string;
  created_at: string;
  thumbnail: string;
  tally: Tally;
  my_vote: Verdict | null;
}

export interface CandidatePage {
  items: Candidate[];
  page: number;
  page_size: number;
  total: number;
}

export interface StoreStats {
  candidates: number;
  votes: number;
  voters: number;
  reviewed: number;
  by_body: Record<string, number>;
}

export interface QueueFilters {
  body?: string;
  layer?: string;
  min_consensus?: number;
  sort?: 'consensus' | 'votes' | 'newest';
}

let apiBase = '';

/** Point the client at an absolute server URL (tests; same-origin by default). */
export function setApiBase(base: string): void {
  apiBase = base.replace(/\/$/, '');
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(`${apiBase}${path}`, init);
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const doc = await resp.json();
      if (doc && typeof doc.error === 'string') detail = doc.error;
    } catch {
      // non-JSON error body; status text is all we have
    }
    throw new Error(`${resp.status}: ${detail}`);
  }
  return (await resp.json()) as T;
}

export function listCandidates(
  filters: QueueFilters = {},
  page = 1,
  pageSize = 50,
  voter?: string,
): Promise<CandidatePage> {
  const q = new URLSearchParams();
  if (filters.body) q.set('body', filters.body);
  if (filters.layer) q.set('layer', filters.layer);
  if (filters.min_consensus !== undefined) q.set('min_consensus', String(filters.min_consensus));
  if (filters.sort) q.set('sort', filters.sort);
  q.set('page', String(page));
  q.set('page_size', String(pageSize));
  if (voter) q.set('voter', voter);
  return request<CandidatePage>(`/api/v1/candidates?${q}`);
}

export function getCandidate(id: string, voter?: string): Promise<Candidate> {
  const q = voter ? `?voter=${encodeURIComponent(voter)}` : '';
  return request<Candidate>(`/api/v1/candidates/${id}${q}`);
}

export function castVote(id: string, verdict: Verdict, voterToken: string): Promise<Tally> {
  return request<Tally>(`/api/v1/candidates/${id}/votes`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify({ verdict, voter_token: voterToken }),
  });
}

export function getStats(): Promise<StoreStats> {
  return request<StoreStats>('/api/v1/stats');
}
