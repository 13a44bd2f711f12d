// Leaderboard data: top reviewed candidates per body, in the server's
// wilson-bound order. The client never re-sorts; ranking is server truth.

import { Candidate, listCandidates } from './api.js';

export const BOARD_SIZE = 12;

export async function loadLeaderboard(voter?: string): Promise<Map<string, Candidate[]>> {
  const page = await listCandidates({ sort: 'votes' }, 1, 200, voter);
  const byBody = new Map<string, Candidate[]>();
  for (const c of page.items) {
    if (c.tally.face_votes + c.tally.not_face_votes === 0) continue; // unreviewed candidates hold no rank
    const board = byBody.get(c.body) ?? [];
    if (board.length < BOARD_SIZE) {
      board.push(c);
      byBody.set(c.body, board);
    }
  }
  return byBody;
}
