// @vitest-environment node
//
// Drives the real review service: a seeded Python server is spawned once and
// the client modules talk to it over HTTP exactly as the browser would.
import { ChildProcess, spawn } from 'node:child_process';
import { createInterface } from 'node:readline';
import { fileURLToPath } from 'node:url';
import { dirname, join } from 'node:path';
import { afterAll, beforeAll, describe, expect, it } from 'vitest';

import { castVote, getCandidate, listCandidates, setApiBase } from '../src/api.js';
import { ReviewQueue, handleQueueKey } from '../src/queue.js';
import { BOARD_SIZE, loadLeaderboard } from '../src/leaderboard.js';
import { wilson } from './helpers.js';

let server: ChildProcess;

beforeAll(async () => {
  const script = join(dirname(fileURLToPath(import.meta.url)), 'serve_fixture.py');
  server = spawn('python3', [script], { stdio: ['pipe', 'pipe', 'inherit'] });
  const url = await new Promise<string>((resolve, reject) => {
    const lines = createInterface({ input: server.stdout! });
    lines.on('line', (line) => {
      const m = /^URL (http\S+)/.exec(line);
      if (m && m[1]) resolve(m[1]);
    });
    server.on('exit', (code) => reject(new Error(`fixture server exited with ${code}`)));
    setTimeout(() => reject(new Error('fixture server never printed its URL')), 30_000);
  });
  setApiBase(url);
}, 40_000);

afterAll(() => {
  server.stdin?.end();
  server.kill();
});

async function settled(queue: ReviewQueue, id: string): Promise<void> {
  for (let i = 0; i < 200 && queue.voteInFlight(id); i++) {
    await new Promise((r) => setTimeout(r, 10));
  }
}

describe('leaderboard against the live service', () => {
  it('matches the server wilson ranking per body', async () => {
    const byBody = await loadLeaderboard();
    expect([...byBody.keys()].sort()).toEqual(['mars', 'moon']);

    const page = await listCandidates({ sort: 'votes' }, 1, 200);
    for (const [body, board] of byBody) {
      const reviewed = page.items.filter(
        (c) => c.body === body && c.tally.face_votes + c.tally.not_face_votes > 0,
      );
      const expected = [...reviewed]
        .sort((a, b) => b.tally.wilson_lower_bound - a.tally.wilson_lower_bound)
        .slice(0, BOARD_SIZE)
        .map((c) => c.candidate_id);
      expect(board.map((c) => c.candidate_id)).toEqual(expected);
      for (const c of board) {
        const t = c.tally;
        expect(t.wilson_lower_bound).toBeCloseTo(
          wilson(t.face_votes, t.face_votes + t.not_face_votes),
          5,
        );
      }
    }
    expect(byBody.get('mars')).toHaveLength(6);
    expect(byBody.get('moon')).toHaveLength(3);
  });
});

describe('keyboard voting against the live service', () => {
  it('one keystroke means one POST, and the tally agrees with a later GET', async () => {
    const voter = 'itest-voter-1';
    const queue = new ReviewQueue(
      {
        list: (f, p, s, v) => listCandidates(f, p, s, v),
        vote: (id, verdict, v) => castVote(id, verdict, v),
      },
      voter,
    );
    await queue.reset();
    const card = queue.current!;

    let posts = 0;
    const realFetch = globalThis.fetch;
    globalThis.fetch = ((input: RequestInfo | URL, init?: RequestInit) => {
      if (init?.method === 'POST') posts++;
      return realFetch(input, init);
    }) as typeof fetch;
    try {
      expect(handleQueueKey(queue, 'f')).toBe(true);
      handleQueueKey(queue, 'f'); // mashed repeats must be dropped
      handleQueueKey(queue, 'F');
      await settled(queue, card.candidate_id);
    } finally {
      globalThis.fetch = realFetch;
    }

    expect(posts).toBe(1);
    const after = await getCandidate(card.candidate_id, voter);
    expect(after.my_vote).toBe('face');
    expect(after.tally).toEqual(card.tally);
  });

  it('re-voting moves the vote instead of adding one', async () => {
    const voter = 'itest-voter-2';
    const queue = new ReviewQueue(
      {
        list: (f, p, s, v) => listCandidates(f, p, s, v),
        vote: (id, verdict, v) => castVote(id, verdict, v),
      },
      voter,
    );
    await queue.reset();
    const id = queue.cards[1]!.candidate_id;
    const start = queue.cards[1]!.tally;

    expect(await queue.vote(id, 'face')).toBe(true);
    expect(await queue.vote(id, 'not_face')).toBe(true);

    const after = await getCandidate(id, voter);
    expect(after.tally.face_votes).toBe(start.face_votes);
    expect(after.tally.not_face_votes).toBe(start.not_face_votes + 1);
    expect(after.my_vote).toBe('not_face');
  });
});
