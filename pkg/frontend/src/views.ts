// DOM rendering for the three screens. No framework: each view returns a
// detached element tree the router swaps into #app.

import { Candidate } from './api.js';
import { ReviewQueue } from './queue.js';

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  node.append(...children);
  return node;
}

function fmtLonLat(lonlat: [number, number]): string {
  const [lon, lat] = lonlat;
  const ew = lon >= 0 ? 'E' : 'W';
  const ns = lat >= 0 ? 'N' : 'S';
  return `${Math.abs(lat).toFixed(4)}°${ns} ${Math.abs(lon).toFixed(4)}°${ew}`;
}

export function mapLink(c: Candidate): string {
  // external viewers key on body + lonlat; this is a plain deep link, the
  // app never embeds tiles itself
  const [lon, lat] = c.lonlat;
  return `https://www.google.com/maps/space/${encodeURIComponent(c.body)}/@${lat},${lon},10z`;
}

export function consensusBadges(c: Candidate): HTMLElement {
  const row = el('span', { class: 'badges' });
  for (const id of c.detector_ids) {
    row.append(el('span', { class: 'badge', title: `detector ${id} fired` }, id));
  }
  return row;
}

export function tallyLine(c: Candidate): string {
  const t = c.tally;
  const mine = c.my_vote ? ` · you: ${c.my_vote === 'face' ? 'face' : 'not face'}` : '';
  return `▲ ${t.face_votes} ▼ ${t.not_face_votes}${mine}`;
}

export function renderCard(c: Candidate, selected: boolean, pending: boolean): HTMLElement {
  const card = el(
    'article',
    {
      class: `card${selected ? ' selected' : ''}${pending ? ' pending' : ''}`,
      'data-id': c.candidate_id,
      tabindex: '-1',
    },
    el('img', { src: c.thumbnail, alt: `candidate ${c.candidate_id}`, loading: 'lazy' }),
    el(
      'footer',
      {},
      el('a', { href: `#/candidate/${c.candidate_id}`, class: 'mono' }, c.candidate_id.slice(0, 8)),
      consensusBadges(c),
      el('span', { class: 'tally' }, tallyLine(c)),
    ),
  );
  if (c.my_vote) card.classList.add(`voted-${c.my_vote}`);
  return card;
}

export function renderQueue(queue: ReviewQueue): HTMLElement {
  const root = el('section', { class: 'queue' });
  if (!queue.cards.length && !queue.loading) {
    root.append(
      el(
        'div',
        { class: 'empty' },
        el('h2', {}, 'Nothing to review'),
        el('p', {}, 'No candidates match the current filters. Ingest a scan or relax the filters.'),
      ),
    );
    return root;
  }
  const grid = el('div', { class: 'grid' });
  queue.cards.forEach((c, i) => {
    grid.append(renderCard(c, i === queue.cursor, queue.voteInFlight(c.candidate_id)));
  });
  root.append(grid);
  if (queue.lastError) root.append(el('p', { class: 'error' }, queue.lastError));
  if (!queue.exhausted) {
    root.append(el('button', { class: 'load-more' }, queue.loading ? 'Loading…' : 'Load more'));
  }
  return root;
}

export function renderDetail(c: Candidate): HTMLElement {
  return el(
    'section',
    { class: 'detail' },
    el('a', { href: '#/queue', class: 'back' }, '← queue'),
    el('img', { src: c.thumbnail, alt: `candidate ${c.candidate_id}`, class: 'hero' }),
    el(
      'dl',
      {},
      el('dt', {}, 'candidate'),
      el('dd', { class: 'mono' }, c.candidate_id),
      el('dt', {}, 'where'),
      el(
        'dd',
        {},
        `${c.body} / ${c.layer} z${c.zoom} · ${fmtLonLat(c.lonlat)} · `,
        el('a', { href: mapLink(c), target: '_blank', rel: 'noopener' }, 'open map'),
      ),
      el('dt', {}, 'detectors'),
      el('dd', {}, consensusBadges(c), ` consensus ${c.consensus}, ${c.neighbor_count} raw hits`),
      el('dt', {}, 'votes'),
      el('dd', { class: 'tally' }, tallyLine(c)),
    ),
    el('p', { class: 'hint' }, 'F votes face, N votes not face.'),
  );
}

export function renderLeaderboard(byBody: Map<string, Candidate[]>): HTMLElement {
  const root = el('section', { class: 'leaderboard' });
  root.append(el('h2', {}, 'Top faces'));
  if (!byBody.size) {
    root.append(el('p', {}, 'No reviewed candidates yet.'));
    return root;
  }
  for (const [body, items] of byBody) {
    const block = el('div', { class: 'board-body' }, el('h3', {}, body));
    const list = el('ol', { class: 'board' });
    for (const c of items) {
      list.append(
        el(
          'li',
          { 'data-id': c.candidate_id },
          el('img', { src: c.thumbnail, alt: c.candidate_id, loading: 'lazy' }),
          el(
            'div',
            {},
            el('a', { href: `#/candidate/${c.candidate_id}`, class: 'mono' }, c.candidate_id.slice(0, 8)),
            el('span', { class: 'score' }, c.tally.wilson_lower_bound.toFixed(3)),
            el('span', { class: 'tally' }, tallyLine(c)),
          ),
        ),
      );
    }
    block.append(list);
    root.append(block);
  }
  return root;
}
