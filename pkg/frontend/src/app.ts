// Shell: hash router, keyboard wiring, and re-render-on-change glue.

import { Candidate, QueueFilters, castVote, getCandidate, listCandidates } from './api.js';
import { voterToken } from './identity.js';
import { loadLeaderboard } from './leaderboard.js';
import { ReviewQueue, handleQueueKey } from './queue.js';
import { renderDetail, renderLeaderboard, renderQueue } from './views.js';

const IGNORED_TAGS = new Set(['INPUT', 'TEXTAREA', 'SELECT']);

type Route =
  | { kind: 'queue' }
  | { kind: 'detail'; id: string }
  | { kind: 'leaderboard' };

function parseRoute(hash: string): Route {
  const m = /^#\/candidate\/([0-9a-f]{16})$/.exec(hash);
  if (m && m[1]) return { kind: 'detail', id: m[1] };
  if (hash === '#/leaderboard') return { kind: 'leaderboard' };
  return { kind: 'queue' };
}

function readFilters(): QueueFilters {
  const saved = localStorage.getItem('facescan.filters');
  if (!saved) return {};
  try {
    return JSON.parse(saved) as QueueFilters;
  } catch {
    return {};
  }
}

export class App {
  private readonly voter = voterToken();
  private readonly queue: ReviewQueue;
  private detail: Candidate | null = null;
  private detailPending = false;
  private route: Route = { kind: 'queue' };

  constructor(private readonly root: HTMLElement) {
    this.queue = new ReviewQueue(
      {
        list: (filters, page, pageSize, voter) => listCandidates(filters, page, pageSize, voter),
        vote: (id, verdict, voter) => castVote(id, verdict, voter),
      },
      this.voter,
      readFilters(),
    );
    this.queue.subscribe(() => this.render());
  }

  async start(): Promise<void> {
    window.addEventListener('hashchange', () => void this.navigate());
    window.addEventListener('keydown', (ev) => this.onKey(ev));
    this.root.addEventListener('click', (ev) => this.onClick(ev));
    await this.queue.reset();
    await this.navigate();
  }

  private async navigate(): Promise<void> {
    this.route = parseRoute(location.hash);
    if (this.route.kind === 'detail') {
      this.detail = null;
      this.render();
      try {
        this.detail = await getCandidate(this.route.id, this.voter);
      } catch (err) {
        this.root.replaceChildren(document.createTextNode(String(err)));
        return;
      }
    }
    this.render();
  }

  private onKey(ev: KeyboardEvent): void {
    const target = ev.target as HTMLElement | null;
    if (target && (IGNORED_TAGS.has(target.tagName) || target.isContentEditable)) return;

    if (this.route.kind === 'queue') {
      if (handleQueueKey(this.queue, ev.key)) ev.preventDefault();
      return;
    }
    if (this.route.kind === 'detail' && this.detail && !this.detailPending) {
      const verdict = ev.key === 'f' || ev.key === 'F' ? 'face' : ev.key === 'n' || ev.key === 'N' ? 'not_face' : null;
      if (!verdict) return;
      ev.preventDefault();
      const card = this.detail;
      this.detailPending = true;
      castVote(card.candidate_id, verdict, this.voter)
        .then((tally) => {
          card.tally = tally;
          card.my_vote = verdict;
        })
        .catch((err) => console.error('vote failed:', err))
        .finally(() => {
          this.detailPending = false;
          this.render();
        });
    }
  }

  private onClick(ev: MouseEvent): void {
    const target = ev.target as HTMLElement | null;
    if (!target) return;
    if (target.classList.contains('load-more')) {
      void this.queue.loadMore();
      return;
    }
    const card = target.closest('.card') as HTMLElement | null;
    if (card && !(target instanceof HTMLAnchorElement)) {
      const idx = this.queue.cards.findIndex((c) => c.candidate_id === card.dataset.id);
      if (idx >= 0) this.queue.move(idx - this.queue.cursor);
    }
  }

  private render(): void {
    let view: HTMLElement;
    if (this.route.kind === 'detail') {
      view = this.detail
        ? renderDetail(this.detail)
        : Object.assign(document.createElement('p'), { textContent: 'Loading…' });
    } else if (this.route.kind === 'leaderboard') {
      view = document.createElement('section');
      view.textContent = 'Loading…';
      void loadLeaderboard(this.voter).then((byBody) => {
        if (this.route.kind === 'leaderboard') {
          this.root.replaceChildren(this.nav(), renderLeaderboard(byBody));
        }
      });
    } else {
      view = renderQueue(this.queue);
    }
    this.root.replaceChildren(this.nav(), view);
    const selected = this.root.querySelector('.card.selected');
    if (selected) (selected as HTMLElement).scrollIntoView({ block: 'nearest' });
  }

  private nav(): HTMLElement {
    const nav = document.createElement('nav');
    const here = this.route.kind;
    nav.innerHTML = [
      `<a href="#/queue" class="${here === 'queue' ? 'active' : ''}">Review</a>`,
      `<a href="#/leaderboard" class="${here === 'leaderboard' ? 'active' : ''}">Leaderboard</a>`,
      `<span class="spacer"></span>`,
      `<span class="hint">F face · N not face · arrows move</span>`,
    ].join('');
    return nav;
  }
}

// boot only in a real page; tests import pieces directly
if (typeof document !== 'undefined' && document.getElementById('app')) {
  const app = new App(document.getElementById('app') as HTMLElement);
  void app.start();
}
