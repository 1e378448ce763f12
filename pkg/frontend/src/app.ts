/** DOM wiring: query box, badge grid, infinite scroll, Finetune button. */

import { ApiClient } from './api.js';
import { UiSession } from './session.js';

const api = new ApiClient('');
const session = new UiSession(api);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const queryInput = el<HTMLInputElement>('query-input');
const searchButton = el<HTMLButtonElement>('search-button');
const finetuneButton = el<HTMLButtonElement>('finetune-button');
const roundCounter = el<HTMLSpanElement>('round-counter');
const grid = el<HTMLDivElement>('grid');
const banner = el<HTMLDivElement>('banner');
const bannerText = el<HTMLSpanElement>('banner-text');
const bannerDismiss = el<HTMLButtonElement>('banner-dismiss');
const sentinel = el<HTMLDivElement>('scroll-sentinel');

function renderControls(): void {
  searchButton.disabled = session.busy || queryInput.value.trim() === '';
  finetuneButton.disabled = !session.canFinetune();
  finetuneButton.title = finetuneButton.disabled
    ? 'mark at least one relevant (click) and one non-relevant (shift-click) image'
    : 'retrain on your marks and re-rank';
  roundCounter.textContent = `round ${session.round}`;
  if (session.error) {
    bannerText.textContent = session.error;
    banner.classList.remove('hidden');
  } else {
    banner.classList.add('hidden');
  }
}

function tileFor(imageId: string, rank: number): HTMLDivElement {
  const tile = document.createElement('div');
  tile.className = 'tile';
  tile.dataset.imageId = imageId;

  const img = document.createElement('img');
  img.src = api.imageUrl(imageId);
  img.alt = imageId;
  img.loading = 'lazy';
  img.draggable = false;

  const badge = document.createElement('span');
  badge.className = 'badge';

  const caption = document.createElement('span');
  caption.className = 'caption';
  caption.textContent = `#${rank} ${imageId}`;

  tile.append(img, badge, caption);
  tile.addEventListener('click', (event) => {
    session.toggleMark(imageId, event.shiftKey);
    paintBadge(tile, imageId);
    renderControls();
  });
  return tile;
}

function paintBadge(tile: HTMLDivElement, imageId: string): void {
  const badge = tile.querySelector('.badge') as HTMLSpanElement;
  badge.className = `badge badge-${session.badgeFor(imageId)}`;
}

function renderGrid(): void {
  grid.replaceChildren();
  for (const entry of session.entries) {
    const tile = tileFor(entry.imageId, entry.rank);
    paintBadge(tile, entry.imageId);
    grid.appendChild(tile);
  }
  renderControls();
}

searchButton.addEventListener('click', () => {
  void (async () => {
    const text = queryInput.value.trim();
    if (text === '') return;
    await session.submitQuery({ modality: 'text', text });
    renderGrid();
  })();
});

queryInput.addEventListener('keydown', (event) => {
  if (event.key === 'Enter') searchButton.click();
});
queryInput.addEventListener('input', renderControls);

finetuneButton.addEventListener('click', () => {
  void (async () => {
    await session.finetune();
    renderGrid();
    window.scrollTo({ top: 0 });
  })();
});

bannerDismiss.addEventListener('click', () => {
  session.dismissError();
  renderControls();
});

new IntersectionObserver((observed) => {
  if (observed.some((o) => o.isIntersecting) && session.hasMore() && !session.busy) {
    void session.loadMore().then((loaded) => {
      if (loaded) renderGrid();
    });
  }
}).observe(sentinel);

renderControls();
