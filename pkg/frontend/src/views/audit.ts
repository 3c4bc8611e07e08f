import { GatewayClient } from '../api.js';
import { escapeHtml, shortTimestamp } from '../format.js';
import type { AuditFilters, AuditPage, ChainStatus } from '../types.js';

const PAGE_SIZE = 25;

/** Paginated audit-event table with a chain-verification banner. */
export class AuditView {
  private page: AuditPage = { total: 0, events: [] };
  private status: ChainStatus | null = null;
  private offset = 0;
  filters: AuditFilters = {};
  lastError: string | null = null;

  constructor(
    private root: HTMLElement,
    private client: GatewayClient,
  ) {}

  async refresh(): Promise<void> {
    try {
      const [page, status] = await Promise.all([
        this.client.auditEvents({ ...this.filters, limit: PAGE_SIZE, offset: this.offset }),
        this.client.verifyChain(),
      ]);
      this.page = page;
      this.status = status;
      this.lastError = null;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
    }
    this.render();
  }

  async applyFilters(filters: AuditFilters): Promise<void> {
    this.filters = filters;
    this.offset = 0;
    await this.refresh();
  }

  async nextPage(): Promise<void> {
    if (this.offset + PAGE_SIZE < this.page.total) {
      this.offset += PAGE_SIZE;
      await this.refresh();
    }
  }

  async prevPage(): Promise<void> {
    this.offset = Math.max(0, this.offset - PAGE_SIZE);
    await this.refresh();
  }

  render(): void {
    const banner = this.status
      ? this.status.ok
        ? `<div class="banner ok" data-role="chain-banner">chain OK, ${this.status.events} events</div>`
        : `<div class="banner bad" data-role="chain-banner">chain BROKEN: first bad seq ${this.status.first_bad_seq}</div>`
      : '<div class="banner" data-role="chain-banner">verifying&hellip;</div>';

    const rows = this.page.events
      .map((ev) => {
        const requestId = typeof ev.payload.request_id === 'string' ? ev.payload.request_id : '';
        return `
          <tr data-seq="${ev.seq}">
            <td>${ev.seq}</td>
            <td>${escapeHtml(shortTimestamp(ev.timestamp_utc))}</td>
            <td>${escapeHtml(ev.kind)}</td>
            <td>${escapeHtml(ev.actor)}</td>
            <td>${escapeHtml(requestId)}</td>
            <td><details><summary>payload</summary><pre>${escapeHtml(
              JSON.stringify(ev.payload, null, 2),
            )}</pre></details></td>
          </tr>`;
      })
      .join('');

    const pageNo = Math.floor(this.offset / PAGE_SIZE) + 1;
    const pages = Math.max(1, Math.ceil(this.page.total / PAGE_SIZE));
    this.root.innerHTML = `
      ${this.lastError ? `<div class="notice error">${escapeHtml(this.lastError)}</div>` : ''}
      ${banner}
      <form class="filters" data-role="filters">
        <input name="kind" placeholder="kind" value="${escapeHtml(this.filters.kind ?? '')}" />
        <input name="actor" placeholder="actor" value="${escapeHtml(this.filters.actor ?? '')}" />
        <input name="request_id" placeholder="request id" value="${escapeHtml(this.filters.request_id ?? '')}" />
        <button type="submit">Apply</button>
      </form>
      <table class="events">
        <thead><tr><th>seq</th><th>time</th><th>kind</th><th>actor</th><th>request</th><th></th></tr></thead>
        <tbody data-role="event-rows">${rows}</tbody>
      </table>
      <nav class="pager">
        <button data-action="prev" ${this.offset === 0 ? 'disabled' : ''}>&laquo; prev</button>
        <span data-role="page-label">page ${pageNo} of ${pages} (${this.page.total} events)</span>
        <button data-action="next" ${this.offset + PAGE_SIZE >= this.page.total ? 'disabled' : ''}>next &raquo;</button>
      </nav>`;
    this.wire();
  }

  private wire(): void {
    this.root
      .querySelector<HTMLFormElement>('form[data-role="filters"]')
      ?.addEventListener('submit', (event) => {
        event.preventDefault();
        const form = event.currentTarget as HTMLFormElement;
        const data = new FormData(form);
        void this.applyFilters({
          kind: String(data.get('kind') ?? '') || undefined,
          actor: String(data.get('actor') ?? '') || undefined,
          request_id: String(data.get('request_id') ?? '') || undefined,
        });
      });
    this.root
      .querySelector<HTMLButtonElement>('button[data-action="prev"]')
      ?.addEventListener('click', () => void this.prevPage());
    this.root
      .querySelector<HTMLButtonElement>('button[data-action="next"]')
      ?.addEventListener('click', () => void this.nextPage());
  }
}
