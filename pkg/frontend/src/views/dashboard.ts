import { GatewayClient } from '../api.js';
import { escapeHtml, shortTimestamp } from '../format.js';
import type { ReportPayload } from '../types.js';

/** Stakeholder dashboard: totals plus the 10-bin risk-score histogram,
 * rendered field-for-field from the report payload. */
export class DashboardView {
  report: ReportPayload | null = null;
  lastError: string | null = null;

  constructor(
    private root: HTMLElement,
    private client: GatewayClient,
  ) {}

  async load(start: string, end: string): Promise<void> {
    try {
      this.report = await this.client.report(start, end);
      this.lastError = null;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
    }
    this.render(start, end);
  }

  render(start = '', end = ''): void {
    const form = `
      <form class="period" data-role="period">
        <input name="start" placeholder="start (RFC 3339)" value="${escapeHtml(start)}" />
        <input name="end" placeholder="end (RFC 3339)" value="${escapeHtml(end)}" />
        <button type="submit">Load</button>
      </form>`;
    if (!this.report) {
      this.root.innerHTML = `
        ${this.lastError ? `<div class="notice error">${escapeHtml(this.lastError)}</div>` : ''}
        ${form}<div class="empty">No report loaded.</div>`;
      this.wire();
      return;
    }
    const totals = this.report.totals;
    const maxBin = Math.max(1, ...totals.risk_score_histogram);
    const bars = totals.risk_score_histogram
      .map((count, i) => {
        const lo = (i / 10).toFixed(1);
        const hi = ((i + 1) / 10).toFixed(1);
        const height = Math.round((count / maxBin) * 100);
        return `
          <div class="bin">
            <div class="bar" data-role="hist-bar" data-bin="${i}" data-count="${count}"
                 style="height: ${height}%" title="[${lo},${hi}): ${count}"></div>
            <span class="bin-label">${lo}</span>
          </div>`;
      })
      .join('');
    const reasonRows = Object.entries(totals.rejected_by_reason)
      .map(
        ([reason, count]) =>
          `<tr data-reason="${escapeHtml(reason)}"><td>${escapeHtml(reason)}</td><td data-role="reason-count">${count}</td></tr>`,
      )
      .join('');
    const fmRows = Object.entries(totals.fm_calls_by_fm_id)
      .map(
        ([fmId, count]) =>
          `<tr data-fm="${escapeHtml(fmId)}"><td>${escapeHtml(fmId)}</td><td data-role="fm-count">${count}</td></tr>`,
      )
      .join('');
    this.root.innerHTML = `
      ${this.lastError ? `<div class="notice error">${escapeHtml(this.lastError)}</div>` : ''}
      ${form}
      <p class="period-label">
        ${escapeHtml(shortTimestamp(this.report.period.start))} &rarr;
        ${escapeHtml(shortTimestamp(this.report.period.end))}
        (generated ${escapeHtml(shortTimestamp(this.report.generated_at))})
      </p>
      <dl class="totals">
        <dt>requests</dt><dd data-field="requests">${totals.requests}</dd>
        <dt>delivered</dt><dd data-field="delivered">${totals.delivered}</dd>
        <dt>rejected</dt><dd data-field="rejected_total">${totals.rejected_total}</dd>
        <dt>held</dt><dd data-field="held">${totals.held}</dd>
        <dt>verifier overrides</dt><dd data-field="verifier_overrides">${totals.verifier_overrides}</dd>
      </dl>
      <section class="histogram">
        <h3>Risk score distribution</h3>
        <div class="bins" data-role="histogram">${bars}</div>
      </section>
      <section>
        <h3>Rejections by reason</h3>
        <table><tbody data-role="reasons">${reasonRows || '<tr><td colspan="2">none</td></tr>'}</tbody></table>
      </section>
      <section>
        <h3>FM invocations</h3>
        <table><tbody data-role="fm-calls">${fmRows || '<tr><td colspan="2">none</td></tr>'}</tbody></table>
      </section>
      ${this.report.process_notes
        ? `<section><h3>Process notes</h3><p data-role="process-notes">${escapeHtml(this.report.process_notes)}</p></section>`
        : ''}`;
    this.wire();
  }

  private wire(): void {
    this.root
      .querySelector<HTMLFormElement>('form[data-role="period"]')
      ?.addEventListener('submit', (event) => {
        event.preventDefault();
        const data = new FormData(event.currentTarget as HTMLFormElement);
        void this.load(String(data.get('start') ?? ''), String(data.get('end') ?? ''));
      });
  }
}
