// @vitest-environment jsdom
import { beforeEach, describe, expect, it, vi } from 'vitest';

import { DashboardView } from '../src/views/dashboard.js';
import type { ReportPayload } from '../src/types.js';

const REPORT: ReportPayload = {
  period: { start: '2026-01-01T00:00:00.000Z', end: '2026-01-02T00:00:00.000Z' },
  totals: {
    requests: 12,
    delivered: 7,
    rejected_total: 3,
    rejected_by_reason: { blacklisted_term: 2, verifier_timeout: 1 },
    held: 2,
    verifier_overrides: 1,
    risk_score_histogram: [4, 0, 2, 0, 0, 1, 0, 0, 0, 5],
    fm_calls_by_fm_id: { 'echo-1': 6, 'scripted-2': 1 },
  },
  generated_at: '2026-01-02T01:00:00.000Z',
  process_notes: 'release 3 rollout',
};

function makeClient(report: ReportPayload = REPORT) {
  return { report: vi.fn(async () => report) };
}

describe('DashboardView', () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = '<div id="root"></div>';
    root = document.getElementById('root')!;
  });

  it('renders totals field-for-field', async () => {
    const view = new DashboardView(root, makeClient() as any);
    await view.load('2026-01-01T00:00:00Z', '2026-01-02T00:00:00Z');
    const field = (name: string) => root.querySelector(`[data-field="${name}"]`)!.textContent;
    expect(field('requests')).toBe('12');
    expect(field('delivered')).toBe('7');
    expect(field('rejected_total')).toBe('3');
    expect(field('held')).toBe('2');
    expect(field('verifier_overrides')).toBe('1');
    expect(root.querySelector('[data-role="process-notes"]')!.textContent).toBe('release 3 rollout');
  });

  it('histogram bar counts equal the 10 report bins', async () => {
    const view = new DashboardView(root, makeClient() as any);
    await view.load('s', 'e');
    const bars = [...root.querySelectorAll('[data-role="hist-bar"]')];
    expect(bars).toHaveLength(10);
    expect(bars.map((b) => Number(b.getAttribute('data-count')))).toEqual(
      REPORT.totals.risk_score_histogram,
    );
    const heights = bars.map((b) => (b as HTMLElement).style.height);
    expect(heights[9]).toBe('100%'); // max bin fills the scale
    expect(heights[1]).toBe('0%');
  });

  it('renders an all-zero dashboard for a zero-traffic period', async () => {
    const empty: ReportPayload = {
      ...REPORT,
      totals: {
        requests: 0,
        delivered: 0,
        rejected_total: 0,
        rejected_by_reason: {},
        held: 0,
        verifier_overrides: 0,
        risk_score_histogram: Array(10).fill(0),
        fm_calls_by_fm_id: {},
      },
      process_notes: '',
    };
    const view = new DashboardView(root, makeClient(empty) as any);
    await view.load('s', 'e');
    expect(root.querySelector('[data-field="requests"]')!.textContent).toBe('0');
    expect(root.querySelector('[data-role="reasons"]')!.textContent).toContain('none');
    expect(root.querySelector('[data-role="fm-calls"]')!.textContent).toContain('none');
  });

  it('shows reason and fm tables with exact counts', async () => {
    const view = new DashboardView(root, makeClient() as any);
    await view.load('s', 'e');
    const reason = root.querySelector('tr[data-reason="blacklisted_term"] [data-role="reason-count"]');
    expect(reason!.textContent).toBe('2');
    const fm = root.querySelector('tr[data-fm="echo-1"] [data-role="fm-count"]');
    expect(fm!.textContent).toBe('6');
  });
});
