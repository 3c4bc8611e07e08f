// Line-level diff for the side-by-side edit view: what the reviewer changed
// must be visible before the verdict is committed.

export type DiffKind = 'same' | 'removed' | 'added';

export interface DiffRow {
  kind: DiffKind;
  left: string | null;
  right: string | null;
}

/** Classic LCS over lines; fine at review-queue text sizes. */
export function diffLines(before: string, after: string): DiffRow[] {
  const a = before.split('\n');
  const b = after.split('\n');
  const m = a.length;
  const n = b.length;
  const lcs: number[][] = Array.from({ length: m + 1 }, () => new Array(n + 1).fill(0));
  for (let i = m - 1; i >= 0; i--) {
    for (let j = n - 1; j >= 0; j--) {
      lcs[i][j] = a[i] === b[j] ? lcs[i + 1][j + 1] + 1 : Math.max(lcs[i + 1][j], lcs[i][j + 1]);
    }
  }
  const rows: DiffRow[] = [];
  let i = 0;
  let j = 0;
  while (i < m && j < n) {
    if (a[i] === b[j]) {
      rows.push({ kind: 'same', left: a[i], right: b[j] });
      i++;
      j++;
    } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
      rows.push({ kind: 'removed', left: a[i], right: null });
      i++;
    } else {
      rows.push({ kind: 'added', left: null, right: b[j] });
      j++;
    }
  }
  for (; i < m; i++) rows.push({ kind: 'removed', left: a[i], right: null });
  for (; j < n; j++) rows.push({ kind: 'added', left: null, right: b[j] });
  return rows;
}
