import { ApiError, GatewayClient } from '../api.js';
import { diffLines } from '../diff.js';
import { countdown, escapeHtml } from '../format.js';
import type { VerificationTask } from '../types.js';

interface Conflict {
  taskId: string;
  message: string;
  preservedDraft: string | null;
}

/**
 * Live review queue. Verdict consequences are never computed locally: a
 * verdict optimistically removes the item, then the queue re-fetches so the
 * gateway stays the single source of truth. Transport errors roll the item
 * back; AlreadyDecided/Expired conflicts drop the candidate (someone else
 * decided) but keep the reviewer's in-progress edit visible for copy-out.
 */
export class QueueView {
  private tasks: VerificationTask[] = [];
  private drafts = new Map<string, string>();
  private editing = new Set<string>();
  private conflicts: Conflict[] = [];
  private timer: ReturnType<typeof setInterval> | null = null;
  lastError: string | null = null;

  constructor(
    private root: HTMLElement,
    private client: GatewayClient,
    private intervalS = 5,
  ) {}

  start(): void {
    void this.refresh();
    this.timer = setInterval(() => void this.refresh(), this.intervalS * 1000);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  cachedTaskIds(): string[] {
    return this.tasks.map((t) => t.task_id);
  }

  async refresh(): Promise<void> {
    try {
      const pending = await this.client.pendingTasks();
      const known = new Set(pending.map((t) => t.task_id));
      for (const id of [...this.editing]) {
        if (!known.has(id)) this.editing.delete(id);
      }
      for (const id of [...this.drafts.keys()]) {
        if (!known.has(id) && !this.conflicts.some((c) => c.taskId === id)) this.drafts.delete(id);
      }
      this.tasks = pending;
      this.lastError = null;
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
    }
    this.render();
  }

  async verdict(
    taskId: string,
    kind: 'approve' | 'edit' | 'reject',
    newText?: string,
    reason?: string,
  ): Promise<void> {
    const snapshot = this.tasks;
    const item = this.tasks.find((t) => t.task_id === taskId);
    this.tasks = this.tasks.filter((t) => t.task_id !== taskId);
    this.render();
    try {
      await this.client.submitVerdict(taskId, kind, newText, reason);
      this.drafts.delete(taskId);
      this.editing.delete(taskId);
      await this.refresh();
    } catch (err) {
      if (err instanceof ApiError && (err.code === 'already_decided' || err.code === 'expired')) {
        // Terminal elsewhere: never re-cache the candidate, keep the edit.
        const draft = this.drafts.get(taskId);
        const preserved = draft !== undefined && draft !== item?.candidate_text ? draft : null;
        this.drafts.delete(taskId);
        this.editing.delete(taskId);
        this.conflicts.push({ taskId, message: `${err.code}: ${err.message}`, preservedDraft: preserved });
        await this.refresh();
      } else {
        this.tasks = snapshot;
        this.lastError = err instanceof Error ? err.message : String(err);
        this.render();
      }
    }
  }

  dismissConflict(taskId: string): void {
    this.conflicts = this.conflicts.filter((c) => c.taskId !== taskId);
    this.render();
  }

  render(): void {
    const parts: string[] = [];
    if (this.lastError) {
      parts.push(`<div class="notice error" data-role="queue-error">${escapeHtml(this.lastError)}</div>`);
    }
    for (const conflict of this.conflicts) {
      parts.push(`
        <div class="notice conflict" data-task="${escapeHtml(conflict.taskId)}">
          <strong>Verdict not applied</strong> &mdash; ${escapeHtml(conflict.message)}
          ${conflict.preservedDraft !== null
            ? `<p>Your unsaved edit:</p><pre data-role="preserved-draft">${escapeHtml(conflict.preservedDraft)}</pre>`
            : ''}
          <button data-action="dismiss" data-task="${escapeHtml(conflict.taskId)}">Dismiss</button>
        </div>`);
    }
    if (this.tasks.length === 0) {
      parts.push('<div class="empty" data-role="empty">No tasks waiting for review.</div>');
    }
    for (const task of this.tasks) {
      parts.push(this.renderTask(task));
    }
    this.root.innerHTML = parts.join('\n');
    this.wire();
  }

  private renderTask(task: VerificationTask): string {
    const id = escapeHtml(task.task_id);
    const draft = this.drafts.get(task.task_id) ?? task.candidate_text;
    const editorOpen = this.editing.has(task.task_id);
    let editor = '';
    if (editorOpen) {
      const rows = diffLines(task.candidate_text, draft)
        .map(
          (row) => `
            <tr class="diff-${row.kind}">
              <td>${row.left === null ? '' : escapeHtml(row.left)}</td>
              <td>${row.right === null ? '' : escapeHtml(row.right)}</td>
            </tr>`,
        )
        .join('');
      editor = `
        <div class="editor">
          <textarea data-role="editor" data-task="${id}">${escapeHtml(draft)}</textarea>
          <table class="diff"><thead><tr><th>candidate</th><th>edited</th></tr></thead>
            <tbody>${rows}</tbody></table>
          <button data-action="submit-edit" data-task="${id}">Submit edit</button>
          <button data-action="cancel-edit" data-task="${id}">Cancel</button>
        </div>`;
    }
    return `
      <article class="task" data-task="${id}">
        <header>
          <span class="task-id">${id}</span>
          <span class="request-id">request ${escapeHtml(task.request_id)}</span>
          <span class="deadline" data-role="countdown">${countdown(task.deadline)}</span>
        </header>
        <pre class="candidate" data-role="candidate">${escapeHtml(task.candidate_text)}</pre>
        <div class="actions">
          <button data-action="approve" data-task="${id}">Approve</button>
          <button data-action="open-edit" data-task="${id}">Edit</button>
          <input data-role="reason" data-task="${id}" placeholder="rejection reason" />
          <button data-action="reject" data-task="${id}">Reject</button>
        </div>
        ${editor}
      </article>`;
  }

  private wire(): void {
    this.root.querySelectorAll<HTMLButtonElement>('button[data-action]').forEach((button) => {
      const taskId = button.dataset.task!;
      const action = button.dataset.action!;
      button.addEventListener('click', () => {
        if (action === 'approve') void this.verdict(taskId, 'approve');
        else if (action === 'reject') {
          const reason = this.root.querySelector<HTMLInputElement>(
            `input[data-role="reason"][data-task="${taskId}"]`,
          )?.value;
          void this.verdict(taskId, 'reject', undefined, reason || undefined);
        } else if (action === 'open-edit') {
          this.editing.add(taskId);
          this.render();
        } else if (action === 'cancel-edit') {
          this.editing.delete(taskId);
          this.drafts.delete(taskId);
          this.render();
        } else if (action === 'submit-edit') {
          void this.verdict(taskId, 'edit', this.drafts.get(taskId) ?? '');
        } else if (action === 'dismiss') {
          this.dismissConflict(taskId);
        }
      });
    });
    this.root.querySelectorAll<HTMLTextAreaElement>('textarea[data-role="editor"]').forEach((area) => {
      const taskId = area.dataset.task!;
      area.addEventListener('input', () => {
        this.drafts.set(taskId, area.value);
        // Redraw only the diff table so typing keeps focus.
        const table = this.root.querySelector(`article[data-task="${taskId}"] table.diff tbody`);
        const task = this.tasks.find((t) => t.task_id === taskId);
        if (table && task) {
          table.innerHTML = diffLines(task.candidate_text, area.value)
            .map(
              (row) => `
                <tr class="diff-${row.kind}">
                  <td>${row.left === null ? '' : escapeHtml(row.left)}</td>
                  <td>${row.right === null ? '' : escapeHtml(row.right)}</td>
                </tr>`,
            )
            .join('');
        }
      });
    });
  }
}
