export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

/** "4m 02s" countdown to a deadline; "expired" once past. */
export function countdown(deadlineIso: string, now: Date = new Date()): string {
  const remaining = Math.floor((Date.parse(deadlineIso) - now.getTime()) / 1000);
  if (remaining <= 0) return 'expired';
  const minutes = Math.floor(remaining / 60);
  const seconds = remaining % 60;
  if (minutes >= 60) {
    const hours = Math.floor(minutes / 60);
    return `${hours}h ${String(minutes % 60).padStart(2, '0')}m`;
  }
  return `${minutes}m ${String(seconds).padStart(2, '0')}s`;
}

export function shortTimestamp(iso: string): string {
  return iso.replace('T', ' ').replace(/\.\d+Z$/, 'Z');
}
