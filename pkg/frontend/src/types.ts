// Wire types for the gateway HTTP API.

export type TaskStatus = 'pending' | 'approved' | 'edited' | 'rejected' | 'expired';

export interface VerificationTask {
  task_id: string;
  request_id: string;
  candidate_text: string;
  created_at: string;
  deadline: string;
  status: TaskStatus;
  verdict_by: string | null;
  final_text: string | null;
}

export interface AuditEvent {
  seq: number;
  timestamp_utc: string;
  location: string;
  actor: string;
  kind: string;
  payload: Record<string, unknown>;
  payload_digest: string;
  prev_hash: string;
  hash: string;
}

export interface AuditPage {
  total: number;
  events: AuditEvent[];
}

export interface AuditFilters {
  kind?: string;
  actor?: string;
  request_id?: string;
  limit?: number;
  offset?: number;
}

export interface ChainStatus {
  ok: boolean;
  first_bad_seq: number | null;
  events: number;
}

export interface ReportTotals {
  requests: number;
  delivered: number;
  rejected_total: number;
  rejected_by_reason: Record<string, number>;
  held: number;
  verifier_overrides: number;
  risk_score_histogram: number[];
  fm_calls_by_fm_id: Record<string, number>;
}

export interface ReportPayload {
  period: { start: string; end: string };
  totals: ReportTotals;
  generated_at: string;
  process_notes: string;
}

export interface GatewayResult {
  request_id: string;
  status: 'ok' | 'rejected' | 'held';
  text: string | null;
  reason_code: string | null;
  task_id?: string;
}
