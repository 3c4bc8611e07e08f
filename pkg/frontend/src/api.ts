import type {
  AuditFilters,
  AuditPage,
  ChainStatus,
  GatewayResult,
  ReportPayload,
  VerificationTask,
} from './types.js';

export interface ConsoleConfig {
  base_url: string;
  polling_interval_s: number;
}

/**
 * In-memory session. The API key lives only in this object; nothing is ever
 * written to localStorage, sessionStorage, or cookies.
 */
export class ConsoleSession {
  constructor(
    readonly apiKey: string,
    readonly baseUrl: string,
    readonly pollingIntervalS: number = 5,
  ) {}
}

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
    readonly requestId?: string,
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

type FetchLike = typeof fetch;

/** Loads the static deploy config served next to the app. */
export async function loadConfig(fetchImpl: FetchLike = fetch): Promise<ConsoleConfig> {
  const response = await fetchImpl('config.json');
  if (!response.ok) {
    throw new Error(`cannot load config.json: HTTP ${response.status}`);
  }
  const raw = await response.json();
  return {
    base_url: String(raw.base_url ?? ''),
    polling_interval_s: Number(raw.polling_interval_s ?? 5),
  };
}

export class GatewayClient {
  private fetchImpl: FetchLike;

  constructor(private session: ConsoleSession, fetchImpl?: FetchLike) {
    this.fetchImpl = fetchImpl ?? ((...args) => fetch(...args));
  }

  private async request<T>(path: string, init: RequestInit = {}): Promise<T> {
    const response = await this.fetchImpl(`${this.session.baseUrl}${path}`, {
      ...init,
      headers: {
        'X-Api-Key': this.session.apiKey,
        'Content-Type': 'application/json',
        ...(init.headers ?? {}),
      },
    });
    if (!response.ok) {
      let code = 'http_error';
      let message = `HTTP ${response.status}`;
      let requestId: string | undefined;
      try {
        const body = await response.json();
        if (body && body.error) {
          code = body.error.code ?? code;
          message = body.error.message ?? message;
          requestId = body.error.request_id;
        }
      } catch {
        // non-JSON error body; keep the generic message
      }
      throw new ApiError(code, message, response.status, requestId);
    }
    return response.json() as Promise<T>;
  }

  async pendingTasks(limit = 50): Promise<VerificationTask[]> {
    const body = await this.request<{ tasks: VerificationTask[] }>(
      `/v1/verifier/pending?limit=${limit}`,
    );
    return body.tasks;
  }

  submitVerdict(
    taskId: string,
    verdict: 'approve' | 'edit' | 'reject',
    newText?: string,
    reason?: string,
  ): Promise<VerificationTask> {
    return this.request<VerificationTask>(`/v1/verifier/${encodeURIComponent(taskId)}/verdict`, {
      method: 'POST',
      body: JSON.stringify({ verdict, new_text: newText ?? null, reason: reason ?? null }),
    });
  }

  auditEvents(filters: AuditFilters = {}): Promise<AuditPage> {
    const params = new URLSearchParams();
    for (const [key, value] of Object.entries(filters)) {
      if (value !== undefined && value !== '') params.set(key, String(value));
    }
    const qs = params.toString();
    return this.request<AuditPage>(`/v1/audit${qs ? `?${qs}` : ''}`);
  }

  verifyChain(): Promise<ChainStatus> {
    return this.request<ChainStatus>('/v1/audit/verify');
  }

  report(start: string, end: string): Promise<ReportPayload> {
    const params = new URLSearchParams({ start, end });
    return this.request<ReportPayload>(`/v1/report?${params}`);
  }

  complete(body: Record<string, unknown>): Promise<GatewayResult> {
    return this.request<GatewayResult>('/v1/complete', {
      method: 'POST',
      body: JSON.stringify(body),
    });
  }

  pollResult(requestId: string): Promise<GatewayResult> {
    return this.request<GatewayResult>(`/v1/complete/${encodeURIComponent(requestId)}`);
  }
}
