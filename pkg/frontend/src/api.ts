/** Typed client for the session service (docs/api.md, v1).
 *
 * The transport is injectable so tests can run against an in-memory server.
 * `submitChoice` owns the retry discipline: a network failure retries the
 * same token, and a conflict seen during a retry means the first attempt was
 * recorded before the response was lost, so it is reported as delivered. A
 * token is therefore never double-counted.
 */

import type {
  AdvanceSummary,
  ApiError,
  Choice,
  ChoiceAck,
  CreateSessionOptions,
  DetectionTrialRecord,
  Reconstruction,
  SessionStatus,
  TerminateSummary,
  TrialPayload,
} from "./types.js";

export interface TransportResponse {
  status: number;
  body: unknown;
}

export type Transport = (
  method: string,
  path: string,
  body?: unknown,
) => Promise<TransportResponse>;

export class ApiRequestError extends Error {
  constructor(
    readonly status: number,
    readonly category: string,
    message: string,
  ) {
    super(message);
  }
}

export function fetchTransport(baseUrl: string, fetchFn: typeof fetch = fetch): Transport {
  return async (method, path, body) => {
    const response = await fetchFn(baseUrl.replace(/\/$/, "") + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    let parsed: unknown = null;
    const text = await response.text();
    if (text) {
      try {
        parsed = JSON.parse(text);
      } catch {
        parsed = text;
      }
    }
    return { status: response.status, body: parsed };
  };
}

function errorOf(response: TransportResponse): ApiError {
  const body = response.body as { error?: ApiError } | null;
  if (body && typeof body === "object" && body.error) return body.error;
  return { category: `http_${response.status}`, message: String(response.body ?? "") };
}

function unwrap<T>(response: TransportResponse): T {
  if (response.status >= 400) {
    const err = errorOf(response);
    throw new ApiRequestError(response.status, err.category, err.message);
  }
  return response.body as T;
}

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export interface RetryPolicy {
  attempts: number;
  delayMs: number;
  onRetry?: (attempt: number, error: unknown) => void;
}

const DEFAULT_RETRY: RetryPolicy = { attempts: 5, delayMs: 250 };

export class SessionClient {
  constructor(
    private readonly transport: Transport,
    private readonly retry: RetryPolicy = DEFAULT_RETRY,
  ) {}

  private async withRetry<T>(run: () => Promise<T>): Promise<T> {
    let lastError: unknown;
    for (let attempt = 0; attempt < this.retry.attempts; attempt++) {
      try {
        return await run();
      } catch (error) {
        if (error instanceof ApiRequestError) throw error; // domain errors are final
        lastError = error;
        this.retry.onRetry?.(attempt + 1, error);
        await sleep(this.retry.delayMs);
      }
    }
    throw lastError;
  }

  createSession(options: CreateSessionOptions): Promise<SessionStatus> {
    return this.withRetry(async () => unwrap(await this.transport("POST", "/sessions", options)));
  }

  status(sessionId: string): Promise<SessionStatus> {
    return this.withRetry(async () => unwrap(await this.transport("GET", `/sessions/${sessionId}`)));
  }

  nextTrial(sessionId: string): Promise<TrialPayload> {
    // safe to retry blindly: issuing is idempotent until the trial is answered
    return this.withRetry(async () => unwrap(await this.transport("GET", `/sessions/${sessionId}/trial`)));
  }

  async submitChoice(sessionId: string, token: string, choice: Choice): Promise<ChoiceAck | "already-recorded"> {
    let sawNetworkFailure = false;
    for (let attempt = 0; attempt < this.retry.attempts; attempt++) {
      let response: TransportResponse;
      try {
        response = await this.transport("POST", `/sessions/${sessionId}/choices`, { token, choice });
      } catch (error) {
        sawNetworkFailure = true;
        this.retry.onRetry?.(attempt + 1, error);
        await sleep(this.retry.delayMs);
        continue;
      }
      if (response.status < 400) return response.body as ChoiceAck;
      const err = errorOf(response);
      if (err.category === "conflict" && sawNetworkFailure) {
        // the earlier attempt landed and its ack was lost in transit
        return "already-recorded";
      }
      throw new ApiRequestError(response.status, err.category, err.message);
    }
    throw new Error(`submitChoice(${token}): network kept failing`);
  }

  advance(sessionId: string): Promise<AdvanceSummary> {
    return this.withRetry(async () => unwrap(await this.transport("POST", `/sessions/${sessionId}/advance`)));
  }

  terminate(sessionId: string, force = false): Promise<TerminateSummary> {
    return this.withRetry(async () =>
      unwrap(await this.transport("POST", `/sessions/${sessionId}/terminate`, { force })),
    );
  }

  reconstruction(sessionId: string): Promise<Reconstruction> {
    return this.withRetry(async () =>
      unwrap(await this.transport("GET", `/sessions/${sessionId}/reconstruction`)),
    );
  }

  uploadDetectionLog(name: string, trials: DetectionTrialRecord[]): Promise<{ stored: string; summary: unknown }> {
    return this.withRetry(async () =>
      unwrap(await this.transport("POST", "/detection-logs", { name, trials })),
    );
  }
}
