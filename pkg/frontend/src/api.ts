/** Thin fetch wrappers around the game service endpoints. */
import type {
  ApiErrorBody,
  ContextChoice,
  ReportResponse,
  RevealResponse,
  SessionView,
  SubmitResponse,
} from "./types.js";

export class ApiError extends Error {
  code: string;
  status: number;

  constructor(status: number, body: ApiErrorBody) {
    super(body.message);
    this.code = body.code;
    this.status = status;
  }
}

async function request<T>(base: string, path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(base + path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await response.json();
  if (!response.ok) {
    throw new ApiError(response.status, body as ApiErrorBody);
  }
  return body as T;
}

export function createSession(base: string, config: unknown): Promise<SessionView> {
  return request<SessionView>(base, "/sessions", {
    method: "POST",
    body: JSON.stringify(config),
  });
}

export function submitContext(
  base: string,
  sessionId: string,
  context: ContextChoice
): Promise<SubmitResponse> {
  return request<SubmitResponse>(base, `/sessions/${sessionId}/context`, {
    method: "POST",
    body: JSON.stringify({ context }),
  });
}

export function reveal(base: string, sessionId: string): Promise<RevealResponse> {
  return request<RevealResponse>(base, `/sessions/${sessionId}/reveal`, {
    method: "POST",
  });
}

export function fetchReport(base: string, sessionId: string): Promise<ReportResponse> {
  return request<ReportResponse>(base, `/sessions/${sessionId}/report`);
}
