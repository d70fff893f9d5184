/** Thin typed client for the layout service. All traffic goes through the
 *  documented HTTP API; the fetch implementation is injectable so tests can
 *  run without a network.
 */

import type { CreateSessionRequest, ErrorBody, SceneJson, TurnResponse } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly detail: unknown;

  constructor(status: number, body: ErrorBody) {
    super(body.message);
    this.name = "ApiError";
    this.code = body.code;
    this.status = status;
    this.detail = body.detail;
  }
}

export class ApiClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => globalThis.fetch(url, init));
  }

  async createSession(req: CreateSessionRequest): Promise<string> {
    const body = await this.request("POST", "/sessions", req);
    return (body as { session_id: string }).session_id;
  }

  async sendMessage(sessionId: string, text: string): Promise<TurnResponse> {
    const path = `/sessions/${encodeURIComponent(sessionId)}/message`;
    return (await this.request("POST", path, { text })) as TurnResponse;
  }

  async getScene(sessionId: string): Promise<SceneJson> {
    const path = `/sessions/${encodeURIComponent(sessionId)}/scene`;
    return (await this.request("GET", path)) as SceneJson;
  }

  async getTranscript(sessionId: string): Promise<string> {
    const path = `/sessions/${encodeURIComponent(sessionId)}/transcript`;
    const res = await this.send("GET", path);
    return res.text();
  }

  async deleteSession(sessionId: string): Promise<void> {
    await this.request("DELETE", `/sessions/${encodeURIComponent(sessionId)}`);
  }

  /** URL for an <img> tag; `view` is "topdown" or "wall:<wall_id>". */
  renderUrl(sessionId: string, view = "topdown"): string {
    const sid = encodeURIComponent(sessionId);
    return `${this.base}/sessions/${sid}/render?view=${encodeURIComponent(view)}`;
  }

  private async request(method: string, path: string, body?: unknown): Promise<unknown> {
    const res = await this.send(method, path, body);
    const text = await res.text();
    return text ? JSON.parse(text) : null;
  }

  private async send(method: string, path: string, body?: unknown): Promise<Response> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const res = await this.fetchImpl(`${this.base}${path}`, init);
    if (!res.ok) {
      throw new ApiError(res.status, await errorBody(res));
    }
    return res;
  }
}

async function errorBody(res: Response): Promise<ErrorBody> {
  try {
    const parsed = (await res.json()) as Partial<ErrorBody>;
    if (typeof parsed.code === "string" && typeof parsed.message === "string") {
      return { code: parsed.code, message: parsed.message, detail: parsed.detail };
    }
  } catch {
    // fall through: not a service-shaped error
  }
  return { code: "http_error", message: `HTTP ${res.status}` };
}
