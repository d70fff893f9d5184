/** UI session state: turn history, busy gating, and timeline scrubbing.
 *
 * The store is deliberately framework-free — main.ts subscribes and redraws.
 * Invariants the tests pin down:
 *   - send() flips busy before the request leaves, so the input disables for
 *     the whole turn; a second send while busy rejects locally without a call.
 *   - a server-side busy_session (another tab holds the turn lock) clears our
 *     busy flag and surfaces the message.
 *   - scrubbing back through history is read-only; sending resumes at live.
 */

import { ApiError } from "./api.js";
import type { ActionJson, CreateSessionRequest, SceneJson, TurnResponse } from "./types.js";

export interface Turn {
  text: string;
  actions: ActionJson[];
  warnings: string[];
  scene: SceneJson;
}

/** The slice of ApiClient the store needs (kept narrow so tests can fake it). */
export interface SessionApi {
  createSession(req: CreateSessionRequest): Promise<string>;
  sendMessage(sessionId: string, text: string): Promise<TurnResponse>;
  getScene(sessionId: string): Promise<SceneJson>;
}

export type Listener = () => void;

export class SessionStore {
  private readonly api: SessionApi;
  private readonly listeners = new Set<Listener>();

  sessionId: string | null = null;
  initialScene: SceneJson | null = null;
  turns: Turn[] = [];
  busy = false;
  /** Index into sceneHistory(); null means "follow the latest turn". */
  viewIndex: number | null = null;
  lastError: string | null = null;

  constructor(api: SessionApi) {
    this.api = api;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.add(fn);
    return () => this.listeners.delete(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  async start(req: CreateSessionRequest): Promise<string> {
    this.busy = true;
    this.lastError = null;
    this.emit();
    try {
      const id = await this.api.createSession(req);
      this.sessionId = id;
      this.initialScene = await this.api.getScene(id);
      this.turns = [];
      this.viewIndex = null;
      return id;
    } catch (err) {
      this.lastError = describe(err);
      throw err;
    } finally {
      this.busy = false;
      this.emit();
    }
  }

  /** One scene per revision: the empty room, then each turn's result. */
  sceneHistory(): SceneJson[] {
    const out: SceneJson[] = [];
    if (this.initialScene) out.push(this.initialScene);
    for (const t of this.turns) out.push(t.scene);
    return out;
  }

  viewedScene(): SceneJson | null {
    const history = this.sceneHistory();
    if (history.length === 0) return null;
    const i = this.viewIndex ?? history.length - 1;
    return history[Math.max(0, Math.min(i, history.length - 1))];
  }

  isLive(): boolean {
    return this.viewIndex === null || this.viewIndex === this.sceneHistory().length - 1;
  }

  canSend(): boolean {
    return this.sessionId !== null && !this.busy && this.isLive();
  }

  setViewIndex(i: number | null): void {
    this.viewIndex = i;
    this.emit();
  }

  async send(text: string): Promise<TurnResponse> {
    if (this.sessionId === null) {
      throw new Error("no session");
    }
    if (this.busy) {
      throw new ApiError(409, {
        code: "busy_session",
        message: "a turn is already in flight",
      });
    }
    if (!this.isLive()) {
      throw new Error("viewing history is read-only; return to live to send");
    }
    this.busy = true;
    this.lastError = null;
    this.emit();
    try {
      const res = await this.api.sendMessage(this.sessionId, text);
      this.turns.push({
        text,
        actions: res.actions,
        warnings: res.warnings,
        scene: res.scene,
      });
      this.viewIndex = null; // a new turn always jumps the view back to live
      return res;
    } catch (err) {
      this.lastError = describe(err);
      throw err;
    } finally {
      this.busy = false;
      this.emit();
    }
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) return `${err.code}: ${err.message}`;
  return err instanceof Error ? err.message : String(err);
}
