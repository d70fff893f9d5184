import { describe, expect, it, vi } from "vitest";

import { ApiError } from "../src/api.js";
import { SessionStore, type SessionApi } from "../src/store.js";
import type { SceneJson, TurnResponse } from "../src/types.js";
import { deferred, makeItem, makeScene } from "./helpers.js";

function turnResponse(scene: SceneJson): TurnResponse {
  return { session_id: "s1", scene, actions: [], warnings: [], renders: [] };
}

class FakeApi implements SessionApi {
  pending: ReturnType<typeof deferred<TurnResponse>>[] = [];
  calls = 0;

  async createSession(): Promise<string> {
    return "s1";
  }

  async getScene(): Promise<SceneJson> {
    return makeScene();
  }

  sendMessage(): Promise<TurnResponse> {
    this.calls += 1;
    const d = deferred<TurnResponse>();
    this.pending.push(d);
    return d.promise;
  }
}

async function startedStore(): Promise<{ api: FakeApi; store: SessionStore }> {
  const api = new FakeApi();
  const store = new SessionStore(api);
  await store.start({ room: { width: 4, depth: 4 } });
  return { api, store };
}

describe("busy gating", () => {
  it("disables sending for the whole in-flight turn", async () => {
    const { api, store } = await startedStore();
    expect(store.canSend()).toBe(true);

    const p1 = store.send("add a crate");
    expect(store.busy).toBe(true);
    expect(store.canSend()).toBe(false);

    await expect(store.send("too eager")).rejects.toMatchObject({ code: "busy_session" });
    expect(api.calls).toBe(1); // the second send never reached the API

    api.pending[0].resolve(turnResponse(makeScene([makeItem()], 1)));
    await p1;
    expect(store.busy).toBe(false);
    expect(store.canSend()).toBe(true);
    expect(store.turns.length).toBe(1);
  });

  it("surfaces a server-side busy_session and recovers", async () => {
    const { api, store } = await startedStore();
    const p = store.send("hello");
    api.pending[0].reject(
      new ApiError(409, { code: "busy_session", message: "session s1 is already processing a turn" }),
    );
    await expect(p).rejects.toBeInstanceOf(ApiError);
    expect(store.busy).toBe(false);
    expect(store.canSend()).toBe(true);
    expect(store.lastError).toContain("busy_session");
  });

  it("clears the error once a later turn succeeds", async () => {
    const { api, store } = await startedStore();
    const p = store.send("first");
    api.pending[0].reject(new ApiError(409, { code: "busy_session", message: "busy" }));
    await expect(p).rejects.toBeInstanceOf(ApiError);

    const p2 = store.send("second");
    api.pending[1].resolve(turnResponse(makeScene([], 1)));
    await p2;
    expect(store.lastError).toBeNull();
  });
});

describe("timeline scrubbing", () => {
  async function withTwoTurns() {
    const { api, store } = await startedStore();
    for (let i = 0; i < 2; i++) {
      const p = store.send(`turn ${i + 1}`);
      api.pending[i].resolve(turnResponse(makeScene([makeItem()], i + 1)));
      await p;
    }
    return { api, store };
  }

  it("tracks one scene per revision, newest live", async () => {
    const { store } = await withTwoTurns();
    const history = store.sceneHistory();
    expect(history.map((s) => s.revision)).toEqual([0, 1, 2]);
    expect(store.isLive()).toBe(true);
    expect(store.viewedScene()!.revision).toBe(2);
  });

  it("is read-only while viewing an older revision", async () => {
    const { api, store } = await withTwoTurns();
    store.setViewIndex(0);
    expect(store.viewedScene()!.revision).toBe(0);
    expect(store.isLive()).toBe(false);
    expect(store.canSend()).toBe(false);
    await expect(store.send("rewrite history")).rejects.toThrow(/read-only/);
    expect(api.calls).toBe(2);

    store.setViewIndex(null);
    expect(store.canSend()).toBe(true);
  });

  it("a new turn jumps the view back to the latest scene", async () => {
    const { api, store } = await withTwoTurns();
    store.setViewIndex(2); // the latest revision still counts as live
    expect(store.isLive()).toBe(true);

    const p = store.send("turn 3");
    api.pending[2].resolve(turnResponse(makeScene([], 3)));
    await p;
    expect(store.viewIndex).toBeNull();
    expect(store.viewedScene()!.revision).toBe(3);
  });
});

describe("subscriptions", () => {
  it("notifies on every state change until unsubscribed", async () => {
    const api = new FakeApi();
    const store = new SessionStore(api);
    const seen = vi.fn();
    const off = store.subscribe(seen);

    await store.start({ room: { width: 4, depth: 4 } });
    const afterStart = seen.mock.calls.length;
    expect(afterStart).toBeGreaterThan(0);

    store.setViewIndex(0);
    expect(seen.mock.calls.length).toBe(afterStart + 1);

    off();
    store.setViewIndex(null);
    expect(seen.mock.calls.length).toBe(afterStart + 1);
  });

  it("refuses to send without a session", async () => {
    const store = new SessionStore(new FakeApi());
    await expect(store.send("hi")).rejects.toThrow(/no session/);
  });
});
