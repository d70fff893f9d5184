/** Shared fixtures: hand-built scene JSON and an in-memory double of the
 *  layout service that speaks the documented HTTP API (including the 409
 *  busy_session behaviour), so the suite runs with no network and no backend.
 */

import type { FetchLike } from "../src/api.js";
import type {
  ActionJson,
  ItemJson,
  RoomJson,
  SceneJson,
  TurnResponse,
} from "../src/types.js";

export function makeRoom(w = 4, d = 4, height = 2.8): RoomJson {
  return {
    floor_polygon: [
      [0, 0],
      [w, 0],
      [w, d],
      [0, d],
    ],
    height,
    walls: [
      { id: "wall_top", a: [0, 0], b: [w, 0] },
      { id: "wall_left", a: [0, 0], b: [0, d] },
    ],
  };
}

export function makeItem(overrides: Partial<ItemJson> = {}): ItemJson {
  return {
    objkey: "crate_1",
    label: "crate",
    position: [2, 0, 2],
    theta: 0,
    scale: [1, 1, 1],
    aabb_local: { min: [-0.5, 0, -0.5], max: [0.5, 1, 0.5] },
    category: "Floor",
    ...overrides,
  };
}

export function makeScene(items: ItemJson[] = [], revision = 0, room: RoomJson = makeRoom()): SceneJson {
  return { room, items, revision };
}

export function deferred<T = void>(): {
  promise: Promise<T>;
  resolve: (v: T) => void;
  reject: (e: unknown) => void;
} {
  let resolve!: (v: T) => void;
  let reject!: (e: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

export interface ScriptedTurn {
  actions: ActionJson[];
  warnings: string[];
  mutate: (items: ItemJson[]) => ItemJson[];
}

interface MockSession {
  scene: SceneJson;
  turnIndex: number;
  busy: boolean;
  sent: string[];
}

function json(status: number, body: unknown): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "content-type": "application/json" },
  });
}

function errorResponse(status: number, code: string, message: string): Response {
  return json(status, { code, message, detail: { type: code } });
}

/** Replay-style service double: each session walks a fixed turn script. */
export class MockService {
  readonly sessions = new Map<string, MockSession>();
  readonly script: ScriptedTurn[];
  /** When set, message handling parks here (lets tests observe busy state). */
  gate: Promise<void> | null = null;
  requests: string[] = [];
  private counter = 0;

  constructor(script: ScriptedTurn[]) {
    this.script = script;
  }

  readonly fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const { pathname, searchParams } = new URL(url, "http://mock");
    this.requests.push(`${method} ${pathname}`);

    if (method === "POST" && pathname === "/sessions") {
      const body = JSON.parse(String(init?.body ?? "{}"));
      const spec = body.room ?? { width: 4, depth: 4 };
      if (body.backend === "replay" && !body.fixture) {
        return errorResponse(400, "invalid_request", "replay sessions need a 'fixture' file name");
      }
      const id = body.session_id ?? `mock-${++this.counter}`;
      const room = makeRoom(Number(spec.width), Number(spec.depth), Number(spec.height ?? 2.8));
      this.sessions.set(id, { scene: makeScene([], 0, room), turnIndex: 0, busy: false, sent: [] });
      return json(200, { session_id: id });
    }

    const m = pathname.match(/^\/sessions\/([^/]+)(?:\/(\w+))?$/);
    if (!m) return errorResponse(404, "not_found", `no route ${pathname}`);
    const session = this.sessions.get(m[1]);
    if (!session) return errorResponse(404, "unknown_session", `no session ${m[1]!}`);

    if (method === "POST" && m[2] === "message") {
      const body = JSON.parse(String(init?.body ?? "{}"));
      if (typeof body.text !== "string" || !body.text.trim()) {
        return errorResponse(400, "invalid_request", "message body needs non-empty 'text'");
      }
      if (session.busy) {
        return errorResponse(409, "busy_session", `session ${m[1]} is already processing a turn`);
      }
      session.busy = true;
      try {
        if (this.gate) await this.gate;
        const turn = this.script[session.turnIndex];
        if (!turn) {
          return errorResponse(400, "replay_exhausted", "no recorded turn left for this message");
        }
        session.turnIndex += 1;
        session.sent.push(body.text);
        session.scene = {
          ...session.scene,
          items: turn.mutate(session.scene.items.map((it) => ({ ...it }))),
          revision: session.scene.revision + 1,
        };
        const res: TurnResponse = {
          session_id: m[1],
          scene: session.scene,
          actions: turn.actions,
          warnings: turn.warnings,
          renders: [
            {
              digest: `digest-${session.scene.revision}`,
              url: `/sessions/${m[1]}/render?view=topdown`,
            },
          ],
        };
        return json(200, res);
      } finally {
        session.busy = false;
      }
    }

    if (method === "GET" && m[2] === "scene") {
      return json(200, session.scene);
    }
    if (method === "GET" && m[2] === "render") {
      const view = searchParams.get("view") ?? "topdown";
      if (view !== "topdown" && !view.startsWith("wall:")) {
        return errorResponse(400, "invalid_request", "view must be 'topdown' or 'wall:<wall_id>'");
      }
      return new Response(new Uint8Array([0x89, 0x50, 0x4e, 0x47]), {
        status: 200,
        headers: { "content-type": "image/png" },
      });
    }
    if (method === "GET" && m[2] === "transcript") {
      const lines = session.sent.map((t) => JSON.stringify({ role: "user", text: t }));
      return new Response(lines.join("\n") + (lines.length ? "\n" : ""), {
        status: 200,
        headers: { "content-type": "application/x-ndjson" },
      });
    }
    if (method === "DELETE" && !m[2]) {
      this.sessions.delete(m[1]);
      return json(200, {});
    }
    return errorResponse(404, "not_found", `no route ${method} ${pathname}`);
  };
}

/** Two-turn furnishing script used by the end-to-end style tests. */
export function furnishingScript(): ScriptedTurn[] {
  const sofa = makeItem({
    objkey: "sofa_1",
    label: "sofa",
    position: [2.5, 0, 1.2],
    theta: 0,
    aabb_local: { min: [-0.9, 0, -0.4], max: [0.9, 0.8, 0.4] },
  });
  const table = makeItem({
    objkey: "coffee_table_1",
    label: "coffee table",
    position: [2.5, 0, 2.4],
    theta: 0,
    aabb_local: { min: [-0.5, 0, -0.3], max: [0.5, 0.45, 0.3] },
  });
  return [
    {
      actions: [
        { type: "Add", objkey: "sofa_1", text: "a two-seat sofa" },
        { type: "Add", objkey: "coffee_table_1", text: "a low coffee table" },
      ],
      warnings: [],
      mutate: () => [sofa, table],
    },
    {
      actions: [{ type: "Rotate", objkey: "sofa_1", angle: 90 }],
      warnings: [],
      mutate: (items) =>
        items.map((it) => (it.objkey === "sofa_1" ? { ...it, theta: 90 } : it)),
    },
  ];
}
