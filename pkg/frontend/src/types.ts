/** Wire-format types for the layout service's HTTP API.
 *
 * These mirror the JSON the service emits byte-for-byte conceptually: scenes
 * are canonical JSON documents, actions are a tagged union, and every error
 * body carries {code, message, detail?}.
 */

export interface WallJson {
  id: string;
  a: [number, number];
  b: [number, number];
}

export interface RoomJson {
  floor_polygon: [number, number][];
  height: number;
  walls: WallJson[];
}

export interface AabbJson {
  min: [number, number, number];
  max: [number, number, number];
}

export interface ItemJson {
  objkey: string;
  label: string;
  position: [number, number, number];
  theta: number; // degrees about vertical, counter-clockwise in (x, z)
  scale: [number, number, number];
  aabb_local: AabbJson;
  category: string;
  parent?: string;
}

export interface SceneJson {
  room: RoomJson;
  items: ItemJson[];
  revision: number;
}

export interface AddJson {
  type: "Add";
  objkey: string;
  text: string;
}

export interface RemoveJson {
  type: "Remove";
  objkey: string;
}

export interface TranslateJson {
  type: "Translate";
  objkey: string;
  position: [number, number, number];
}

export interface ScaleJson {
  type: "Scale";
  objkey: string;
  factors: [number, number, number];
}

export interface RotateJson {
  type: "Rotate";
  objkey: string;
  angle: number;
}

export type ActionJson = AddJson | RemoveJson | TranslateJson | ScaleJson | RotateJson;

export interface RenderRef {
  digest: string;
  url: string;
}

export interface TurnResponse {
  session_id: string;
  scene: SceneJson;
  actions: ActionJson[];
  warnings: string[];
  renders: RenderRef[];
}

export interface ErrorBody {
  code: string;
  message: string;
  detail?: unknown;
}

export interface RoomSpec {
  width: number;
  depth: number;
  height?: number;
  tagged?: string[];
}

/** Body for POST /sessions. Exactly one of `room` / `preset` picks the shell;
 *  `backend` defaults to "replay" server-side, which then requires `fixture`. */
export interface CreateSessionRequest {
  room?: RoomSpec;
  preset?: string;
  backend?: "replay" | "live";
  fixture?: string;
  session_id?: string;
  config?: Record<string, unknown>;
}
