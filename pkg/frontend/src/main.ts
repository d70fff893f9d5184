/** Page wiring: session form, chat panel, canvas views, timeline scrubber.
 *
 * The service base URL comes from ?service=... (defaults to the page origin,
 * which works when the UI is served next to the API or behind one proxy).
 */

import { ApiClient } from "./api.js";
import { PlanCanvas } from "./canvas.js";
import { SessionStore } from "./store.js";
import { buildTopDownPlan, buildWallPlan, hitTest, tooltipText, type PlanOptions } from "./viewplan.js";
import type { ActionJson, CreateSessionRequest } from "./types.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const params = new URLSearchParams(location.search);
const api = new ApiClient(params.get("service") ?? location.origin);
const store = new SessionStore(api);

const chatLog = el<HTMLDivElement>("chat-log");
const chatForm = el<HTMLFormElement>("chat-form");
const chatInput = el<HTMLInputElement>("chat-input");
const sendBtn = el<HTMLButtonElement>("send-btn");
const statusLine = el<HTMLDivElement>("status");
const canvasEl = el<HTMLCanvasElement>("plan-canvas");
const tooltip = el<HTMLDivElement>("tooltip");
const viewTabs = el<HTMLDivElement>("view-tabs");
const timeline = el<HTMLInputElement>("timeline");
const timelineLabel = el<HTMLSpanElement>("timeline-label");
const sessionForm = el<HTMLFormElement>("session-form");
const toggleGrid = el<HTMLInputElement>("toggle-grid");
const toggleShading = el<HTMLInputElement>("toggle-shading");
const toggleArrows = el<HTMLInputElement>("toggle-arrows");

const canvas = new PlanCanvas(canvasEl);
let activeView = "topdown"; // or "wall:<id>"

function planOptions(): PlanOptions {
  return { grid: toggleGrid.checked, shading: toggleShading.checked, arrows: toggleArrows.checked };
}

function describeAction(a: ActionJson): string {
  switch (a.type) {
    case "Add":
      return `Add ${a.objkey}`;
    case "Remove":
      return `Remove ${a.objkey}`;
    case "Translate":
      return `Move ${a.objkey} to (${a.position.map((v) => v.toFixed(2)).join(", ")})`;
    case "Scale":
      return `Scale ${a.objkey} by (${a.factors.map((v) => v.toFixed(2)).join(", ")})`;
    case "Rotate":
      return `Rotate ${a.objkey} by ${a.angle}°`;
  }
}

function renderChat(): void {
  chatLog.replaceChildren();
  for (const turn of store.turns) {
    const user = document.createElement("div");
    user.className = "msg user";
    user.textContent = turn.text;
    chatLog.appendChild(user);

    const agent = document.createElement("div");
    agent.className = "msg agent";
    const lines = turn.actions.map(describeAction);
    for (const w of turn.warnings) lines.push(`⚠ ${w}`);
    agent.textContent = lines.length ? lines.join("\n") : "(no changes)";
    chatLog.appendChild(agent);
  }
  if (store.busy) {
    const pending = document.createElement("div");
    pending.className = "msg agent pending";
    pending.textContent = "…thinking";
    chatLog.appendChild(pending);
  }
  chatLog.scrollTop = chatLog.scrollHeight;
}

function renderTabs(): void {
  const scene = store.viewedScene();
  viewTabs.replaceChildren();
  if (!scene) return;
  const views = ["topdown", ...scene.room.walls.map((w) => `wall:${w.id}`)];
  if (!views.includes(activeView)) activeView = "topdown";
  for (const view of views) {
    const btn = document.createElement("button");
    btn.type = "button";
    btn.textContent = view === "topdown" ? "Top-down" : view.slice(5);
    btn.className = view === activeView ? "tab active" : "tab";
    btn.addEventListener("click", () => {
      activeView = view;
      render();
    });
    viewTabs.appendChild(btn);
  }
}

function renderCanvas(): void {
  const scene = store.viewedScene();
  if (!scene) return;
  if (activeView === "topdown") {
    canvas.draw(buildTopDownPlan(scene, planOptions()));
  } else {
    canvas.draw(buildWallPlan(scene, activeView.slice(5)));
  }
}

function renderTimeline(): void {
  const history = store.sceneHistory();
  timeline.max = String(Math.max(0, history.length - 1));
  const i = store.viewIndex ?? history.length - 1;
  timeline.value = String(Math.max(0, i));
  timeline.disabled = history.length < 2 || store.busy;
  timelineLabel.textContent = store.isLive() ? "live" : `revision ${i} of ${history.length - 1}`;
}

function render(): void {
  const enabled = store.canSend();
  chatInput.disabled = !enabled;
  sendBtn.disabled = !enabled;
  statusLine.textContent = store.lastError
    ? store.lastError
    : store.busy
      ? "working…"
      : store.sessionId
        ? store.isLive()
          ? `session ${store.sessionId}`
          : "viewing history (read-only)"
        : "no session";
  renderChat();
  renderTabs();
  renderCanvas();
  renderTimeline();
}

store.subscribe(render);

sessionForm.addEventListener("submit", (ev) => {
  ev.preventDefault();
  const data = new FormData(sessionForm);
  const req: CreateSessionRequest = {
    room: {
      width: Number(data.get("width") || 5),
      depth: Number(data.get("depth") || 4),
      height: Number(data.get("height") || 2.8),
    },
  };
  const backend = String(data.get("backend") || "replay");
  if (backend === "live") {
    req.backend = "live";
  } else {
    req.backend = "replay";
    req.fixture = String(data.get("fixture") || "replay.jsonl");
  }
  void store.start(req).catch(() => undefined); // surfaced via store.lastError
});

chatForm.addEventListener("submit", (ev) => {
  ev.preventDefault();
  const text = chatInput.value.trim();
  if (!text || !store.canSend()) return;
  chatInput.value = "";
  void store.send(text).catch(() => undefined);
});

timeline.addEventListener("input", () => {
  const history = store.sceneHistory();
  const i = Number(timeline.value);
  store.setViewIndex(i >= history.length - 1 ? null : i);
});

for (const t of [toggleGrid, toggleShading, toggleArrows]) {
  t.addEventListener("change", render);
}

canvasEl.addEventListener("mousemove", (ev) => {
  const scene = store.viewedScene();
  if (!scene || activeView !== "topdown") {
    tooltip.hidden = true;
    return;
  }
  const rect = canvasEl.getBoundingClientRect();
  const world = canvas.worldFromPixel(ev.clientX - rect.left, ev.clientY - rect.top);
  if (!world) return;
  const hit = hitTest(buildTopDownPlan(scene, planOptions()), world[0], world[1]);
  if (!hit) {
    tooltip.hidden = true;
    return;
  }
  const item = scene.items.find((it) => it.objkey === hit.objkey);
  if (!item) return;
  tooltip.textContent = tooltipText(item);
  tooltip.style.left = `${ev.clientX - rect.left + 12}px`;
  tooltip.style.top = `${ev.clientY - rect.top + 12}px`;
  tooltip.hidden = false;
});

canvasEl.addEventListener("mouseleave", () => {
  tooltip.hidden = true;
});

render();
