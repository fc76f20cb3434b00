/** DOM wiring: connect, steer, render, play. */

import { AudioPlayer } from "./audioplayer.js";
import { SessionClient, WsLike } from "./client.js";
import { ZONE_LABELS } from "./colors.js";
import { drawScene } from "./render2d.js";
import { SteeringController } from "./steering.js";
import { SessionStore } from "./store.js";

const DEFAULT_URL = "ws://127.0.0.1:8765";
const PLANNED_ENTRY: [number, number, number] = [0, 0, 70.2];
const PLANNED_AXIS: [number, number, number] = [0, 0, -1];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const store = new SessionStore();
const audio = new AudioPlayer(48000);
const steering = new SteeringController({
  entry: PLANNED_ENTRY,
  axis: PLANNED_AXIS,
  stepMm: 0.5,
  maxRateHz: 60,
  maxDepthMm: 40,
});

let client: SessionClient | null = null;

function connect(): void {
  const url = (el<HTMLInputElement>("url")).value || DEFAULT_URL;
  client?.close();
  store.reset();
  client = new SessionClient(url, store, {
    wsFactory: (u) => new WebSocket(u) as unknown as WsLike,
    onAudio: (chunk) => audio.push(chunk),
    onControlReply: (reply) => {
      if (typeof reply.outcome === "string") {
        el("outcome").textContent = `outcome: ${reply.outcome}`;
      }
      if (reply.ok === false && typeof reply.error === "string") {
        el("outcome").textContent = `error: ${reply.error}`;
      }
    },
  });
  client.connect();
}

el<HTMLButtonElement>("connect").onclick = connect;

el<HTMLButtonElement>("audio-enable").onclick = async () => {
  await audio.enable();
  el("audio-enable").textContent = "audio on";
};

el<HTMLButtonElement>("start").onclick = () => {
  steering.resetDepth();
  steering.setEnabled(true);
  steering.setDepth(0);
  el("outcome").textContent = "";
  client?.sendCommand({ cmd: "start", modality: "MS" });
  // Publish the starting pose right away so the engine sees the needle.
  client?.sendCommand({ cmd: "pose", tip: steering.tipAt(0), axis: PLANNED_AXIS });
};

el<HTMLButtonElement>("stop").onclick = () => {
  steering.setEnabled(false);
  client?.sendCommand({ cmd: "stop" });
};

window.addEventListener("keydown", (ev) => {
  if (ev.key === "ArrowUp" || ev.key === "w") {
    steering.step(1);
    ev.preventDefault();
  } else if (ev.key === "ArrowDown" || ev.key === "s") {
    steering.step(-1);
    ev.preventDefault();
  }
});

const slider = el<HTMLInputElement>("depth");
slider.oninput = () => steering.setDepth(Number(slider.value));

// Steering poll: coalesced pose commands at the controller's rate cap.
setInterval(() => {
  const cmd = steering.poll(performance.now());
  if (cmd && client) client.sendCommand(cmd);
  slider.value = String(steering.depth);
  el("depth-label").textContent = `${steering.depth.toFixed(1)} mm`;
}, 8);

const canvas = el<HTMLCanvasElement>("view");
const ctx = canvas.getContext("2d");

function fmt(x: number | null | undefined, digits = 1): string {
  return x === null || x === undefined ? "--" : x.toFixed(digits);
}

function renderLoop(): void {
  const snap = store.snapshot;
  if (ctx) drawScene(ctx, canvas.width, canvas.height, store.scene, snap, PLANNED_ENTRY, PLANNED_AXIS);

  const badge = el("state-badge");
  badge.style.backgroundColor = store.badgeColor();
  badge.textContent = snap?.state ? `${snap.state} ${ZONE_LABELS[snap.state]}` : "no data";

  el("dtp").textContent = fmt(snap?.d_tp);
  el("dtm").textContent = fmt(snap?.d_tm);
  el("timer").textContent = snap?.trial.active ? `${fmt(snap.trial.elapsed)} s` : "idle";
  if (snap?.trial.outcome && !snap.trial.active) {
    el("outcome").textContent = `outcome: ${snap.trial.outcome}`;
  }

  const stale = store.isStale(Date.now());
  el("stale").style.display = stale ? "block" : "none";
  el("conn").textContent = client?.connected ? "connected" : "offline";
  el("conn").className = client?.connected ? "ok" : "bad";

  requestAnimationFrame(renderLoop);
}

requestAnimationFrame(renderLoop);
