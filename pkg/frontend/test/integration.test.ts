/**
 * Live round-trip against the Python engine: spawns `sonoguide serve`,
 * drives it over UDP (OSC) and the /control WebSocket, and checks that the
 * client-side store/badge pipeline mirrors every server state.
 */

import assert from "node:assert/strict";
import { spawn, spawnSync } from "node:child_process";
import { createSocket } from "node:dgram";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { test } from "node:test";

import WebSocket from "ws";

import { stateColor } from "../src/colors.js";
import { SessionStore } from "../src/store.js";
import type { Snapshot, ZoneId } from "../src/protocol.js";

function oscFloat(address: string, value: number): Buffer {
  const pad4 = (n: number) => (n + 4) & ~3; // length including the NUL, padded
  const addr = Buffer.alloc(pad4(address.length));
  addr.write(address, "ascii");
  const tags = Buffer.alloc(4);
  tags.write(",f", "ascii");
  const payload = Buffer.alloc(4);
  payload.writeFloatBE(value);
  return Buffer.concat([addr, tags, payload]);
}

function pythonAvailable(): boolean {
  const probe = spawnSync("python3", ["-c", "import sonoguide"], { timeout: 30000 });
  return probe.status === 0;
}

interface Engine {
  wsPort: number;
  udpPort: number;
  kill(): void;
}

async function startEngine(): Promise<Engine> {
  const dir = mkdtempSync(join(tmpdir(), "sonoguide-ui-"));
  const config = join(dir, "config.json");
  writeFileSync(config, JSON.stringify({
    session: {
      phantom: { subdivisions: 2 },
      control_rate: 60,
      ws_port: 0,
      udp_port: 0,
    },
  }));
  const proc = spawn("python3", ["-m", "sonoguide.cli", "serve", "--config", config], {
    stdio: ["ignore", "pipe", "pipe"],
  });
  const ports = await new Promise<{ ws_port: number; udp_port: number }>((resolve, reject) => {
    let buf = "";
    const timer = setTimeout(() => reject(new Error("engine did not report ports")), 30000);
    proc.stdout.on("data", (chunk: Buffer) => {
      buf += chunk.toString();
      const line = buf.split("\n").find((l) => l.includes("ws_port"));
      if (line) {
        clearTimeout(timer);
        resolve(JSON.parse(line));
      }
    });
    proc.on("exit", (code) => reject(new Error(`engine exited early: ${code}`)));
  });
  return {
    wsPort: ports.ws_port,
    udpPort: ports.udp_port,
    kill: () => proc.kill("SIGKILL"),
  };
}

class StateFeed {
  readonly store = new SessionStore();
  private readonly ws: WebSocket;
  private waiters: Array<{ predicate: (s: Snapshot) => boolean; resolve: (s: Snapshot) => void }> = [];

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.on("message", (data: Buffer) => {
      const kind = this.store.update(data.toString(), Date.now());
      const snap = this.store.snapshot;
      if (kind === "snapshot" && snap) {
        this.waiters = this.waiters.filter((w) => {
          if (w.predicate(snap)) {
            w.resolve(snap);
            return false;
          }
          return true;
        });
      }
    });
  }

  opened(): Promise<void> {
    return new Promise((resolve) => this.ws.on("open", () => resolve()));
  }

  next(predicate: (s: Snapshot) => boolean, timeoutMs = 5000): Promise<Snapshot> {
    return new Promise((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("timed out waiting for snapshot")), timeoutMs);
      this.waiters.push({
        predicate,
        resolve: (s) => {
          clearTimeout(timer);
          resolve(s);
        },
      });
    });
  }

  close(): void {
    this.ws.close();
  }
}

const hasPython = pythonAvailable();

test("live engine round-trips", { skip: !hasPython }, async (t) => {
  const engine = await startEngine();
  const udp = createSocket("udp4");
  const feed = new StateFeed(`ws://127.0.0.1:${engine.wsPort}/state`);
  const control = new WebSocket(`ws://127.0.0.1:${engine.wsPort}/control`);
  const replies: Array<Record<string, unknown>> = [];
  control.on("message", (d: Buffer) => replies.push(JSON.parse(d.toString())));

  const sendOsc = (address: string, value: number) =>
    udp.send(oscFloat(address, value), engine.udpPort, "127.0.0.1");
  const sendCmd = (cmd: Record<string, unknown>) => control.send(JSON.stringify(cmd));

  try {
    await feed.opened();
    await new Promise<void>((resolve) => control.on("open", () => resolve()));

    await t.test("steer command reflected in a snapshot within 100 ms", async () => {
      sendCmd({ cmd: "start", trial_id: "ui-rt", modality: "MS" });
      const durations: number[] = [];
      for (let i = 0; i < 20; i++) {
        const depth = i * 0.5;
        const tipZ = 70.2 - depth;
        const t0 = performance.now();
        sendCmd({ cmd: "pose", tip: [0, 0, tipZ], axis: [0, 0, -1] });
        await feed.next((s) => !!s.pose && Math.abs(s.pose.tip[2] - tipZ) < 1e-6);
        durations.push(performance.now() - t0);
      }
      sendCmd({ cmd: "stop" });
      const worst = Math.max(...durations);
      assert.ok(worst < 100, `worst steer round-trip ${worst.toFixed(1)} ms`);
    });

    await t.test("badge color matches the snapshot state over 500 scripted transitions", async () => {
      const zones: Array<{ state: ZoneId; dtp: number; dtm: number }> = [
        { state: "S1", dtp: 20.0, dtm: 25.0 },
        { state: "S2", dtp: 3.0, dtm: 25.0 },
        { state: "S3", dtp: -1.0, dtm: 25.0 },
        { state: "S4", dtp: -1.0, dtm: 1.0 },
      ];
      const seen: Record<string, number> = { S1: 0, S2: 0, S3: 0, S4: 0 };
      let matches = 0;
      const transitions = 500;
      for (let i = 0; i < transitions; i++) {
        const zone = zones[i % zones.length];
        sendOsc("/nav/dtp", zone.dtp);
        sendOsc("/nav/dtm", zone.dtm);
        const snap = await feed.next((s) => s.state === zone.state);
        // The badge must be derived from the snapshot, nothing else.
        if (feed.store.badgeColor() === stateColor(snap.state)) matches += 1;
        seen[zone.state] += 1;
      }
      assert.equal(matches, transitions);
      for (const z of ["S1", "S2", "S3", "S4"]) assert.ok(seen[z] >= 100, z);
    });

    await t.test("audio channel streams PCM blocks", async () => {
      const audio = new WebSocket(`ws://127.0.0.1:${engine.wsPort}/audio`);
      const chunk = await new Promise<Buffer>((resolve, reject) => {
        const timer = setTimeout(() => reject(new Error("no audio frame")), 5000);
        audio.on("message", (d: Buffer) => {
          clearTimeout(timer);
          resolve(d);
        });
      });
      audio.close();
      assert.equal(chunk.length % 2, 0);
      assert.equal(chunk.length, 512); // one 256-sample block of int16
    });
  } finally {
    feed.close();
    control.close();
    udp.close();
    engine.kill();
  }
});
