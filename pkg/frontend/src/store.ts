/**
 * Latest-value session state: holds the scene, the most recent snapshot,
 * and a staleness clock. Messages replace state; nothing is queued.
 */

import { parseStateMessage, Scene, Snapshot } from "./protocol.js";
import { stateColor } from "./colors.js";

export const STALE_AFTER_MS = 500;

export class SessionStore {
  scene: Scene | null = null;
  snapshot: Snapshot | null = null;
  lastSnapshotAtMs: number | null = null;
  parseErrors = 0;

  update(raw: string, nowMs: number): "scene" | "snapshot" | "error" {
    let msg: Scene | Snapshot;
    try {
      msg = parseStateMessage(raw);
    } catch {
      this.parseErrors += 1;
      return "error";
    }
    if (msg.type === "scene") {
      this.scene = msg;
      return "scene";
    }
    this.snapshot = msg;
    this.lastSnapshotAtMs = nowMs;
    return "snapshot";
  }

  /** True once snapshots have been seen but none arrived recently. */
  isStale(nowMs: number): boolean {
    if (this.lastSnapshotAtMs === null) return false;
    return nowMs - this.lastSnapshotAtMs > STALE_AFTER_MS;
  }

  badgeColor(): string {
    return stateColor(this.snapshot?.state ?? null);
  }

  reset(): void {
    this.snapshot = null;
    this.lastSnapshotAtMs = null;
  }
}
