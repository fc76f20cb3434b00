/**
 * Wire types for the engine's /state channel, plus strict validators.
 *
 * The client never derives zones or distances itself: everything shown in
 * the UI comes out of a validated snapshot.
 */

export type ZoneId = "S1" | "S2" | "S3" | "S4";

export interface ControlParams {
  f0: number;
  beta: number;
  alpha: number;
  delta_t_ms: number;
  force: number;
  state: ZoneId;
}

export interface Pose {
  tip: [number, number, number];
  axis: [number, number, number];
}

export interface TrialStatus {
  active: boolean;
  trial_id: string | null;
  elapsed: number | null;
  outcome: string | null;
}

export interface Snapshot {
  type: "snapshot";
  seq: number;
  t: number;
  pose: Pose | null;
  d_tp: number | null;
  d_tm: number | null;
  frame: number | null;
  state: ZoneId | null;
  control: ControlParams;
  contacts: { pericardium: boolean; myocardium: boolean };
  trial: TrialStatus;
  input: { seq: number; age_ms: number | null; latency_ms: number | null };
  dropped_packets: number;
}

export type ContourLoop = Array<[number, number]>;

export interface SceneFrame {
  pericardium: ContourLoop[];
  myocardium: ContourLoop[];
}

export interface Scene {
  type: "scene";
  cycle_period: number | null;
  edf_index: number | null;
  frames: SceneFrame[];
}

const ZONES: ReadonlySet<string> = new Set(["S1", "S2", "S3", "S4"]);

function isFiniteNumber(x: unknown): x is number {
  return typeof x === "number" && Number.isFinite(x);
}

function isNullableNumber(x: unknown): x is number | null {
  return x === null || isFiniteNumber(x);
}

function isVec3(x: unknown): x is [number, number, number] {
  return Array.isArray(x) && x.length === 3 && x.every(isFiniteNumber);
}

export class ProtocolError extends Error {}

export function validateSnapshot(msg: unknown): Snapshot {
  const m = msg as Record<string, unknown>;
  if (!m || m.type !== "snapshot") throw new ProtocolError("not a snapshot");
  if (!isFiniteNumber(m.seq) || !isFiniteNumber(m.t)) throw new ProtocolError("bad seq/t");
  if (m.pose !== null) {
    const pose = m.pose as Record<string, unknown>;
    if (!pose || !isVec3(pose.tip) || !isVec3(pose.axis)) throw new ProtocolError("bad pose");
  }
  if (!isNullableNumber(m.d_tp) || !isNullableNumber(m.d_tm)) throw new ProtocolError("bad distances");
  if (m.state !== null && !ZONES.has(m.state as string)) throw new ProtocolError("bad state");
  const control = m.control as Record<string, unknown>;
  if (
    !control ||
    !isFiniteNumber(control.f0) ||
    !isFiniteNumber(control.beta) ||
    !isFiniteNumber(control.alpha) ||
    !isFiniteNumber(control.delta_t_ms) ||
    !isFiniteNumber(control.force) ||
    !ZONES.has(control.state as string)
  ) {
    throw new ProtocolError("bad control block");
  }
  const contacts = m.contacts as Record<string, unknown>;
  if (!contacts || typeof contacts.pericardium !== "boolean" || typeof contacts.myocardium !== "boolean") {
    throw new ProtocolError("bad contacts block");
  }
  const trial = m.trial as Record<string, unknown>;
  if (!trial || typeof trial.active !== "boolean") throw new ProtocolError("bad trial block");
  return m as unknown as Snapshot;
}

export function validateScene(msg: unknown): Scene {
  const m = msg as Record<string, unknown>;
  if (!m || m.type !== "scene") throw new ProtocolError("not a scene");
  if (!Array.isArray(m.frames)) throw new ProtocolError("scene without frames");
  return m as unknown as Scene;
}

export function parseStateMessage(raw: string): Snapshot | Scene {
  let parsed: unknown;
  try {
    parsed = JSON.parse(raw);
  } catch {
    throw new ProtocolError("state message is not JSON");
  }
  const type = (parsed as Record<string, unknown> | null)?.type;
  if (type === "snapshot") return validateSnapshot(parsed);
  if (type === "scene") return validateScene(parsed);
  throw new ProtocolError(`unknown state message type: ${String(type)}`);
}
