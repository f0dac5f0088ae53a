/**
 * Typed views of the pipeline's WebSocket traffic.
 *
 * The socket carries the same JSON objects as the UDP flows, plus periodic
 * pipeline state snapshots.  Everything arrives in SI units (radians, m/s);
 * conversion to degrees happens at the display edge only.
 */

export interface StateMsg {
  kind: "state";
  wrist: [number, number, number]; // roll, pitch, yaw radians (relative)
  fingers: string[];               // pose labels
  fingerPitch: number[];           // radians relative to the reference
  locked: boolean;
  armed: boolean;
  calibrated: boolean;
  referenceSet: boolean;
  altitudeTarget: number;
  grip: string;
  ingest?: { received: number; dropped: number; reordered: number; malformed: number };
}

export interface CommandMsg {
  kind: "command";
  vf: number;
  vl: number;
  alt: number;
  yr: number;
  grip: string;
  t: number; // device microseconds
}

export interface TelemetryMsg {
  kind: "telemetry";
  p: [number, number, number];
  v: [number, number, number];
  yaw: number;
  grip: string;
  speed: number; // displayed verbatim, never recomputed client-side
  seq: number;
  t: number; // sim seconds
}

export interface HapticMsg {
  kind: "haptic";
  level: number;
  on: boolean;
}

export interface GestureMsg {
  kind: "gesture";
  evt: string;
  t: number;
}

export type PipelineMsg = StateMsg | CommandMsg | TelemetryMsg | HapticMsg | GestureMsg;

function vec3(x: unknown): [number, number, number] | null {
  if (!Array.isArray(x) || x.length !== 3) return null;
  if (!x.every((v) => typeof v === "number" && Number.isFinite(v))) return null;
  return [x[0], x[1], x[2]];
}

/** Decode one socket frame; null for anything unrecognized (forward compat). */
export function parseMessage(text: string): PipelineMsg | null {
  let obj: any;
  try {
    obj = JSON.parse(text);
  } catch {
    return null;
  }
  if (typeof obj !== "object" || obj === null) return null;

  if ("state" in obj && typeof obj.state === "object" && obj.state !== null) {
    const s = obj.state;
    const wrist = vec3(s.wrist);
    if (!wrist || !Array.isArray(s.fingers)) return null;
    return {
      kind: "state",
      wrist,
      fingers: s.fingers.map(String),
      fingerPitch: Array.isArray(s.finger_pitch) ? s.finger_pitch.map(Number) : [],
      locked: Boolean(s.locked),
      armed: Boolean(s.armed),
      calibrated: Boolean(s.calibrated),
      referenceSet: Boolean(s.reference_set),
      altitudeTarget: Number(s.altitude_target ?? 0),
      grip: String(s.grip ?? "open"),
      ingest: s.ingest,
    };
  }
  if ("tel" in obj && typeof obj.tel === "object" && obj.tel !== null) {
    const t = obj.tel;
    const p = vec3(t.p);
    const v = vec3(t.v);
    if (!p || !v || typeof t.speed !== "number") return null;
    return {
      kind: "telemetry",
      p,
      v,
      yaw: Number(t.yaw),
      grip: String(t.grip),
      speed: t.speed,
      seq: Number(obj.seq ?? 0),
      t: Number(obj.t ?? 0),
    };
  }
  if ("cmd" in obj && typeof obj.cmd === "object" && obj.cmd !== null) {
    const c = obj.cmd;
    if (typeof c.vf !== "number") return null;
    return {
      kind: "command",
      vf: c.vf,
      vl: Number(c.vl),
      alt: Number(c.alt),
      yr: Number(c.yr),
      grip: String(c.grip),
      t: Number(obj.t ?? 0),
    };
  }
  if ("vib" in obj && typeof obj.vib === "object" && obj.vib !== null) {
    const v = obj.vib;
    if (typeof v.level !== "number" || typeof v.on !== "boolean") return null;
    return { kind: "haptic", level: v.level, on: v.on };
  }
  if ("evt" in obj && typeof obj.evt === "string") {
    return { kind: "gesture", evt: obj.evt, t: Number(obj.t ?? 0) };
  }
  return null;
}

export const RAD2DEG = 180 / Math.PI;
export const DEG2RAD = Math.PI / 180;

export function resetPoseMsg(): string {
  return '{"cmd":"reset_pose"}';
}

export function armMsg(armed: boolean): string {
  return armed ? '{"cmd":"arm"}' : '{"cmd":"disarm"}';
}

/** Emulated-pose intent; wrist and finger angles in radians on the wire. */
export function emulatedPoseMsg(wristRad: [number, number, number], fingersRad: number[]): string {
  return JSON.stringify({ emu: { wrist: wristRad, fingers: fingersRad } });
}
