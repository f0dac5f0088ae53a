/**
 * Single state store behind every panel.
 *
 * The console is display-and-intent only: every number shown comes from a
 * pipeline or simulator message (the telemetry speed field is displayed
 * verbatim, never recomputed).  Socket frames go in through apply(); the
 * render loop reads an immutable ConsoleFrame snapshot out.
 */

import {
  CommandMsg,
  PipelineMsg,
  RAD2DEG,
  StateMsg,
  TelemetryMsg,
  parseMessage,
} from "./messages.js";
import { RingSeries } from "./timeseries.js";

export const STALE_AFTER_S = 0.5;

export interface TrailPoint {
  x: number;
  y: number;
  z: number;
}

export interface ConsoleFrame {
  connected: boolean;
  stale: boolean;            // no pipeline/sim traffic for STALE_AFTER_S
  wristDeg: [number, number, number];
  fingerLabels: string[];
  fingerPitchDeg: number[];
  locked: boolean;
  armed: boolean;
  calibrated: boolean;
  referenceSet: boolean;
  command: CommandMsg | null;
  telemetry: TelemetryMsg | null;
  activeHapticLevels: number[];
  ingest: StateMsg["ingest"] | null;
  trail: TrailPoint[];
  recentEvents: { evt: string; t: number }[];
}

export class ConsoleStore {
  private wrist: [number, number, number] = [0, 0, 0];
  private fingers: string[] = [];
  private fingerPitch: number[] = [];
  private locked = false;
  private armed = true;
  private calibrated = false;
  private referenceSet = false;
  private ingest: StateMsg["ingest"] | null = null;
  private command: CommandMsg | null = null;
  private telemetry: TelemetryMsg | null = null;
  private hapticActive = new Set<number>();
  private lastTrafficAt = -Infinity;
  private trail: TrailPoint[] = [];
  private events: { evt: string; t: number }[] = [];
  connected = false;

  // strip-chart series (display time base = seconds from the caller's clock)
  readonly pitchSeries = new RingSeries(30);
  readonly rollSeries = new RingSeries(30);
  readonly vForwardSeries = new RingSeries(30);
  readonly vLateralSeries = new RingSeries(30);
  readonly speedSeries = new RingSeries(30);

  /** Feed one raw socket frame. Returns the decoded message (for hooks). */
  apply(text: string, nowS: number): PipelineMsg | null {
    const msg = parseMessage(text);
    if (msg === null) return null;
    this.lastTrafficAt = nowS;
    switch (msg.kind) {
      case "state":
        this.wrist = msg.wrist;
        this.fingers = msg.fingers;
        this.fingerPitch = msg.fingerPitch;
        this.locked = msg.locked;
        this.armed = msg.armed;
        this.calibrated = msg.calibrated;
        this.referenceSet = msg.referenceSet;
        if (msg.ingest) this.ingest = msg.ingest;
        this.pitchSeries.push(nowS, msg.wrist[1] * RAD2DEG);
        this.rollSeries.push(nowS, msg.wrist[0] * RAD2DEG);
        break;
      case "command":
        this.command = msg;
        break;
      case "telemetry":
        this.telemetry = msg;
        this.trail.push({ x: msg.p[0], y: msg.p[1], z: msg.p[2] });
        if (this.trail.length > 6000) this.trail.splice(0, this.trail.length - 6000);
        this.vForwardSeries.push(nowS, msg.v[0]);
        this.vLateralSeries.push(nowS, msg.v[1]);
        this.speedSeries.push(nowS, msg.speed);
        break;
      case "haptic":
        if (msg.on) this.hapticActive.add(msg.level);
        else this.hapticActive.delete(msg.level);
        break;
      case "gesture":
        this.events.push({ evt: msg.evt, t: msg.t });
        if (this.events.length > 50) this.events.splice(0, this.events.length - 50);
        break;
    }
    return msg;
  }

  /**
   * Reset intent was sent: zero the displayed relative angles immediately so
   * the next rendered frame shows the new reference (the pipeline's state
   * snapshots confirm it a few frames later).
   */
  noteResetSent(): void {
    this.wrist = [0, 0, 0];
    this.fingerPitch = this.fingerPitch.map(() => 0);
  }

  noteConnection(up: boolean): void {
    this.connected = up;
    if (!up) this.hapticActive.clear();
  }

  clearTrail(): void {
    this.trail = [];
  }

  frame(nowS: number): ConsoleFrame {
    return {
      connected: this.connected,
      stale: nowS - this.lastTrafficAt > STALE_AFTER_S,
      wristDeg: [
        this.wrist[0] * RAD2DEG,
        this.wrist[1] * RAD2DEG,
        this.wrist[2] * RAD2DEG,
      ],
      fingerLabels: [...this.fingers],
      fingerPitchDeg: this.fingerPitch.map((p) => p * RAD2DEG),
      locked: this.locked,
      armed: this.armed,
      calibrated: this.calibrated,
      referenceSet: this.referenceSet,
      command: this.command,
      telemetry: this.telemetry,
      activeHapticLevels: [...this.hapticActive].sort(),
      ingest: this.ingest,
      trail: this.trail,
      recentEvents: [...this.events],
    };
  }
}
