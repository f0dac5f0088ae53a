import assert from "node:assert/strict";
import { test } from "node:test";

import { ConsoleStore, STALE_AFTER_S } from "../src/store.js";

function stateText(wrist: number[], extra: Record<string, unknown> = {}): string {
  return JSON.stringify({
    state: {
      wrist,
      fingers: ["open", "open"],
      finger_pitch: [0, 0],
      locked: false,
      armed: true,
      calibrated: true,
      reference_set: true,
      altitude_target: 1.0,
      grip: "open",
      ...extra,
    },
  });
}

function telemetryText(v: [number, number, number], speed: number, p: [number, number, number] = [0, 0, 1]): string {
  return JSON.stringify({ tel: { p, v, yaw: 0.0, grip: "open", speed }, seq: 0, t: 0.0 });
}

test("wrist angles are displayed in degrees", () => {
  const s = new ConsoleStore();
  s.apply(stateText([Math.PI / 6, -Math.PI / 6, 0]), 0);
  const f = s.frame(0);
  assert.ok(Math.abs(f.wristDeg[0] - 30) < 1e-9);
  assert.ok(Math.abs(f.wristDeg[1] + 30) < 1e-9);
});

test("reset intent zeroes the displayed angles on the very next frame", () => {
  const s = new ConsoleStore();
  s.apply(stateText([0.21, -0.07, 0.52], { finger_pitch: [-0.5, -0.2] }), 0);
  assert.notDeepEqual(s.frame(0).wristDeg, [0, 0, 0]);
  s.noteResetSent();
  const f = s.frame(0.001);
  assert.deepEqual(f.wristDeg, [0, 0, 0]);
  assert.deepEqual(f.fingerPitchDeg, [0, 0]);
});

test("displayed speed is the telemetry field verbatim", () => {
  const s = new ConsoleStore();
  // a deliberately wrong speed: the console must show it, not recompute
  s.apply(telemetryText([0.3, 0.4, 0.0], 0.123), 0);
  assert.equal(s.frame(0).telemetry?.speed, 0.123);
});

test("haptic banner state flips within the same frame as the event", () => {
  const s = new ConsoleStore();
  assert.deepEqual(s.frame(0).activeHapticLevels, []);
  s.apply('{"vib":{"level":1,"on":true}}', 0);
  assert.deepEqual(s.frame(0).activeHapticLevels, [1]);
  s.apply('{"vib":{"level":2,"on":true}}', 0.02);
  assert.deepEqual(s.frame(0.02).activeHapticLevels, [1, 2]);
  s.apply('{"vib":{"level":2,"on":false}}', 0.04);
  s.apply('{"vib":{"level":1,"on":false}}', 0.04);
  assert.deepEqual(s.frame(0.04).activeHapticLevels, []);
});

test("stale indicator after half a second of silence", () => {
  const s = new ConsoleStore();
  s.noteConnection(true);
  s.apply(telemetryText([0, 0, 0], 0), 10.0);
  assert.equal(s.frame(10.2).stale, false);
  assert.equal(s.frame(10.0 + STALE_AFTER_S + 0.01).stale, true);
});

test("telemetry builds the trajectory trail", () => {
  const s = new ConsoleStore();
  s.apply(telemetryText([0, 0, 0], 0, [0, 0, 1]), 0);
  s.apply(telemetryText([0, 0, 0], 0, [0.5, 0.1, 1]), 0.02);
  const trail = s.frame(0.02).trail;
  assert.equal(trail.length, 2);
  assert.equal(trail[1].x, 0.5);
  s.clearTrail();
  assert.equal(s.frame(0.03).trail.length, 0);
});

test("velocity series track telemetry for the strip chart", () => {
  const s = new ConsoleStore();
  for (let k = 0; k < 10; k++) {
    s.apply(telemetryText([k * 0.1, 0, 0], k * 0.1), k * 0.02);
  }
  const latest = s.vForwardSeries.latest();
  assert.ok(latest && Math.abs(latest.v - 0.9) < 1e-12);
});

test("gesture events accumulate in the ticker", () => {
  const s = new ConsoleStore();
  s.apply('{"evt":"grip_close","t":1}', 0);
  s.apply('{"evt":"alt_step_up","t":2}', 0.1);
  assert.deepEqual(
    s.frame(0.1).recentEvents.map((e) => e.evt),
    ["grip_close", "alt_step_up"],
  );
});

test("disconnect clears active warnings and flags the frame", () => {
  const s = new ConsoleStore();
  s.noteConnection(true);
  s.apply('{"vib":{"level":1,"on":true}}', 0);
  s.noteConnection(false);
  const f = s.frame(0.01);
  assert.equal(f.connected, false);
  assert.deepEqual(f.activeHapticLevels, []);
});
