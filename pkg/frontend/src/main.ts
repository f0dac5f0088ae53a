/** Console entry point: socket + store + renderer + operator controls. */

import { WarningAudio } from "./audio.js";
import { PipelineClient } from "./client.js";
import { DEG2RAD, armMsg, emulatedPoseMsg, resetPoseMsg } from "./messages.js";
import { Renderer, Scene } from "./render.js";
import { ConsoleStore } from "./store.js";

const WS_URL = `ws://${location.hostname || "127.0.0.1"}:${location.port || "8080"}/ws`;
const EMU_SEND_HZ = 20;

const store = new ConsoleStore();
const renderer = new Renderer();
const audio = new WarningAudio();
const client = new PipelineClient(WS_URL);

const nowS = (): number => performance.now() / 1000;

client.onText = (text) => {
  const msg = store.apply(text, nowS());
  if (msg?.kind === "haptic" && msg.on) audio.beep(msg.level);
};
client.onStatus = (up) => store.noteConnection(up);
client.connect();

// optional static scene geometry served next to the bundle
fetch("scene.json")
  .then((r) => (r.ok ? r.json() : null))
  .then((scene: Scene | null) => {
    if (scene) renderer.setScene(scene);
  })
  .catch(() => {});

// ----------------------------------------------------------- controls

const byId = (id: string): HTMLElement => document.getElementById(id)!;
const slider = (id: string): HTMLInputElement => byId(id) as HTMLInputElement;

byId("btn-reset").addEventListener("click", () => {
  if (client.send(resetPoseMsg())) store.noteResetSent();
});
byId("btn-arm").addEventListener("click", () => client.send(armMsg(true)));
byId("btn-disarm").addEventListener("click", () => client.send(armMsg(false)));
byId("btn-clear-trail").addEventListener("click", () => store.clearTrail());

const emuSliders = {
  roll: slider("emu-roll"),
  pitch: slider("emu-pitch"),
  yaw: slider("emu-yaw"),
  f0: slider("emu-f0"),
  f1: slider("emu-f1"),
};
let emuDirty = false;
for (const s of Object.values(emuSliders)) {
  s.addEventListener("input", () => {
    emuDirty = true;
    updateSliderLabels();
  });
}

function updateSliderLabels(): void {
  byId("emu-roll-val").textContent = `${emuSliders.roll.value}°`;
  byId("emu-pitch-val").textContent = `${emuSliders.pitch.value}°`;
  byId("emu-yaw-val").textContent = `${emuSliders.yaw.value}°`;
  byId("emu-f0-val").textContent = `${emuSliders.f0.value}°`;
  byId("emu-f1-val").textContent = `${emuSliders.f1.value}°`;
}
updateSliderLabels();

function sendEmulatedPose(): void {
  client.send(
    emulatedPoseMsg(
      [
        Number(emuSliders.roll.value) * DEG2RAD,
        Number(emuSliders.pitch.value) * DEG2RAD,
        Number(emuSliders.yaw.value) * DEG2RAD,
      ],
      [Number(emuSliders.f0.value) * DEG2RAD, Number(emuSliders.f1.value) * DEG2RAD],
    ),
  );
}

setInterval(() => {
  if (emuDirty) {
    emuDirty = false;
    sendEmulatedPose();
  }
}, 1000 / EMU_SEND_HZ);

// keyboard steering nudges the sliders (arrows: pitch/roll, q/e: yaw,
// g: toggle grip fingers, space: recentre wrist)
const KEY_STEP = 5;
document.addEventListener("keydown", (ev) => {
  const bump = (s: HTMLInputElement, delta: number): void => {
    s.value = String(Math.max(Number(s.min), Math.min(Number(s.max), Number(s.value) + delta)));
  };
  switch (ev.key) {
    case "ArrowUp": bump(emuSliders.pitch, -KEY_STEP); break;   // tip forward
    case "ArrowDown": bump(emuSliders.pitch, KEY_STEP); break;
    case "ArrowLeft": bump(emuSliders.roll, -KEY_STEP); break;
    case "ArrowRight": bump(emuSliders.roll, KEY_STEP); break;
    case "q": bump(emuSliders.yaw, KEY_STEP); break;
    case "e": bump(emuSliders.yaw, -KEY_STEP); break;
    case "g": {
      const closed = Number(emuSliders.f0.value) < -40;
      const target = closed ? "0" : "-60";
      emuSliders.f0.value = target;
      emuSliders.f1.value = target;
      break;
    }
    case " ":
      emuSliders.roll.value = emuSliders.pitch.value = emuSliders.yaw.value = "0";
      break;
    default:
      return;
  }
  ev.preventDefault();
  emuDirty = true;
  updateSliderLabels();
});

// ----------------------------------------------------------- render loop

function renderLoop(): void {
  renderer.draw(store.frame(nowS()), nowS(), {
    pitch: store.pitchSeries,
    roll: store.rollSeries,
    vf: store.vForwardSeries,
    vl: store.vLateralSeries,
    speed: store.speedSeries,
  });
  requestAnimationFrame(renderLoop);
}
requestAnimationFrame(renderLoop);
