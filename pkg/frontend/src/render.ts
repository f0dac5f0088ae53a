/** DOM + canvas painting. All inputs come from a ConsoleFrame snapshot. */

import { ConsoleFrame } from "./store.js";
import { RingSeries } from "./timeseries.js";

export interface Scene {
  graspZone?: { center: [number, number, number]; radius: number };
  obstacles?: [number, number, number][]; // x, y, radius
  waypoints?: [number, number, number][];
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function fmt(v: number, digits = 2): string {
  return (v >= 0 ? " " : "") + v.toFixed(digits);
}

export class Renderer {
  private scene: Scene = {};
  private trajCanvas = el<HTMLCanvasElement>("trajectory");
  private stripCanvas = el<HTMLCanvasElement>("strip");

  setScene(scene: Scene): void {
    this.scene = scene;
  }

  draw(frame: ConsoleFrame, nowS: number, series: {
    pitch: RingSeries; roll: RingSeries; vf: RingSeries; vl: RingSeries; speed: RingSeries;
  }): void {
    this.banners(frame);
    this.handPanel(frame);
    this.commandPanel(frame);
    this.telemetryPanel(frame);
    this.trajectory(frame);
    this.strip(nowS, series);
  }

  private banners(frame: ConsoleFrame): void {
    el("banner-disconnect").hidden = frame.connected;
    el("banner-stale").hidden = !frame.connected || !frame.stale;
    el("banner-disarm").hidden = frame.armed;
    const warn = el("banner-warn");
    const level = frame.activeHapticLevels.length
      ? Math.max(...frame.activeHapticLevels)
      : 0;
    warn.hidden = level === 0;
    warn.textContent =
      level >= 2 ? "SPEED WARNING - LEVEL 2" : "speed warning - level 1";
    warn.className = level >= 2 ? "banner warn2" : "banner warn1";
  }

  private handPanel(frame: ConsoleFrame): void {
    const [r, p, y] = frame.wristDeg;
    el("wrist-roll").textContent = fmt(r, 1);
    el("wrist-pitch").textContent = fmt(p, 1);
    el("wrist-yaw").textContent = fmt(y, 1);
    for (const [axis, value] of [["roll", r], ["pitch", p], ["yaw", y]] as const) {
      const bar = el(`bar-${axis}`);
      const clamped = Math.max(-30, Math.min(30, value));
      bar.style.width = `${Math.abs(clamped) / 30 * 50}%`;
      bar.style.marginLeft = clamped < 0 ? `${50 - Math.abs(clamped) / 30 * 50}%` : "50%";
    }
    const fingerBox = el("fingers");
    fingerBox.innerHTML = "";
    frame.fingerLabels.forEach((label, i) => {
      const chip = document.createElement("span");
      chip.className = `chip ${label}`;
      const pitch = frame.fingerPitchDeg[i];
      chip.textContent = `${i}: ${label}${pitch !== undefined ? ` (${pitch.toFixed(0)}°)` : ""}`;
      fingerBox.appendChild(chip);
    });
    el("lock-state").textContent = frame.locked ? "LOCKED" : "free";
    el("lock-state").className = frame.locked ? "value locked" : "value";
    el("pipeline-phase").textContent = !frame.calibrated
      ? "calibrating"
      : frame.referenceSet
        ? "tracking"
        : "awaiting pose reset";
  }

  private commandPanel(frame: ConsoleFrame): void {
    const c = frame.command;
    el("cmd-vf").textContent = c ? fmt(c.vf) : "-";
    el("cmd-vl").textContent = c ? fmt(c.vl) : "-";
    el("cmd-alt").textContent = c ? fmt(c.alt) : "-";
    el("cmd-yr").textContent = c ? fmt(c.yr) : "-";
    el("cmd-grip").textContent = c ? c.grip : "-";
    const ing = frame.ingest;
    el("ingest").textContent = ing
      ? `rx ${ing.received} / drop ${ing.dropped} / reord ${ing.reordered} / bad ${ing.malformed}`
      : "-";
  }

  private telemetryPanel(frame: ConsoleFrame): void {
    const t = frame.telemetry;
    el("tel-pos").textContent = t
      ? `${fmt(t.p[0])}, ${fmt(t.p[1])}, ${fmt(t.p[2])}`
      : "-";
    el("tel-speed").textContent = t ? t.speed.toFixed(3) : "-"; // verbatim field
    el("tel-grip").textContent = t ? t.grip : "-";
    el("tel-yaw").textContent = t ? fmt((t.yaw * 180) / Math.PI, 1) : "-";
  }

  private trajectory(frame: ConsoleFrame): void {
    const canvas = this.trajCanvas;
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const w = canvas.width;
    const h = canvas.height;
    ctx.clearRect(0, 0, w, h);

    // world bounds over trail + scene geometry, padded
    const xs: number[] = [0];
    const ys: number[] = [0];
    for (const p of frame.trail) {
      xs.push(p.x);
      ys.push(p.y);
    }
    for (const ob of this.scene.obstacles ?? []) {
      xs.push(ob[0] - ob[2], ob[0] + ob[2]);
      ys.push(ob[1] - ob[2], ob[1] + ob[2]);
    }
    for (const wp of this.scene.waypoints ?? []) {
      xs.push(wp[0]);
      ys.push(wp[1]);
    }
    if (this.scene.graspZone) {
      const g = this.scene.graspZone;
      xs.push(g.center[0] - g.radius, g.center[0] + g.radius);
      ys.push(g.center[1] - g.radius, g.center[1] + g.radius);
    }
    const pad = 0.5;
    const minX = Math.min(...xs) - pad;
    const maxX = Math.max(...xs) + pad;
    const minY = Math.min(...ys) - pad;
    const maxY = Math.max(...ys) + pad;
    const scale = Math.min(w / (maxX - minX), h / (maxY - minY));
    const toPx = (x: number, y: number): [number, number] => [
      (x - minX) * scale,
      h - (y - minY) * scale, // +y world is up on screen
    ];

    ctx.strokeStyle = "#39424e";
    ctx.lineWidth = 1;
    const [ox, oy] = toPx(0, 0);
    ctx.strokeRect(ox - 3, oy - 3, 6, 6); // spawn marker

    for (const ob of this.scene.obstacles ?? []) {
      const [cx, cy] = toPx(ob[0], ob[1]);
      ctx.beginPath();
      ctx.fillStyle = "rgba(200,80,80,0.25)";
      ctx.strokeStyle = "#b05050";
      ctx.arc(cx, cy, ob[2] * scale, 0, Math.PI * 2);
      ctx.fill();
      ctx.stroke();
    }
    if (this.scene.graspZone) {
      const g = this.scene.graspZone;
      const [cx, cy] = toPx(g.center[0], g.center[1]);
      ctx.beginPath();
      ctx.strokeStyle = "#4a9e6b";
      ctx.setLineDash([4, 3]);
      ctx.arc(cx, cy, g.radius * scale, 0, Math.PI * 2);
      ctx.stroke();
      ctx.setLineDash([]);
    }
    for (const wp of this.scene.waypoints ?? []) {
      const [cx, cy] = toPx(wp[0], wp[1]);
      ctx.strokeStyle = "#7d8a99";
      ctx.strokeRect(cx - 2, cy - 2, 4, 4);
    }

    if (frame.trail.length > 1) {
      ctx.beginPath();
      ctx.strokeStyle = "#58a6ff";
      ctx.lineWidth = 1.5;
      frame.trail.forEach((p, i) => {
        const [px, py] = toPx(p.x, p.y);
        if (i === 0) ctx.moveTo(px, py);
        else ctx.lineTo(px, py);
      });
      ctx.stroke();
    }
    const t = frame.telemetry;
    if (t) {
      const [px, py] = toPx(t.p[0], t.p[1]);
      ctx.beginPath();
      ctx.fillStyle = frame.activeHapticLevels.length ? "#e06c75" : "#98c379";
      ctx.arc(px, py, 5, 0, Math.PI * 2);
      ctx.fill();
      ctx.beginPath(); // heading tick
      ctx.strokeStyle = "#e5c07b";
      ctx.moveTo(px, py);
      ctx.lineTo(px + 12 * Math.cos(-t.yaw), py + 12 * Math.sin(-t.yaw));
      ctx.stroke();
      ctx.fillStyle = "#abb2bf";
      ctx.font = "11px monospace";
      ctx.fillText(`z=${t.p[2].toFixed(2)}m`, px + 8, py - 8);
    }
  }

  private strip(nowS: number, series: {
    pitch: RingSeries; roll: RingSeries; vf: RingSeries; vl: RingSeries; speed: RingSeries;
  }): void {
    const canvas = this.stripCanvas;
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const w = canvas.width;
    const h = canvas.height;
    ctx.clearRect(0, 0, w, h);
    const half = h / 2;

    const drawTrace = (
      s: RingSeries,
      color: string,
      yMid: number,
      yScalePerUnit: number,
    ): void => {
      const view = s.view(nowS);
      if (view.length < 2) return;
      ctx.beginPath();
      ctx.strokeStyle = color;
      ctx.lineWidth = 1;
      for (let i = 0; i < view.length; i++) {
        const x = w - ((nowS - view[i].t) / s.windowS) * w;
        const y = yMid - view[i].v * yScalePerUnit;
        if (i === 0) ctx.moveTo(x, y);
        else ctx.lineTo(x, y);
      }
      ctx.stroke();
    };

    ctx.strokeStyle = "#2c313a";
    ctx.beginPath();
    ctx.moveTo(0, half);
    ctx.lineTo(w, half);
    ctx.stroke();

    // top: glove angles (deg, +-35 full scale); bottom: UAV velocities (m/s, +-1.2)
    drawTrace(series.pitch, "#61afef", half / 2, half / 2 / 35);
    drawTrace(series.roll, "#c678dd", half / 2, half / 2 / 35);
    drawTrace(series.vf, "#98c379", half + half / 2, half / 2 / 1.2);
    drawTrace(series.vl, "#e5c07b", half + half / 2, half / 2 / 1.2);
    drawTrace(series.speed, "#e06c75", h, half / 1.2);

    ctx.fillStyle = "#7d8a99";
    ctx.font = "10px monospace";
    ctx.fillText("glove pitch/roll [deg]", 4, 12);
    ctx.fillText("uav vx/vy + speed [m/s]", 4, half + 12);
  }
}
