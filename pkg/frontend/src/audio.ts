/** Audio cue channel standing in for the glove's vibration motors. */

export class WarningAudio {
  private ctx: AudioContext | null = null;

  private ensureContext(): AudioContext | null {
    if (this.ctx === null) {
      try {
        this.ctx = new AudioContext();
      } catch {
        return null; // no audio device: stay silent
      }
    }
    return this.ctx;
  }

  /** Short beep; level 2 is higher-pitched and longer than level 1. */
  beep(level: number): void {
    const ctx = this.ensureContext();
    if (ctx === null) return;
    const osc = ctx.createOscillator();
    const gain = ctx.createGain();
    osc.frequency.value = level >= 2 ? 880 : 440;
    gain.gain.value = 0.15;
    osc.connect(gain).connect(ctx.destination);
    const now = ctx.currentTime;
    const dur = level >= 2 ? 0.4 : 0.15;
    osc.start(now);
    gain.gain.setTargetAtTime(0.0, now + dur, 0.03);
    osc.stop(now + dur + 0.2);
  }
}
