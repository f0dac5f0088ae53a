/** Fixed-window scrolling time series for the strip charts. */

export interface Sample {
  t: number; // seconds, any monotonic base
  v: number;
}

export class RingSeries {
  private samples: Sample[] = [];

  constructor(public readonly windowS: number = 30) {}

  push(t: number, v: number): void {
    this.samples.push({ t, v });
    const cutoff = t - this.windowS;
    // samples arrive in time order; drop the expired prefix
    let drop = 0;
    while (drop < this.samples.length && this.samples[drop].t < cutoff) drop++;
    if (drop > 0) this.samples.splice(0, drop);
  }

  get length(): number {
    return this.samples.length;
  }

  latest(): Sample | null {
    return this.samples.length ? this.samples[this.samples.length - 1] : null;
  }

  /** Samples inside [tNow - windowS, tNow], oldest first. */
  view(tNow: number): Sample[] {
    const cutoff = tNow - this.windowS;
    return this.samples.filter((s) => s.t >= cutoff);
  }

  clear(): void {
    this.samples = [];
  }
}
