// Monotonic clock for event timestamps. Wall clocks can jump (NTP,
// timezone edits) and would corrupt verification timing, so we never use
// Date.now() for events.

export interface MonotonicClock {
  nowMs(): number;
}

export const systemClock: MonotonicClock = {
  nowMs: () => performance.now(),
};

/** Deterministic clock for tests and scripted sessions. */
export class ManualClock implements MonotonicClock {
  private t: number;

  constructor(startMs = 0) {
    this.t = startMs;
  }

  advance(deltaMs: number): void {
    if (deltaMs < 0) throw new Error('monotonic clock cannot go backwards');
    this.t += deltaMs;
  }

  nowMs(): number {
    return this.t;
  }
}
