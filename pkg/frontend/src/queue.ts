// Offline-tolerant FIFO event queue.
//
// Events are posted strictly in enqueue order: the head is retried with
// backoff until the server accepts it, and nothing behind it is sent in
// the meantime. Events are never dropped; failures surface through the
// status callback as a retry banner, not a silent loss.

import type { TaskEvent } from './types.js';

export type QueueStatus = 'idle' | 'sending' | 'retrying';

export interface EventPoster {
  postEvent(event: TaskEvent): Promise<void>;
}

export class EventQueue {
  private items: TaskEvent[] = [];
  private active: Promise<void> | null = null;
  private backoffMs: number;

  constructor(
    private poster: EventPoster,
    private onStatus: (status: QueueStatus, detail?: string) => void = () => {},
    private baseBackoffMs = 250,
    private maxBackoffMs = 8000,
    private sleep: (ms: number) => Promise<void> = (ms) => new Promise((r) => setTimeout(r, ms)),
  ) {
    this.backoffMs = baseBackoffMs;
  }

  get pending(): number {
    return this.items.length;
  }

  enqueue(event: TaskEvent): void {
    this.items.push(event);
    void this.flush();
  }

  /** Drains the queue sequentially; resolves when it is empty. */
  flush(): Promise<void> {
    if (this.active === null) {
      this.active = this.run().finally(() => {
        this.active = null;
      });
    }
    return this.active;
  }

  private async run(): Promise<void> {
    while (this.items.length > 0) {
      const head = this.items[0];
      this.onStatus('sending');
      try {
        await this.poster.postEvent(head);
        this.items.shift();
        this.backoffMs = this.baseBackoffMs;
      } catch (err) {
        this.onStatus('retrying', String(err));
        await this.sleep(this.backoffMs);
        this.backoffMs = Math.min(this.backoffMs * 2, this.maxBackoffMs);
      }
    }
    this.onStatus('idle');
  }

  /** Waits until every queued event has been accepted by the server. */
  async drain(): Promise<void> {
    while (this.items.length > 0 || this.active !== null) {
      await this.flush();
    }
  }
}
