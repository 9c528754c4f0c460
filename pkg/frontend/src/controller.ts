// Wires state, rendering, and the event queue for one annotator session.

import { EvalServiceClient } from './api.js';
import type { MonotonicClock } from './clock.js';
import { systemClock } from './clock.js';
import { EventQueue, type QueueStatus } from './queue.js';
import { renderRetryBanner, renderScreen, renderSchemaMismatch, type Handlers } from './render.js';
import { ScreenState, validateTaskPayload } from './state.js';
import type { TaskPayload } from './types.js';

export class TaskController {
  state: ScreenState | null = null;
  readonly queue: EventQueue;
  private statusHost: HTMLElement | null = null;

  constructor(
    private doc: Document,
    private container: HTMLElement,
    private client: EvalServiceClient,
    private clock: MonotonicClock = systemClock,
  ) {
    this.queue = new EventQueue(client, (status, detail) => this.showStatus(status, detail));
  }

  async loadNext(annotator: string): Promise<boolean> {
    const payload = await this.client.nextTask(annotator);
    if (payload === null) {
      this.container.textContent = 'No open tasks.';
      return false;
    }
    this.start(payload);
    return true;
  }

  start(payload: TaskPayload): void {
    const problems = validateTaskPayload(payload);
    if (problems.length > 0) {
      renderSchemaMismatch(this.doc, this.container, problems, () => {
        this.container.textContent = 'Task skipped.';
      });
      return;
    }
    this.state = new ScreenState(payload, this.clock, (event) => this.queue.enqueue(event));
    this.render();
  }

  private handlers(): Handlers {
    const state = this.state!;
    const after = (fn: () => void) => () => {
      fn();
      this.render();
    };
    return {
      onRating: (kind, value) => {
        state.setRating(kind, value);
        this.render();
      },
      onJudgment: (value) => {
        state.setJudgment(value);
        this.render();
      },
      onSubmitRatings: after(() => state.submitRatings()),
      onContinue: after(() => state.clickContinue()),
      onSubmitCoverage: after(() => state.submitCoverage()),
      onSubmitPrecision: after(() => state.submitPrecision()),
    };
  }

  render(): void {
    if (!this.state) return;
    renderScreen(this.doc, this.container, this.state, this.handlers());
    this.statusHost = this.doc.createElement('div');
    this.statusHost.id = 'queue-status';
    this.container.appendChild(this.statusHost);
  }

  private showStatus(status: QueueStatus, detail?: string): void {
    if (!this.statusHost) return;
    this.statusHost.textContent = '';
    if (status === 'retrying') {
      renderRetryBanner(this.doc, this.statusHost, detail ?? 'unknown error');
    }
  }
}
