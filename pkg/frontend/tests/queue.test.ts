import { describe, expect, it } from 'vitest';

import { EventQueue } from '../src/queue.js';
import type { TaskEvent } from '../src/types.js';

function event(n: number): TaskEvent {
  return { task_id: 't1', event: 'continue_clicked', payload: { client_ms: n } };
}

function instantSleep(): (ms: number) => Promise<void> {
  return () => Promise.resolve();
}

describe('event queue', () => {
  it('delivers events strictly in enqueue order', async () => {
    const arrived: number[] = [];
    const queue = new EventQueue(
      { postEvent: async (e) => void arrived.push(e.payload.client_ms) },
      () => {},
      1, 4, instantSleep(),
    );
    for (let i = 0; i < 20; i++) queue.enqueue(event(i));
    await queue.drain();
    expect(arrived).toEqual([...Array(20).keys()]);
  });

  it('queues through outages and flushes in order without drops', async () => {
    const arrived: number[] = [];
    let online = false;
    const queue = new EventQueue(
      {
        postEvent: async (e) => {
          if (!online) throw new Error('network down');
          arrived.push(e.payload.client_ms);
        },
      },
      () => {},
      1, 4, instantSleep(),
    );
    queue.enqueue(event(1));
    queue.enqueue(event(2));
    await Promise.resolve();
    expect(arrived).toEqual([]);
    expect(queue.pending).toBe(2);
    online = true;
    queue.enqueue(event(3));
    await queue.drain();
    expect(arrived).toEqual([1, 2, 3]);
    expect(queue.pending).toBe(0);
  });

  it('surfaces retry status instead of dropping silently', async () => {
    const statuses: string[] = [];
    let failures = 3;
    const queue = new EventQueue(
      {
        postEvent: async () => {
          if (failures-- > 0) throw new Error('503');
        },
      },
      (status) => statuses.push(status),
      1, 4, instantSleep(),
    );
    queue.enqueue(event(1));
    await queue.drain();
    expect(statuses).toContain('retrying');
    expect(statuses[statuses.length - 1]).toBe('idle');
  });

  it('backs off exponentially up to the cap', async () => {
    const waits: number[] = [];
    let failures = 5;
    const queue = new EventQueue(
      {
        postEvent: async () => {
          if (failures-- > 0) throw new Error('503');
        },
      },
      () => {},
      100, 800,
      (ms) => {
        waits.push(ms);
        return Promise.resolve();
      },
    );
    queue.enqueue(event(1));
    await queue.drain();
    expect(waits).toEqual([100, 200, 400, 800, 800]);
  });
});
