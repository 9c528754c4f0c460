// End-to-end: a scripted browser session against the real annotation
// service. Verifies that the server's record log carries T2V values equal
// to the scripted inter-click gaps and that replaying the event log (via
// the backend's export command) reconstructs identical records.

import { afterAll, beforeAll, describe, expect, it } from 'vitest';
import { execFileSync, spawn, type ChildProcess } from 'node:child_process';
import { mkdtempSync, readFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';

import { EvalServiceClient } from '../src/api.js';
import { ManualClock } from '../src/clock.js';
import { TaskController } from '../src/controller.js';

const PORT = 8450 + (process.pid % 97);
const BASE = `http://127.0.0.1:${PORT}`;
const STUDY_ID = 'ui-study';

let server: ChildProcess;
let stateDir: string;

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const res = await fetch(`${BASE}/tasks/next?annotator=probe`);
      if (res.status === 404) return;
    } catch {
      // not up yet
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error('annotation service did not come up');
}

function studyPayload() {
  return {
    id: STUDY_ID,
    systems: ['quoted'],
    queries: [{ id: 'q1', text: 'what is the largest moon', distribution: 'NQ' }],
    annotators: ['w-ui'],
    batch: 'batch-1',
    generations: [
      {
        query_id: 'q1',
        system: 'quoted',
        text: '"Ganymede is the largest moon." "It orbits Jupiter." Hope this helps!',
        abstained: false,
        units: [
          { index: 0, text: '"Ganymede is the largest moon."', char_span: [0, 31], requires_citation: true },
          { index: 1, text: '"It orbits Jupiter."', char_span: [32, 52], requires_citation: true },
          { index: 2, text: 'Hope this helps!', char_span: [53, 69], requires_citation: false },
        ],
        citations: [
          [{ snippet_id: 's1', quote_text: 'Ganymede is the largest moon', snippet_span: [0, 28] }],
          [
            { snippet_id: 's1', quote_text: 'It orbits Jupiter', snippet_span: [30, 47] },
            { snippet_id: 's2', quote_text: 'orbital period of seven days', snippet_span: [8, 36] },
          ],
          [],
        ],
      },
    ],
    snippets: [
      {
        id: 's1',
        source_url: 'https://example.org/ganymede',
        text: 'Ganymede is the largest moon. It orbits Jupiter.',
        char_span: [0, 48],
        origin: 'retrieved',
      },
      {
        id: 's2',
        source_url: 'https://example.org/orbit',
        text: 'It has an orbital period of seven days around Jupiter.',
        char_span: [0, 55],
        origin: 'retrieved',
      },
    ],
  };
}

beforeAll(async () => {
  stateDir = mkdtempSync(join(tmpdir(), 'citedqa-ui-'));
  server = spawn('python3', ['-m', 'citedqa.cli', 'serve', '--state-dir', stateDir,
                             '--port', String(PORT)], { stdio: 'ignore' });
  await waitForServer();
  const created = await fetch(`${BASE}/studies`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify(studyPayload()),
  });
  expect(created.status).toBe(200);
  const assigned = await fetch(`${BASE}/studies/${STUDY_ID}/assign`, {
    method: 'POST',
    headers: { 'Content-Type': 'application/json' },
    body: JSON.stringify({ tasks_per_annotator: 1, rng_seed: 3 }),
  });
  expect(assigned.status).toBe(200);
}, 30_000);

afterAll(() => {
  server?.kill();
});

function click(container: HTMLElement, selector: string): void {
  const node = container.querySelector<HTMLElement>(selector);
  if (!node) throw new Error(`missing ${selector}`);
  node.click();
}

function pick(container: HTMLElement, group: string, value: string): void {
  const input = container.querySelector<HTMLInputElement>(
    `input[name="${group}"][value="${value}"]`,
  );
  if (!input) throw new Error(`missing radio ${group}=${value}`);
  input.click();
}

describe('scripted browser session against the live service', () => {
  const GAPS = [1234, 5678]; // scripted continue -> coverage-submit gaps, ms

  it('records T2V equal to the scripted gaps and replays identically', async () => {
    const container = document.createElement('div');
    document.body.replaceChildren(container);
    const clock = new ManualClock(10_000);
    const controller = new TaskController(document, container,
      new EvalServiceClient(BASE), clock);
    expect(await controller.loadNext('w-ui')).toBe(true);

    // rating screen
    pick(container, 'fluency', '3');
    pick(container, 'utility', '2');
    clock.advance(400);
    click(container, '#submit-ratings');
    clock.advance(600);
    click(container, '#continue-task');           // timer 1 opens

    // unit 0: coverage after GAPS[0]
    clock.advance(GAPS[0]);
    pick(container, 'coverage', '1');
    click(container, '#submit-coverage');
    clock.advance(300);
    pick(container, 'precision', '1');
    click(container, '#submit-precision');

    // interstitial before unit 1
    clock.advance(250);
    click(container, '#continue-task');           // timer 2 opens
    clock.advance(GAPS[1]);
    pick(container, 'coverage', '0');
    click(container, '#submit-coverage');
    clock.advance(100);
    pick(container, 'precision', '0');
    click(container, '#submit-precision');
    clock.advance(100);
    pick(container, 'precision', '1');
    click(container, '#submit-precision');

    expect(container.querySelector('.screen')!.getAttribute('data-screen')).toBe('done');
    await controller.queue.drain();

    const closed = await fetch(`${BASE}/studies/${STUDY_ID}/close`, { method: 'POST' });
    expect(closed.status).toBe(200);
    const exportRes = await fetch(`${BASE}/studies/${STUDY_ID}/export`);
    expect(exportRes.status).toBe(200);
    const exported = await exportRes.text();
    const records = exported
      .split('\n')
      .filter((line) => line.trim() && !line.startsWith('#'))
      .map((line) => JSON.parse(line));

    // event order on the wire equals action order
    expect(records.map((r) => r.kind)).toEqual([
      'fluency', 'utility', 'coverage', 'precision', 'coverage', 'precision', 'precision',
    ]);

    // T2V equals the scripted inter-click gaps, within 1 ms
    const t2vs = records.filter((r) => r.kind === 'coverage').map((r) => r.t2v_ms);
    expect(t2vs).toHaveLength(GAPS.length);
    t2vs.forEach((value, i) => {
      expect(Math.abs(value - GAPS[i])).toBeLessThanOrEqual(1);
    });

    // judgments arrived intact
    const coverage = records.filter((r) => r.kind === 'coverage').map((r) => r.value);
    expect(coverage).toEqual([1, 0]);
    const precision = records.filter((r) => r.kind === 'precision').map((r) => r.value);
    expect(precision).toEqual([1, 0, 1]);

    // annotator ids are pseudonymized
    expect(records.every((r) => r.annotator_id !== 'w-ui')).toBe(true);

    // replaying the persisted event log reconstructs identical records
    const replayOut = join(stateDir, 'replayed.jsonl');
    execFileSync('python3', ['-m', 'citedqa.cli', 'export', '--state-dir', stateDir,
                             '--study', STUDY_ID, '--out', replayOut]);
    const replayed = readFileSync(replayOut, 'utf-8');
    expect(replayed).toBe(exported);
  }, 30_000);
});

describe('flaky network during a session', () => {
  it('queues failed submissions and the server still sees action order', async () => {
    const flakyStudy = {
      ...studyPayload(),
      id: 'ui-study-flaky',
      annotators: ['w-flaky'],
    };
    expect((await fetch(`${BASE}/studies`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(flakyStudy),
    })).status).toBe(200);
    expect((await fetch(`${BASE}/studies/ui-study-flaky/assign`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ tasks_per_annotator: 1, rng_seed: 4 }),
    })).status).toBe(200);

    // every event POST fails on its first attempt
    const failedOnce = new Set<string>();
    const flakyFetch: typeof fetch = async (input, init) => {
      const url = String(input);
      if (init?.method === 'POST' && url.includes('/events')) {
        const key = String(init.body);
        if (!failedOnce.has(key)) {
          failedOnce.add(key);
          throw new TypeError('simulated network failure');
        }
      }
      return fetch(input, init);
    };

    const container = document.createElement('div');
    document.body.replaceChildren(container);
    const clock = new ManualClock(5_000);
    const controller = new TaskController(document, container,
      new EvalServiceClient(BASE, flakyFetch), clock);
    expect(await controller.loadNext('w-flaky')).toBe(true);

    pick(container, 'fluency', '2');
    pick(container, 'utility', '2');
    click(container, '#submit-ratings');
    clock.advance(100);
    click(container, '#continue-task');
    clock.advance(2000);
    pick(container, 'coverage', '1');
    click(container, '#submit-coverage');
    clock.advance(100);
    pick(container, 'precision', '1');
    click(container, '#submit-precision');
    clock.advance(100);
    click(container, '#continue-task');
    clock.advance(3000);
    pick(container, 'coverage', '1');
    click(container, '#submit-coverage');
    clock.advance(100);
    pick(container, 'precision', '1');
    click(container, '#submit-precision');
    clock.advance(100);
    pick(container, 'precision', '1');
    click(container, '#submit-precision');
    await controller.queue.drain();

    expect((await fetch(`${BASE}/studies/ui-study-flaky/close`, { method: 'POST' })).status).toBe(200);
    const exported = await (await fetch(`${BASE}/studies/ui-study-flaky/export`)).text();
    const records = exported
      .split('\n')
      .filter((line) => line.trim() && !line.startsWith('#'))
      .map((line) => JSON.parse(line));
    // server-side oracle: despite retries, arrival order equals action order
    expect(records.map((r) => r.kind)).toEqual([
      'fluency', 'utility', 'coverage', 'precision', 'coverage', 'precision', 'precision',
    ]);
    const t2vs = records.filter((r) => r.kind === 'coverage').map((r) => r.t2v_ms);
    expect(t2vs).toEqual([2000, 3000]);
  }, 30_000);
});
