import { beforeEach, describe, expect, it } from 'vitest';
import { readFileSync } from 'node:fs';
import { join } from 'node:path';

import { ManualClock } from '../src/clock.js';
import { FLUENCY_RUBRIC, NO_CITATIONS_NOTICE, UTILITY_RUBRIC, renderScreen } from '../src/render.js';
import type { Handlers } from '../src/render.js';
import { ScreenState } from '../src/state.js';
import type { TaskEvent } from '../src/types.js';
import { fixtureTask } from './fixtures/task.js';

const FIXTURES = join(__dirname, 'fixtures');

function setup(task = fixtureTask()) {
  const events: TaskEvent[] = [];
  const state = new ScreenState(task, new ManualClock(1000), (e) => events.push(e));
  const container = document.createElement('div');
  document.body.replaceChildren(container);
  const handlers: Handlers = {
    onRating: (kind, value) => {
      state.setRating(kind, value);
      renderScreen(document, container, state, handlers);
    },
    onJudgment: (value) => {
      state.setJudgment(value);
      renderScreen(document, container, state, handlers);
    },
    onSubmitRatings: () => {
      state.submitRatings();
      renderScreen(document, container, state, handlers);
    },
    onContinue: () => {
      state.clickContinue();
      renderScreen(document, container, state, handlers);
    },
    onSubmitCoverage: () => {
      state.submitCoverage();
      renderScreen(document, container, state, handlers);
    },
    onSubmitPrecision: () => {
      state.submitPrecision();
      renderScreen(document, container, state, handlers);
    },
  };
  renderScreen(document, container, state, handlers);
  return { state, container, events, handlers };
}

function click(container: HTMLElement, selector: string): void {
  const node = container.querySelector<HTMLElement>(selector);
  if (!node) throw new Error(`missing ${selector}`);
  node.click();
}

function pick(container: HTMLElement, groupName: string, value: string): void {
  const input = container.querySelector<HTMLInputElement>(
    `input[name="${groupName}"][value="${value}"]`,
  );
  if (!input) throw new Error(`missing radio ${groupName}=${value}`);
  input.click();
}

function advanceToCoverage(container: HTMLElement): void {
  pick(container, 'fluency', '3');
  pick(container, 'utility', '2');
  click(container, '#submit-ratings');
  click(container, '#continue-task');
}

describe('fluency/utility screen', () => {
  it('shows both rubrics and three-point scales', () => {
    const { container } = setup();
    expect(container.querySelector('.rubric-fluency')!.textContent).toBe(FLUENCY_RUBRIC);
    expect(container.querySelector('.rubric-utility')!.textContent).toBe(UTILITY_RUBRIC);
    expect(container.querySelectorAll('input[name="fluency"]')).toHaveLength(3);
    expect(container.querySelectorAll('input[name="utility"]')).toHaveLength(3);
  });

  it('strips citation markers from the generation text', () => {
    const task = fixtureTask();
    task.generation.text = 'Alpha [1]. Beta [2][3].';
    const { container } = setup(task);
    expect(container.querySelector('.generation-text')!.textContent).not.toContain('[1]');
  });

  it('keeps submit disabled until both ratings are chosen', () => {
    const { container } = setup();
    const submit = () => container.querySelector<HTMLButtonElement>('#submit-ratings')!;
    expect(submit().disabled).toBe(true);
    pick(container, 'fluency', '3');
    expect(submit().disabled).toBe(true);
    pick(container, 'utility', '1');
    expect(submit().disabled).toBe(false);
  });

  it('keeps continue disabled until ratings are submitted', () => {
    const { container } = setup();
    const cont = () => container.querySelector<HTMLButtonElement>('#continue-task')!;
    expect(cont().disabled).toBe(true);
    pick(container, 'fluency', '3');
    pick(container, 'utility', '2');
    expect(cont().disabled).toBe(true);
    click(container, '#submit-ratings');
    expect(cont().disabled).toBe(false);
  });
});

describe('coverage screen', () => {
  it('highlights exactly the cited spans of exactly the cited sources', () => {
    const { container } = setup();
    advanceToCoverage(container);
    const task = fixtureTask();
    const marks = Array.from(container.querySelectorAll('mark.cited-span'));
    expect(marks).toHaveLength(1); // unit 0 cites one span in s1
    const source = container.querySelector<HTMLElement>('section.source')!;
    expect(source.dataset.sourceId).toBe('s1');
    const [start, end] = task.generation.citations[0][0].snippet_span;
    expect(marks[0].getAttribute('data-span')).toBe(`${start}-${end}`);
    expect(marks[0].textContent).toBe(task.sources[0].text.slice(start, end));
    // the uncited source never appears
    expect(container.querySelector('[data-source-id="s3"]')).toBeNull();
  });

  it('renders the full snippet text around the highlight, untruncated', () => {
    const { container } = setup();
    advanceToCoverage(container);
    const sourceText = container.querySelector('.source-text')!.textContent;
    expect(sourceText).toBe(fixtureTask().sources[0].text);
  });

  it('highlights spans in both cited sources for a two-citation unit', () => {
    const { container } = setup();
    advanceToCoverage(container);
    pick(container, 'coverage', '1');
    click(container, '#submit-coverage');
    pick(container, 'precision', '1');
    click(container, '#submit-precision');      // -> unit 1 interstitial
    click(container, '#continue-task');         // open timer
    const ids = Array.from(container.querySelectorAll('section.source')).map(
      (s) => (s as HTMLElement).dataset.sourceId,
    );
    expect(ids.sort()).toEqual(['s1', 's2']);
    expect(container.querySelectorAll('mark.cited-span')).toHaveLength(2);
  });

  it('keeps submit disabled until a judgment is selected', () => {
    const { container } = setup();
    advanceToCoverage(container);
    const submit = () => container.querySelector<HTMLButtonElement>('#submit-coverage')!;
    expect(submit().disabled).toBe(true);
    pick(container, 'coverage', '0');
    expect(submit().disabled).toBe(false);
  });

  it('shows the no-citations notice and enables submit for an uncited unit', () => {
    const task = fixtureTask();
    task.generation.citations[0] = [];
    const { container } = setup(task);
    advanceToCoverage(container);
    expect(container.querySelector('.no-citations')!.textContent).toBe(NO_CITATIONS_NOTICE);
    expect(container.querySelector<HTMLButtonElement>('#submit-coverage')!.disabled).toBe(false);
    expect(container.querySelectorAll('mark.cited-span')).toHaveLength(0);
  });
});

describe('precision screen', () => {
  it('iterates citations one at a time with only that span highlighted', () => {
    const { container } = setup();
    advanceToCoverage(container);
    pick(container, 'coverage', '1');
    click(container, '#submit-coverage');
    expect(container.querySelector('.screen')!.getAttribute('data-screen')).toBe('precision');
    expect(container.querySelector('.progress')!.textContent).toContain('Citation 1 of 1');
    expect(container.querySelectorAll('mark.cited-span')).toHaveLength(1);
    const submit = () => container.querySelector<HTMLButtonElement>('#submit-precision')!;
    expect(submit().disabled).toBe(true);
    pick(container, 'precision', '0');
    expect(submit().disabled).toBe(false);
  });
});

describe('golden renderings', () => {
  function golden(name: string): string {
    return readFileSync(join(FIXTURES, name), 'utf-8').trim();
  }

  it('fluency/utility screen matches the committed reference', () => {
    const { container } = setup();
    expect(container.innerHTML.trim()).toBe(golden('golden_fluency_utility.html'));
  });

  it('coverage screen matches the committed reference', () => {
    const { container } = setup();
    advanceToCoverage(container);
    expect(container.innerHTML.trim()).toBe(golden('golden_coverage.html'));
  });

  it('precision screen matches the committed reference', () => {
    const { container } = setup();
    advanceToCoverage(container);
    pick(container, 'coverage', '1');
    click(container, '#submit-coverage');
    expect(container.innerHTML.trim()).toBe(golden('golden_precision.html'));
  });

  it('done screen matches the committed reference', () => {
    const { container } = setup();
    advanceToCoverage(container);
    pick(container, 'coverage', '1');
    click(container, '#submit-coverage');
    pick(container, 'precision', '1');
    click(container, '#submit-precision');
    click(container, '#continue-task');
    pick(container, 'coverage', '1');
    click(container, '#submit-coverage');
    pick(container, 'precision', '1');
    click(container, '#submit-precision');
    pick(container, 'precision', '1');
    click(container, '#submit-precision');
    expect(container.querySelector('.screen')!.getAttribute('data-screen')).toBe('done');
    expect(container.innerHTML.trim()).toBe(golden('golden_done.html'));
  });
});
