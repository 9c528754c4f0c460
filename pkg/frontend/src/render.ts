// Screen rendering. Each screen is rebuilt from state into the container;
// the controller re-renders after every action.

import { renderHighlighted } from './highlight.js';
import type { ScreenState } from './state.js';
import type { CitedQuote, Source } from './types.js';

export const FLUENCY_RUBRIC =
  'Fluency (3 = fluent, 1 = not fluent): count misprints, incoherent ' +
  'sentences, and abrupt transitions between sentences against fluency.';
export const UTILITY_RUBRIC =
  'Perceived utility (3 = high, 1 = low): consider how well the response ' +
  'addresses the query, whether it is concise, and whether the style suits ' +
  'the query.';
export const NO_CITATIONS_NOTICE =
  'This sentence has no citations, so it cannot be fully supported.';

export interface Handlers {
  onRating(kind: 'fluency' | 'utility', value: number): void;
  onJudgment(value: 0 | 1): void;
  onSubmitRatings(): void;
  onContinue(): void;
  onSubmitCoverage(): void;
  onSubmitPrecision(): void;
}

function el(doc: Document, tag: string, className: string, text?: string): HTMLElement {
  const node = doc.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(doc: Document, id: string, label: string, enabled: boolean,
                onClick: () => void): HTMLButtonElement {
  const b = doc.createElement('button');
  b.id = id;
  b.textContent = label;
  b.disabled = !enabled;
  b.addEventListener('click', () => {
    if (!b.disabled) onClick();
  });
  return b;
}

function scale(doc: Document, name: string, selected: number | null,
               onPick: (v: number) => void): HTMLElement {
  const group = el(doc, 'div', 'scale');
  group.dataset.scale = name;
  for (const value of [1, 2, 3]) {
    const label = el(doc, 'label', 'scale-option');
    const input = doc.createElement('input');
    input.type = 'radio';
    input.name = name;
    input.value = String(value);
    input.checked = selected === value;
    input.addEventListener('change', () => onPick(value));
    label.appendChild(input);
    label.appendChild(doc.createTextNode(String(value)));
    group.appendChild(label);
  }
  return group;
}

function binaryChoice(doc: Document, name: string, yesLabel: string, noLabel: string,
                      selected: 0 | 1 | null, onPick: (v: 0 | 1) => void): HTMLElement {
  const group = el(doc, 'div', 'binary-choice');
  group.dataset.choice = name;
  for (const [value, text] of [[1, yesLabel], [0, noLabel]] as const) {
    const label = el(doc, 'label', 'choice-option');
    const input = doc.createElement('input');
    input.type = 'radio';
    input.name = name;
    input.value = String(value);
    input.checked = selected === value;
    input.addEventListener('change', () => onPick(value));
    label.appendChild(input);
    label.appendChild(doc.createTextNode(text));
    group.appendChild(label);
  }
  return group;
}

function sourcePanel(doc: Document, sources: Source[], citations: CitedQuote[]): HTMLElement {
  const panel = el(doc, 'div', 'source-panel');
  const cited = new Map<string, CitedQuote[]>();
  for (const c of citations) {
    const list = cited.get(c.snippet_id) ?? [];
    list.push(c);
    cited.set(c.snippet_id, list);
  }
  for (const source of sources) {
    const quotes = cited.get(source.id);
    if (!quotes) continue;
    const box = el(doc, 'section', 'source');
    box.dataset.sourceId = source.id;
    box.appendChild(el(doc, 'p', 'source-url', source.source_url));
    box.appendChild(renderHighlighted(doc, source.text,
      quotes.map((q) => ({ start: q.snippet_span[0], end: q.snippet_span[1] }))));
    panel.appendChild(box);
  }
  return panel;
}

function strippedGeneration(text: string): string {
  // citation markers are removed for whole-response reading
  return text.replace(/\[\d+\]/g, '').replace(/\s+/g, ' ').trim();
}

export function renderScreen(doc: Document, container: HTMLElement, state: ScreenState,
                             handlers: Handlers): void {
  container.textContent = '';
  const root = el(doc, 'div', `screen screen-${state.screen}`);
  root.dataset.screen = state.screen;

  if (state.screen === 'fluency_utility') {
    root.appendChild(el(doc, 'h2', 'query', state.task.query_text));
    const guidelines = doc.createElement('a');
    guidelines.className = 'guidelines-link';
    guidelines.href = 'GUIDELINES.md';
    guidelines.target = '_blank';
    guidelines.textContent = 'Annotation guidelines';
    root.appendChild(guidelines);
    root.appendChild(el(doc, 'p', 'generation-text', strippedGeneration(state.task.generation.text)));
    root.appendChild(el(doc, 'p', 'rubric rubric-fluency', FLUENCY_RUBRIC));
    root.appendChild(scale(doc, 'fluency', state.pendingFluency,
      (v) => handlers.onRating('fluency', v)));
    root.appendChild(el(doc, 'p', 'rubric rubric-utility', UTILITY_RUBRIC));
    root.appendChild(scale(doc, 'utility', state.pendingUtility,
      (v) => handlers.onRating('utility', v)));
    root.appendChild(button(doc, 'submit-ratings', 'Submit ratings',
      state.canSubmitRatings, handlers.onSubmitRatings));
    root.appendChild(button(doc, 'continue-task', 'Continue task',
      state.canContinue, handlers.onContinue));
  } else if (state.screen === 'coverage') {
    const unitIndex = state.currentUnitIndex!;
    const unit = state.task.generation.units[unitIndex];
    root.appendChild(el(doc, 'h2', 'query', state.task.query_text));
    root.appendChild(el(doc, 'h3', 'progress',
      `Sentence ${state.unitCursor + 1} of ${state.evalUnits.length}`));
    if (!state.timerOpen) {
      root.appendChild(el(doc, 'p', 'interstitial',
        'Click "Continue task" when you are ready to judge the next sentence.'));
      root.appendChild(button(doc, 'continue-task', 'Continue task',
        state.canContinue, handlers.onContinue));
    } else {
      root.appendChild(el(doc, 'p', 'unit-text', unit.text));
      const citations = state.currentCitations;
      if (citations.length === 0) {
        root.appendChild(el(doc, 'p', 'no-citations', NO_CITATIONS_NOTICE));
      } else {
        root.appendChild(sourcePanel(doc, state.task.sources, citations));
      }
      root.appendChild(el(doc, 'p', 'question',
        'Do the cited sources together support all claims in this sentence?'));
      root.appendChild(binaryChoice(doc, 'coverage', 'Yes, fully supported',
        'No, not fully supported', state.pendingJudgment, handlers.onJudgment));
      root.appendChild(button(doc, 'submit-coverage', 'Continue task',
        state.canSubmitCoverage, handlers.onSubmitCoverage));
    }
  } else if (state.screen === 'precision') {
    const unitIndex = state.currentUnitIndex!;
    const unit = state.task.generation.units[unitIndex];
    const citations = state.currentCitations;
    const citation = citations[state.citationCursor];
    root.appendChild(el(doc, 'h2', 'query', state.task.query_text));
    root.appendChild(el(doc, 'h3', 'progress',
      `Citation ${state.citationCursor + 1} of ${citations.length} for sentence ${state.unitCursor + 1}`));
    root.appendChild(el(doc, 'p', 'unit-text', unit.text));
    root.appendChild(sourcePanel(doc, state.task.sources, [citation]));
    root.appendChild(el(doc, 'p', 'question',
      'Does this cited source support at least one claim in the sentence?'));
    root.appendChild(binaryChoice(doc, 'precision', 'Yes, supports a claim',
      'No, irrelevant or contradicting', state.pendingJudgment, handlers.onJudgment));
    root.appendChild(button(doc, 'submit-precision', 'Submit judgment',
      state.canSubmitPrecision, handlers.onSubmitPrecision));
  } else {
    root.appendChild(el(doc, 'h2', 'done-title', 'Task complete'));
    root.appendChild(el(doc, 'p', 'done-note', 'Your judgments have been recorded. Thank you!'));
  }

  container.appendChild(root);
}

export function renderSchemaMismatch(doc: Document, container: HTMLElement,
                                     problems: { path: string; message: string }[],
                                     onSkip: () => void): void {
  container.textContent = '';
  const banner = el(doc, 'div', 'banner schema-mismatch');
  banner.appendChild(el(doc, 'p', 'banner-title', 'This task could not be displayed (schema mismatch).'));
  const list = el(doc, 'ul', 'problems');
  for (const p of problems) {
    list.appendChild(el(doc, 'li', 'problem', `${p.path}: ${p.message}`));
  }
  banner.appendChild(list);
  banner.appendChild(button(doc, 'skip-task', 'Skip task', true, onSkip));
  container.appendChild(banner);
}

export function renderRetryBanner(doc: Document, container: HTMLElement, detail: string): HTMLElement {
  const banner = el(doc, 'div', 'banner retry');
  banner.id = 'retry-banner';
  banner.textContent = `Connection trouble, retrying… (${detail})`;
  container.appendChild(banner);
  return banner;
}
