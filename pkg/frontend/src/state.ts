// Screen state machine for one annotation task.
//
// Mirrors the server's session transitions (fluency/utility -> per-unit
// coverage -> per-citation precision -> done) so the UI can advance
// optimistically while the event queue syncs. The client records clock
// readings and transmits them; it never computes or displays T2V — the
// subtraction happens on the server only.

import type { MonotonicClock } from './clock.js';
import type { EventKind, TaskPayload, TaskEvent, Screen } from './types.js';

export interface SchemaProblem {
  path: string;
  message: string;
}

export function validateTaskPayload(payload: unknown): SchemaProblem[] {
  const problems: SchemaProblem[] = [];
  const p = payload as Partial<TaskPayload> | null;
  if (!p || typeof p !== 'object') return [{ path: '', message: 'payload is not an object' }];
  if (typeof p.task_id !== 'string' || !p.task_id) problems.push({ path: 'task_id', message: 'missing' });
  if (typeof p.query_text !== 'string') problems.push({ path: 'query_text', message: 'missing' });
  const generation = p.generation;
  if (!generation || typeof generation !== 'object') {
    problems.push({ path: 'generation', message: 'missing' });
    return problems;
  }
  if (typeof generation.text !== 'string') problems.push({ path: 'generation.text', message: 'missing' });
  if (!Array.isArray(generation.units)) problems.push({ path: 'generation.units', message: 'not a list' });
  if (!Array.isArray(generation.citations)) problems.push({ path: 'generation.citations', message: 'not a list' });
  if (Array.isArray(generation.units) && Array.isArray(generation.citations) &&
      generation.units.length !== generation.citations.length) {
    problems.push({ path: 'generation.citations', message: 'length differs from units' });
  }
  const sources = p.sources;
  if (!Array.isArray(sources)) {
    problems.push({ path: 'sources', message: 'not a list' });
    return problems;
  }
  const sourceIds = new Set(sources.map((s) => s.id));
  (generation.citations ?? []).forEach((perUnit, u) => {
    (perUnit ?? []).forEach((c, k) => {
      if (!sourceIds.has(c.snippet_id)) {
        problems.push({ path: `citations[${u}][${k}]`, message: `unknown source ${c.snippet_id}` });
        return;
      }
      const source = sources.find((s) => s.id === c.snippet_id)!;
      const [start, end] = c.snippet_span;
      if (!(start >= 0 && end > start && end <= source.text.length)) {
        problems.push({ path: `citations[${u}][${k}]`, message: 'snippet_span out of bounds' });
      }
    });
  });
  return problems;
}

export class IllegalAction extends Error {}

export class ScreenState {
  readonly task: TaskPayload;
  screen: Screen;
  /** indices of citation-requiring units, in order */
  readonly evalUnits: number[];
  unitCursor = 0;
  citationCursor = 0;
  timerOpen = false;
  ratingsSubmitted = false;
  pendingFluency: number | null = null;
  pendingUtility: number | null = null;
  pendingJudgment: 0 | 1 | null = null;
  lastContinueClockMs: number | null = null;
  revision: number;

  constructor(
    task: TaskPayload,
    private clock: MonotonicClock,
    private emit: (event: TaskEvent) => void,
  ) {
    this.task = task;
    this.screen = task.session?.screen ?? 'fluency_utility';
    this.revision = task.session?.revision ?? 0;
    this.evalUnits = task.generation.units
      .filter((u) => u.requires_citation)
      .map((u) => u.index);
  }

  get currentUnitIndex(): number | null {
    return this.unitCursor < this.evalUnits.length ? this.evalUnits[this.unitCursor] : null;
  }

  get currentCitations() {
    const unit = this.currentUnitIndex;
    return unit === null ? [] : this.task.generation.citations[unit] ?? [];
  }

  // -- submit gating -------------------------------------------------------

  get canSubmitRatings(): boolean {
    return this.screen === 'fluency_utility' && !this.ratingsSubmitted &&
      this.pendingFluency !== null && this.pendingUtility !== null;
  }

  get canContinue(): boolean {
    if (this.screen === 'fluency_utility') return this.ratingsSubmitted;
    return this.screen === 'coverage' && !this.timerOpen;
  }

  get canSubmitCoverage(): boolean {
    return this.screen === 'coverage' && this.timerOpen && this.pendingJudgment !== null;
  }

  get canSubmitPrecision(): boolean {
    return this.screen === 'precision' && this.pendingJudgment !== null;
  }

  // -- actions -------------------------------------------------------------

  setRating(kind: 'fluency' | 'utility', value: number): void {
    if (this.screen !== 'fluency_utility' || this.ratingsSubmitted) {
      throw new IllegalAction('ratings are closed');
    }
    if (![1, 2, 3].includes(value)) throw new IllegalAction(`rating ${value} out of scale`);
    if (kind === 'fluency') this.pendingFluency = value;
    else this.pendingUtility = value;
  }

  setJudgment(value: 0 | 1): void {
    if (this.screen !== 'coverage' && this.screen !== 'precision') {
      throw new IllegalAction(`no judgment on screen ${this.screen}`);
    }
    this.pendingJudgment = value;
  }

  submitRatings(): void {
    if (!this.canSubmitRatings) throw new IllegalAction('ratings incomplete or already submitted');
    this.send('rating_submitted', {
      fluency: this.pendingFluency,
      utility: this.pendingUtility,
    });
    this.ratingsSubmitted = true;
  }

  clickContinue(): void {
    if (!this.canContinue) throw new IllegalAction('continue not available');
    const now = this.clock.nowMs();
    this.send('continue_clicked', {}, now);
    this.lastContinueClockMs = now;
    if (this.screen === 'fluency_utility') {
      this.screen = this.currentUnitIndex === null ? 'done' : 'coverage';
    }
    this.timerOpen = this.screen === 'coverage';
    // an uncited unit cannot be covered: preselect "no" so submit is live
    this.pendingJudgment =
      this.timerOpen && this.currentCitations.length === 0 ? 0 : null;
  }

  submitCoverage(): void {
    if (!this.canSubmitCoverage) throw new IllegalAction('coverage submit blocked');
    this.send('coverage_submitted', { value: this.pendingJudgment });
    this.timerOpen = false;
    this.pendingJudgment = null;
    if (this.currentCitations.length > 0) {
      this.screen = 'precision';
      this.citationCursor = 0;
    } else {
      this.advanceUnit();
    }
  }

  submitPrecision(): void {
    if (!this.canSubmitPrecision) throw new IllegalAction('precision submit blocked');
    this.send('precision_submitted', { value: this.pendingJudgment });
    this.pendingJudgment = null;
    this.citationCursor += 1;
    if (this.citationCursor >= this.currentCitations.length) {
      this.advanceUnit();
    }
  }

  private advanceUnit(): void {
    this.unitCursor += 1;
    this.citationCursor = 0;
    this.screen = this.currentUnitIndex === null ? 'done' : 'coverage';
    this.timerOpen = false;
  }

  private send(event: EventKind, payload: Record<string, unknown>, atMs?: number): void {
    this.emit({
      task_id: this.task.task_id,
      event,
      payload: { ...payload, client_ms: atMs ?? this.clock.nowMs(), revision: this.revision },
    });
    this.revision += 1;
  }
}
