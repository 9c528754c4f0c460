// Interchange types mirroring the annotation service payloads.

export type Screen = 'fluency_utility' | 'coverage' | 'precision' | 'done';

export interface CitedQuote {
  snippet_id: string;
  quote_text: string;
  snippet_span: [number, number];
}

export interface GenerationUnit {
  index: number;
  text: string;
  char_span: [number, number];
  requires_citation: boolean;
}

export interface Generation {
  query_id: string;
  system: string;
  text: string;
  abstained: boolean;
  units: GenerationUnit[];
  citations: CitedQuote[][];
}

export interface Source {
  id: string;
  source_url: string;
  text: string;
  char_span: [number, number];
  origin: string;
}

export interface SessionView {
  task_id: string;
  annotator: string;
  query_id: string;
  system: string;
  screen: Screen;
  current_unit: number | null;
  citation_cursor: number;
  timer_open: boolean;
  ratings_submitted: boolean;
  revision: number;
}

export interface TaskPayload {
  task_id: string;
  annotator: string;
  query_id: string;
  query_text: string;
  distribution: string | null;
  system: string;
  generation: Generation;
  sources: Source[];
  session: SessionView;
}

export type EventKind =
  | 'rating_submitted'
  | 'continue_clicked'
  | 'coverage_submitted'
  | 'precision_submitted';

export interface TaskEvent {
  task_id: string;
  event: EventKind;
  payload: Record<string, unknown> & { client_ms: number };
}
