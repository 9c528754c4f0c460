// Source text rendering with cited spans highlighted. The full snippet is
// always shown; only the cited characters are wrapped in <mark>.

export interface HighlightSpan {
  start: number;
  end: number;
}

export function clampSpans(spans: HighlightSpan[], textLength: number): HighlightSpan[] {
  return spans
    .filter((s) => s.end > s.start && s.start >= 0 && s.start < textLength)
    .map((s) => ({ start: s.start, end: Math.min(s.end, textLength) }))
    .sort((a, b) => a.start - b.start || a.end - b.end);
}

function mergeSpans(spans: HighlightSpan[]): HighlightSpan[] {
  const merged: HighlightSpan[] = [];
  for (const span of spans) {
    const last = merged[merged.length - 1];
    if (last && span.start <= last.end) {
      last.end = Math.max(last.end, span.end);
    } else {
      merged.push({ ...span });
    }
  }
  return merged;
}

/** Renders `text` into `container` with each span wrapped in <mark>. */
export function renderHighlighted(
  doc: Document,
  text: string,
  spans: HighlightSpan[],
): HTMLElement {
  const root = doc.createElement('div');
  root.className = 'source-text';
  let cursor = 0;
  for (const span of mergeSpans(clampSpans(spans, text.length))) {
    if (span.start > cursor) {
      root.appendChild(doc.createTextNode(text.slice(cursor, span.start)));
    }
    const mark = doc.createElement('mark');
    mark.className = 'cited-span';
    mark.dataset.span = `${span.start}-${span.end}`;
    mark.textContent = text.slice(span.start, span.end);
    root.appendChild(mark);
    cursor = span.end;
  }
  if (cursor < text.length) {
    root.appendChild(doc.createTextNode(text.slice(cursor)));
  }
  return root;
}
