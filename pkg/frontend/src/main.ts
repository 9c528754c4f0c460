// Browser entry point: ?annotator=<id>&base=<service url>

import { EvalServiceClient } from './api.js';
import { TaskController } from './controller.js';

async function boot(): Promise<void> {
  const params = new URLSearchParams(window.location.search);
  const annotator = params.get('annotator');
  const base = params.get('base') ?? 'http://127.0.0.1:8400';
  const container = document.getElementById('app');
  if (!container) throw new Error('missing #app container');
  if (!annotator) {
    container.textContent = 'Add ?annotator=<your id> to the URL to begin.';
    return;
  }
  const controller = new TaskController(document, container, new EvalServiceClient(base));
  await controller.loadNext(annotator);
}

void boot();
