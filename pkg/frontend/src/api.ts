// Client for the annotation service HTTP API. The UI touches the backend
// only through this module; there is no direct file access.

import type { TaskEvent, TaskPayload } from './types.js';

export class ApiError extends Error {
  constructor(
    message: string,
    readonly status: number,
    readonly code: string,
  ) {
    super(message);
  }
}

async function raiseForError(res: Response): Promise<void> {
  if (res.ok) return;
  let code = 'http_error';
  let message = `${res.status}`;
  try {
    const body = await res.json();
    code = body?.error?.code ?? code;
    message = body?.error?.message ?? message;
  } catch {
    // non-JSON error body; keep defaults
  }
  throw new ApiError(message, res.status, code);
}

export class EvalServiceClient {
  constructor(
    private baseUrl: string,
    private fetchFn: typeof fetch = fetch,
  ) {}

  async nextTask(annotator: string): Promise<TaskPayload | null> {
    const url = `${this.baseUrl}/tasks/next?annotator=${encodeURIComponent(annotator)}`;
    const res = await this.fetchFn(url);
    if (res.status === 404) return null;
    await raiseForError(res);
    return (await res.json()) as TaskPayload;
  }

  async getTask(taskId: string): Promise<TaskPayload> {
    const res = await this.fetchFn(`${this.baseUrl}/tasks/${encodeURIComponent(taskId)}`);
    await raiseForError(res);
    return (await res.json()) as TaskPayload;
  }

  async postEvent(event: TaskEvent): Promise<void> {
    const res = await this.fetchFn(
      `${this.baseUrl}/tasks/${encodeURIComponent(event.task_id)}/events`,
      {
        method: 'POST',
        headers: { 'Content-Type': 'application/json' },
        body: JSON.stringify({ event: event.event, payload: event.payload }),
      },
    );
    await raiseForError(res);
  }
}
