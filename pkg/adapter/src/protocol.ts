import { createInterface } from 'node:readline';
import { Entity } from './merge.js';

export interface TaggerResponse {
  id: string | null;
  entities: Entity[];
  error?: string;
}

export type RequestHandler = (id: string, text: string) => Promise<Entity[]>;

function errorResponse(id: string | null, message: string): TaggerResponse {
  return { id, entities: [], error: message };
}

/** Serve the line protocol: one JSON request per stdin line, one JSON
 *  response per stdout line, flushed per line. A malformed request line
 *  produces a response with an error field; the stream never dies. */
export async function serveLines(
  handler: RequestHandler,
  input: NodeJS.ReadableStream = process.stdin,
  output: NodeJS.WritableStream = process.stdout,
): Promise<void> {
  const reader = createInterface({ input, crlfDelay: Infinity });
  const write = (response: TaggerResponse) =>
    new Promise<void>((resolve) => {
      output.write(JSON.stringify(response) + '\n', () => resolve());
    });
  for await (const line of reader) {
    if (line.trim() === '') continue;
    let id: string | null = null;
    try {
      const request = JSON.parse(line);
      if (typeof request !== 'object' || request === null) {
        await write(errorResponse(null, 'request is not a JSON object'));
        continue;
      }
      id = typeof request.id === 'string' ? request.id : null;
      if (id === null || typeof request.text !== 'string') {
        await write(errorResponse(id, 'request needs string "id" and "text" fields'));
        continue;
      }
      await write({ id, entities: await handler(id, request.text) });
    } catch (err) {
      await write(errorResponse(id, err instanceof Error ? err.message : String(err)));
    }
  }
}
