/**
 * Wire protocol shared with the orchestrator: one JSON request line on the
 * child's stdin, one JSON response line on its stdout, exit 0 on success.
 */

export interface FitnessRequest {
  trial_id: number;
  generation: number;
  params: Record<string, number>;
}

export interface FitnessResponse {
  trial_id: number;
  fitness: number;
  status: "ok" | "failed";
  detail: string;
}

export function parseRequest(line: string): FitnessRequest {
  const data = JSON.parse(line);
  if (typeof data !== "object" || data === null) {
    throw new Error("request is not an object");
  }
  const { trial_id, generation, params } = data as Record<string, unknown>;
  if (!Number.isInteger(trial_id)) {
    throw new Error("trial_id must be an integer");
  }
  if (!Number.isInteger(generation)) {
    throw new Error("generation must be an integer");
  }
  if (typeof params !== "object" || params === null || Array.isArray(params)) {
    throw new Error("params must be an object of numbers");
  }
  for (const [key, value] of Object.entries(params)) {
    if (typeof value !== "number" || !Number.isFinite(value)) {
      throw new Error(`param ${key} is not a finite number`);
    }
  }
  return {
    trial_id: trial_id as number,
    generation: generation as number,
    params: params as Record<string, number>,
  };
}

export function serializeResponse(response: FitnessResponse): string {
  return JSON.stringify(response);
}

export function okResponse(trialId: number, fitness: number): FitnessResponse {
  return { trial_id: trialId, fitness, status: "ok", detail: "" };
}

export function failedResponse(trialId: number, detail: string): FitnessResponse {
  return { trial_id: trialId, fitness: NaN, status: "failed", detail };
}

/** NaN is not valid JSON; the orchestrator reads null back as NaN. */
export function responseLine(response: FitnessResponse): string {
  const body = Number.isFinite(response.fitness)
    ? response
    : { ...response, fitness: null };
  return JSON.stringify(body);
}

export async function readOneLine(stream: NodeJS.ReadableStream): Promise<string> {
  let buffer = "";
  for await (const chunk of stream) {
    buffer += chunk.toString();
    const newline = buffer.indexOf("\n");
    if (newline >= 0) {
      return buffer.slice(0, newline);
    }
  }
  return buffer;
}
