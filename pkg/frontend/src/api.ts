// Typed HTTP client for the cold-start review service. Every mutation goes
// through the documented endpoints; the client holds no state of its own.
import {
  CandidateView,
  DecisionAck,
  DecisionBody,
  FinalizeAck,
  PoolView,
  TaskSummary,
} from "./types.js";
import { z } from "zod";

// zod schemas with .default() have narrower input than output types, so the
// client only needs the parse half of the interface
interface Parser<T> {
  parse(data: unknown): T;
}

export class ServiceError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`service ${status}: ${detail}`);
  }
}

async function parseError(res: Response): Promise<ServiceError> {
  let detail = res.statusText;
  try {
    const body = (await res.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ServiceError(res.status, detail);
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async getJson<T>(path: string, schema: Parser<T>): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`);
    if (!res.ok) throw await parseError(res);
    return schema.parse(await res.json());
  }

  private async postJson<T>(
    path: string,
    body: unknown,
    schema: Parser<T>,
  ): Promise<T> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) throw await parseError(res);
    return schema.parse(await res.json());
  }

  listTasks(): Promise<TaskSummary[]> {
    return this.getJson("/tasks", z.array(TaskSummary));
  }

  listCandidates(task: string, status = "pending"): Promise<CandidateView[]> {
    return this.getJson(
      `/tasks/${encodeURIComponent(task)}/candidates?status=${status}`,
      z.array(CandidateView),
    );
  }

  getCandidate(id: string): Promise<CandidateView> {
    return this.getJson(`/candidates/${encodeURIComponent(id)}`, CandidateView);
  }

  getPool(task: string): Promise<PoolView> {
    return this.getJson(`/tasks/${encodeURIComponent(task)}/pool`, PoolView);
  }

  postDecision(candidateId: string, body: DecisionBody): Promise<DecisionAck> {
    return this.postJson(
      `/candidates/${encodeURIComponent(candidateId)}/decision`,
      body,
      DecisionAck,
    );
  }

  /** Replay-safe POST: the service acknowledges identical decisions
   *  idempotently, so a retry after a dropped response cannot duplicate. */
  async postDecisionWithRetry(
    candidateId: string,
    body: DecisionBody,
    attempts = 2,
  ): Promise<DecisionAck> {
    let lastError: unknown;
    for (let attempt = 0; attempt < attempts; attempt += 1) {
      try {
        return await this.postDecision(candidateId, body);
      } catch (error) {
        lastError = error;
        if (error instanceof ServiceError) throw error; // definitive answer
      }
    }
    throw lastError;
  }

  finalize(task: string): Promise<FinalizeAck> {
    return this.postJson(
      `/tasks/${encodeURIComponent(task)}/finalize`,
      {},
      FinalizeAck,
    );
  }
}
