// Review session view-model: the pending queue and pool for one task.
//
// Mutations are optimistic (the candidate leaves the pending list
// immediately) and then reconciled against the service's acknowledgement;
// on failure the queue is restored from a fresh fetch. The session holds
// no persistence of its own, so after any decision sequence its state
// equals what a cold fetch of the service would return.
import { ServiceError } from "./api.js";
import { validateDecision } from "./validation.js";
import {
  CandidateView,
  DecisionAck,
  DecisionBody,
  FinalizeAck,
  PoolView,
  TaskSummary,
  Verdict,
} from "./types.js";

/** The slice of the service client the session depends on (structural, so
 *  ApiClient satisfies it and tests can substitute a fake). */
export interface ReviewApi {
  listTasks(): Promise<TaskSummary[]>;
  listCandidates(task: string, status?: string): Promise<CandidateView[]>;
  getPool(task: string): Promise<PoolView>;
  postDecisionWithRetry(
    candidateId: string,
    body: DecisionBody,
    attempts?: number,
  ): Promise<DecisionAck>;
  finalize(task: string): Promise<FinalizeAck>;
}

export interface SessionSnapshot {
  task: string;
  pending: CandidateView[];
  pool: PoolView;
  selected: string | null;
}

export class ReviewSession {
  pending: CandidateView[] = [];
  pool: PoolView;
  selectedIndex = 0;
  lastError: string | null = null;

  constructor(
    private api: ReviewApi,
    public readonly task: string,
    public reviewer = "",
  ) {
    this.pool = { task, ready: false, min_entries: 0, entries: [] };
  }

  get selected(): CandidateView | null {
    return this.pending[this.selectedIndex] ?? null;
  }

  snapshot(): SessionSnapshot {
    return {
      task: this.task,
      pending: this.pending,
      pool: this.pool,
      selected: this.selected?.id ?? null,
    };
  }

  async refresh(): Promise<void> {
    [this.pending, this.pool] = await Promise.all([
      this.api.listCandidates(this.task, "pending"),
      this.api.getPool(this.task),
    ]);
    this.selectedIndex = Math.min(this.selectedIndex, Math.max(0, this.pending.length - 1));
  }

  selectNext(): void {
    if (this.pending.length > 0) {
      this.selectedIndex = (this.selectedIndex + 1) % this.pending.length;
    }
  }

  selectPrevious(): void {
    if (this.pending.length > 0) {
      this.selectedIndex =
        (this.selectedIndex - 1 + this.pending.length) % this.pending.length;
    }
  }

  /** Decide the given candidate; resolves with the reconciled pool view. */
  async decide(
    candidateId: string,
    verdict: Verdict,
    edits?: { question: string; answer: string },
    rankHint?: number,
  ): Promise<PoolView> {
    const body: DecisionBody = { verdict, reviewer: this.reviewer };
    if (edits) body.edited_pair = edits;
    if (rankHint !== undefined) body.rank_hint = rankHint;

    const validation = validateDecision(body);
    if (!validation.ok) {
      this.lastError = validation.errors.join("; ");
      throw new Error(this.lastError);
    }

    // optimistic: the candidate leaves the pending list right away
    const index = this.pending.findIndex((c) => c.id === candidateId);
    const removed = index >= 0 ? this.pending.splice(index, 1)[0] : null;
    if (index >= 0 && this.selectedIndex >= this.pending.length) {
      this.selectedIndex = Math.max(0, this.pending.length - 1);
    }

    try {
      const ack = await this.api.postDecisionWithRetry(candidateId, body);
      // reconcile against the service's authoritative answer
      this.pool = ack.pool;
      this.lastError = null;
      return ack.pool;
    } catch (error) {
      if (removed) this.pending.splice(index, 0, removed); // rollback
      this.lastError =
        error instanceof ServiceError ? error.detail : String(error);
      if (error instanceof ServiceError && error.status === 409) {
        // stale client state (e.g. decided elsewhere): force a refresh
        await this.refresh();
      }
      throw error;
    }
  }

  /** Move an already-accepted pool entry to a new rank. */
  async reorder(candidateId: string, rank: number): Promise<PoolView> {
    return this.decide(candidateId, "accept", undefined, rank);
  }

  async finalize(): Promise<PoolView> {
    try {
      const ack = await this.api.finalize(this.task);
      this.pool = ack.pool;
      this.lastError = null;
      return ack.pool;
    } catch (error) {
      this.lastError =
        error instanceof ServiceError ? error.detail : String(error);
      throw error;
    }
  }
}

export type DashboardRow = TaskSummary;

/** Pool dashboard: per-task pool sizes, readiness, and generation counters. */
export async function loadDashboard(api: ReviewApi): Promise<DashboardRow[]> {
  return api.listTasks();
}
