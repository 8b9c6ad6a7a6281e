// Runtime-validated mirrors of the review service's JSON payloads.
// The shapes must track the service exactly; zod parsing catches drift.
import { z } from "zod";

export const MediaRef = z.object({
  id: z.string(),
  kind: z.string(),
  uri: z.string(),
});
export type MediaRef = z.infer<typeof MediaRef>;

export const QAPair = z.object({
  question: z.string(),
  answer: z.string(),
  source_cache_key: z.string().default(""),
  flags: z.array(z.string()).default([]),
});
export type QAPair = z.infer<typeof QAPair>;

export const CandidateView = z.object({
  id: z.string(),
  task: z.string(),
  annotation: z.string(),
  media: z.array(MediaRef),
  pair: QAPair,
  status: z.enum(["pending", "accepted", "rejected"]),
  cache_key: z.string().default(""),
});
export type CandidateView = z.infer<typeof CandidateView>;

export const PoolEntry = z.object({
  rank: z.number().int().positive(),
  pair: QAPair,
  annotation: z.string(),
  candidate_id: z.string(),
  reviewer: z.string().default(""),
  edited: z.boolean().default(false),
});
export type PoolEntry = z.infer<typeof PoolEntry>;

export const PoolView = z.object({
  task: z.string(),
  ready: z.boolean(),
  min_entries: z.number().int().nonnegative(),
  entries: z.array(PoolEntry),
});
export type PoolView = z.infer<typeof PoolView>;

export const TaskSummary = z.object({
  task: z.string(),
  pending: z.number().int().nonnegative(),
  pool_size: z.number().int().nonnegative(),
  ready: z.boolean(),
  generated_pairs: z.number().int().nonnegative(),
});
export type TaskSummary = z.infer<typeof TaskSummary>;

export type Verdict = "accept" | "reject" | "edit";

export interface DecisionBody {
  verdict: Verdict;
  edited_pair?: { question: string; answer: string };
  rank_hint?: number;
  note?: string;
  reviewer?: string;
}

export const DecisionAck = z.object({
  ok: z.boolean(),
  candidate: CandidateView,
  pool: PoolView,
});
export type DecisionAck = z.infer<typeof DecisionAck>;

export const FinalizeAck = z.object({
  ok: z.boolean(),
  pool: PoolView,
});
export type FinalizeAck = z.infer<typeof FinalizeAck>;
