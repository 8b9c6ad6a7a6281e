// Client-side checks applied before a decision leaves the browser.
import { DecisionBody } from "./types.js";

export interface ValidationResult {
  ok: boolean;
  errors: string[];
}

export function validateDecision(body: DecisionBody): ValidationResult {
  const errors: string[] = [];
  if (!["accept", "reject", "edit"].includes(body.verdict)) {
    errors.push(`unknown verdict "${body.verdict}"`);
  }
  if (body.verdict === "edit") {
    if (!body.edited_pair) {
      errors.push("edit requires the edited pair");
    } else {
      if (!body.edited_pair.question.trim()) errors.push("edited question is empty");
      if (!body.edited_pair.answer.trim()) errors.push("edited answer is empty");
    }
  }
  if (body.rank_hint !== undefined) {
    if (!Number.isInteger(body.rank_hint) || body.rank_hint < 1) {
      errors.push("rank hint must be a positive integer");
    }
  }
  return { ok: errors.length === 0, errors };
}
