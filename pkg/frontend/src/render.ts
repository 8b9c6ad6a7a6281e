// Pure HTML rendering for the review screens. Kept DOM-free (strings in,
// strings out) so the views are testable without a browser; main.ts owns
// the actual document wiring.
import { CandidateView, MediaRef, PoolView } from "./types.js";
import { DashboardRow } from "./state.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function mediaRef(ref: MediaRef): string {
  const uri = escapeHtml(ref.uri);
  const label = escapeHtml(ref.id);
  if (!ref.uri) return `<span class="media missing">${label}</span>`;
  if (ref.kind === "image") {
    return `<a class="media" href="${uri}" target="_blank">` +
      `<img src="${uri}" alt="${label}" loading="lazy"></a>`;
  }
  return `<a class="media" href="${uri}" target="_blank">${label} (${escapeHtml(ref.kind)})</a>`;
}

export function renderCandidate(candidate: CandidateView | null): string {
  if (!candidate) {
    return `<section class="candidate empty"><p>No pending candidates. ` +
      `Generate more or pick another task.</p></section>`;
  }
  const media = candidate.media.map(mediaRef).join(" ");
  const flags = candidate.pair.flags.length
    ? `<p class="flags">flags: ${candidate.pair.flags.map(escapeHtml).join(", ")}</p>`
    : "";
  return `<section class="candidate" data-id="${escapeHtml(candidate.id)}">
  <header><strong>${escapeHtml(candidate.id)}</strong> · ${escapeHtml(candidate.task)}</header>
  <div class="media-row">${media}</div>
  <pre class="annotation">${escapeHtml(candidate.annotation)}</pre>
  <dl class="pair">
    <dt>Q</dt><dd>${escapeHtml(candidate.pair.question)}</dd>
    <dt>A</dt><dd>${escapeHtml(candidate.pair.answer)}</dd>
  </dl>
  ${flags}
</section>`;
}

export function renderPool(pool: PoolView): string {
  const status = pool.ready
    ? `<span class="ready">finalized</span>`
    : `<span class="open">open (needs ${pool.min_entries})</span>`;
  const rows = pool.entries
    .map(
      (entry) => `<li data-rank="${entry.rank}" data-id="${escapeHtml(entry.candidate_id)}">
    <span class="rank">#${entry.rank}</span>
    <span class="q">${escapeHtml(entry.pair.question)}</span>
    ${entry.edited ? `<span class="edited">edited</span>` : ""}
  </li>`,
    )
    .join("\n");
  const finalize = pool.ready
    ? `<button class="finalize" disabled>finalize</button>`
    : `<button class="finalize">finalize</button>`;
  return `<aside class="pool">
  <header>${escapeHtml(pool.task)} pool ${status}</header>
  <ol>${rows}</ol>
  ${finalize}
</aside>`;
}

export function renderDashboard(rows: DashboardRow[]): string {
  const body = rows
    .map(
      (row) => `<tr>
    <td>${escapeHtml(row.task)}</td>
    <td>${row.pending}</td>
    <td>${row.pool_size}</td>
    <td>${row.ready ? "ready" : "collecting"}</td>
    <td>${row.generated_pairs}</td>
  </tr>`,
    )
    .join("\n");
  return `<table class="dashboard">
  <thead><tr><th>task</th><th>pending</th><th>pool</th><th>status</th><th>generated</th></tr></thead>
  <tbody>${body}</tbody>
</table>`;
}
