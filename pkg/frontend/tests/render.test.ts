import { describe, expect, it } from "vitest";
import { renderCandidate, renderDashboard, renderPool } from "../src/render.js";
import { CandidateView, PoolView } from "../src/types.js";

const candidate: CandidateView = {
  id: "DC_CAND_00001",
  task: "DC",
  annotation: "timestamps: [[0, 10]]\nsentences: [\"a clip\"]",
  media: [
    { id: "DC_IMG_000001", kind: "image", uri: "http://media/1.jpg" },
    { id: "DC_IMG_000002", kind: "video_frame", uri: "http://media/2.jpg" },
  ],
  pair: { question: "What is shown?", answer: "A clip.", source_cache_key: "", flags: [] },
  status: "pending",
  cache_key: "",
};

describe("renderCandidate", () => {
  it("renders media as thumbnails or links resolved from the registry uri", () => {
    const html = renderCandidate(candidate);
    expect(html).toContain('<img src="http://media/1.jpg"');
    expect(html).toContain('href="http://media/2.jpg"');
    expect(html).toContain("video_frame");
  });

  it("escapes annotation content", () => {
    const html = renderCandidate({
      ...candidate,
      annotation: "<script>alert(1)</script>",
    });
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
  });

  it("shows an empty state when nothing is pending", () => {
    expect(renderCandidate(null)).toContain("No pending candidates");
  });
});

describe("renderPool", () => {
  const pool: PoolView = {
    task: "DC",
    ready: false,
    min_entries: 3,
    entries: [1, 2, 3].map((rank) => ({
      rank,
      pair: { question: `q${rank}?`, answer: `a${rank}.`, source_cache_key: "", flags: [] },
      annotation: "",
      candidate_id: `DC_CAND_0000${rank}`,
      reviewer: "",
      edited: rank === 2,
    })),
  };

  it("lists entries in rank order 1..3", () => {
    const html = renderPool(pool);
    const ranks = [...html.matchAll(/data-rank="(\d+)"/g)].map((m) => m[1]);
    expect(ranks).toEqual(["1", "2", "3"]);
    expect(html).toContain("edited");
  });

  it("disables finalize once the pool is ready", () => {
    expect(renderPool(pool)).toContain('<button class="finalize">');
    expect(renderPool({ ...pool, ready: true })).toContain(
      '<button class="finalize" disabled>',
    );
  });

  it("shows the empty-state prompt for an empty pool", () => {
    const html = renderPool({ ...pool, entries: [] });
    expect(html).toContain("<ol></ol>");
    expect(html).toContain("open (needs 3)");
  });
});

describe("renderDashboard", () => {
  it("shows pool size, readiness and generation counters per task", () => {
    const html = renderDashboard([
      { task: "DC", pending: 4, pool_size: 3, ready: true, generated_pairs: 80 },
      { task: "SD", pending: 0, pool_size: 0, ready: false, generated_pairs: 0 },
    ]);
    expect(html).toContain("<td>DC</td>");
    expect(html).toContain("<td>80</td>");
    expect(html).toContain("<td>ready</td>");
    expect(html).toContain("<td>collecting</td>");
  });
});
