// Browser entry point: wires the session to the DOM and the keyboard.
// Serve the compiled bundle next to index.html; the review service runs on
// loopback (default http://127.0.0.1:8710).
import { ApiClient } from "./api.js";
import { ReviewSession, loadDashboard } from "./state.js";
import { resolveHotkey, hotkeyHelp } from "./hotkeys.js";
import { renderCandidate, renderDashboard, renderPool } from "./render.js";

const SERVICE_URL =
  new URLSearchParams(location.search).get("service") ?? "http://127.0.0.1:8710";
const TASK = new URLSearchParams(location.search).get("task") ?? "DC";

const api = new ApiClient(SERVICE_URL);
const session = new ReviewSession(api, TASK, "browser-reviewer");

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function paint(): void {
  el("candidate").innerHTML = renderCandidate(session.selected);
  el("pool").innerHTML = renderPool(session.pool);
  el("status").textContent = session.lastError
    ? `error: ${session.lastError}`
    : `${session.pending.length} pending`;
  const finalize = document.querySelector<HTMLButtonElement>(".finalize");
  finalize?.addEventListener("click", () => void act("finalize"));
}

async function paintDashboard(): Promise<void> {
  try {
    el("dashboard").innerHTML = renderDashboard(await loadDashboard(api));
  } catch (error) {
    el("dashboard").innerHTML = `<p class="banner">service unreachable: ${String(error)}</p>`;
  }
}

async function act(action: string): Promise<void> {
  const current = session.selected;
  try {
    switch (action) {
      case "accept":
      case "reject":
        if (current) await session.decide(current.id, action);
        break;
      case "edit": {
        if (!current) break;
        const question = prompt("Edited question:", current.pair.question);
        if (question === null) return;
        const answer = prompt("Edited answer:", current.pair.answer);
        if (answer === null) return;
        await session.decide(current.id, "edit", { question, answer });
        break;
      }
      case "finalize":
        await session.finalize();
        break;
      case "next":
        session.selectNext();
        break;
      case "previous":
        session.selectPrevious();
        break;
      case "refresh":
        await session.refresh();
        break;
      case "help":
        alert(hotkeyHelp().join("\n"));
        break;
    }
  } catch {
    // session.lastError carries the detail; the status line shows it
  }
  paint();
  void paintDashboard();
}

document.addEventListener("keydown", (event) => {
  const target = event.target as HTMLElement | null;
  const action = resolveHotkey({
    key: event.key,
    ctrlKey: event.ctrlKey,
    metaKey: event.metaKey,
    altKey: event.altKey,
    targetIsInput:
      !!target && ["INPUT", "TEXTAREA", "SELECT"].includes(target.tagName),
  });
  if (action) {
    event.preventDefault();
    void act(action);
  }
});

void (async () => {
  await session.refresh().catch(() => undefined);
  paint();
  await paintDashboard();
})();
