// Keyboard-first review flow: curation is high volume, so every decision
// has a single-key binding. The map is data, not behavior, to keep it
// testable and easy to print as a help overlay.

export type HotkeyAction =
  | "accept"
  | "reject"
  | "edit"
  | "finalize"
  | "next"
  | "previous"
  | "refresh"
  | "help";

export const HOTKEYS: Record<string, HotkeyAction> = {
  a: "accept",
  r: "reject",
  e: "edit",
  f: "finalize",
  j: "next",
  k: "previous",
  g: "refresh",
  "?": "help",
};

export interface KeyLike {
  key: string;
  ctrlKey?: boolean;
  metaKey?: boolean;
  altKey?: boolean;
  targetIsInput?: boolean;
}

/** Resolve a keystroke to an action; modifier combos and typing into a
 *  form field never trigger review actions. */
export function resolveHotkey(event: KeyLike): HotkeyAction | null {
  if (event.ctrlKey || event.metaKey || event.altKey) return null;
  if (event.targetIsInput) return null;
  return HOTKEYS[event.key] ?? null;
}

export function hotkeyHelp(): string[] {
  return Object.entries(HOTKEYS).map(([key, action]) => `${key} — ${action}`);
}
