// Pure view-model helpers: status colors, coordinate math, error carets,
// entry grouping. No DOM access, so everything here unit-tests directly.

import type { EntryDoc, Status } from "./types";

export const STATUS_COLORS: Record<Status, string> = {
  unknown: "#9e9e9e", // grey
  up: "#2e7d32", // green
  down: "#c62828", // red
  stale: "#f9a825", // amber
};

export function clamp01(value: number): number {
  return Math.min(1, Math.max(0, value));
}

export interface Rect {
  left: number;
  top: number;
  width: number;
  height: number;
}

/** Map a mouse position to normalized [0,1] map coordinates. */
export function toNormalized(clientX: number, clientY: number, rect: Rect): { x: number; y: number } {
  return {
    x: clamp01((clientX - rect.left) / rect.width),
    y: clamp01((clientY - rect.top) / rect.height),
  };
}

/** Character column for a UTF-8 byte offset, for caret placement.
 *
 * The server reports filter syntax errors as byte offsets into the UTF-8
 * encoding; the caret has to sit under a character.
 */
export function caretColumn(text: string, byteOffset: number): number {
  let bytes = 0;
  let column = 0;
  for (const ch of text) {
    const width = new TextEncoder().encode(ch).length;
    if (bytes + width > byteOffset) break;
    bytes += width;
    column += ch.length; // count UTF-16 units so the caret aligns with the rendered string
  }
  return column;
}

/** Group cached entries by their category attribute for the detail panel. */
export function groupEntries(entries: EntryDoc[]): Map<string, EntryDoc[]> {
  const groups = new Map<string, EntryDoc[]>();
  for (const entry of entries) {
    const category = entry.attributes["category"]?.[0] ?? "resource";
    const bucket = groups.get(category);
    if (bucket) bucket.push(entry);
    else groups.set(category, [entry]);
  }
  return groups;
}

export function formatTimestamp(epochSeconds: number | null): string {
  if (epochSeconds === null) return "never";
  return new Date(epochSeconds * 1000).toLocaleTimeString();
}
