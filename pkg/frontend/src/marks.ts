/** Pure mark-cycling logic: pending marks overlay the server badges. */

import type { Badge } from './api.js';

/**
 * Next state after a click on an image showing `current`. Plain click
 * cycles none -> relevant -> none, shift-click cycles none ->
 * non-relevant -> none, and either overwrites the opposite mark.
 */
export function cycleMark(current: Badge, shift: boolean): Badge {
  const target: Badge = shift ? 'non-relevant' : 'relevant';
  return current === target ? 'none' : target;
}

/** Badge to render: a pending mark wins over the server state. */
export function effectiveBadge(server: Badge, pending: boolean | undefined): Badge {
  if (pending === undefined) return server;
  return pending ? 'relevant' : 'non-relevant';
}

/**
 * Mirror of the engine guard: finetuning needs at least one relevant and
 * one non-relevant judgment once the pending marks are merged (later
 * wins per id) into the already-flushed server judgments.
 */
export function bothClassesMarked(
  server: Map<string, boolean>,
  pending: Map<string, boolean>,
): boolean {
  let hasRelevant = false;
  let hasNonRelevant = false;
  const check = (relevant: boolean) => {
    if (relevant) hasRelevant = true;
    else hasNonRelevant = true;
  };
  for (const [id, relevant] of server) {
    if (!pending.has(id)) check(relevant);
  }
  for (const relevant of pending.values()) check(relevant);
  return hasRelevant && hasNonRelevant;
}
