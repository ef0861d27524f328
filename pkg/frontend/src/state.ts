/** Editing state for one stage payload.
 *
 * The rendered view always derives from the last payload the server
 * sent plus the local unsaved edits, never from DOM state, so the
 * unsaved indicator and the patch body cannot drift from what the
 * reviewer sees. Edits are keyed by JSON pointer; setting a pointer
 * back to its base value removes the edit.
 */

import { pointerGet, pointerSet, pointerWritable } from "./pointer.js";
import { validatePayload } from "./schema.js";
import type { PatchOp, Stage, StagePayload, Violation } from "./types.js";

function deepClone<T>(value: T): T {
  return value === undefined ? value : (JSON.parse(JSON.stringify(value)) as T);
}

function deepEqual(a: unknown, b: unknown): boolean {
  return JSON.stringify(a) === JSON.stringify(b);
}

export interface RebaseOutcome {
  kept: string[];
  dropped: string[];
}

export class StageEditor {
  readonly stage: Stage;
  private base: StagePayload;
  private baseVersion: string;
  private serverViolations: Violation[];
  private edits = new Map<string, unknown>();

  constructor(
    stage: Stage,
    payload: StagePayload,
    version: string,
    violations: Violation[] = [],
  ) {
    this.stage = stage;
    this.base = deepClone(payload);
    this.baseVersion = version;
    this.serverViolations = violations;
  }

  get version(): string {
    return this.baseVersion;
  }

  get dirty(): boolean {
    return this.edits.size > 0;
  }

  get editedPaths(): string[] {
    return [...this.edits.keys()];
  }

  /** Record a local edit; a value equal to the base clears the edit. */
  setEdit(path: string, value: unknown): void {
    if (deepEqual(pointerGet(this.base, path), value)) {
      this.edits.delete(path);
    } else {
      this.edits.set(path, deepClone(value));
    }
  }

  clearEdit(path: string): void {
    this.edits.delete(path);
  }

  /** Base payload with all unsaved edits applied. */
  current(): StagePayload {
    const doc = deepClone(this.base);
    for (const [path, value] of this.edits) {
      pointerSet(doc, path, deepClone(value));
    }
    return doc;
  }

  valueAt(path: string): unknown {
    if (this.edits.has(path)) return this.edits.get(path);
    return pointerGet(this.base, path);
  }

  patchOps(): PatchOp[] {
    return [...this.edits.entries()].map(([path, value]) => ({ path, value }));
  }

  /** Schema plus naming findings for the payload as currently edited. */
  localViolations(): Violation[] {
    return validatePayload(this.stage, this.current());
  }

  /** Findings to display: local ones when dirty, the server's otherwise. */
  activeViolations(): Violation[] {
    return this.dirty ? this.localViolations() : this.serverViolations;
  }

  /** Replace base state after a successful save. */
  applySaved(payload: StagePayload, version: string, warnings: Violation[]): void {
    this.base = deepClone(payload);
    this.baseVersion = version;
    this.serverViolations = warnings;
    this.edits.clear();
  }

  /** Replace base state after a refetch, keeping edits that still apply.
   *
   * An edit survives when its pointer still resolves in the new payload;
   * one that now equals the refetched value dissolves into the base.
   */
  rebase(payload: StagePayload, version: string, violations: Violation[]): RebaseOutcome {
    const outcome: RebaseOutcome = { kept: [], dropped: [] };
    this.base = deepClone(payload);
    this.baseVersion = version;
    this.serverViolations = violations;
    for (const [path, value] of [...this.edits.entries()]) {
      if (!pointerWritable(this.base, path)) {
        this.edits.delete(path);
        outcome.dropped.push(path);
        continue;
      }
      if (deepEqual(pointerGet(this.base, path), value)) {
        this.edits.delete(path);
      }
      outcome.kept.push(path);
    }
    return outcome;
  }
}
