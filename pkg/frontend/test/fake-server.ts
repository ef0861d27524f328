/** In-memory stand-in for the review API, faithful to the wire contract:
 * whole-state version digests, 409 on stale versions, 422 with a
 * violations list on bad pointers, schema breaks, or naming errors,
 * and approve advancing the pipeline to the next gate.
 */

import { pointerSet } from "../src/pointer.js";
import { validatePayload, hasErrors } from "../src/schema.js";
import type {
  PatchOp,
  Stage,
  StagePayload,
  Violation,
} from "../src/types.js";
import { STAGES } from "../src/types.js";

const GATES: Record<string, Stage> = {
  bindings_reviewed: "bindings_draft",
  questions_reviewed: "questions_draft",
};

const EDITABLE: Set<Stage> = new Set(STAGES.filter((s) => s !== "ingested"));

function digest(value: unknown): string {
  const text = JSON.stringify(value);
  let h1 = 0x811c9dc5;
  let h2 = 0x01000193;
  for (let i = 0; i < text.length; i++) {
    h1 = Math.imul(h1 ^ text.charCodeAt(i), 0x01000193) >>> 0;
    h2 = (Math.imul(h2, 31) + text.charCodeAt(i)) >>> 0;
  }
  return h1.toString(16).padStart(8, "0") + h2.toString(16).padStart(8, "0");
}

function deepClone<T>(value: T): T {
  return JSON.parse(JSON.stringify(value)) as T;
}

interface FakeRun {
  run_id: string;
  source_name: string;
  stage: Stage;
  payloads: Partial<Record<Stage, StagePayload>>;
  audit: Array<Record<string, unknown>>;
}

export class FakeReviewServer {
  readonly run: FakeRun;
  /** Drafts the question payload when the bindings gate is approved. */
  questionDrafter: (bindings: StagePayload) => StagePayload;
  requests: Array<{ method: string; path: string; body?: unknown }> = [];

  constructor(options: {
    runId?: string;
    sourceName?: string;
    stage?: Stage;
    payloads: Partial<Record<Stage, StagePayload>>;
    questionDrafter?: (bindings: StagePayload) => StagePayload;
  }) {
    this.run = {
      run_id: options.runId ?? "fake00000001",
      source_name: options.sourceName ?? "small_claims.pdf",
      stage: options.stage ?? "bindings_draft",
      payloads: deepClone(options.payloads),
      audit: [{ seq: 1, event: "created" }],
    };
    this.questionDrafter =
      options.questionDrafter ?? (() => ({ questions: [] }));
  }

  version(): string {
    return digest({ stage: this.run.stage, payloads: this.run.payloads });
  }

  /** Out-of-band mutation, as if another client had saved first. */
  mutate(stage: Stage, edit: (payload: StagePayload) => void): void {
    const payload = this.run.payloads[stage];
    if (!payload) throw new Error(`no ${stage} payload to mutate`);
    edit(payload);
    this.audit("edited", { stage });
  }

  private audit(event: string, extra: Record<string, unknown> = {}): void {
    this.run.audit.push({ seq: this.run.audit.length + 1, event, ...extra });
  }

  readonly fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const url = new URL(input, "http://fake.test");
    const method = (init?.method ?? "GET").toUpperCase();
    const body = init?.body ? (JSON.parse(String(init.body)) as unknown) : undefined;
    this.requests.push({ method, path: url.pathname, body });
    const reply = this.route(method, url.pathname, body);
    return new Response(JSON.stringify(reply.body), {
      status: reply.status,
      headers: { "content-type": "application/json" },
    });
  };

  private route(
    method: string,
    path: string,
    body: unknown,
  ): { status: number; body: unknown } {
    const parts = path.split("/").filter((p) => p.length > 0);
    if (parts[0] !== "runs") return { status: 404, body: { detail: "not found" } };

    if (parts.length === 1) {
      return {
        status: 200,
        body: [
          {
            run_id: this.run.run_id,
            stage: this.run.stage,
            source_name: this.run.source_name,
          },
        ],
      };
    }
    if (parts[1] !== this.run.run_id) {
      return { status: 404, body: { detail: `no run '${parts[1]}'` } };
    }
    if (parts.length === 2) {
      const stages: Record<string, boolean> = {};
      for (const s of STAGES) stages[s] = s in this.run.payloads;
      return {
        status: 200,
        body: {
          run_id: this.run.run_id,
          stage: this.run.stage,
          version: this.version(),
          stages,
          gates: GATES,
          audit: this.run.audit,
        },
      };
    }
    if (parts[2] === "stage" && parts.length === 4) {
      const stage = parts[3] as Stage;
      if (method === "GET") return this.getStage(stage);
      if (method === "PATCH") return this.patchStage(stage, body);
    }
    if (parts[2] === "approve" && parts.length === 4 && method === "POST") {
      return this.approve(parts[3] as Stage);
    }
    return { status: 404, body: { detail: "not found" } };
  }

  private getStage(stage: Stage): { status: number; body: unknown } {
    const payload = this.run.payloads[stage];
    if (!payload) return { status: 404, body: { detail: `run has no '${stage}' payload` } };
    return {
      status: 200,
      body: {
        stage,
        version: this.version(),
        payload: deepClone(payload),
        violations: validatePayload(stage, payload),
      },
    };
  }

  private patchStage(stage: Stage, rawBody: unknown): { status: number; body: unknown } {
    if (!EDITABLE.has(stage)) {
      return { status: 404, body: { detail: `stage '${stage}' is not editable` } };
    }
    const payload = this.run.payloads[stage];
    if (!payload) return { status: 404, body: { detail: `run has no '${stage}' payload` } };
    const edit = rawBody as { base_version: string; patch: PatchOp[] };
    if (edit.base_version !== this.version()) {
      return {
        status: 409,
        body: {
          error: "version conflict: state changed since you read it",
          current_version: this.version(),
        },
      };
    }
    const draft = deepClone(payload);
    for (const op of edit.patch) {
      try {
        pointerSet(draft, op.path, op.value);
      } catch (error) {
        return {
          status: 422,
          body: {
            detail: { violations: [{ path: op.path, message: (error as Error).message }] },
          },
        };
      }
    }
    const findings = validatePayload(stage, draft);
    const errors = findings.filter((v) => v.severity === "error");
    if (errors.length > 0) {
      return { status: 422, body: { detail: { violations: errors } } };
    }
    this.run.payloads[stage] = draft;
    this.audit("edited", { stage, ops: edit.patch.length });
    return {
      status: 200,
      body: {
        stage,
        version: this.version(),
        payload: deepClone(draft),
        warnings: findings.filter((v) => v.severity === "warning"),
      },
    };
  }

  private approve(requested: Stage): { status: number; body: unknown } {
    const draft = (GATES[requested] ?? requested) as Stage;
    const reviewed = (Object.entries(GATES).find(([, d]) => d === draft)?.[0] ?? null) as Stage | null;
    if (!reviewed) {
      return { status: 404, body: { detail: `${requested} is not a reviewable draft stage` } };
    }
    if (this.run.stage !== draft) {
      return {
        status: 404,
        body: { detail: `cannot approve ${draft}: checkpoint is at ${this.run.stage}` },
      };
    }
    const payload = this.run.payloads[draft] as StagePayload;
    const findings = validatePayload(draft, payload);
    if (hasErrors(findings)) {
      return {
        status: 422,
        body: { detail: { violations: [{ path: "", message: "naming violations block approval" }] } },
      };
    }
    this.run.payloads[reviewed] = { ...deepClone(payload), approved_by: "api" };
    this.run.stage = reviewed;
    this.audit("approved", { stage: reviewed });

    let status: string;
    if (reviewed === "bindings_reviewed") {
      this.run.payloads.questions_draft = this.questionDrafter(
        this.run.payloads.bindings_reviewed as StagePayload,
      );
      this.run.stage = "questions_draft";
      status = "waiting_review:questions_draft";
      this.audit("stage_complete", { stage: "questions_draft" });
    } else {
      this.run.payloads.assembled = {
        yaml_path: "interview.yml",
        bundle_path: "bundle.zip",
        spec_digest: "0".repeat(64),
      };
      this.run.stage = "assembled";
      status = "complete";
      this.audit("stage_complete", { stage: "assembled" });
    }
    return {
      status: 200,
      body: { run_id: this.run.run_id, stage: this.run.stage, status, version: this.version() },
    };
  }
}
