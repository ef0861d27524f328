/** Fetch wrapper for the review API with typed errors.
 *
 * A stale-version PATCH surfaces as ConflictError carrying the server's
 * current version so callers can refetch and rebase; validation
 * failures surface as ApiError with the violation list intact.
 */

import type {
  ApproveResult,
  MetricsResponse,
  PatchOp,
  PatchResult,
  PreviewResponse,
  RunDetail,
  RunSummary,
  Stage,
  StageState,
  Violation,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly violations: Violation[];

  constructor(status: number, message: string, violations: Violation[] = []) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.violations = violations;
  }
}

export class ConflictError extends Error {
  readonly currentVersion: string;

  constructor(message: string, currentVersion: string) {
    super(message);
    this.name = "ConflictError";
    this.currentVersion = currentVersion;
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function errorFrom(response: Response): Promise<ApiError | ConflictError> {
  let body: unknown = null;
  try {
    body = await response.json();
  } catch {
    return new ApiError(response.status, response.statusText);
  }
  const obj = (body ?? {}) as Record<string, unknown>;
  if (response.status === 409 && typeof obj.current_version === "string") {
    return new ConflictError(String(obj.error ?? "version conflict"), obj.current_version);
  }
  const detail = obj.detail as Record<string, unknown> | string | undefined;
  if (typeof detail === "string") {
    return new ApiError(response.status, detail);
  }
  const violations = (detail?.violations ?? []) as Violation[];
  const message =
    violations.length > 0
      ? violations.map((v) => `${v.path}: ${v.message}`).join("; ")
      : response.statusText;
  return new ApiError(response.status, message, violations);
}

export class ReviewApi {
  private readonly base: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn?: FetchLike) {
    this.base = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((input, init) => globalThis.fetch(input, init));
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.base}${path}`, init);
    if (!response.ok) {
      throw await errorFrom(response);
    }
    return (await response.json()) as T;
  }

  listRuns(): Promise<RunSummary[]> {
    return this.request("/runs");
  }

  getRun(runId: string): Promise<RunDetail> {
    return this.request(`/runs/${runId}`);
  }

  getStage(runId: string, stage: Stage): Promise<StageState> {
    return this.request(`/runs/${runId}/stage/${stage}`);
  }

  patchStage(
    runId: string,
    stage: Stage,
    baseVersion: string,
    ops: PatchOp[],
  ): Promise<PatchResult> {
    return this.request(`/runs/${runId}/stage/${stage}`, {
      method: "PATCH",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ base_version: baseVersion, patch: ops }),
    });
  }

  approve(runId: string, stage: Stage): Promise<ApproveResult> {
    return this.request(`/runs/${runId}/approve/${stage}`, { method: "POST" });
  }

  metrics(runId: string): Promise<MetricsResponse> {
    return this.request(`/runs/${runId}/metrics`);
  }

  preview(runId: string): Promise<PreviewResponse> {
    return this.request(`/runs/${runId}/preview`);
  }
}
