/** Wire types for the review API (see docs/api.md in the repo root). */

export const STAGES = [
  "ingested",
  "stamped",
  "ocr_done",
  "metadata_bound",
  "bindings_draft",
  "bindings_reviewed",
  "questions_draft",
  "questions_reviewed",
  "assembled",
] as const;

export type Stage = (typeof STAGES)[number];

export const DATATYPES = [
  "text",
  "area",
  "yesno",
  "number",
  "currency",
  "date",
  "email",
  "phone",
  "zip",
] as const;

export type Datatype = (typeof DATATYPES)[number];

export interface RunSummary {
  run_id: string;
  stage: Stage;
  source_name: string;
}

export interface AuditEntry {
  seq: number;
  event: string;
  [key: string]: unknown;
}

export interface RunDetail {
  run_id: string;
  stage: Stage;
  version: string;
  stages: Record<Stage, boolean>;
  gates: Record<string, Stage>;
  audit: AuditEntry[];
}

export interface Violation {
  path: string;
  message: string;
  severity?: "error" | "warning";
  code?: string;
  variable?: string;
}

export interface Binding {
  token: string;
  field_name: string;
  kind: string;
  variable: string;
  definition?: string;
  page?: number;
  flags?: string[];
  notes?: string;
}

export interface Question {
  variable: string;
  prompt: string;
  datatype: Datatype;
  screen_id: number;
  screen_title: string;
  help?: string;
}

export interface BindingsPayload {
  bindings: Binding[];
  approved_by?: string;
}

export interface QuestionsPayload {
  questions: Question[];
  overrides?: unknown[];
  approved_by?: string;
}

export interface OcrContextPayload {
  context: {
    full_text: string;
    recovered: string[];
    missing: string[];
    per_token_window: Record<string, string>;
  };
  dpi: number;
}

export type StagePayload = Record<string, unknown>;

export interface StageState {
  stage: Stage;
  version: string;
  payload: StagePayload;
  violations: Violation[];
}

export interface PatchOp {
  path: string;
  value: unknown;
}

export interface PatchResult {
  stage: Stage;
  version: string;
  payload: StagePayload;
  warnings: Violation[];
}

export interface ApproveResult {
  run_id: string;
  stage: Stage;
  status: string;
  version: string;
}

export interface MetricsRow {
  form: string;
  total_fields: number;
  placed_inline: number;
  paired_checkboxes: number;
  unidentified: number;
  recognized_fraction: number;
  paired_fraction: number;
  unidentified_fraction: number;
}

export interface MetricsResponse {
  forms: MetricsRow[];
  aggregate: {
    unweighted_mean: Record<string, number>;
    field_weighted: Record<string, number>;
  };
}

export interface PreviewResponse {
  run_id: string;
  stage: Stage;
  yaml: string;
}
