/** Client-side payload checks mirroring the server's stage schemas.
 *
 * The API re-validates every patch, so these exist to catch problems
 * before a request is made: the save button refuses to submit a
 * payload the pipeline would reject, and badges point at the exact
 * row and column. Paths are JSON pointers in the server's format.
 */

import { validateVariable } from "./naming.js";
import { DATATYPES, type Stage, type StagePayload, type Violation } from "./types.js";

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

function requireString(
  out: Violation[],
  pointer: string,
  value: unknown,
  minLength = 0,
): void {
  if (typeof value !== "string") {
    out.push({ path: pointer, message: "must be a string", severity: "error" });
  } else if (value.length < minLength) {
    out.push({
      path: pointer,
      message: `must be at least ${minLength} character(s)`,
      severity: "error",
    });
  }
}

function checkBinding(out: Violation[], pointer: string, item: unknown): void {
  if (!isRecord(item)) {
    out.push({ path: pointer, message: "binding must be an object", severity: "error" });
    return;
  }
  requireString(out, `${pointer}/token`, item.token, 1);
  requireString(out, `${pointer}/field_name`, item.field_name, 1);
  requireString(out, `${pointer}/kind`, item.kind);
  requireString(out, `${pointer}/variable`, item.variable, 1);
  if (item.definition !== undefined) {
    requireString(out, `${pointer}/definition`, item.definition);
  }
  if (item.page !== undefined && (!Number.isInteger(item.page) || (item.page as number) < 0)) {
    out.push({
      path: `${pointer}/page`,
      message: "page must be an integer >= 0",
      severity: "error",
    });
  }
  if (item.flags !== undefined) {
    if (!Array.isArray(item.flags) || item.flags.some((f) => typeof f !== "string")) {
      out.push({
        path: `${pointer}/flags`,
        message: "flags must be an array of strings",
        severity: "error",
      });
    }
  }
  if (typeof item.variable === "string") {
    for (const issue of validateVariable(item.variable)) {
      out.push({
        path: `${pointer}/variable`,
        variable: item.variable,
        code: issue.code,
        message: issue.message,
        severity: issue.severity,
      });
    }
  }
}

function checkQuestion(out: Violation[], pointer: string, item: unknown): void {
  if (!isRecord(item)) {
    out.push({ path: pointer, message: "question must be an object", severity: "error" });
    return;
  }
  requireString(out, `${pointer}/variable`, item.variable, 1);
  requireString(out, `${pointer}/prompt`, item.prompt, 1);
  requireString(out, `${pointer}/screen_title`, item.screen_title, 1);
  if (!(DATATYPES as readonly string[]).includes(item.datatype as string)) {
    out.push({
      path: `${pointer}/datatype`,
      message: `datatype must be one of ${DATATYPES.join(", ")}`,
      severity: "error",
    });
  }
  if (!Number.isInteger(item.screen_id) || (item.screen_id as number) < 1) {
    out.push({
      path: `${pointer}/screen_id`,
      message: "screen_id must be an integer >= 1",
      severity: "error",
    });
  }
  if (item.help !== undefined) {
    requireString(out, `${pointer}/help`, item.help);
  }
  if (typeof item.variable === "string") {
    for (const issue of validateVariable(item.variable)) {
      out.push({
        path: `${pointer}/variable`,
        variable: item.variable,
        code: issue.code,
        message: issue.message,
        severity: issue.severity,
      });
    }
  }
}

function checkListPayload(
  out: Violation[],
  payload: StagePayload,
  key: "bindings" | "questions",
  checkItem: (out: Violation[], pointer: string, item: unknown) => void,
): void {
  const list = payload[key];
  if (!Array.isArray(list)) {
    out.push({ path: `/${key}`, message: `${key} must be an array`, severity: "error" });
    return;
  }
  list.forEach((item, i) => checkItem(out, `/${key}/${i}`, item));
}

/** Violations (errors then warnings) the server would report for this payload. */
export function validatePayload(stage: Stage, payload: StagePayload): Violation[] {
  const out: Violation[] = [];
  if (!isRecord(payload)) {
    return [{ path: "", message: "payload must be an object", severity: "error" }];
  }
  switch (stage) {
    case "bindings_draft":
    case "bindings_reviewed":
      checkListPayload(out, payload, "bindings", checkBinding);
      break;
    case "questions_draft":
    case "questions_reviewed":
      checkListPayload(out, payload, "questions", checkQuestion);
      break;
    case "metadata_bound": {
      const metadata = payload.metadata;
      if (!isRecord(metadata)) {
        out.push({ path: "/metadata", message: "metadata must be an object", severity: "error" });
        break;
      }
      requireString(out, "/metadata/title", metadata.title, 1);
      requireString(out, "/metadata/description", metadata.description, 1);
      if (typeof metadata.title === "string" && metadata.title.length > 120) {
        out.push({
          path: "/metadata/title",
          message: "title is longer than 120 characters",
          severity: "error",
        });
      }
      if (typeof metadata.description === "string" && metadata.description.length > 600) {
        out.push({
          path: "/metadata/description",
          message: "description is longer than 600 characters",
          severity: "error",
        });
      }
      break;
    }
    default:
      break;
  }
  return [
    ...out.filter((v) => v.severity === "error"),
    ...out.filter((v) => v.severity !== "error"),
  ];
}

export function hasErrors(violations: Violation[]): boolean {
  return violations.some((v) => v.severity === "error" || v.severity === undefined);
}
