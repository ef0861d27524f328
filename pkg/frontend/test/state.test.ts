import { describe, expect, it } from "vitest";

import { joinPointer, pointerGet, pointerSet, pointerWritable } from "../src/pointer.js";
import { StageEditor } from "../src/state.js";
import { bindingsPayload } from "./fixtures.js";

describe("json pointers", () => {
  const doc = { bindings: [{ variable: "a" }, { variable: "b" }], meta: { "x/y": 1 } };

  it("gets nested values", () => {
    expect(pointerGet(doc, "/bindings/1/variable")).toBe("b");
    expect(pointerGet(doc, "/meta/x~1y")).toBe(1);
    expect(pointerGet(doc, "/bindings/7/variable")).toBeUndefined();
  });

  it("sets values and rejects out-of-range indices", () => {
    const copy = JSON.parse(JSON.stringify(doc)) as typeof doc;
    pointerSet(copy, "/bindings/0/variable", "z");
    expect(copy.bindings[0]?.variable).toBe("z");
    expect(() => pointerSet(copy, "/bindings/9/variable", "z")).toThrow(/out of range/);
    expect(() => pointerSet(copy, "/bindings/0/variable/deep", "z")).toThrow(/scalar/);
  });

  it("reports writability the way the server checks it", () => {
    expect(pointerWritable(doc, "/bindings/1/variable")).toBe(true);
    expect(pointerWritable(doc, "/bindings/1/new_leaf")).toBe(true);
    expect(pointerWritable(doc, "/bindings/2/variable")).toBe(false);
    expect(pointerWritable(doc, "/missing/1")).toBe(false);
    expect(pointerWritable(doc, "no-slash")).toBe(false);
  });

  it("escapes special characters when joining", () => {
    expect(joinPointer("a/b", 2, "c~d")).toBe("/a~1b/2/c~0d");
  });
});

describe("stage editor", () => {
  function editor(): StageEditor {
    const payload = bindingsPayload() as unknown as Record<string, unknown>;
    return new StageEditor("bindings_draft", payload, "v1", []);
  }

  it("tracks dirtiness and reverts cleanly", () => {
    const ed = editor();
    expect(ed.dirty).toBe(false);
    ed.setEdit("/bindings/0/variable", "users[0].name.first");
    expect(ed.dirty).toBe(true);
    ed.setEdit("/bindings/0/variable", "users[0].name.full");
    expect(ed.dirty).toBe(false);
  });

  it("produces exactly the edited pointers as patch ops", () => {
    const ed = editor();
    ed.setEdit("/bindings/1/variable", "users[0].tax_id");
    ed.setEdit("/bindings/1/definition", "tax identifier");
    expect(ed.patchOps()).toEqual([
      { path: "/bindings/1/variable", value: "users[0].tax_id" },
      { path: "/bindings/1/definition", value: "tax identifier" },
    ]);
  });

  it("applies edits onto the base without mutating it", () => {
    const ed = editor();
    ed.setEdit("/bindings/1/variable", "users[0].tax_id");
    const current = ed.current() as { bindings: Array<{ variable: string }> };
    expect(current.bindings[1]?.variable).toBe("users[0].tax_id");
    ed.clearEdit("/bindings/1/variable");
    const reverted = ed.current() as { bindings: Array<{ variable: string }> };
    expect(reverted.bindings[1]?.variable).toBe("SSN");
  });

  it("reports naming errors for the edited payload", () => {
    const ed = editor();
    expect(ed.localViolations().some((v) => v.severity === "error")).toBe(true);
    ed.setEdit("/bindings/1/variable", "users[0].tax_id");
    const issues = ed.localViolations();
    expect(issues.some((v) => v.severity === "error")).toBe(false);
    expect(issues.some((v) => v.severity === "warning")).toBe(true);
  });

  it("clears edits after a successful save", () => {
    const ed = editor();
    ed.setEdit("/bindings/1/variable", "users[0].tax_id");
    const saved = ed.current();
    ed.applySaved(saved, "v2", []);
    expect(ed.dirty).toBe(false);
    expect(ed.version).toBe("v2");
    const current = ed.current() as { bindings: Array<{ variable: string }> };
    expect(current.bindings[1]?.variable).toBe("users[0].tax_id");
  });

  it("rebases onto refetched state, keeping edits whose paths survive", () => {
    const ed = editor();
    ed.setEdit("/bindings/1/variable", "users[0].tax_id");
    ed.setEdit("/bindings/3/definition", "jury request box");

    const shrunk = bindingsPayload();
    shrunk.bindings = shrunk.bindings.slice(0, 2);
    const outcome = ed.rebase(shrunk as unknown as Record<string, unknown>, "v3", []);

    expect(outcome.kept).toEqual(["/bindings/1/variable"]);
    expect(outcome.dropped).toEqual(["/bindings/3/definition"]);
    expect(ed.dirty).toBe(true);
    expect(ed.version).toBe("v3");
    const current = ed.current() as { bindings: Array<{ variable: string }> };
    expect(current.bindings[1]?.variable).toBe("users[0].tax_id");
  });

  it("dissolves an edit that matches the refetched value", () => {
    const ed = editor();
    ed.setEdit("/bindings/1/variable", "users[0].tax_id");
    const updated = bindingsPayload();
    const target = updated.bindings[1];
    if (target) target.variable = "users[0].tax_id";
    ed.rebase(updated as unknown as Record<string, unknown>, "v3", []);
    expect(ed.dirty).toBe(false);
    const current = ed.current() as { bindings: Array<{ variable: string }> };
    expect(current.bindings[1]?.variable).toBe("users[0].tax_id");
  });
});
