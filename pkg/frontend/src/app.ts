/** The review screen: two tabs for the two gates, one editable table each.
 *
 * Rendering is a pure function of (run detail, stage editor, ui flags);
 * every input writes through StageEditor so the unsaved indicator, the
 * patch body, and the approve guard always agree with what is on screen.
 */

import { ApiError, ConflictError, ReviewApi } from "./client.js";
import { joinPointer } from "./pointer.js";
import { hasErrors } from "./schema.js";
import { StageEditor } from "./state.js";
import type {
  Binding,
  BindingsPayload,
  Datatype,
  OcrContextPayload,
  Question,
  QuestionsPayload,
  RunDetail,
  Stage,
  StagePayload,
  Violation,
} from "./types.js";
import { DATATYPES } from "./types.js";

export type TabName = "bindings" | "questions";

const TAB_STAGES: Record<TabName, { reviewed: Stage; draft: Stage }> = {
  bindings: { reviewed: "bindings_reviewed", draft: "bindings_draft" },
  questions: { reviewed: "questions_reviewed", draft: "questions_draft" },
};

interface Notice {
  kind: "info" | "error";
  text: string;
  retry?: () => Promise<void>;
}

type Attrs = Record<string, string | boolean | EventListener | undefined>;

export interface AppOptions {
  api: ReviewApi;
  root: HTMLElement;
  runId?: string;
}

export class ReviewApp {
  private readonly api: ReviewApi;
  private readonly root: HTMLElement;
  private readonly doc: Document;
  private readonly wantedRun: string | undefined;

  private run: RunDetail | null = null;
  private editor: StageEditor | null = null;
  private windows: Record<string, string> = {};
  private activeTab: TabName = "bindings";
  private advanced = false;
  private advancedText = "";
  private notice: Notice | null = null;
  private readonly onKeydown = (event: Event) => this.handleShortcut(event as KeyboardEvent);

  constructor(options: AppOptions) {
    this.api = options.api;
    this.root = options.root;
    this.doc = options.root.ownerDocument;
    this.wantedRun = options.runId;
  }

  async start(): Promise<void> {
    this.doc.addEventListener("keydown", this.onKeydown);
    await this.guard(async () => {
      const runs = await this.api.listRuns();
      const summary = this.wantedRun
        ? runs.find((r) => r.run_id === this.wantedRun)
        : runs[0];
      if (!summary) {
        this.notice = { kind: "error", text: this.wantedRun ? `no run ${this.wantedRun}` : "no runs under this root" };
        this.render();
        return;
      }
      await this.loadRun(summary.run_id);
    });
  }

  stop(): void {
    this.doc.removeEventListener("keydown", this.onKeydown);
  }

  /** Stage the tab edits: the reviewed payload once it exists, else the draft. */
  stageFor(tab: TabName): Stage | null {
    if (!this.run) return null;
    const { reviewed, draft } = TAB_STAGES[tab];
    if (this.run.stages[reviewed]) return reviewed;
    if (this.run.stages[draft]) return draft;
    return null;
  }

  private async loadRun(runId: string): Promise<void> {
    this.run = await this.api.getRun(runId);
    if (this.run.stages.ocr_done) {
      const ocr = await this.api.getStage(runId, "ocr_done");
      const payload = ocr.payload as unknown as OcrContextPayload;
      this.windows = payload.context.per_token_window;
    }
    if (this.stageFor(this.activeTab) === null && this.stageFor("questions")) {
      this.activeTab = "questions";
    }
    if (this.run.stage === "questions_draft") this.activeTab = "questions";
    await this.loadStage();
  }

  private async loadStage(): Promise<void> {
    const stage = this.stageFor(this.activeTab);
    if (!this.run || !stage) {
      this.editor = null;
      this.render();
      return;
    }
    const state = await this.api.getStage(this.run.run_id, stage);
    this.editor = new StageEditor(stage, state.payload, state.version, state.violations);
    this.advancedText = JSON.stringify(state.payload, null, 2);
    this.render();
  }

  async switchTab(tab: TabName): Promise<void> {
    if (tab === this.activeTab) return;
    this.activeTab = tab;
    this.advanced = false;
    this.notice = null;
    await this.guard(async () => this.loadStage());
  }

  /** Submit the unsaved edits as one JSON-pointer patch. */
  async save(): Promise<void> {
    const editor = this.editor;
    if (!this.run || !editor || !editor.dirty) return;
    if (hasErrors(editor.localViolations())) {
      this.notice = { kind: "error", text: "fix the errors marked below before saving" };
      this.render();
      return;
    }
    const runId = this.run.run_id;
    await this.guard(async () => {
      try {
        const result = await this.api.patchStage(runId, editor.stage, editor.version, editor.patchOps());
        editor.applySaved(result.payload, result.version, result.warnings);
        this.advancedText = JSON.stringify(result.payload, null, 2);
        this.notice = { kind: "info", text: "saved" };
      } catch (error) {
        if (error instanceof ConflictError) {
          const fresh = await this.api.getStage(runId, editor.stage);
          const outcome = editor.rebase(fresh.payload, fresh.version, fresh.violations);
          this.advancedText = JSON.stringify(editor.current(), null, 2);
          const dropped = outcome.dropped.length
            ? `; dropped ${outcome.dropped.length} edit(s) whose rows are gone`
            : "";
          this.notice = {
            kind: "error",
            text: `this run changed on the server; reloaded it and kept ${outcome.kept.length} unsaved edit(s)${dropped}. Save again to apply.`,
          };
        } else if (error instanceof ApiError && error.violations.length > 0) {
          this.notice = { kind: "error", text: "the server rejected the edit; see the marks below" };
          this.renderWith(error.violations);
          return;
        } else {
          throw error;
        }
      }
      this.render();
    });
  }

  /** Approve the active gate and follow the pipeline to its next stop. */
  async approve(): Promise<void> {
    const editor = this.editor;
    if (!this.run || !editor || !this.approvable()) return;
    const runId = this.run.run_id;
    await this.guard(async () => {
      try {
        const result = await this.api.approve(runId, editor.stage);
        this.notice = {
          kind: "info",
          text: result.status === "complete"
            ? "approved; the run is complete"
            : `approved; the run is now at ${result.status.replace("waiting_review:", "")}`,
        };
        if (result.status === "waiting_review:questions_draft") {
          this.activeTab = "questions";
        }
        await this.loadRun(runId);
      } catch (error) {
        if (error instanceof ApiError && error.violations.length > 0) {
          this.notice = { kind: "error", text: `approval blocked: ${error.message}` };
          this.render();
          return;
        }
        throw error;
      }
    });
  }

  /** Approve applies only at the gate, with nothing unsaved and no errors. */
  approvable(): boolean {
    const editor = this.editor;
    if (!this.run || !editor) return false;
    if (this.run.stage !== TAB_STAGES[this.activeTab].draft) return false;
    if (editor.dirty) return false;
    return !hasErrors(editor.activeViolations());
  }

  toggleAdvanced(): void {
    this.advanced = !this.advanced;
    if (this.advanced && this.editor) {
      this.advancedText = JSON.stringify(this.editor.current(), null, 2);
    }
    this.render();
  }

  /** Turn a raw-JSON edit into pointer ops on the top-level keys that changed. */
  applyAdvanced(text: string): void {
    const editor = this.editor;
    if (!editor) return;
    let parsed: unknown;
    try {
      parsed = JSON.parse(text);
    } catch (error) {
      this.notice = { kind: "error", text: `not valid JSON: ${(error as Error).message}` };
      this.render();
      return;
    }
    if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
      this.notice = { kind: "error", text: "the payload must be a JSON object" };
      this.render();
      return;
    }
    const next = parsed as StagePayload;
    const base = editor.current();
    for (const key of Object.keys(base)) {
      if (!(key in next)) {
        this.notice = { kind: "error", text: `the '${key}' key cannot be removed` };
        this.render();
        return;
      }
    }
    for (const key of Object.keys(next)) {
      if (JSON.stringify(next[key]) !== JSON.stringify(base[key])) {
        editor.setEdit(joinPointer(key), next[key]);
      }
    }
    this.advancedText = text;
    this.notice = null;
    this.render();
  }

  private async guard(action: () => Promise<void>): Promise<void> {
    try {
      await action();
    } catch (error) {
      const text = error instanceof Error ? error.message : String(error);
      this.notice = { kind: "error", text: `request failed: ${text}`, retry: action };
      this.render();
    }
  }

  private handleShortcut(event: KeyboardEvent): void {
    if (!event.altKey || event.ctrlKey || event.metaKey) return;
    const key = event.key.toLowerCase();
    if (key === "1") {
      event.preventDefault();
      void this.switchTab("bindings");
    } else if (key === "2") {
      event.preventDefault();
      void this.switchTab("questions");
    } else if (key === "s") {
      event.preventDefault();
      void this.save();
    } else if (key === "a") {
      event.preventDefault();
      void this.approve();
    } else if (key === "j") {
      event.preventDefault();
      this.toggleAdvanced();
    }
  }

  // ---------- rendering ----------

  private h<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    attrs: Attrs = {},
    ...children: Array<Node | string>
  ): HTMLElementTagNameMap[K] {
    const el = this.doc.createElement(tag);
    for (const [name, value] of Object.entries(attrs)) {
      if (value === undefined || value === false) continue;
      if (typeof value === "function") {
        el.addEventListener(name.slice(2), value);
      } else if (value === true) {
        el.setAttribute(name, "");
      } else {
        el.setAttribute(name, value);
      }
    }
    for (const child of children) {
      el.append(child);
    }
    return el;
  }

  render(): void {
    this.renderWith(this.editor ? this.editor.activeViolations() : []);
  }

  private renderWith(violations: Violation[]): void {
    const h = this.h.bind(this);
    this.root.textContent = "";
    if (!this.run) {
      this.root.append(this.renderNotice(), h("p", { class: "empty" }, "no run loaded"));
      return;
    }
    this.root.append(
      this.renderHeader(),
      this.renderNotice(),
      this.renderTabs(),
      this.renderPanel(violations),
      h(
        "footer",
        { class: "shortcuts" },
        "keyboard: Tab moves, Alt+1 bindings, Alt+2 questions, Alt+S save, Alt+A approve, Alt+J raw JSON",
      ),
    );
  }

  private renderHeader(): HTMLElement {
    const h = this.h.bind(this);
    const run = this.run as RunDetail;
    const dirty = this.editor?.dirty ?? false;
    return h(
      "header",
      { class: "bar" },
      h("h1", {}, "form review"),
      h("span", { class: "run-id" }, `run ${run.run_id}`),
      h("span", { class: "stage" }, `stage: ${run.stage}`),
      h(
        "span",
        {
          class: dirty ? "dirty on" : "dirty",
          "data-testid": "unsaved",
          "aria-live": "polite",
        },
        dirty ? "unsaved edits" : "all changes saved",
      ),
    );
  }

  private renderNotice(): HTMLElement {
    const h = this.h.bind(this);
    if (!this.notice) return h("div", { class: "notice empty", "data-testid": "notice" });
    const notice = this.notice;
    const box = h(
      "div",
      { class: `notice ${notice.kind}`, "data-testid": "notice", role: "status" },
      notice.text,
    );
    if (notice.retry) {
      box.append(
        " ",
        h(
          "button",
          {
            "data-testid": "retry",
            onclick: () => {
              this.notice = null;
              void this.guard(notice.retry as () => Promise<void>);
            },
          },
          "retry",
        ),
      );
    }
    return box;
  }

  private renderTabs(): HTMLElement {
    const h = this.h.bind(this);
    const tabs = h("div", { class: "tabs", role: "tablist" });
    (["bindings", "questions"] as TabName[]).forEach((tab) => {
      const available = this.stageFor(tab) !== null;
      const selected = this.activeTab === tab;
      tabs.append(
        h(
          "button",
          {
            role: "tab",
            "data-testid": `tab-${tab}`,
            "aria-selected": selected ? "true" : "false",
            class: selected ? "tab active" : "tab",
            disabled: !available,
            title: available ? undefined : "this stage has not been drafted yet",
            onclick: () => void this.switchTab(tab),
          },
          tab,
        ),
      );
    });
    return tabs;
  }

  private renderPanel(violations: Violation[]): HTMLElement {
    const h = this.h.bind(this);
    const editor = this.editor;
    if (!editor) {
      return h("p", { class: "empty" }, `nothing to review yet on the ${this.activeTab} tab`);
    }
    const panel = h("section", { class: "panel", role: "tabpanel" });
    const general = violations.filter((v) => !/^\/(bindings|questions)\/\d+\//.test(v.path));
    if (general.length > 0) {
      const list = h("ul", { class: "violations", "data-testid": "general-violations" });
      for (const violation of general) {
        list.append(h("li", { class: violation.severity ?? "error" }, `${violation.path || "payload"}: ${violation.message}`));
      }
      panel.append(list);
    }
    if (this.advanced) {
      panel.append(this.renderAdvanced());
    } else if (this.activeTab === "bindings") {
      panel.append(this.renderBindingsTable(violations));
    } else {
      panel.append(this.renderQuestionsTable(violations));
    }
    panel.append(this.renderActions());
    return panel;
  }

  private rowViolations(violations: Violation[], key: string, index: number): Violation[] {
    const prefix = `/${key}/${index}/`;
    return violations.filter((v) => v.path.startsWith(prefix));
  }

  private issueBadges(rowIssues: Violation[]): HTMLElement {
    const h = this.h.bind(this);
    const cell = h("td", { class: "issues" });
    for (const issue of rowIssues) {
      const field = issue.path.split("/").pop();
      cell.append(
        h(
          "span",
          {
            class: `badge ${issue.severity ?? "error"}`,
            title: issue.message,
            "data-testid": "violation-badge",
            "data-path": issue.path,
          },
          `${issue.severity ?? "error"}: ${field} ${issue.code ?? ""}`.trim(),
        ),
      );
    }
    return cell;
  }

  private contextCell(binding: Binding): HTMLElement {
    const h = this.h.bind(this);
    const cell = h("td", { class: "context", "data-testid": "context-window" });
    const window = this.windows[binding.token];
    if (window !== undefined) {
      const at = window.indexOf(binding.token);
      if (at >= 0) {
        cell.append(
          window.slice(0, at),
          h("mark", {}, binding.token),
          window.slice(at + binding.token.length),
        );
      } else {
        cell.append(window);
      }
    } else {
      cell.append(h("em", {}, binding.notes || "no page text for this field"));
    }
    return cell;
  }

  private textInput(path: string, value: string, label: string): HTMLElement {
    const h = this.h.bind(this);
    return h("input", {
      type: "text",
      value,
      "aria-label": label,
      "data-testid": `input:${path}`,
      oninput: (event: Event) => {
        this.editor?.setEdit(path, (event.target as HTMLInputElement).value);
        this.refreshEditState();
      },
    });
  }

  /** Refresh state-dependent chrome and badges while an input keeps focus. */
  private refreshEditState(): void {
    const editor = this.editor;
    if (!editor) return;
    const dirtyEl = this.root.querySelector('[data-testid="unsaved"]');
    if (dirtyEl) {
      dirtyEl.textContent = editor.dirty ? "unsaved edits" : "all changes saved";
      dirtyEl.setAttribute("class", editor.dirty ? "dirty on" : "dirty");
    }
    const saveButton = this.root.querySelector('[data-testid="save"]') as HTMLButtonElement | null;
    if (saveButton) saveButton.disabled = !editor.dirty;
    const approveButton = this.root.querySelector('[data-testid="approve"]') as HTMLButtonElement | null;
    if (approveButton) approveButton.disabled = !this.approvable();

    const violations = editor.activeViolations();
    const key = this.activeTab === "bindings" ? "bindings" : "questions";
    this.root
      .querySelectorAll(`tr[data-testid^="${key.slice(0, -1)}-row-"]`)
      .forEach((row) => {
        const index = Number((row.getAttribute("data-testid") ?? "").split("-").pop());
        const cell = row.querySelector("td.issues");
        if (cell && Number.isInteger(index)) {
          cell.replaceWith(this.issueBadges(this.rowViolations(violations, key, index)));
        }
      });
  }

  private renderBindingsTable(violations: Violation[]): HTMLElement {
    const h = this.h.bind(this);
    const payload = (this.editor as StageEditor).current() as unknown as BindingsPayload;
    const table = h("table", { class: "grid", "data-testid": "bindings-table" });
    table.append(
      h(
        "thead",
        {},
        h(
          "tr",
          {},
          h("th", {}, "token"),
          h("th", {}, "page text around the token"),
          h("th", {}, "variable"),
          h("th", {}, "definition"),
          h("th", {}, "flags"),
          h("th", {}, "issues"),
        ),
      ),
    );
    const body = h("tbody", {});
    payload.bindings.forEach((binding, i) => {
      const row = h("tr", { "data-testid": `binding-row-${i}` });
      row.append(h("td", { class: "token" }, h("code", {}, binding.token)));
      row.append(this.contextCell(binding));
      row.append(
        h("td", {}, this.textInput(joinPointer("bindings", i, "variable"), binding.variable, `variable for ${binding.token}`)),
      );
      row.append(
        h(
          "td",
          {},
          this.textInput(
            joinPointer("bindings", i, "definition"),
            binding.definition ?? "",
            `definition for ${binding.token}`,
          ),
        ),
      );
      const flags = h("td", { class: "flags" });
      for (const flag of binding.flags ?? []) {
        flags.append(h("span", { class: `flag ${flag}` }, flag));
      }
      row.append(flags);
      row.append(this.issueBadges(this.rowViolations(violations, "bindings", i)));
      body.append(row);
    });
    table.append(body);
    return table;
  }

  private renderQuestionsTable(violations: Violation[]): HTMLElement {
    const h = this.h.bind(this);
    const payload = (this.editor as StageEditor).current() as unknown as QuestionsPayload;
    const table = h("table", { class: "grid", "data-testid": "questions-table" });
    table.append(
      h(
        "thead",
        {},
        h(
          "tr",
          {},
          h("th", {}, "variable"),
          h("th", {}, "prompt"),
          h("th", {}, "datatype"),
          h("th", {}, "screen"),
          h("th", {}, "screen title"),
          h("th", {}, "issues"),
        ),
      ),
    );
    const body = h("tbody", {});
    payload.questions.forEach((question, i) => {
      const row = h("tr", { "data-testid": `question-row-${i}` });
      row.append(h("td", { class: "token" }, h("code", {}, question.variable)));
      row.append(
        h("td", {}, this.textInput(joinPointer("questions", i, "prompt"), question.prompt, `prompt for ${question.variable}`)),
      );
      row.append(h("td", {}, this.datatypeSelect(i, question)));
      row.append(h("td", {}, this.screenInput(i, question)));
      row.append(
        h(
          "td",
          {},
          this.textInput(
            joinPointer("questions", i, "screen_title"),
            question.screen_title,
            `screen title for ${question.variable}`,
          ),
        ),
      );
      row.append(this.issueBadges(this.rowViolations(violations, "questions", i)));
      body.append(row);
    });
    table.append(body);
    return table;
  }

  private datatypeSelect(index: number, question: Question): HTMLElement {
    const h = this.h.bind(this);
    const path = joinPointer("questions", index, "datatype");
    const select = h("select", {
      "aria-label": `datatype for ${question.variable}`,
      "data-testid": `input:${path}`,
      onchange: (event: Event) => {
        this.editor?.setEdit(path, (event.target as HTMLSelectElement).value as Datatype);
        this.refreshEditState();
      },
    });
    for (const datatype of DATATYPES) {
      select.append(h("option", { value: datatype }, datatype));
    }
    select.value = question.datatype;
    return select;
  }

  private screenInput(index: number, question: Question): HTMLElement {
    const h = this.h.bind(this);
    const path = joinPointer("questions", index, "screen_id");
    return h("input", {
      type: "number",
      min: "1",
      value: String(question.screen_id),
      "aria-label": `screen for ${question.variable}`,
      "data-testid": `input:${path}`,
      oninput: (event: Event) => {
        const raw = (event.target as HTMLInputElement).value;
        const parsed = Number(raw);
        this.editor?.setEdit(path, Number.isInteger(parsed) ? parsed : raw);
        this.refreshEditState();
      },
    });
  }

  private renderAdvanced(): HTMLElement {
    const h = this.h.bind(this);
    const area = h("textarea", {
      class: "raw-json",
      "data-testid": "raw-json",
      rows: "24",
      "aria-label": "stage payload as JSON",
    }) as HTMLTextAreaElement;
    area.value = this.advancedText;
    area.addEventListener("input", () => {
      this.advancedText = area.value;
    });
    return h(
      "div",
      { class: "advanced" },
      area,
      h(
        "button",
        {
          "data-testid": "apply-json",
          onclick: () => this.applyAdvanced(this.advancedText),
        },
        "apply JSON",
      ),
    );
  }

  private renderActions(): HTMLElement {
    const h = this.h.bind(this);
    const editor = this.editor as StageEditor;
    const stage = this.stageFor(this.activeTab);
    return h(
      "div",
      { class: "actions" },
      h(
        "label",
        { class: "advanced-toggle" },
        h("input", {
          type: "checkbox",
          "data-testid": "advanced-toggle",
          ...(this.advanced ? { checked: "" } : {}),
          onchange: () => this.toggleAdvanced(),
        }),
        " advanced (raw JSON)",
      ),
      h(
        "button",
        {
          class: "save",
          "data-testid": "save",
          disabled: !editor.dirty,
          onclick: () => void this.save(),
        },
        "save edits (Alt+S)",
      ),
      h(
        "button",
        {
          class: "approve",
          "data-testid": "approve",
          disabled: !this.approvable(),
          title:
            this.run?.stage === TAB_STAGES[this.activeTab].draft
              ? "approve this stage and continue the pipeline"
              : `the run is at ${this.run?.stage}, not at this gate`,
          onclick: () => void this.approve(),
        },
        `approve ${stage ?? ""} (Alt+A)`,
      ),
    );
  }
}
