/** Canned payloads for view and state tests, shaped like real runs. */

import type {
  Binding,
  BindingsPayload,
  OcrContextPayload,
  Question,
  QuestionsPayload,
} from "../src/types.js";

export function binding(partial: Partial<Binding> & { token: string }): Binding {
  return {
    field_name: partial.token.replace(/[{}]/g, ""),
    kind: "text",
    variable: "claim_reason",
    definition: "why the filer is suing",
    page: 0,
    flags: [],
    notes: "",
    ...partial,
  };
}

export function question(partial: Partial<Question> & { variable: string }): Question {
  return {
    prompt: `What is ${partial.variable}?`,
    datatype: "text",
    screen_id: 1,
    screen_title: "About you",
    ...partial,
  } as Question;
}

export function bindingsPayload(): BindingsPayload {
  return {
    bindings: [
      binding({
        token: "{{field_01}}",
        field_name: "field_01",
        variable: "users[0].name.full",
        definition: "the filer's full name",
      }),
      binding({
        token: "{{field_02}}",
        field_name: "field_02",
        variable: "SSN",
        definition: "",
        flags: ["review"],
      }),
      binding({
        token: "{{field_03}}",
        field_name: "field_03",
        variable: "unknown_field_07",
        definition: "unidentified field on page 1",
        flags: ["synthetic", "review"],
      }),
      binding({
        token: "checkbox:jury_box",
        field_name: "jury_box",
        kind: "checkbox",
        variable: "request_jury",
        definition: "Request a jury trial",
        flags: ["paired"],
        notes: "label: Request a jury trial",
      }),
    ],
  };
}

export function questionsPayload(): QuestionsPayload {
  return {
    questions: [
      question({
        variable: "users[0].name.full",
        prompt: "What is your full name?",
        screen_id: 1,
        screen_title: "users",
      }),
      question({
        variable: "users[0].address.zip",
        prompt: "What is your ZIP code?",
        datatype: "number",
        screen_id: 1,
        screen_title: "users",
      }),
      question({
        variable: "claim_reason",
        prompt: "Why are you filing?",
        datatype: "area",
        screen_id: 2,
        screen_title: "Your claim",
      }),
    ],
  };
}

export function ocrPayload(): OcrContextPayload {
  return {
    dpi: 200,
    context: {
      full_text:
        "===== page 1 =====\nPlaintiff name: {{field_01}} shall appear.\n" +
        "Social security: {{field_02}} keep private.\n" +
        "Other notes: {{field_03}} end of page.\n",
      recovered: ["{{field_01}}", "{{field_02}}", "{{field_03}}"],
      missing: [],
      per_token_window: {
        "{{field_01}}": "Plaintiff name: {{field_01}} shall appear.",
        "{{field_02}}": "Social security: {{field_02}} keep private.",
        "{{field_03}}": "Other notes: {{field_03}} end of page.",
      },
    },
  };
}
