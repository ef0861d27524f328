"""Staged workflow behavior: strict JSON, repair retries, quarantine,
chunking, datatype normalization, and checkbox pairing geometry."""

from __future__ import annotations

import json
import logging

import pytest

from formflow.docx_labeler import RunRef, RunTable
from formflow.errors import BudgetExceeded, SchemaViolation
from formflow.llm.stages import (
    DocMetadata,
    QuestionSpec,
    VariableBinding,
    draft_questions,
    estimate_tokens,
    generate_doc_metadata,
    label_docx_runs,
    pair_checkboxes,
    rename_placeholders,
    write_definitions,
)
from formflow.ocr_context import PlaceholderContext, WordBox
from formflow.pdf.acroform import FieldDescriptor, PlaceholderMap


class StubClient:
    """Stands in for LlmClient: scripted replies, then an optional responder."""

    def __init__(self, replies=(), responder=None):
        self.requests = []
        self._replies = list(replies)
        self._responder = responder

    def complete(self, request):
        self.requests.append(request)
        if self._replies:
            return self._replies.pop(0)
        return self._responder(request)


def prompt_payload(request):
    """The substituted JSON sits on the last line of the first user turn."""
    return json.loads(request.messages[1][1].splitlines()[-1])


def make_context(recovered, missing=(), text="Name of court: {{field_01}}"):
    windows = {t: f"text around {t}" for t in recovered}
    return PlaceholderContext(full_text=text, recovered=set(recovered),
                              missing=set(missing), per_token_window=windows)


GOOD_META = '{"title": "Small Claims Complaint", "description": "Starts a claim."}'


class TestAskJson:
    def test_one_repair_retry_then_success(self, caplog):
        client = StubClient(replies=["not json at all", GOOD_META])
        with caplog.at_level(logging.WARNING, "formflow.llm"):
            meta = generate_doc_metadata(client, make_context([]))
        assert meta == DocMetadata("Small Claims Complaint", "Starts a claim.")
        assert len(client.requests) == 2
        retry = client.requests[1].messages
        assert retry[-2][0] == "assistant"
        assert "rejected" in retry[-1][1]
        assert any("repair retry" in r.message for r in caplog.records)

    def test_two_bad_replies_fail_loudly(self):
        client = StubClient(replies=["nope", '{"title": "", "description": "x"}'])
        with pytest.raises(SchemaViolation, match="doc_metadata"):
            generate_doc_metadata(client, make_context([]))
        assert len(client.requests) == 2

    def test_code_fences_are_tolerated(self):
        client = StubClient(replies=[f"```json\n{GOOD_META}\n```"])
        meta = generate_doc_metadata(client, make_context([]))
        assert meta.title == "Small Claims Complaint"
        assert len(client.requests) == 1

    def test_oversized_prompt_is_refused_before_sending(self):
        client = StubClient()
        huge = make_context([], text="word " * 10_000)
        with pytest.raises(BudgetExceeded, match="chunk"):
            generate_doc_metadata(client, huge)
        assert client.requests == []

    def test_empty_document_is_an_error(self):
        with pytest.raises(ValueError):
            generate_doc_metadata(StubClient(), make_context([], text="  \n"))

    def test_overlong_title_and_description_are_truncated(self):
        reply = json.dumps({"title": "T" * 150, "description": "d" * 700})
        meta = generate_doc_metadata(StubClient(replies=[reply]),
                                     make_context([]))
        assert len(meta.title) == 120 and meta.title.endswith("…")
        assert len(meta.description) == 600 and meta.description.endswith("…")


def identity_labels(request):
    triples = prompt_payload(request)
    return json.dumps([[p, r, text] for p, r, text in triples])


class TestLabelRuns:
    def test_long_documents_are_chunked(self):
        table = RunTable(runs=[RunRef(p, 0, f"para {p}: " + "x" * 2000)
                               for p in range(8)])
        client = StubClient(responder=identity_labels)
        result = label_docx_runs(client, table)
        assert len(client.requests) >= 2
        # overlap paragraphs must not duplicate edits
        assert sorted((e.paragraph_index, e.run_index) for e in result.edits) \
            == [(p, 0) for p in range(8)]

    def test_single_paragraph_over_budget_fails(self):
        table = RunTable(runs=[RunRef(0, 0, "y" * 20_000)])
        with pytest.raises(BudgetExceeded, match="paragraph 0"):
            label_docx_runs(StubClient(responder=identity_labels), table)

    def test_invalid_variables_are_quarantined(self):
        table = RunTable(runs=[RunRef(0, 0, "SSN: 000-00-0000"),
                               (RunRef(1, 0, "Email: a@b.c"))])
        reply = json.dumps([[0, 0, "SSN: {{ SSN }}"],
                            [1, 0, "Email: {{ users[0].email }}"]])
        result = label_docx_runs(StubClient(replies=[reply]), table)
        assert [e.new_text for e in result.edits] == ["Email: {{ users[0].email }}"]
        (bad,) = result.quarantined
        assert bad["new_text"] == "SSN: {{ SSN }}"
        assert any(v["code"] for v in bad["violations"])

    def test_triples_outside_the_document_are_rejected(self):
        table = RunTable(runs=[RunRef(0, 0, "hello")])
        reply = json.dumps([[5, 0, "nope"]])
        with pytest.raises(SchemaViolation, match="label_runs"):
            label_docx_runs(StubClient(replies=[reply, reply]), table)

    def test_empty_table_sends_nothing(self):
        client = StubClient()
        result = label_docx_runs(client, RunTable(runs=[]))
        assert result.edits == [] and result.quarantined == []
        assert client.requests == []


def fake_renames(mapping):
    """Responder answering rename prompts from a token -> name table."""

    def responder(request):
        entries = prompt_payload(request)
        return json.dumps([
            {"token": e["token"],
             "variable": mapping[e["token"]][0],
             "repeated": mapping[e["token"]][1]}
            for e in entries])

    return responder


def checkbox_field(name, page, x, y, size=12.0):
    return FieldDescriptor(name=name, kind="checkbox", page=page,
                           bbox=(x, y, x + size, y + size), size_class="small")


class TestRenamePlaceholders:
    def fields(self):
        return [FieldDescriptor("court_name_field", "text", 0, (200, 700, 480, 718)),
                FieldDescriptor("docket_field", "text", 0, (200, 670, 480, 688))]

    def pmap(self):
        return PlaceholderMap(entries={"{{field_01}}": "court_name_field",
                                       "{{field_02}}": "docket_field"})

    def test_missing_tokens_get_synthetic_review_names(self):
        context = make_context(["{{field_01}}"], missing=["{{field_02}}"])
        client = StubClient(responder=fake_renames(
            {"{{field_01}}": ("court_name", False)}))
        bindings = rename_placeholders(client, context, self.pmap(), self.fields())
        by_token = {b.token: b for b in bindings}
        assert by_token["{{field_01}}"].variable == "court_name"
        synth = by_token["{{field_02}}"]
        assert synth.variable == "unknown_field_02"
        assert set(synth.flags) == {"synthetic", "review"}
        assert "not recovered" in synth.notes

    def test_invalid_suggestion_is_quarantined(self):
        context = make_context(["{{field_01}}", "{{field_02}}"])
        client = StubClient(responder=fake_renames(
            {"{{field_01}}": ("SSN", False),
             "{{field_02}}": ("docket_number", False)}))
        bindings = rename_placeholders(client, context, self.pmap(), self.fields())
        bad, good = bindings[0], bindings[1]
        assert bad.variable == "unknown_field_01"
        assert "quarantined" in bad.flags and "review" in bad.flags
        assert "'SSN'" in bad.notes
        assert good.variable == "docket_number" and good.flags == ()

    def test_vocabulary_warning_flags_review_but_keeps_name(self):
        context = make_context(["{{field_01}}"])
        pmap = PlaceholderMap(entries={"{{field_01}}": "court_name_field"})
        client = StubClient(responder=fake_renames(
            {"{{field_01}}": ("users[0].nickname", False)}))
        (b,) = rename_placeholders(client, context, pmap, self.fields())
        assert b.variable == "users[0].nickname"
        assert b.flags == ("review",)
        assert "nickname" in b.notes

    def test_duplicate_without_repeated_quarantines_both(self, caplog):
        context = make_context(["{{field_01}}", "{{field_02}}"])
        client = StubClient(responder=fake_renames(
            {"{{field_01}}": ("docket_number", False),
             "{{field_02}}": ("docket_number", False)}))
        with caplog.at_level(logging.WARNING, "formflow.llm"):
            bindings = rename_placeholders(client, context, self.pmap(),
                                           self.fields())
        assert [b.variable for b in bindings] \
            == ["unknown_field_01", "unknown_field_02"]
        assert all("quarantined" in b.flags for b in bindings)
        assert any("both quarantined" in r.message for r in caplog.records)

    def test_duplicate_with_repeated_flag_is_allowed(self):
        context = make_context(["{{field_01}}", "{{field_02}}"])
        client = StubClient(responder=fake_renames(
            {"{{field_01}}": ("docket_number", True),
             "{{field_02}}": ("docket_number", True)}))
        bindings = rename_placeholders(client, context, self.pmap(), self.fields())
        assert [b.variable for b in bindings] == ["docket_number"] * 2
        assert all("repeated" in b.flags for b in bindings)
        assert not any("quarantined" in b.flags for b in bindings)

    def test_reply_order_must_match_token_order(self):
        context = make_context(["{{field_01}}", "{{field_02}}"])
        wrong = json.dumps([
            {"token": "{{field_02}}", "variable": "docket_number"},
            {"token": "{{field_01}}", "variable": "court_name"}])
        with pytest.raises(SchemaViolation, match="token mismatch"):
            rename_placeholders(StubClient(replies=[wrong, wrong]), context,
                                self.pmap(), self.fields())

    def test_binding_carries_field_kind_and_page(self):
        fields = [FieldDescriptor("jury_box", "checkbox", 1, (72, 445, 84, 457))]
        pmap = PlaceholderMap(entries={"{{field_03}}": "jury_box"})
        client = StubClient(responder=fake_renames(
            {"{{field_03}}": ("request_jury_trial", False)}))
        (b,) = rename_placeholders(client, make_context(["{{field_03}}"]),
                                   pmap, fields)
        assert b.kind == "checkbox" and b.page == 1
        assert b.field_name == "jury_box"


class TestWriteDefinitions:
    def test_synthetic_bindings_are_not_asked(self):
        bindings = [
            VariableBinding("{{field_01}}", "court_name_field", "text",
                            "court_name"),
            VariableBinding("{{field_06}}", "city_field", "text",
                            "unknown_field_06", page=0,
                            flags=("synthetic", "review")),
        ]
        client = StubClient(replies=[json.dumps(
            [{"variable": "court_name", "definition": "The court's name."}])])
        out = write_definitions(client, bindings, make_context(["{{field_01}}"]))
        assert out[0].definition == "The court's name."
        assert out[1].definition == "unidentified field on page 1"
        (sent,) = prompt_payload(client.requests[0]),
        assert [e["variable"] for e in prompt_payload(client.requests[0])] \
            == ["court_name"]

    def test_empty_definition_is_rejected(self):
        bindings = [VariableBinding("{{field_01}}", "f", "text", "court_name")]
        bad = json.dumps([{"variable": "court_name", "definition": "  "}])
        with pytest.raises(SchemaViolation):
            write_definitions(StubClient(replies=[bad, bad]), bindings,
                              make_context(["{{field_01}}"]))


def binding(variable, kind="text"):
    return VariableBinding(token=f"tok:{variable}", field_name=f"f_{variable}",
                           kind=kind, variable=variable,
                           definition=f"definition of {variable}")


def question_reply(items):
    return json.dumps([
        {"variable": v, "prompt": p, "datatype": d, "screen_title": s}
        for v, p, d, s in items])


class TestDraftQuestions:
    def test_alias_datatypes_are_normalized(self, caplog):
        bindings = [binding("users[0].age"), binding("users[0].address.zip")]
        reply = question_reply([
            ("users[0].age", "How old are you?", "integer", "About you"),
            ("users[0].address.zip", "ZIP code?", "zipcode", "About you")])
        with caplog.at_level(logging.WARNING, "formflow.llm"):
            out = draft_questions(StubClient(replies=[reply]), bindings)
        assert [q.datatype for q in out] == ["number", "zip"]
        assert any("normalized" in r.message for r in caplog.records)

    def test_unknown_datatype_is_a_schema_violation(self):
        bindings = [binding("users[0].age")]
        reply = question_reply([
            ("users[0].age", "Age?", "quantity", "About you")])
        with pytest.raises(SchemaViolation, match="datatype"):
            draft_questions(StubClient(replies=[reply, reply]), bindings)

    def test_checkbox_bindings_force_yesno(self):
        bindings = [binding("request_jury_trial", kind="checkbox")]
        reply = question_reply([
            ("request_jury_trial", "Jury trial?", "text", "Form details")])
        (q,) = draft_questions(StubClient(replies=[reply]), bindings)
        assert q.datatype == "yesno"

    def test_screens_group_by_path_prefix_with_contiguous_ids(self):
        bindings = [binding("court_name"), binding("users[0].name.first"),
                    binding("docket_number"), binding("users[0].phone")]
        reply = question_reply([
            ("court_name", "Court?", "text", "Court information"),
            ("users[0].name.first", "First name?", "text", "About you"),
            ("docket_number", "Docket?", "text", "Court information"),
            ("users[0].phone", "Phone?", "phone", "About you")])
        out = draft_questions(StubClient(replies=[reply]), bindings)
        by_var = {q.variable: q for q in out}
        assert by_var["court_name"].screen_id \
            == by_var["docket_number"].screen_id == 1
        assert by_var["users[0].name.first"].screen_id \
            == by_var["users[0].phone"].screen_id == 2
        assert [q.screen_id for q in out] == sorted(q.screen_id for q in out)
        assert {q.screen_title for q in out if q.screen_id == 2} == {"About you"}

    def test_no_bindings_no_requests(self):
        client = StubClient()
        assert draft_questions(client, []) == []
        assert client.requests == []

    def test_round_trip_dicts(self):
        q = QuestionSpec("users[0].phone", "Phone?", "phone", 2, "About you")
        assert QuestionSpec.from_dict(q.to_dict()) == q


def echo_pairs(request):
    entries = prompt_payload(request)
    out = []
    for e in entries:
        if e["label"] is None:
            out.append({"field_name": e["field_name"],
                        "variable": None, "label": None})
        else:
            slug = "".join(c if c.isalnum() else "_"
                           for c in e["label"].lower()).strip("_")
            out.append({"field_name": e["field_name"],
                        "variable": slug, "label": e["label"]})
    return json.dumps(out)


def words(*specs):
    """specs: (text, x0, y0) at a fixed 10pt line height, 6pt per char."""
    return [WordBox(t, x, y, x + 6.0 * len(t), y + 10.0) for t, x, y in specs]


class TestPairCheckboxes:
    def test_adjacent_words_merge_into_one_label(self):
        page_words = words(("Request", 95, 446), ("a", 140, 446),
                           ("jury", 150, 446), ("trial", 178, 446))
        (b,) = pair_checkboxes(StubClient(responder=echo_pairs),
                               [checkbox_field("jury_box", 0, 72, 445)],
                               {0: page_words})
        assert b.variable == "request_a_jury_trial"
        assert "paired" in b.flags
        assert b.notes == "label: Request a jury trial"

    def test_right_side_text_beats_nearer_left_text(self):
        page_words = words(("Left", 30, 446), ("Right", 120, 446))
        # left run ends 18pt away, right starts 36pt away; right still wins
        (b,) = pair_checkboxes(StubClient(responder=echo_pairs),
                               [checkbox_field("box", 0, 72, 445)],
                               {0: page_words})
        assert b.definition == "Right"

    def test_left_side_text_is_used_when_nothing_sits_right(self):
        page_words = words(("Only", 20, 446), ("left", 48, 446))
        (b,) = pair_checkboxes(StubClient(responder=echo_pairs),
                               [checkbox_field("box", 0, 72, 445)],
                               {0: page_words})
        assert b.definition == "Only left"
        assert "paired" in b.flags

    def test_text_beyond_radius_leaves_the_box_unpaired(self):
        page_words = words(("Far", 300, 446),)
        (b,) = pair_checkboxes(StubClient(responder=echo_pairs),
                               [checkbox_field("box", 0, 72, 445)],
                               {0: page_words}, radius=150.0)
        assert b.variable == "unidentified_checkbox_1"
        assert set(b.flags) == {"unpaired", "review"}

    def test_vertically_distant_text_does_not_pair(self):
        page_words = words(("Elsewhere", 95, 600),)
        (b,) = pair_checkboxes(StubClient(responder=echo_pairs),
                               [checkbox_field("box", 0, 72, 445)],
                               {0: page_words})
        assert "unpaired" in b.flags

    def test_shared_label_goes_to_the_nearest_field(self, caplog):
        page_words = words(("Shared", 120, 446),)
        near = checkbox_field("near_box", 0, 100, 445)
        far = checkbox_field("far_box", 0, 60, 445)
        with caplog.at_level(logging.INFO, "formflow.llm"):
            out = pair_checkboxes(StubClient(responder=echo_pairs),
                                  [far, near], {0: page_words})
        by_name = {b.field_name: b for b in out}
        assert by_name["near_box"].variable == "shared"
        assert "unpaired" in by_name["far_box"].flags
        assert any("lost label" in r.message for r in caplog.records)

    def test_duplicate_variable_suggestions_are_quarantined(self):
        page_words = words(("Same", 95, 446), ("Same", 95, 546))
        boxes = [checkbox_field("box_a", 0, 72, 545),
                 checkbox_field("box_b", 0, 72, 445)]
        out = pair_checkboxes(StubClient(responder=echo_pairs), boxes,
                              {0: page_words})
        assert out[0].variable == "same"
        assert out[1].variable == "unidentified_checkbox_2"
        assert "quarantined" in out[1].flags

    def test_no_fields_sends_no_requests(self):
        client = StubClient()
        assert pair_checkboxes(client, [], {}) == []
        assert client.requests == []


class TestEstimate:
    def test_rounds_up(self):
        assert estimate_tokens("") == 0
        assert estimate_tokens("abcd") == 1
        assert estimate_tokens("abcde") == 2
