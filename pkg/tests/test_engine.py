"""Judgment tree traversal, relevance resolution, logging, reconstruction."""

import json

import pytest

from reporteval import (
    IncompleteLogError,
    JudgmentEngine,
    JudgmentKind,
    JudgmentRecord,
    OracleJudge,
    Outcome,
    ParseError,
    Provenance,
    Verdict,
    aggregate_answered,
    derive_outcome,
    estimate_max_judge_calls,
    load_log,
    parse_documents,
    parse_nuggets,
    parse_qrels,
    parse_run,
    parse_topics,
    reconstruct_report_judgments,
    serialize_record,
)

from conftest import Corpus, write_jsonl


class CountingJudge(OracleJudge):
    """Oracle judge that tallies how often each question type is asked."""

    def __init__(self):
        super().__init__()
        self.calls = {name: 0 for name in (
            "citation_attests", "requires_citation", "answers_question",
            "answer_matches", "claims_unanswerable", "doc_relevant")}

    def citation_attests(self, *args, **kwargs):
        self.calls["citation_attests"] += 1
        return super().citation_attests(*args, **kwargs)

    def requires_citation(self, *args, **kwargs):
        self.calls["requires_citation"] += 1
        return super().requires_citation(*args, **kwargs)

    def answers_question(self, *args, **kwargs):
        self.calls["answers_question"] += 1
        return super().answers_question(*args, **kwargs)

    def answer_matches(self, *args, **kwargs):
        self.calls["answer_matches"] += 1
        return super().answer_matches(*args, **kwargs)

    def claims_unanswerable(self, *args, **kwargs):
        self.calls["claims_unanswerable"] += 1
        return super().claims_unanswerable(*args, **kwargs)

    def doc_relevant(self, *args, **kwargs):
        self.calls["doc_relevant"] += 1
        return super().doc_relevant(*args, **kwargs)

    @property
    def total(self):
        return sum(self.calls.values())


@pytest.fixture
def loaded(corpus: Corpus):
    reports = parse_run(corpus.runs)
    topics = {t.request_id: t for t in parse_topics(corpus.topics)}
    bank = parse_nuggets(corpus.nuggets)
    collection = parse_documents(corpus.docs)
    relevance = parse_qrels(corpus.qrels)
    return reports, topics, bank, collection, relevance


def _report(reports, run_id, request_id):
    return next(r for r in reports if (r.run_id, r.request_id) == (run_id, request_id))


def _engine(loaded, judge=None, prior=()):
    reports, topics, bank, collection, relevance = loaded
    judge = judge or OracleJudge()
    return JudgmentEngine(bank, collection, judge, relevance, prior_records=prior)


# ---------------------------------------------------------------------------
# Citation path
# ---------------------------------------------------------------------------


def test_outcome_table():
    assert derive_outcome(relevant=True, attests=True) is Outcome.REWARD
    assert derive_outcome(relevant=False, attests=True) is Outcome.NEUTRAL
    assert derive_outcome(relevant=True, attests=False) is Outcome.PENALTY
    assert derive_outcome(relevant=False, attests=False) is Outcome.PENALTY


def test_citation_outcomes_for_strong_report(loaded):
    reports, topics, *_ = loaded
    engine = _engine(loaded)
    judgments = engine.evaluate_report(_report(reports, "r1", "t1"), topics["t1"])
    by_index = {o.sentence_index: o for o in judgments.sentence_outcomes}
    assert by_index[0].citation_outcomes[0].outcome is Outcome.REWARD
    assert by_index[1].citation_outcomes[0].outcome is Outcome.REWARD
    # d08 attests but carries a grade-0 human judgment: attested-but-irrelevant.
    neutral = by_index[2].citation_outcomes[0]
    assert (neutral.relevant, neutral.attests, neutral.outcome) == (
        False, True, Outcome.NEUTRAL)
    assert by_index[3].citation_outcomes[0].outcome is Outcome.REWARD
    penalty = by_index[4].citation_outcomes[0]
    assert (penalty.attests, penalty.outcome) == (False, Outcome.PENALTY)
    assert not by_index[5].missing_citation_penalty
    assert not by_index[6].missing_citation_penalty


def test_penalized_sentence_still_answers_content(loaded):
    """Citation quality and content credit are decided independently."""
    reports, topics, bank, *_ = loaded
    engine = _engine(loaded)
    judgments = engine.evaluate_report(_report(reports, "r1", "t1"), topics["t1"])
    s4 = judgments.sentence_outcomes[4]
    assert s4.citation_outcomes[0].outcome is Outcome.PENALTY
    assert ("n03", "a1") in s4.answered


def test_missing_citation_penalty_for_numeric_claim(loaded):
    reports, topics, *_ = loaded
    engine = _engine(loaded)
    judgments = engine.evaluate_report(_report(reports, "r2", "t1"), topics["t1"])
    assert judgments.sentence_outcomes[1].missing_citation_penalty
    assert not judgments.sentence_outcomes[1].citation_outcomes


def test_unknown_document_penalized_without_judge_calls(loaded):
    reports, topics, *_ = loaded
    judge = CountingJudge()
    engine = _engine(loaded, judge)
    judgments = engine.evaluate_report(_report(reports, "r3", "t1"), topics["t1"])
    s0 = judgments.sentence_outcomes[0]
    assert s0.citation_outcomes[0].outcome is Outcome.PENALTY
    assert s0.citation_outcomes[0].attests is False
    # The unknown document consumed no judge call; the known one (d01) did.
    assert judge.calls["citation_attests"] == 1
    assert judge.calls["doc_relevant"] == 0
    attests_records = [r for r in judgments.records
                       if r.kind is JudgmentKind.CITATION_ATTESTS and r.doc_id == "dX"]
    assert len(attests_records) == 1
    assert attests_records[0].provenance is Provenance.LOOKUP
    assert attests_records[0].verdict is Verdict.NO


# ---------------------------------------------------------------------------
# Relevance resolution order
# ---------------------------------------------------------------------------


def test_relevance_provenance_order(loaded):
    reports, topics, *_ = loaded
    engine = _engine(loaded)
    judgments = engine.evaluate_report(_report(reports, "r1", "t1"), topics["t1"])
    relevant = {r.doc_id: r for r in judgments.records if r.kind is JudgmentKind.DOC_RELEVANT}
    # d01 has a qrels entry -> human judgment wins.
    assert relevant["d01"].provenance is Provenance.HUMAN
    assert relevant["d01"].verdict is Verdict.YES
    # d08 has a grade-0 qrels entry -> human NO even though it attests.
    assert relevant["d08"].provenance is Provenance.HUMAN
    assert relevant["d08"].verdict is Verdict.NO
    # d03 is only answer-linked -> lookup YES.
    assert relevant["d03"].provenance is Provenance.LOOKUP
    assert relevant["d03"].verdict is Verdict.YES
    # d09 is neither judged nor linked and the bank is complete -> closed-world NO.
    assert relevant["d09"].provenance is Provenance.LOOKUP
    assert relevant["d09"].verdict is Verdict.NO


def test_relevance_judged_only_when_bank_incomplete(tmp_path):
    docs = [{"doc_id": "e01", "text": "alpha beta"}, {"doc_id": "e02", "text": "gamma"}]
    topics = [{"request_id": "tq", "problem_statement": "P.", "user_story": "U.",
               "collection_id": "c"}]
    nuggets = [{"request_id": "tq", "nuggets": [
        {"nugget_id": "n1", "question": "Q?", "answers": [
            {"answer_id": "a1", "text": "alpha beta", "doc_ids": []}]}]}]
    runs = [{"run_id": "rq", "request_id": "tq", "sentences": [
        {"text": "alpha beta", "citations": ["e01"]},
        {"text": "alpha beta again", "citations": ["e01"]},
    ]}]
    bank = parse_nuggets(write_jsonl(tmp_path / "n.jsonl", nuggets))
    collection = parse_documents(write_jsonl(tmp_path / "d.jsonl", docs))
    reports = parse_run(write_jsonl(tmp_path / "r.jsonl", runs))
    request = parse_topics(write_jsonl(tmp_path / "t.jsonl", topics))[0]

    judge = CountingJudge()
    engine = JudgmentEngine(bank, collection, judge, relevance=None)
    judgments = engine.evaluate_report(reports[0], request)
    # Incomplete bank: relevance is judged, but memoized across the two sentences.
    assert judge.calls["doc_relevant"] == 1
    records = [r for r in judgments.records if r.kind is JudgmentKind.DOC_RELEVANT]
    assert len(records) == 2  # one per citing sentence
    assert {r.sentence_index for r in records} == {0, 1}
    assert all(r.verdict is Verdict.YES for r in records)  # oracle: answer text in doc


# ---------------------------------------------------------------------------
# Content path
# ---------------------------------------------------------------------------


def test_all_nugget_aggregates_across_sentences(loaded):
    reports, topics, bank, *_ = loaded
    engine = _engine(loaded)
    judgments = engine.evaluate_report(_report(reports, "r1", "t1"), topics["t1"])
    # n02 requires both dams; they appear in sentences 1 and 3.
    assert judgments.sentence_outcomes[1].answered == {("n02", "a1")}
    assert judgments.sentence_outcomes[3].answered == {("n02", "a2")}
    answered = aggregate_answered(judgments, bank.nuggets_for("t1"))
    assert answered == {"n01", "n02", "n03", "n04"}


def test_all_nugget_missing_answer_not_credited(loaded):
    reports, topics, bank, *_ = loaded
    engine = _engine(loaded)
    judgments = engine.evaluate_report(_report(reports, "r1", "t2"), topics["t2"])
    answered = aggregate_answered(judgments, bank.nuggets_for("t2"))
    assert "n07" not in answered  # only one of two required answers present
    assert answered == {"n05", "n08"}


def test_unanswerable_nugget_claimed(loaded):
    reports, topics, *_ = loaded
    engine = _engine(loaded)
    judgments = engine.evaluate_report(_report(reports, "r1", "t1"), topics["t1"])
    assert judgments.sentence_outcomes[5].unanswerable_claims == {"n04"}
    other = [o.unanswerable_claims for o in judgments.sentence_outcomes if o.sentence_index != 5]
    assert all(not claims for claims in other)


def test_gate_no_means_no_match_records(loaded):
    reports, topics, *_ = loaded
    engine = _engine(loaded)
    judgments = engine.evaluate_report(_report(reports, "r1", "t3"), topics["t3"])
    gates = {(r.sentence_index, r.nugget_id): r.verdict for r in judgments.records
             if r.kind is JudgmentKind.ANSWERS_QUESTION}
    matches = {(r.sentence_index, r.nugget_id) for r in judgments.records
               if r.kind is JudgmentKind.ANSWER_MATCHES}
    assert gates[(0, "n09")] is Verdict.YES
    assert (0, "n09") in matches
    for key, verdict in gates.items():
        if verdict is Verdict.NO:
            assert key not in matches


def test_nugget_answerable_records_request_level(loaded):
    reports, topics, *_ = loaded
    engine = _engine(loaded)
    judgments = engine.evaluate_report(_report(reports, "r1", "t1"), topics["t1"])
    answerable = [r for r in judgments.records if r.kind is JudgmentKind.NUGGET_ANSWERABLE]
    assert {r.nugget_id for r in answerable} == {"n01", "n02", "n03", "n04"}
    assert all(r.sentence_index is None for r in answerable)
    verdicts = {r.nugget_id: r.verdict for r in answerable}
    assert verdicts["n04"] is Verdict.NO
    assert all(verdicts[n] is Verdict.YES for n in ("n01", "n02", "n03"))

    # A bank with only answerable nuggets yields no negative records.
    judgments_t2 = engine.evaluate_report(_report(reports, "r1", "t2"), topics["t2"])
    assert all(r.verdict is Verdict.YES for r in judgments_t2.records
               if r.kind is JudgmentKind.NUGGET_ANSWERABLE)


# ---------------------------------------------------------------------------
# Records, resumability, reconstruction
# ---------------------------------------------------------------------------


def test_record_keys_unique_per_report(loaded):
    reports, topics, *_ = loaded
    engine = _engine(loaded)
    for report in reports:
        judgments = engine.evaluate_report(report, topics[report.request_id])
        keys = [r.key() for r in judgments.records]
        assert len(keys) == len(set(keys))


def test_empty_report_is_degenerate(loaded):
    reports, topics, *_ = loaded
    engine = _engine(loaded)
    judgments = engine.evaluate_report(_report(reports, "r4", "t1"), topics["t1"])
    assert judgments.degenerate
    assert judgments.sentence_outcomes == ()
    # Request-level questions are still answered.
    assert sum(1 for r in judgments.records
               if r.kind is JudgmentKind.NUGGET_ANSWERABLE) == 4


def test_prior_records_replay_without_judge_calls(loaded):
    reports, topics, *_ = loaded
    report = _report(reports, "r1", "t1")
    first = _engine(loaded).evaluate_report(report, topics["t1"])

    judge = CountingJudge()
    engine = _engine(loaded, judge, prior=first.records)
    fresh: list[JudgmentRecord] = []
    second = engine.evaluate_report(report, topics["t1"], on_new_record=fresh.append)
    assert judge.total == 0
    assert fresh == []
    assert second.sentence_outcomes == first.sentence_outcomes
    assert set(second.records) == set(first.records)


def test_partial_prior_records_judge_only_missing(loaded):
    reports, topics, *_ = loaded
    report = _report(reports, "r1", "t1")
    first = _engine(loaded).evaluate_report(report, topics["t1"])
    judged_kinds = {JudgmentKind.CITATION_ATTESTS, JudgmentKind.REQUIRES_CITATION,
                    JudgmentKind.ANSWERS_QUESTION, JudgmentKind.ANSWER_MATCHES,
                    JudgmentKind.CLAIMS_UNANSWERABLE}
    kept = [r for r in first.records
            if not (r.kind is JudgmentKind.ANSWERS_QUESTION and r.sentence_index == 0)]
    dropped = len(first.records) - len(kept)
    assert dropped == 3  # three answerable nuggets gated at sentence 0

    judge = CountingJudge()
    engine = _engine(loaded, judge, prior=kept)
    fresh: list[JudgmentRecord] = []
    second = engine.evaluate_report(report, topics["t1"], on_new_record=fresh.append)
    # Re-judged: the three dropped gates, plus matches behind any that open.
    gate_records = [r for r in fresh if r.kind is JudgmentKind.ANSWERS_QUESTION]
    assert {r.nugget_id for r in gate_records} == {"n01", "n02", "n03"}
    assert judge.calls["answers_question"] == 3
    assert judge.calls["citation_attests"] == 0
    assert second.sentence_outcomes == first.sentence_outcomes


def test_budget_bounds_actual_judge_calls(loaded):
    reports, topics, bank, collection, relevance = loaded
    for report in reports:
        judge = CountingJudge()
        engine = JudgmentEngine(bank, collection, judge, relevance)
        engine.evaluate_report(report, topics[report.request_id])
        budget = estimate_max_judge_calls(report, bank, collection, relevance)
        assert judge.total <= budget


def test_log_round_trip_is_order_insensitive(loaded, tmp_path):
    reports, topics, *_ = loaded
    engine = _engine(loaded)
    judgments = engine.evaluate_report(_report(reports, "r1", "t1"), topics["t1"])
    path = tmp_path / "log.jsonl"
    lines = [serialize_record(r) for r in judgments.records]
    path.write_text("\n".join(reversed(lines)) + "\n", encoding="utf-8")
    loaded_records = load_log(path)
    assert set(loaded_records) == set(judgments.records)


def test_reconstruction_matches_live_judging(loaded):
    reports, topics, bank, *_ = loaded
    engine = _engine(loaded)
    for report in reports:
        live = engine.evaluate_report(report, topics[report.request_id])
        rebuilt = reconstruct_report_judgments(
            report, bank.nuggets_for(report.request_id), live.records)
        assert rebuilt.sentence_outcomes == live.sentence_outcomes


def test_reconstruction_reports_missing_questions(loaded):
    reports, topics, bank, *_ = loaded
    engine = _engine(loaded)
    report = _report(reports, "r1", "t1")
    live = engine.evaluate_report(report, topics["t1"])
    pruned = [r for r in live.records
              if not (r.kind is JudgmentKind.CITATION_ATTESTS and r.doc_id == "d03")]
    with pytest.raises(IncompleteLogError) as exc_info:
        reconstruct_report_judgments(report, bank.nuggets_for("t1"), pruned)
    assert exc_info.value.missing == ["r1/t1 CITATION_ATTESTS sentence=1 subject=d03"]


def test_record_serialization_shape(loaded):
    reports, topics, *_ = loaded
    engine = _engine(loaded)
    judgments = engine.evaluate_report(_report(reports, "r1", "t1"), topics["t1"])
    for record in judgments.records:
        obj = json.loads(serialize_record(record))
        assert set(obj) == {"kind", "run_id", "request_id", "sentence_index", "subject",
                            "verdict", "provenance", "raw_output", "prompt_fingerprint",
                            "defaulted"}
        assert JudgmentRecord.from_json_obj(obj) == record


def test_record_parsing_rejects_invalid(loaded):
    with pytest.raises(ParseError):
        JudgmentRecord.from_json_obj({"kind": "NOT_A_KIND", "run_id": "r", "request_id": "t",
                                      "verdict": "YES", "provenance": "LOOKUP"})
    with pytest.raises(ParseError, match="doc_id and nugget_id"):
        JudgmentRecord.from_json_obj({
            "kind": "CITATION_ATTESTS", "run_id": "r", "request_id": "t",
            "sentence_index": 0, "verdict": "YES", "provenance": "LOOKUP",
            "subject": {"doc_id": "d", "nugget_id": "n"}})
    with pytest.raises(ParseError, match="requires nugget_id"):
        JudgmentRecord.from_json_obj({
            "kind": "ANSWER_MATCHES", "run_id": "r", "request_id": "t",
            "sentence_index": 0, "verdict": "YES", "provenance": "LOOKUP",
            "subject": {"answer_id": "a"}})
