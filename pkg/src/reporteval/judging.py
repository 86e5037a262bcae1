"""Per-sentence binary judgment tree: citation path and content path.

Every question about a report resolves to a YES/NO verdict recorded as a
:class:`JudgmentRecord`. Two judgment kinds are always answered by direct
lookup (``HAS_CITATIONS`` on the sentence, ``NUGGET_ANSWERABLE`` on the nugget);
document relevance resolves through a fixed order (human relevance store, then
nugget answer links, then a judge when the links are flagged incomplete); the
remaining kinds are delegated to a pluggable judge.

The engine emits records through an ``on_new_record`` callback as they are
produced, so a caller can stream them to an append-only JSON Lines log. Records
already present in a prior log are replayed, never re-queried, which makes
judging resumable after a crash or judge failure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Iterable, Sequence

from .model import (
    Combinator,
    DocumentCollection,
    Nugget,
    NuggetBank,
    ParseError,
    RelevanceStore,
    Report,
    ReportRequest,
    Sentence,
)

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .judges import Judge, JudgeAnswer


class JudgmentKind(Enum):
    HAS_CITATIONS = "HAS_CITATIONS"
    DOC_RELEVANT = "DOC_RELEVANT"
    CITATION_ATTESTS = "CITATION_ATTESTS"
    REQUIRES_CITATION = "REQUIRES_CITATION"
    NUGGET_ANSWERABLE = "NUGGET_ANSWERABLE"
    CLAIMS_UNANSWERABLE = "CLAIMS_UNANSWERABLE"
    ANSWERS_QUESTION = "ANSWERS_QUESTION"
    ANSWER_MATCHES = "ANSWER_MATCHES"


class Verdict(Enum):
    YES = "YES"
    NO = "NO"


class Provenance(Enum):
    LOOKUP = "LOOKUP"
    HUMAN = "HUMAN"
    LLM = "LLM"


@dataclass(frozen=True)
class JudgmentRecord:
    """One binary verdict on one question, with provenance.

    ``sentence_index`` is None for request-level questions (NUGGET_ANSWERABLE).
    The subject is at most one of: a doc_id, a nugget_id, or a
    (nugget_id, answer_id) pair. ``defaulted`` marks verdicts that fell back to
    NO because the judge's output was unparseable twice.
    """

    kind: JudgmentKind
    run_id: str
    request_id: str
    sentence_index: int | None
    verdict: Verdict
    provenance: Provenance
    doc_id: str | None = None
    nugget_id: str | None = None
    answer_id: str | None = None
    raw_output: str | None = None
    prompt_fingerprint: str | None = None
    defaulted: bool = False

    def key(self) -> tuple:
        """Identity of the question this record answers (replay/dedup key)."""
        return (
            self.run_id,
            self.request_id,
            self.kind,
            self.sentence_index,
            self.doc_id,
            self.nugget_id,
            self.answer_id,
        )

    def to_json_obj(self) -> dict:
        subject: dict | None = None
        if self.doc_id is not None:
            subject = {"doc_id": self.doc_id}
        elif self.answer_id is not None:
            subject = {"nugget_id": self.nugget_id, "answer_id": self.answer_id}
        elif self.nugget_id is not None:
            subject = {"nugget_id": self.nugget_id}
        return {
            "kind": self.kind.value,
            "run_id": self.run_id,
            "request_id": self.request_id,
            "sentence_index": self.sentence_index,
            "subject": subject,
            "verdict": self.verdict.value,
            "provenance": self.provenance.value,
            "raw_output": self.raw_output,
            "prompt_fingerprint": self.prompt_fingerprint,
            "defaulted": self.defaulted,
        }

    @staticmethod
    def from_json_obj(obj: dict, location: str = "judgment log") -> "JudgmentRecord":
        try:
            kind = JudgmentKind(obj["kind"])
            verdict = Verdict(obj["verdict"])
            provenance = Provenance(obj["provenance"])
            run_id = obj["run_id"]
            request_id = obj["request_id"]
        except (KeyError, ValueError) as exc:
            raise ParseError(location, f"invalid judgment record: {exc}") from exc
        if not isinstance(run_id, str) or not isinstance(request_id, str):
            raise ParseError(location, "run_id and request_id must be strings")
        sentence_index = obj.get("sentence_index")
        if sentence_index is not None and not isinstance(sentence_index, int):
            raise ParseError(location, "sentence_index must be an integer or null")
        subject = obj.get("subject")
        doc_id = nugget_id = answer_id = None
        if subject is not None:
            if not isinstance(subject, dict) or not set(subject) <= {
                "doc_id",
                "nugget_id",
                "answer_id",
            }:
                raise ParseError(location, f"invalid subject {subject!r}")
            doc_id = subject.get("doc_id")
            nugget_id = subject.get("nugget_id")
            answer_id = subject.get("answer_id")
            if answer_id is not None and nugget_id is None:
                raise ParseError(location, "answer_id subject requires nugget_id")
            if doc_id is not None and nugget_id is not None:
                raise ParseError(location, "subject cannot carry both doc_id and nugget_id")
        return JudgmentRecord(
            kind=kind,
            run_id=run_id,
            request_id=request_id,
            sentence_index=sentence_index,
            verdict=verdict,
            provenance=provenance,
            doc_id=doc_id,
            nugget_id=nugget_id,
            answer_id=answer_id,
            raw_output=obj.get("raw_output"),
            prompt_fingerprint=obj.get("prompt_fingerprint"),
            defaulted=bool(obj.get("defaulted", False)),
        )


class Outcome(Enum):
    REWARD = "REWARD"
    PENALTY = "PENALTY"
    NEUTRAL = "NEUTRAL"


def derive_outcome(relevant: bool, attests: bool) -> Outcome:
    """Total, exclusive outcome table for one citation."""
    if not attests:
        return Outcome.PENALTY
    return Outcome.REWARD if relevant else Outcome.NEUTRAL


@dataclass(frozen=True)
class CitationOutcome:
    doc_id: str
    relevant: bool
    attests: bool
    outcome: Outcome


@dataclass(frozen=True)
class SentenceOutcome:
    sentence_index: int
    citation_outcomes: tuple[CitationOutcome, ...]
    missing_citation_penalty: bool
    answered: frozenset[tuple[str, str]]  # (nugget_id, answer_id)
    unanswerable_claims: frozenset[str]  # nugget_id


@dataclass(frozen=True)
class ReportJudgments:
    run_id: str
    request_id: str
    sentence_outcomes: tuple[SentenceOutcome, ...]
    records: tuple[JudgmentRecord, ...]

    @property
    def degenerate(self) -> bool:
        """True for an empty report (no sentences to judge)."""
        return len(self.sentence_outcomes) == 0


def aggregate_answered(judgments: ReportJudgments, nuggets: Sequence[Nugget]) -> frozenset[str]:
    """Nugget ids correctly answered by the report, aggregated across sentences.

    ANY: at least one answer matched somewhere. ALL: every answer matched,
    possibly by different sentences. Unanswerable (no answers): some sentence
    explicitly claims the question is unanswerable.
    """
    matched: set[tuple[str, str]] = set()
    claims: set[str] = set()
    for outcome in judgments.sentence_outcomes:
        matched.update(outcome.answered)
        claims.update(outcome.unanswerable_claims)
    answered: set[str] = set()
    for nugget in nuggets:
        if not nugget.answerable:
            if nugget.nugget_id in claims:
                answered.add(nugget.nugget_id)
            continue
        hit_ids = {aid for nid, aid in matched if nid == nugget.nugget_id}
        if nugget.combinator is Combinator.ALL:
            if all(a.answer_id in hit_ids for a in nugget.answers):
                answered.add(nugget.nugget_id)
        else:
            if hit_ids:
                answered.add(nugget.nugget_id)
    return frozenset(answered)


class _Trace:
    """Per-report record sink: collects all records, forwards only fresh ones."""

    def __init__(self, on_new_record: Callable[[JudgmentRecord], None] | None):
        self.records: list[JudgmentRecord] = []
        self._on_new_record = on_new_record

    def add(self, record: JudgmentRecord, fresh: bool) -> None:
        self.records.append(record)
        if fresh and self._on_new_record is not None:
            self._on_new_record(record)


class JudgmentEngine:
    """Walks the judgment tree for one report at a time.

    ``prior_records`` (e.g. a previously written log) are replayed instead of
    re-querying the judge; only fresh records reach ``on_new_record``. Document
    relevance is resolved at most once per (run, request, doc) — later citations
    of the same document reuse the memoized resolution while still receiving
    their own per-sentence record. Distinct reports can be evaluated from
    different threads: all per-call state lives in the trace.
    """

    def __init__(
        self,
        bank: NuggetBank,
        collection: DocumentCollection,
        judge: "Judge",
        relevance: RelevanceStore | None = None,
        prior_records: Iterable[JudgmentRecord] = (),
    ):
        self.bank = bank
        self.collection = collection
        self.judge = judge
        self.relevance = relevance
        self._prior: dict[tuple, JudgmentRecord] = {}
        self._prior_doc_relevance: dict[tuple[str, str, str], JudgmentRecord] = {}
        for record in prior_records:
            self._prior[record.key()] = record
            if record.kind is JudgmentKind.DOC_RELEVANT and record.doc_id is not None:
                self._prior_doc_relevance.setdefault(
                    (record.run_id, record.request_id, record.doc_id), record
                )
        self._relevance_memo: dict[tuple[str, str, str], JudgmentRecord] = {}

    # -- record plumbing ---------------------------------------------------

    def _resolve(
        self,
        trace: _Trace,
        kind: JudgmentKind,
        report: Report,
        sentence_index: int | None,
        ask: Callable[[], "JudgeAnswer"],
        doc_id: str | None = None,
        nugget_id: str | None = None,
        answer_id: str | None = None,
    ) -> JudgmentRecord:
        key = (report.run_id, report.request_id, kind, sentence_index, doc_id, nugget_id, answer_id)
        prior = self._prior.get(key)
        if prior is not None:
            trace.add(prior, fresh=False)
            return prior
        answer = ask()
        record = JudgmentRecord(
            kind=kind,
            run_id=report.run_id,
            request_id=report.request_id,
            sentence_index=sentence_index,
            verdict=answer.verdict,
            provenance=answer.provenance,
            doc_id=doc_id,
            nugget_id=nugget_id,
            answer_id=answer_id,
            raw_output=answer.raw_output,
            prompt_fingerprint=answer.prompt_fingerprint,
            defaulted=answer.defaulted,
        )
        trace.add(record, fresh=True)
        return record

    def _lookup(
        self,
        trace: _Trace,
        kind: JudgmentKind,
        report: Report,
        sentence_index: int | None,
        verdict: bool,
        nugget_id: str | None = None,
    ) -> JudgmentRecord:
        key = (report.run_id, report.request_id, kind, sentence_index, None, nugget_id, None)
        prior = self._prior.get(key)
        if prior is not None:
            trace.add(prior, fresh=False)
            return prior
        record = JudgmentRecord(
            kind=kind,
            run_id=report.run_id,
            request_id=report.request_id,
            sentence_index=sentence_index,
            verdict=Verdict.YES if verdict else Verdict.NO,
            provenance=Provenance.LOOKUP,
            nugget_id=nugget_id,
        )
        trace.add(record, fresh=True)
        return record

    # -- citation path -----------------------------------------------------

    def _doc_relevant(
        self,
        trace: _Trace,
        report: Report,
        request: ReportRequest,
        sentence_index: int,
        doc_id: str,
    ) -> JudgmentRecord:
        """Resolution order: human relevance entry, answer doc links, judge.

        The judge is consulted only when the request's answer links are flagged
        incomplete and the document text is available; otherwise the closed
        world applies (NO via lookup).
        """
        key = (report.run_id, report.request_id, JudgmentKind.DOC_RELEVANT, sentence_index,
               doc_id, None, None)
        prior = self._prior.get(key)
        if prior is not None:
            trace.add(prior, fresh=False)
            return prior

        memo_key = (report.run_id, report.request_id, doc_id)
        basis = self._relevance_memo.get(memo_key)
        if basis is None:
            basis = self._prior_doc_relevance.get(memo_key)
        if basis is not None:
            record = replace(basis, sentence_index=sentence_index)
            self._relevance_memo[memo_key] = record
            trace.add(record, fresh=True)
            return record

        verdict: Verdict
        provenance: Provenance
        raw_output: str | None = None
        fingerprint: str | None = None
        defaulted = False
        human = None if self.relevance is None else self.relevance.is_relevant(
            report.request_id, doc_id
        )
        if human is not None:
            verdict = Verdict.YES if human else Verdict.NO
            provenance = Provenance.HUMAN
        elif doc_id in self.bank.attesting_docs(report.request_id):
            verdict = Verdict.YES
            provenance = Provenance.LOOKUP
        elif self.bank.lookup_incomplete(report.request_id) and doc_id in self.collection:
            document = self.collection.get(doc_id)
            assert document is not None
            answer = self.judge.doc_relevant(
                document, request, self.bank.nuggets_for(report.request_id)
            )
            verdict = answer.verdict
            provenance = answer.provenance
            raw_output = answer.raw_output
            fingerprint = answer.prompt_fingerprint
            defaulted = answer.defaulted
        else:
            verdict = Verdict.NO
            provenance = Provenance.LOOKUP

        record = JudgmentRecord(
            kind=JudgmentKind.DOC_RELEVANT,
            run_id=report.run_id,
            request_id=report.request_id,
            sentence_index=sentence_index,
            verdict=verdict,
            provenance=provenance,
            doc_id=doc_id,
            raw_output=raw_output,
            prompt_fingerprint=fingerprint,
            defaulted=defaulted,
        )
        self._relevance_memo[memo_key] = record
        trace.add(record, fresh=True)
        return record

    def _evaluate_citation(
        self,
        trace: _Trace,
        report: Report,
        request: ReportRequest,
        sentence: Sentence,
        doc_id: str,
    ) -> CitationOutcome:
        relevant_record = self._doc_relevant(trace, report, request, sentence.index, doc_id)
        document = self.collection.get(doc_id)
        if document is None:
            # A citation to a document outside the collection cannot support
            # the sentence: non-attesting without consulting any judge.
            attests_record = self._lookup_citation_attests(
                trace, report, sentence.index, doc_id, attests=False
            )
        else:
            attests_record = self._resolve(
                trace,
                JudgmentKind.CITATION_ATTESTS,
                report,
                sentence.index,
                lambda: self.judge.citation_attests(sentence, document, request),
                doc_id=doc_id,
            )
        relevant = relevant_record.verdict is Verdict.YES
        attests = attests_record.verdict is Verdict.YES
        return CitationOutcome(
            doc_id=doc_id,
            relevant=relevant,
            attests=attests,
            outcome=derive_outcome(relevant, attests),
        )

    def _lookup_citation_attests(
        self,
        trace: _Trace,
        report: Report,
        sentence_index: int,
        doc_id: str,
        attests: bool,
    ) -> JudgmentRecord:
        key = (report.run_id, report.request_id, JudgmentKind.CITATION_ATTESTS, sentence_index,
               doc_id, None, None)
        prior = self._prior.get(key)
        if prior is not None:
            trace.add(prior, fresh=False)
            return prior
        record = JudgmentRecord(
            kind=JudgmentKind.CITATION_ATTESTS,
            run_id=report.run_id,
            request_id=report.request_id,
            sentence_index=sentence_index,
            verdict=Verdict.YES if attests else Verdict.NO,
            provenance=Provenance.LOOKUP,
            doc_id=doc_id,
        )
        trace.add(record, fresh=True)
        return record

    # -- full report -------------------------------------------------------

    def evaluate_report(
        self,
        report: Report,
        request: ReportRequest,
        on_new_record: Callable[[JudgmentRecord], None] | None = None,
    ) -> ReportJudgments:
        """Judge every sentence's citation path and content path.

        A judge failure propagates after all records produced so far have been
        handed to ``on_new_record``, so a streaming log is a valid resume point.
        """
        self.judge.set_scope(report.run_id, report.request_id)
        nuggets = self.bank.nuggets_for(report.request_id)
        trace = _Trace(on_new_record)

        for nugget in nuggets:
            self._lookup(
                trace,
                JudgmentKind.NUGGET_ANSWERABLE,
                report,
                None,
                nugget.answerable,
                nugget_id=nugget.nugget_id,
            )

        outcomes: list[SentenceOutcome] = []
        for sentence in report.sentences:
            has_citations = len(sentence.citations) > 0
            self._lookup(trace, JudgmentKind.HAS_CITATIONS, report, sentence.index, has_citations)

            citation_outcomes: list[CitationOutcome] = []
            missing_citation_penalty = False
            if has_citations:
                for doc_id in sentence.citations:
                    citation_outcomes.append(
                        self._evaluate_citation(trace, report, request, sentence, doc_id)
                    )
            else:
                requires = self._resolve(
                    trace,
                    JudgmentKind.REQUIRES_CITATION,
                    report,
                    sentence.index,
                    lambda: self.judge.requires_citation(sentence, request),
                )
                missing_citation_penalty = requires.verdict is Verdict.YES

            answered: set[tuple[str, str]] = set()
            claims: set[str] = set()
            for nugget in nuggets:
                if nugget.answerable:
                    gate = self._resolve(
                        trace,
                        JudgmentKind.ANSWERS_QUESTION,
                        report,
                        sentence.index,
                        lambda n=nugget: self.judge.answers_question(sentence, n, request),
                        nugget_id=nugget.nugget_id,
                    )
                    if gate.verdict is Verdict.YES:
                        for answer in nugget.answers:
                            match = self._resolve(
                                trace,
                                JudgmentKind.ANSWER_MATCHES,
                                report,
                                sentence.index,
                                lambda n=nugget, a=answer: self.judge.answer_matches(
                                    sentence, n, a, request
                                ),
                                nugget_id=nugget.nugget_id,
                                answer_id=answer.answer_id,
                            )
                            if match.verdict is Verdict.YES:
                                answered.add((nugget.nugget_id, answer.answer_id))
                else:
                    claim = self._resolve(
                        trace,
                        JudgmentKind.CLAIMS_UNANSWERABLE,
                        report,
                        sentence.index,
                        lambda n=nugget: self.judge.claims_unanswerable(sentence, n, request),
                        nugget_id=nugget.nugget_id,
                    )
                    if claim.verdict is Verdict.YES:
                        claims.add(nugget.nugget_id)

            outcomes.append(
                SentenceOutcome(
                    sentence_index=sentence.index,
                    citation_outcomes=tuple(citation_outcomes),
                    missing_citation_penalty=missing_citation_penalty,
                    answered=frozenset(answered),
                    unanswerable_claims=frozenset(claims),
                )
            )

        return ReportJudgments(
            run_id=report.run_id,
            request_id=report.request_id,
            sentence_outcomes=tuple(outcomes),
            records=tuple(trace.records),
        )


def estimate_max_judge_calls(
    report: Report,
    bank: NuggetBank,
    collection: DocumentCollection,
    relevance: RelevanceStore | None = None,
) -> int:
    """Upper bound on judge queries for one report (lookups excluded).

    Assumes every content gate opens; document-relevance queries are counted
    once per distinct document thanks to engine memoization.
    """
    nuggets = bank.nuggets_for(report.request_id)
    linked = bank.attesting_docs(report.request_id)
    incomplete = bank.lookup_incomplete(report.request_id)
    calls = 0
    relevance_docs: set[str] = set()
    for sentence in report.sentences:
        if sentence.citations:
            for doc_id in sentence.citations:
                if doc_id not in collection:
                    continue
                calls += 1  # attestation
                human = None if relevance is None else relevance.is_relevant(
                    report.request_id, doc_id
                )
                if human is None and doc_id not in linked and incomplete:
                    relevance_docs.add(doc_id)
        else:
            calls += 1  # citation requirement
        for nugget in nuggets:
            calls += 1  # gate or unanswerable claim
            if nugget.answerable:
                calls += len(nugget.answers)
    return calls + len(relevance_docs)


# ---------------------------------------------------------------------------
# Judgment log I/O and reconstruction
# ---------------------------------------------------------------------------


def load_log(path: str | Path) -> list[JudgmentRecord]:
    path = Path(path)
    records: list[JudgmentRecord] = []
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            location = f"{path.name} line {lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(location, f"malformed JSON: {exc.msg}") from exc
            if not isinstance(obj, dict):
                raise ParseError(location, "line must be a JSON object")
            records.append(JudgmentRecord.from_json_obj(obj, location))
    return records


def serialize_record(record: JudgmentRecord) -> str:
    return json.dumps(record.to_json_obj(), ensure_ascii=False)


class IncompleteLogError(Exception):
    """A judgment log lacks records required to reconstruct a report."""

    def __init__(self, missing: list[str]):
        self.missing = missing
        preview = "; ".join(missing[:5])
        more = "" if len(missing) <= 5 else f" (+{len(missing) - 5} more)"
        super().__init__(f"judgment log incomplete: {preview}{more}")


def reconstruct_report_judgments(
    report: Report,
    nuggets: Sequence[Nugget],
    records: Sequence[JudgmentRecord],
) -> ReportJudgments:
    """Rebuild ReportJudgments for one report purely from its log records.

    Records for other reports must be filtered out beforehand. Raises
    :class:`IncompleteLogError` naming every question the log fails to answer.
    """
    by_key: dict[tuple, JudgmentRecord] = {record.key(): record for record in records}
    missing: list[str] = []

    def fetch(kind: JudgmentKind, sentence_index: int | None, doc_id: str | None = None,
              nugget_id: str | None = None, answer_id: str | None = None) -> JudgmentRecord | None:
        key = (report.run_id, report.request_id, kind, sentence_index, doc_id, nugget_id, answer_id)
        record = by_key.get(key)
        if record is None:
            subject = doc_id or (f"{nugget_id}/{answer_id}" if answer_id else nugget_id) or "-"
            missing.append(
                f"{report.run_id}/{report.request_id} {kind.value} "
                f"sentence={sentence_index} subject={subject}"
            )
        return record

    for nugget in nuggets:
        fetch(JudgmentKind.NUGGET_ANSWERABLE, None, nugget_id=nugget.nugget_id)

    outcomes: list[SentenceOutcome] = []
    for sentence in report.sentences:
        fetch(JudgmentKind.HAS_CITATIONS, sentence.index)
        citation_outcomes: list[CitationOutcome] = []
        missing_citation_penalty = False
        if sentence.citations:
            for doc_id in sentence.citations:
                relevant_record = fetch(JudgmentKind.DOC_RELEVANT, sentence.index, doc_id=doc_id)
                attests_record = fetch(JudgmentKind.CITATION_ATTESTS, sentence.index, doc_id=doc_id)
                if relevant_record is None or attests_record is None:
                    continue
                relevant = relevant_record.verdict is Verdict.YES
                attests = attests_record.verdict is Verdict.YES
                citation_outcomes.append(
                    CitationOutcome(doc_id, relevant, attests, derive_outcome(relevant, attests))
                )
        else:
            requires = fetch(JudgmentKind.REQUIRES_CITATION, sentence.index)
            missing_citation_penalty = requires is not None and requires.verdict is Verdict.YES

        answered: set[tuple[str, str]] = set()
        claims: set[str] = set()
        for nugget in nuggets:
            if nugget.answerable:
                gate = fetch(JudgmentKind.ANSWERS_QUESTION, sentence.index,
                             nugget_id=nugget.nugget_id)
                if gate is None or gate.verdict is Verdict.NO:
                    continue
                for answer in nugget.answers:
                    match = fetch(JudgmentKind.ANSWER_MATCHES, sentence.index,
                                  nugget_id=nugget.nugget_id, answer_id=answer.answer_id)
                    if match is not None and match.verdict is Verdict.YES:
                        answered.add((nugget.nugget_id, answer.answer_id))
            else:
                claim = fetch(JudgmentKind.CLAIMS_UNANSWERABLE, sentence.index,
                              nugget_id=nugget.nugget_id)
                if claim is not None and claim.verdict is Verdict.YES:
                    claims.add(nugget.nugget_id)

        outcomes.append(
            SentenceOutcome(
                sentence_index=sentence.index,
                citation_outcomes=tuple(citation_outcomes),
                missing_citation_penalty=missing_citation_penalty,
                answered=frozenset(answered),
                unanswerable_claims=frozenset(claims),
            )
        )

    if missing:
        raise IncompleteLogError(missing)
    return ReportJudgments(
        run_id=report.run_id,
        request_id=report.request_id,
        sentence_outcomes=tuple(outcomes),
        records=tuple(records),
    )
