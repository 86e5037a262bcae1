"""Domain types, file ingestion, and cross-validation for report evaluation inputs.

All input files are JSON Lines (runs, topics, nuggets, documents) except qrels,
which use the classic whitespace-separated four-column layout. Parsers fail fast
on the first ERROR-grade problem (raising :class:`ParseError` with a 1-based line
number) and collect WARNING-grade issues into an optional sink. Parsed stores are
frozen and safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping


class Combinator(Enum):
    """How a nugget's answers combine: ALL answers required, or ANY one of them."""

    ALL = "ALL"
    ANY = "ANY"


class Importance(Enum):
    VITAL = "vital"
    OKAY = "okay"


#: Recall weight per importance label.
IMPORTANCE_WEIGHTS = {Importance.VITAL: 1.0, Importance.OKAY: 0.5}


class Severity(Enum):
    ERROR = "ERROR"
    WARNING = "WARNING"


@dataclass(frozen=True)
class ValidationIssue:
    severity: Severity
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity.value} {self.location}: {self.message}"


class ParseError(ValueError):
    """Raised on the first ERROR-grade problem while reading an input file."""

    def __init__(self, location: str, message: str):
        super().__init__(f"{location}: {message}")
        self.issue = ValidationIssue(Severity.ERROR, location, message)


@dataclass(frozen=True)
class ReportRequest:
    request_id: str
    problem_statement: str
    user_story: str
    collection_id: str
    background: str | None = None

    def to_json_obj(self) -> dict:
        obj = {
            "request_id": self.request_id,
            "problem_statement": self.problem_statement,
            "user_story": self.user_story,
            "collection_id": self.collection_id,
        }
        if self.background is not None:
            obj["background"] = self.background
        return obj


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str
    citations: tuple[str, ...]

    def to_json_obj(self) -> dict:
        return {"text": self.text, "citations": list(self.citations)}


@dataclass(frozen=True)
class Report:
    run_id: str
    request_id: str
    sentences: tuple[Sentence, ...]

    def to_json_obj(self) -> dict:
        return {
            "run_id": self.run_id,
            "request_id": self.request_id,
            "sentences": [s.to_json_obj() for s in self.sentences],
        }


@dataclass(frozen=True)
class Answer:
    answer_id: str
    text: str
    attesting_doc_ids: frozenset[str]

    def to_json_obj(self) -> dict:
        return {
            "answer_id": self.answer_id,
            "text": self.text,
            "doc_ids": sorted(self.attesting_doc_ids),
        }


@dataclass(frozen=True)
class Nugget:
    nugget_id: str
    request_id: str
    question: str
    combinator: Combinator
    importance: Importance
    answers: tuple[Answer, ...]
    # True when some answer carries no attesting documents, so relevance lookup
    # cannot be trusted to be complete for this request.
    lookup_incomplete: bool = False

    @property
    def answerable(self) -> bool:
        return len(self.answers) > 0

    @property
    def weight(self) -> float:
        return IMPORTANCE_WEIGHTS[self.importance]

    def to_json_obj(self) -> dict:
        return {
            "nugget_id": self.nugget_id,
            "question": self.question,
            "combinator": self.combinator.value,
            "importance": self.importance.value,
            "answers": [a.to_json_obj() for a in self.answers],
        }


@dataclass(frozen=True)
class NuggetBank:
    by_request: Mapping[str, tuple[Nugget, ...]]

    def nuggets_for(self, request_id: str) -> tuple[Nugget, ...]:
        return self.by_request.get(request_id, ())

    def lookup_incomplete(self, request_id: str) -> bool:
        return any(n.lookup_incomplete for n in self.nuggets_for(request_id))

    def attesting_docs(self, request_id: str) -> frozenset[str]:
        """All doc ids linked from any answer of any nugget of this request."""
        docs: set[str] = set()
        for nugget in self.nuggets_for(request_id):
            for answer in nugget.answers:
                docs.update(answer.attesting_doc_ids)
        return frozenset(docs)


@dataclass(frozen=True)
class RelevanceStore:
    entries: Mapping[tuple[str, str], int]

    def grade(self, request_id: str, doc_id: str) -> int | None:
        return self.entries.get((request_id, doc_id))

    def is_relevant(self, request_id: str, doc_id: str) -> bool | None:
        """Binary view: relevant iff grade > 0; None when the pair is unjudged."""
        grade = self.entries.get((request_id, doc_id))
        if grade is None:
            return None
        return grade > 0

    def relevant_pairs(self) -> frozenset[tuple[str, str]]:
        return frozenset(k for k, g in self.entries.items() if g > 0)


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    title: str | None = None

    def to_json_obj(self) -> dict:
        obj: dict = {"doc_id": self.doc_id}
        if self.title is not None:
            obj["title"] = self.title
        obj["text"] = self.text
        return obj


@dataclass(frozen=True)
class DocumentCollection:
    docs: Mapping[str, Document]

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.docs

    def get(self, doc_id: str) -> Document | None:
        return self.docs.get(doc_id)


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------


def _warn(issues: list[ValidationIssue] | None, location: str, message: str) -> None:
    if issues is not None:
        issues.append(ValidationIssue(Severity.WARNING, location, message))


def _require_str(obj: dict, key: str, location: str, nonempty: bool = True) -> str:
    if key not in obj:
        raise ParseError(location, f"missing field {key}")
    value = obj[key]
    if not isinstance(value, str):
        raise ParseError(location, f"field {key} must be a string")
    if nonempty and not value.strip():
        raise ParseError(location, f"field {key} must be nonempty")
    return value


def _check_unknown(obj: dict, known: set[str], location: str,
                   issues: list[ValidationIssue] | None) -> None:
    for key in obj:
        if key not in known:
            _warn(issues, location, f"unknown field {key}")


def _jsonl_records(path: str | Path) -> Iterable[tuple[int, str, dict]]:
    """Yield (1-based line number, location, parsed object) for each JSONL line."""
    path = Path(path)
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
            yield lineno, location, obj


# ---------------------------------------------------------------------------
# Parsers
# ---------------------------------------------------------------------------


def parse_run(path: str | Path, issues: list[ValidationIssue] | None = None) -> list[Report]:
    """Read a run file: one report per line, duplicate (run_id, request_id) rejected."""
    reports: list[Report] = []
    seen: dict[tuple[str, str], int] = {}
    for lineno, location, obj in _jsonl_records(path):
        run_id = _require_str(obj, "run_id", location)
        request_id = _require_str(obj, "request_id", location)
        if "sentences" not in obj:
            raise ParseError(location, "missing field sentences")
        if not isinstance(obj["sentences"], list):
            raise ParseError(location, "field sentences must be a list")
        _check_unknown(obj, {"run_id", "request_id", "sentences"}, location, issues)

        key = (run_id, request_id)
        if key in seen:
            raise ParseError(
                location,
                f"duplicate report for (run_id={run_id}, request_id={request_id}), "
                f"first seen at line {seen[key]}",
            )
        seen[key] = lineno

        sentences = []
        for index, raw in enumerate(obj["sentences"]):
            sloc = f"{location} sentence {index}"
            if not isinstance(raw, dict):
                raise ParseError(sloc, "sentence must be a JSON object")
            text = _require_str(raw, "text", sloc)
            citations_raw = raw.get("citations", [])
            if not isinstance(citations_raw, list) or not all(
                isinstance(c, str) for c in citations_raw
            ):
                raise ParseError(sloc, "field citations must be a list of strings")
            _check_unknown(raw, {"text", "citations"}, sloc, issues)
            citations: list[str] = []
            for doc_id in citations_raw:
                if doc_id in citations:
                    _warn(issues, sloc, f"duplicate citation {doc_id} collapsed")
                else:
                    citations.append(doc_id)
            sentences.append(Sentence(index=index, text=text, citations=tuple(citations)))
        reports.append(Report(run_id=run_id, request_id=request_id, sentences=tuple(sentences)))
    return reports


def parse_topics(path: str | Path,
                 issues: list[ValidationIssue] | None = None) -> list[ReportRequest]:
    topics: list[ReportRequest] = []
    seen: dict[str, int] = {}
    for lineno, location, obj in _jsonl_records(path):
        request_id = _require_str(obj, "request_id", location)
        if request_id in seen:
            raise ParseError(
                location, f"duplicate request_id {request_id}, first seen at line {seen[request_id]}"
            )
        seen[request_id] = lineno
        problem_statement = _require_str(obj, "problem_statement", location)
        user_story = _require_str(obj, "user_story", location)
        collection_id = _require_str(obj, "collection_id", location, nonempty=False)
        background = obj.get("background")
        if background is not None and not isinstance(background, str):
            raise ParseError(location, "field background must be a string")
        _check_unknown(
            obj,
            {"request_id", "problem_statement", "user_story", "collection_id", "background"},
            location,
            issues,
        )
        topics.append(
            ReportRequest(
                request_id=request_id,
                problem_statement=problem_statement,
                user_story=user_story,
                collection_id=collection_id,
                background=background,
            )
        )
    return topics


def parse_nuggets(path: str | Path, issues: list[ValidationIssue] | None = None) -> NuggetBank:
    """Read a nugget file; combinator defaults to ANY and importance to vital."""
    by_request: dict[str, tuple[Nugget, ...]] = {}
    seen_request: dict[str, int] = {}
    for lineno, location, obj in _jsonl_records(path):
        request_id = _require_str(obj, "request_id", location)
        if request_id in seen_request:
            raise ParseError(
                location,
                f"duplicate nugget entry for request {request_id}, "
                f"first seen at line {seen_request[request_id]}",
            )
        seen_request[request_id] = lineno
        if not isinstance(obj.get("nuggets"), list):
            raise ParseError(location, "missing or non-list field nuggets")
        _check_unknown(obj, {"request_id", "nuggets"}, location, issues)

        nuggets: list[Nugget] = []
        seen_nugget_ids: set[str] = set()
        for raw in obj["nuggets"]:
            if not isinstance(raw, dict):
                raise ParseError(location, "nugget must be a JSON object")
            nugget_id = _require_str(raw, "nugget_id", location)
            nloc = f"{location} nugget {nugget_id}"
            if nugget_id in seen_nugget_ids:
                raise ParseError(nloc, f"duplicate nugget_id {nugget_id} within request {request_id}")
            seen_nugget_ids.add(nugget_id)
            question = _require_str(raw, "question", nloc)

            combinator_raw = raw.get("combinator", Combinator.ANY.value)
            try:
                combinator = Combinator(combinator_raw)
            except ValueError:
                raise ParseError(nloc, f"invalid combinator {combinator_raw!r}") from None
            importance_raw = raw.get("importance", Importance.VITAL.value)
            try:
                importance = Importance(importance_raw)
            except ValueError:
                raise ParseError(nloc, f"invalid importance {importance_raw!r}") from None
            _check_unknown(
                raw, {"nugget_id", "question", "combinator", "importance", "answers"}, nloc, issues
            )

            answers_raw = raw.get("answers", [])
            if not isinstance(answers_raw, list):
                raise ParseError(nloc, "field answers must be a list")
            answers: list[Answer] = []
            seen_answer_ids: set[str] = set()
            incomplete = False
            for araw in answers_raw:
                if not isinstance(araw, dict):
                    raise ParseError(nloc, "answer must be a JSON object")
                answer_id = _require_str(araw, "answer_id", nloc)
                if answer_id in seen_answer_ids:
                    raise ParseError(nloc, f"duplicate answer_id {answer_id}")
                seen_answer_ids.add(answer_id)
                text = _require_str(araw, "text", nloc)
                doc_ids_raw = araw.get("doc_ids", [])
                if not isinstance(doc_ids_raw, list) or not all(
                    isinstance(d, str) for d in doc_ids_raw
                ):
                    raise ParseError(nloc, "field doc_ids must be a list of strings")
                _check_unknown(araw, {"answer_id", "text", "doc_ids"}, nloc, issues)
                if not doc_ids_raw:
                    incomplete = True
                    _warn(issues, nloc, f"answer {answer_id} has no attesting documents "
                                        "(lookup-incomplete)")
                answers.append(
                    Answer(answer_id=answer_id, text=text, attesting_doc_ids=frozenset(doc_ids_raw))
                )
            nuggets.append(
                Nugget(
                    nugget_id=nugget_id,
                    request_id=request_id,
                    question=question,
                    combinator=combinator,
                    importance=importance,
                    answers=tuple(answers),
                    lookup_incomplete=incomplete,
                )
            )
        by_request[request_id] = tuple(nuggets)
    return NuggetBank(by_request=by_request)


def parse_qrels(path: str | Path, issues: list[ValidationIssue] | None = None) -> RelevanceStore:
    """Read `request_id iter doc_id grade` lines; later duplicates overwrite."""
    path = Path(path)
    entries: dict[tuple[str, str], int] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            location = f"{path.name} line {lineno}"
            fields = line.split()
            if len(fields) != 4:
                raise ParseError(location, f"expected 4 whitespace-separated fields, got {len(fields)}")
            request_id, _iteration, doc_id, grade_raw = fields
            try:
                grade = int(grade_raw)
            except ValueError:
                raise ParseError(location, f"non-integer grade {grade_raw!r}") from None
            if grade < 0:
                raise ParseError(location, f"negative grade {grade}")
            key = (request_id, doc_id)
            if key in entries:
                _warn(issues, location, f"duplicate entry for ({request_id}, {doc_id}) overwrites "
                                        f"grade {entries[key]}")
            entries[key] = grade
    return RelevanceStore(entries=entries)


def parse_documents(path: str | Path,
                    issues: list[ValidationIssue] | None = None) -> DocumentCollection:
    docs: dict[str, Document] = {}
    for _lineno, location, obj in _jsonl_records(path):
        doc_id = _require_str(obj, "doc_id", location)
        if doc_id in docs:
            raise ParseError(location, f"duplicate doc_id {doc_id}")
        text = _require_str(obj, "text", location)
        title = obj.get("title")
        if title is not None and not isinstance(title, str):
            raise ParseError(location, "field title must be a string")
        _check_unknown(obj, {"doc_id", "title", "text"}, location, issues)
        docs[doc_id] = Document(doc_id=doc_id, text=text, title=title)
    return DocumentCollection(docs=docs)


# ---------------------------------------------------------------------------
# Serialization (round-trip counterparts of the parsers)
# ---------------------------------------------------------------------------


def serialize_run(reports: Iterable[Report]) -> str:
    return "".join(json.dumps(r.to_json_obj(), ensure_ascii=False) + "\n" for r in reports)


def serialize_topics(topics: Iterable[ReportRequest]) -> str:
    return "".join(json.dumps(t.to_json_obj(), ensure_ascii=False) + "\n" for t in topics)


def serialize_nuggets(bank: NuggetBank) -> str:
    lines = []
    for request_id, nuggets in bank.by_request.items():
        obj = {"request_id": request_id, "nuggets": [n.to_json_obj() for n in nuggets]}
        lines.append(json.dumps(obj, ensure_ascii=False) + "\n")
    return "".join(lines)


def serialize_qrels(store: RelevanceStore) -> str:
    lines = []
    for (request_id, doc_id), grade in store.entries.items():
        lines.append(f"{request_id} 0 {doc_id} {grade}\n")
    return "".join(lines)


def serialize_documents(collection: DocumentCollection) -> str:
    return "".join(
        json.dumps(d.to_json_obj(), ensure_ascii=False) + "\n" for d in collection.docs.values()
    )


# ---------------------------------------------------------------------------
# Cross-validation
# ---------------------------------------------------------------------------


def validate_inputs(
    reports: Iterable[Report],
    topics: Iterable[ReportRequest],
    bank: NuggetBank,
    collection: DocumentCollection,
) -> list[ValidationIssue]:
    """Cross-reference parsed artifacts. Issues are returned, never raised.

    ERROR issues make the affected topics unscorable and must block judging;
    WARNING issues are informational (e.g. citations to unknown documents, which
    are judged non-attesting downstream).
    """
    issues: list[ValidationIssue] = []
    topic_ids = {t.request_id for t in topics}
    for report in reports:
        location = f"run {report.run_id} request {report.request_id}"
        if report.request_id not in topic_ids:
            issues.append(
                ValidationIssue(
                    Severity.ERROR, location, f"unknown request_id {report.request_id}"
                )
            )
        if not bank.nuggets_for(report.request_id):
            issues.append(
                ValidationIssue(
                    Severity.ERROR, location,
                    f"no nuggets for request {report.request_id}; topic is unscorable",
                )
            )
        for sentence in report.sentences:
            for doc_id in sentence.citations:
                if doc_id not in collection:
                    issues.append(
                        ValidationIssue(
                            Severity.WARNING,
                            f"{location} sentence {sentence.index}",
                            f"citation {doc_id} not in document collection",
                        )
                    )
    return issues
