"""Pluggable judges answering the binary questions of the judgment tree.

Three implementations ship in-tree:

* :class:`OracleJudge` — deterministic string rules (attestation and answer
  matching by normalized containment, a keyword rule for citation requirement).
  It makes full end-to-end evaluation testable with no endpoint.
* :class:`HumanLogJudge` — replays verdicts from an existing judgment log,
  preserving their provenance (the route used when human assessments already
  cover a question).
* :class:`LLMJudge` — delegates to the chat-completions gateway with one prompt
  template per judgment kind.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence

from .gateway import ChatCompletionsGateway, GatewayError
from .judging import JudgmentKind, JudgmentRecord, Provenance, Verdict
from .model import Answer, Document, Nugget, ReportRequest, Sentence


class JudgeError(Exception):
    """A judge could not produce a verdict (after any retries/replays)."""

    def __init__(self, message: str, prompt_fingerprint: str | None = None):
        super().__init__(message)
        self.prompt_fingerprint = prompt_fingerprint


@dataclass(frozen=True)
class JudgeAnswer:
    verdict: Verdict
    provenance: Provenance
    raw_output: str | None = None
    prompt_fingerprint: str | None = None
    defaulted: bool = False


class Judge:
    """Interface for the judge-resolved judgment kinds.

    ``doc_relevant`` is consulted only when the engine's lookup chain (human
    relevance entries, then nugget answer links) cannot settle the question.
    """

    name = "abstract"

    def set_scope(self, run_id: str, request_id: str) -> None:
        """Hook for judges whose answers depend on which report is being judged."""

    def citation_attests(self, sentence: Sentence, document: Document,
                         request: ReportRequest) -> JudgeAnswer:
        raise NotImplementedError

    def requires_citation(self, sentence: Sentence, request: ReportRequest) -> JudgeAnswer:
        raise NotImplementedError

    def answers_question(self, sentence: Sentence, nugget: Nugget,
                         request: ReportRequest) -> JudgeAnswer:
        raise NotImplementedError

    def answer_matches(self, sentence: Sentence, nugget: Nugget, answer: Answer,
                       request: ReportRequest) -> JudgeAnswer:
        raise NotImplementedError

    def claims_unanswerable(self, sentence: Sentence, nugget: Nugget,
                            request: ReportRequest) -> JudgeAnswer:
        raise NotImplementedError

    def doc_relevant(self, document: Document, request: ReportRequest,
                     nuggets: Sequence[Nugget]) -> JudgeAnswer:
        raise NotImplementedError


def _normalize(text: str) -> str:
    return " ".join(text.lower().split())


def _content_words(text: str) -> set[str]:
    return {w for w in re.findall(r"[a-z0-9]+", text.lower()) if len(w) >= 4}


#: Phrases the oracle accepts as an explicit no-information statement.
_UNANSWERABLE_MARKERS = (
    "no information",
    "could not be determined",
    "not found in the available documents",
)


class OracleJudge(Judge):
    """Deterministic judge built on normalized string containment.

    Rules: a document attests a sentence iff the (whitespace-collapsed,
    case-folded) sentence text occurs in the document text; a sentence matches
    an answer iff the answer text occurs in the sentence; a sentence requires a
    citation iff it contains a digit (a checkable factual token); a sentence
    claims unanswerability iff it carries a no-information marker phrase and
    shares a content word with the question. Verdicts carry LOOKUP provenance:
    they are computed, not model-generated.
    """

    name = "oracle"

    @staticmethod
    def _answer(verdict: bool) -> JudgeAnswer:
        return JudgeAnswer(
            verdict=Verdict.YES if verdict else Verdict.NO,
            provenance=Provenance.LOOKUP,
        )

    def citation_attests(self, sentence: Sentence, document: Document,
                         request: ReportRequest) -> JudgeAnswer:
        return self._answer(_normalize(sentence.text) in _normalize(document.text))

    def requires_citation(self, sentence: Sentence, request: ReportRequest) -> JudgeAnswer:
        return self._answer(any(ch.isdigit() for ch in sentence.text))

    def answers_question(self, sentence: Sentence, nugget: Nugget,
                         request: ReportRequest) -> JudgeAnswer:
        text = _normalize(sentence.text)
        return self._answer(any(_normalize(a.text) in text for a in nugget.answers))

    def answer_matches(self, sentence: Sentence, nugget: Nugget, answer: Answer,
                       request: ReportRequest) -> JudgeAnswer:
        return self._answer(_normalize(answer.text) in _normalize(sentence.text))

    def claims_unanswerable(self, sentence: Sentence, nugget: Nugget,
                            request: ReportRequest) -> JudgeAnswer:
        text = _normalize(sentence.text)
        if not any(marker in text for marker in _UNANSWERABLE_MARKERS):
            return self._answer(False)
        overlap = _content_words(sentence.text) & _content_words(nugget.question)
        return self._answer(bool(overlap))

    def doc_relevant(self, document: Document, request: ReportRequest,
                     nuggets: Sequence[Nugget]) -> JudgeAnswer:
        doc_text = _normalize(document.text)
        for nugget in nuggets:
            for answer in nugget.answers:
                if _normalize(answer.text) in doc_text:
                    return self._answer(True)
        return self._answer(False)


class HumanLogJudge(Judge):
    """Replays verdicts from an existing judgment log.

    Answers are looked up by (run, request, kind, subject); a question absent
    from the log raises :class:`JudgeError` rather than guessing.
    """

    name = "human-log"

    def __init__(self, records: Iterable[JudgmentRecord]):
        self._by_subject: dict[tuple, JudgmentRecord] = {}
        for record in records:
            key = (record.run_id, record.request_id, record.kind, record.sentence_index,
                   record.doc_id, record.nugget_id, record.answer_id)
            self._by_subject.setdefault(key, record)
            # Relevance is a per-document fact; keep a sentence-agnostic alias.
            if record.kind is JudgmentKind.DOC_RELEVANT:
                alias = (record.run_id, record.request_id, record.kind, None,
                         record.doc_id, None, None)
                self._by_subject.setdefault(alias, record)
        self._run_id: str | None = None
        self._request_id: str | None = None

    def set_scope(self, run_id: str, request_id: str) -> None:
        self._run_id = run_id
        self._request_id = request_id

    def _replay(self, kind: JudgmentKind, sentence_index: int | None,
                doc_id: str | None = None, nugget_id: str | None = None,
                answer_id: str | None = None) -> JudgeAnswer:
        key = (self._run_id, self._request_id, kind, sentence_index, doc_id, nugget_id, answer_id)
        record = self._by_subject.get(key)
        if record is None:
            raise JudgeError(
                f"no logged verdict for {kind.value} run={self._run_id} "
                f"request={self._request_id} sentence={sentence_index} "
                f"subject={doc_id or nugget_id or '-'}"
            )
        return JudgeAnswer(
            verdict=record.verdict,
            provenance=record.provenance,
            raw_output=record.raw_output,
            prompt_fingerprint=record.prompt_fingerprint,
            defaulted=record.defaulted,
        )

    def citation_attests(self, sentence: Sentence, document: Document,
                         request: ReportRequest) -> JudgeAnswer:
        return self._replay(JudgmentKind.CITATION_ATTESTS, sentence.index,
                            doc_id=document.doc_id)

    def requires_citation(self, sentence: Sentence, request: ReportRequest) -> JudgeAnswer:
        return self._replay(JudgmentKind.REQUIRES_CITATION, sentence.index)

    def answers_question(self, sentence: Sentence, nugget: Nugget,
                         request: ReportRequest) -> JudgeAnswer:
        return self._replay(JudgmentKind.ANSWERS_QUESTION, sentence.index,
                            nugget_id=nugget.nugget_id)

    def answer_matches(self, sentence: Sentence, nugget: Nugget, answer: Answer,
                       request: ReportRequest) -> JudgeAnswer:
        return self._replay(JudgmentKind.ANSWER_MATCHES, sentence.index,
                            nugget_id=nugget.nugget_id, answer_id=answer.answer_id)

    def claims_unanswerable(self, sentence: Sentence, nugget: Nugget,
                            request: ReportRequest) -> JudgeAnswer:
        return self._replay(JudgmentKind.CLAIMS_UNANSWERABLE, sentence.index,
                            nugget_id=nugget.nugget_id)

    def doc_relevant(self, document: Document, request: ReportRequest,
                     nuggets: Sequence[Nugget]) -> JudgeAnswer:
        return self._replay(JudgmentKind.DOC_RELEVANT, None, doc_id=document.doc_id)


class LLMJudge(Judge):
    """Asks a chat-completions endpoint one few-shot prompt per question."""

    name = "llm"

    def __init__(self, gateway: ChatCompletionsGateway):
        self.gateway = gateway

    def _ask(self, kind: JudgmentKind, variables: dict[str, str]) -> JudgeAnswer:
        try:
            result = self.gateway.ask_binary(kind, variables)
        except GatewayError as exc:
            raise JudgeError(str(exc), prompt_fingerprint=exc.prompt_fingerprint) from exc
        return JudgeAnswer(
            verdict=Verdict.YES if result.verdict == "YES" else Verdict.NO,
            provenance=Provenance.LLM,
            raw_output=result.raw_response,
            prompt_fingerprint=result.fingerprint,
            defaulted=result.defaulted,
        )

    def citation_attests(self, sentence: Sentence, document: Document,
                         request: ReportRequest) -> JudgeAnswer:
        return self._ask(
            JudgmentKind.CITATION_ATTESTS,
            {"sentence": sentence.text, "document": document.text},
        )

    def requires_citation(self, sentence: Sentence, request: ReportRequest) -> JudgeAnswer:
        return self._ask(
            JudgmentKind.REQUIRES_CITATION,
            {
                "sentence": sentence.text,
                "problem_statement": request.problem_statement,
                "user_story": request.user_story,
            },
        )

    def answers_question(self, sentence: Sentence, nugget: Nugget,
                         request: ReportRequest) -> JudgeAnswer:
        return self._ask(
            JudgmentKind.ANSWERS_QUESTION,
            {"sentence": sentence.text, "question": nugget.question},
        )

    def answer_matches(self, sentence: Sentence, nugget: Nugget, answer: Answer,
                       request: ReportRequest) -> JudgeAnswer:
        return self._ask(
            JudgmentKind.ANSWER_MATCHES,
            {"sentence": sentence.text, "question": nugget.question, "answer": answer.text},
        )

    def claims_unanswerable(self, sentence: Sentence, nugget: Nugget,
                            request: ReportRequest) -> JudgeAnswer:
        return self._ask(
            JudgmentKind.CLAIMS_UNANSWERABLE,
            {"sentence": sentence.text, "question": nugget.question},
        )

    def doc_relevant(self, document: Document, request: ReportRequest,
                     nuggets: Sequence[Nugget]) -> JudgeAnswer:
        return self._ask(
            JudgmentKind.DOC_RELEVANT,
            {
                "document": document.text,
                "problem_statement": request.problem_statement,
                "user_story": request.user_story,
            },
        )
