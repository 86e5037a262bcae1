"""Sentence precision, nugget recall, F1, fine-grained statistics, macro averages.

A topic with no sentence in the precision denominator is *degenerate*: its
precision is reported as None, macro-averaged as 0.0, and flagged. A run
missing a report for an expected topic receives all-zero scores for it (the
macro divisor is fixed by the expected topic set, so skipping a topic never
helps a run).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .judging import Outcome, ReportJudgments, aggregate_answered
from .model import Nugget


class PrecisionMode(Enum):
    CITED_ONLY = "cited"
    CITED_OR_REQUIRED = "cited-or-required"


def sentence_precision(judgments: ReportJudgments,
                       mode: PrecisionMode = PrecisionMode.CITED_ONLY) -> float | None:
    """Fraction of sentences attested by every one of their citations.

    A sentence is precise iff it has at least one citation and every citation
    attests. CITED_ONLY divides by cited sentences; CITED_OR_REQUIRED also
    counts uncited sentences that were judged to require a citation (they are
    imprecise by construction). Returns None when the denominator is empty.
    """
    if not isinstance(mode, PrecisionMode):
        raise ValueError(f"unknown precision mode {mode!r}")
    numerator = 0
    denominator = 0
    for outcome in judgments.sentence_outcomes:
        if outcome.citation_outcomes:
            denominator += 1
            if all(c.attests for c in outcome.citation_outcomes):
                numerator += 1
        elif mode is PrecisionMode.CITED_OR_REQUIRED and outcome.missing_citation_penalty:
            denominator += 1
    if denominator == 0:
        return None
    return numerator / denominator


def nugget_recall(answered_ids: Iterable[str], nuggets: Sequence[Nugget],
                  weighted: bool) -> float:
    """Fraction (or weight-fraction) of the topic's nuggets the report answered."""
    if not nuggets:
        raise ValueError("cannot compute recall over an empty nugget list")
    answered = set(answered_ids)
    if not weighted:
        return sum(1 for n in nuggets if n.nugget_id in answered) / len(nuggets)
    total = sum(n.weight for n in nuggets)
    got = sum(n.weight for n in nuggets if n.nugget_id in answered)
    return got / total


def f1(precision: float | None, recall: float) -> float:
    """Harmonic mean; degenerate precision counts as 0, and 0/0 is 0."""
    p = 0.0 if precision is None else precision
    if p + recall == 0:
        return 0.0
    return 2 * p * recall / (p + recall)


@dataclass(frozen=True)
class FineStats:
    pct_relevant_citations: float
    pct_attesting_citations: float
    pct_sentences_cited: float
    citations_per_sentence: float
    n_rewards: int
    n_penalties: int
    n_neutral: int
    n_missing_citation_penalties: int

    def to_json_obj(self) -> dict:
        return {
            "pct_relevant_citations": _round6(self.pct_relevant_citations),
            "pct_attesting_citations": _round6(self.pct_attesting_citations),
            "pct_sentences_cited": _round6(self.pct_sentences_cited),
            "citations_per_sentence": _round6(self.citations_per_sentence),
            "n_rewards": self.n_rewards,
            "n_penalties": self.n_penalties,
            "n_neutral": self.n_neutral,
            "n_missing_citation_penalties": self.n_missing_citation_penalties,
        }


_ZERO_FINE = FineStats(0.0, 0.0, 0.0, 0.0, 0, 0, 0, 0)


def fine_stats(judgments: ReportJudgments) -> FineStats:
    n_sentences = len(judgments.sentence_outcomes)
    total_citations = 0
    relevant = 0
    attesting = 0
    rewards = penalties = neutral = 0
    cited_sentences = 0
    missing_penalties = 0
    for outcome in judgments.sentence_outcomes:
        if outcome.citation_outcomes:
            cited_sentences += 1
        if outcome.missing_citation_penalty:
            missing_penalties += 1
        for citation in outcome.citation_outcomes:
            total_citations += 1
            relevant += citation.relevant
            attesting += citation.attests
            if citation.outcome is Outcome.REWARD:
                rewards += 1
            elif citation.outcome is Outcome.PENALTY:
                penalties += 1
            else:
                neutral += 1
    return FineStats(
        pct_relevant_citations=relevant / total_citations if total_citations else 0.0,
        pct_attesting_citations=attesting / total_citations if total_citations else 0.0,
        pct_sentences_cited=cited_sentences / n_sentences if n_sentences else 0.0,
        citations_per_sentence=total_citations / n_sentences if n_sentences else 0.0,
        n_rewards=rewards,
        n_penalties=penalties,
        n_neutral=neutral,
        n_missing_citation_penalties=missing_penalties,
    )


@dataclass(frozen=True)
class TopicScore:
    request_id: str
    sentence_precision: float | None  # None = degenerate (no denominator)
    nugget_recall: float
    nugget_recall_weighted: float
    f1: float
    f1_weighted: float
    fine: FineStats
    flags: tuple[str, ...] = ()

    def to_json_obj(self) -> dict:
        return {
            "request_id": self.request_id,
            "sentence_precision": _round6(self.sentence_precision or 0.0),
            "nugget_recall": _round6(self.nugget_recall),
            "nugget_recall_weighted": _round6(self.nugget_recall_weighted),
            "f1": _round6(self.f1),
            "f1_weighted": _round6(self.f1_weighted),
            "fine": self.fine.to_json_obj(),
            "flags": list(self.flags),
        }


def zero_topic_score(request_id: str, flags: tuple[str, ...] = ("missing_report",)) -> TopicScore:
    return TopicScore(
        request_id=request_id,
        sentence_precision=None,
        nugget_recall=0.0,
        nugget_recall_weighted=0.0,
        f1=0.0,
        f1_weighted=0.0,
        fine=_ZERO_FINE,
        flags=flags,
    )


def score_topic(judgments: ReportJudgments, nuggets: Sequence[Nugget],
                mode: PrecisionMode = PrecisionMode.CITED_ONLY) -> TopicScore:
    answered = aggregate_answered(judgments, nuggets)
    precision = sentence_precision(judgments, mode)
    recall = nugget_recall(answered, nuggets, weighted=False)
    recall_weighted = nugget_recall(answered, nuggets, weighted=True)
    flags: list[str] = []
    if judgments.degenerate:
        flags.append("empty_report")
    if precision is None:
        flags.append("degenerate_precision")
    return TopicScore(
        request_id=judgments.request_id,
        sentence_precision=precision,
        nugget_recall=recall,
        nugget_recall_weighted=recall_weighted,
        f1=f1(precision, recall),
        f1_weighted=f1(precision, recall_weighted),
        fine=fine_stats(judgments),
        flags=tuple(flags),
    )


@dataclass(frozen=True)
class RunScore:
    run_id: str
    sentence_precision: float
    nugget_recall: float
    nugget_recall_weighted: float
    f1: float
    f1_weighted: float
    pct_relevant_citations: float
    pct_attesting_citations: float
    pct_sentences_cited: float
    citations_per_sentence: float
    n_topics: int
    missing_topics: tuple[str, ...] = ()

    def to_json_obj(self) -> dict:
        return {
            "run_id": self.run_id,
            "sentence_precision": _round6(self.sentence_precision),
            "nugget_recall": _round6(self.nugget_recall),
            "nugget_recall_weighted": _round6(self.nugget_recall_weighted),
            "f1": _round6(self.f1),
            "f1_weighted": _round6(self.f1_weighted),
            "pct_relevant_citations": _round6(self.pct_relevant_citations),
            "pct_attesting_citations": _round6(self.pct_attesting_citations),
            "pct_sentences_cited": _round6(self.pct_sentences_cited),
            "citations_per_sentence": _round6(self.citations_per_sentence),
            "n_topics": self.n_topics,
            "missing_topics": list(self.missing_topics),
        }


def score_run(run_id: str, topic_scores: Mapping[str, TopicScore],
              expected_topics: Iterable[str]) -> RunScore:
    """Macro-average over the expected topic set, in sorted-topic order.

    Topics absent from ``topic_scores`` contribute zeros and are listed in
    ``missing_topics``. Iterating the expected set in sorted order makes the
    floating-point sums independent of input ordering.
    """
    expected = sorted(set(expected_topics))
    if not expected:
        raise ValueError("expected topic set is empty")
    missing: list[str] = []
    sums = {
        "sentence_precision": 0.0,
        "nugget_recall": 0.0,
        "nugget_recall_weighted": 0.0,
        "f1": 0.0,
        "f1_weighted": 0.0,
        "pct_relevant_citations": 0.0,
        "pct_attesting_citations": 0.0,
        "pct_sentences_cited": 0.0,
        "citations_per_sentence": 0.0,
    }
    for request_id in expected:
        score = topic_scores.get(request_id)
        if score is None:
            missing.append(request_id)
            continue
        sums["sentence_precision"] += score.sentence_precision or 0.0
        sums["nugget_recall"] += score.nugget_recall
        sums["nugget_recall_weighted"] += score.nugget_recall_weighted
        sums["f1"] += score.f1
        sums["f1_weighted"] += score.f1_weighted
        sums["pct_relevant_citations"] += score.fine.pct_relevant_citations
        sums["pct_attesting_citations"] += score.fine.pct_attesting_citations
        sums["pct_sentences_cited"] += score.fine.pct_sentences_cited
        sums["citations_per_sentence"] += score.fine.citations_per_sentence
    n = len(expected)
    return RunScore(
        run_id=run_id,
        n_topics=n,
        missing_topics=tuple(missing),
        **{name: value / n for name, value in sums.items()},
    )


def scores_to_json_obj(run_score: RunScore, topic_scores: Mapping[str, TopicScore]) -> dict:
    """The scores file layout: per-topic scores (sorted) plus the macro block."""
    return {
        "run_id": run_score.run_id,
        "topics": [topic_scores[rid].to_json_obj() for rid in sorted(topic_scores)],
        "macro": run_score.to_json_obj(),
    }


def _round6(value: float) -> float:
    return round(float(value), 6)
