"""Evaluation toolkit for citation-backed generated reports.

Reports are judged sentence by sentence: each citation is checked for
relevance and attestation, uncited sentences are checked for whether they
needed a citation, and report content is matched against per-topic nugget
questions. Judgments land in a resumable JSON Lines log, scores aggregate
per topic and per run, and rankings from two score sources can be compared
with rank correlation and pairwise significance agreement.
"""

from .gateway import (
    CacheEntry,
    ChatCompletionsGateway,
    FewShotExample,
    GatewayAnswer,
    GatewayConfig,
    GatewayError,
    PromptTemplate,
    ResponseCache,
    TemplateError,
    fingerprint,
    load_templates,
    parse_verdict,
)
from .judges import HumanLogJudge, Judge, JudgeAnswer, JudgeError, LLMJudge, OracleJudge
from .judging import (
    CitationOutcome,
    IncompleteLogError,
    JudgmentEngine,
    JudgmentKind,
    JudgmentRecord,
    Outcome,
    Provenance,
    ReportJudgments,
    SentenceOutcome,
    Verdict,
    aggregate_answered,
    derive_outcome,
    estimate_max_judge_calls,
    load_log,
    reconstruct_report_judgments,
    serialize_record,
)
from .meta import (
    AlignmentError,
    Direction,
    MetaEvalReport,
    PairDecision,
    ScoreMatrix,
    WilcoxonResult,
    agreement_accuracy,
    kendall_tau,
    matrix_from_scores_files,
    matrix_from_tsv,
    matrix_to_tsv,
    pair_decision,
    rank_runs,
    wilcoxon_signed_rank,
)
from .metrics import (
    FineStats,
    PrecisionMode,
    RunScore,
    TopicScore,
    f1,
    fine_stats,
    nugget_recall,
    score_run,
    score_topic,
    scores_to_json_obj,
    sentence_precision,
    zero_topic_score,
)
from .model import (
    IMPORTANCE_WEIGHTS,
    Answer,
    Combinator,
    Document,
    DocumentCollection,
    Importance,
    Nugget,
    NuggetBank,
    ParseError,
    RelevanceStore,
    Report,
    ReportRequest,
    Sentence,
    Severity,
    ValidationIssue,
    parse_documents,
    parse_nuggets,
    parse_qrels,
    parse_run,
    parse_topics,
    serialize_documents,
    serialize_nuggets,
    serialize_qrels,
    serialize_run,
    serialize_topics,
    validate_inputs,
)

__version__ = "0.1.0"

__all__ = [
    "Answer",
    "AlignmentError",
    "CacheEntry",
    "ChatCompletionsGateway",
    "CitationOutcome",
    "Combinator",
    "Direction",
    "Document",
    "DocumentCollection",
    "FewShotExample",
    "FineStats",
    "GatewayAnswer",
    "GatewayConfig",
    "GatewayError",
    "HumanLogJudge",
    "IMPORTANCE_WEIGHTS",
    "Importance",
    "IncompleteLogError",
    "Judge",
    "JudgeAnswer",
    "JudgeError",
    "JudgmentEngine",
    "JudgmentKind",
    "JudgmentRecord",
    "LLMJudge",
    "MetaEvalReport",
    "Nugget",
    "NuggetBank",
    "OracleJudge",
    "Outcome",
    "PairDecision",
    "ParseError",
    "PrecisionMode",
    "PromptTemplate",
    "Provenance",
    "RelevanceStore",
    "Report",
    "ReportJudgments",
    "ReportRequest",
    "ResponseCache",
    "RunScore",
    "ScoreMatrix",
    "Sentence",
    "SentenceOutcome",
    "Severity",
    "TemplateError",
    "TopicScore",
    "ValidationIssue",
    "Verdict",
    "WilcoxonResult",
    "aggregate_answered",
    "agreement_accuracy",
    "derive_outcome",
    "estimate_max_judge_calls",
    "f1",
    "fine_stats",
    "fingerprint",
    "kendall_tau",
    "load_log",
    "load_templates",
    "matrix_from_scores_files",
    "matrix_from_tsv",
    "matrix_to_tsv",
    "nugget_recall",
    "pair_decision",
    "parse_documents",
    "parse_nuggets",
    "parse_qrels",
    "parse_run",
    "parse_topics",
    "parse_verdict",
    "rank_runs",
    "reconstruct_report_judgments",
    "score_run",
    "score_topic",
    "scores_to_json_obj",
    "sentence_precision",
    "serialize_documents",
    "serialize_nuggets",
    "serialize_qrels",
    "serialize_record",
    "serialize_run",
    "serialize_topics",
    "validate_inputs",
    "wilcoxon_signed_rank",
    "zero_topic_score",
]
