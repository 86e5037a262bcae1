"""Command-line pipeline: validate → judge → score → meta → export-viz.

Subcommands hand off through files (run/topic/nugget/qrels/document inputs, a
JSON Lines judgment log, per-run scores JSON, a meta-evaluation report, and a
self-contained viz bundle). Exit codes are stable: 0 success, 1 validation
failure, 2 I/O or configuration failure, 3 judge failure, 4 incomplete
judgment log, 5 score-source misalignment. All output files are written
atomically; the API key is only ever read inside the gateway and never
printed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .gateway import ChatCompletionsGateway, GatewayConfig, GatewayError
from .judges import HumanLogJudge, Judge, JudgeError, LLMJudge, OracleJudge
from .judging import (
    IncompleteLogError,
    JudgmentEngine,
    JudgmentRecord,
    ReportJudgments,
    aggregate_answered,
    estimate_max_judge_calls,
    load_log,
    reconstruct_report_judgments,
    serialize_record,
)
from .meta import (
    AlignmentError,
    MetaEvalReport,
    ScoreMatrix,
    agreement_accuracy,
    matrix_from_scores_files,
    matrix_from_tsv,
    pair_table_to_tsv,
)
from .metrics import (
    PrecisionMode,
    TopicScore,
    score_run,
    score_topic,
    scores_to_json_obj,
    zero_topic_score,
)
from .model import (
    IMPORTANCE_WEIGHTS,
    DocumentCollection,
    NuggetBank,
    ParseError,
    RelevanceStore,
    Report,
    ReportRequest,
    Severity,
    ValidationIssue,
    parse_documents,
    parse_nuggets,
    parse_qrels,
    parse_run,
    parse_topics,
    validate_inputs,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_JUDGE = 3
EXIT_INCOMPLETE = 4
EXIT_MISALIGNMENT = 5


@dataclass
class Config:
    """Resolved invocation settings shared by the pipeline commands."""

    runs: Path | None = None
    topics: Path | None = None
    nuggets: Path | None = None
    qrels: Path | None = None
    docs: Path | None = None
    judge: str = "oracle"
    endpoint: str | None = None
    model: str | None = None
    api_key_env: str | None = None
    cache_dir: Path | None = None
    concurrency: int = 8
    alpha: float = 0.05
    precision_mode: PrecisionMode = PrecisionMode.CITED_ONLY
    weights: dict[str, float] = field(
        default_factory=lambda: {imp.value: w for imp, w in IMPORTANCE_WEIGHTS.items()}
    )

    def check(self) -> None:
        if self.concurrency < 1:
            raise ConfigError("concurrency must be at least 1")
        if any(w <= 0 for w in self.weights.values()):
            raise ConfigError("importance weights must be positive")
        if self.judge == "llm" and not (self.endpoint and self.model and self.cache_dir):
            raise ConfigError("llm judge requires --endpoint, --model, and --cache-dir")


class ConfigError(ValueError):
    pass


def _config_from_args(args: argparse.Namespace) -> Config:
    config = Config(
        runs=_maybe_path(getattr(args, "runs", None)),
        topics=_maybe_path(getattr(args, "topics", None)),
        nuggets=_maybe_path(getattr(args, "nuggets", None)),
        qrels=_maybe_path(getattr(args, "qrels", None)),
        docs=_maybe_path(getattr(args, "docs", None)),
        judge=getattr(args, "judge", "oracle"),
        endpoint=getattr(args, "endpoint", None),
        model=getattr(args, "model", None),
        api_key_env=getattr(args, "api_key_env", None),
        cache_dir=_maybe_path(getattr(args, "cache_dir", None)),
        concurrency=getattr(args, "concurrency", 8),
        alpha=getattr(args, "alpha", 0.05),
        precision_mode=PrecisionMode(getattr(args, "precision_mode", "cited")),
    )
    config.check()
    return config


def _maybe_path(value: str | None) -> Path | None:
    return None if value is None else Path(value)


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.{os.getpid()}.tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Shared loading
# ---------------------------------------------------------------------------


@dataclass
class Inputs:
    reports: list[Report]
    topics: list[ReportRequest]
    bank: NuggetBank
    collection: DocumentCollection
    relevance: RelevanceStore | None
    issues: list[ValidationIssue]

    @property
    def topics_by_id(self) -> dict[str, ReportRequest]:
        return {t.request_id: t for t in self.topics}


def _load_inputs(config: Config, need_docs: bool = True) -> Inputs:
    issues: list[ValidationIssue] = []
    assert config.runs and config.topics and config.nuggets
    reports = parse_run(config.runs, issues)
    topics = parse_topics(config.topics, issues)
    bank = parse_nuggets(config.nuggets, issues)
    collection = DocumentCollection(docs={})
    if need_docs:
        assert config.docs
        collection = parse_documents(config.docs, issues)
    relevance = parse_qrels(config.qrels, issues) if config.qrels else None
    issues.extend(validate_inputs(reports, topics, bank, collection))
    return Inputs(reports, topics, bank, collection, relevance, issues)


def _print_issues(issues: Iterable[ValidationIssue]) -> bool:
    """Print every issue; return True if any is an ERROR."""
    has_errors = False
    for issue in issues:
        print(issue)
        has_errors = has_errors or issue.severity is Severity.ERROR
    return has_errors


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------


def cmd_validate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    inputs = _load_inputs(config)
    has_errors = _print_issues(inputs.issues)
    n_runs = len({r.run_id for r in inputs.reports})
    print(
        f"checked {len(inputs.reports)} report(s) across {n_runs} run(s), "
        f"{len(inputs.topics)} topic(s): "
        f"{'FAIL' if has_errors else 'OK'} ({len(inputs.issues)} issue(s))"
    )
    return EXIT_VALIDATION if has_errors else EXIT_OK


# ---------------------------------------------------------------------------
# judge
# ---------------------------------------------------------------------------


def _build_judge(config: Config, args: argparse.Namespace) -> Judge:
    if config.judge == "oracle":
        return OracleJudge()
    if config.judge == "human-log":
        human_log = getattr(args, "human_log", None)
        if not human_log:
            raise ConfigError("human-log judge requires --human-log")
        return HumanLogJudge(load_log(human_log))
    assert config.judge == "llm"
    assert config.cache_dir is not None
    gateway = ChatCompletionsGateway(
        GatewayConfig(
            cache_dir=config.cache_dir,
            endpoint=config.endpoint,
            model=config.model or "",
            api_key_env=config.api_key_env,
        )
    )
    return LLMJudge(gateway)


def cmd_judge(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    inputs = _load_inputs(config)
    if _print_issues(inputs.issues):
        print("validation errors; not judging", file=sys.stderr)
        return EXIT_VALIDATION

    judge = _build_judge(config, args)
    out = Path(args.out)
    prior = load_log(out) if out.exists() else []
    engine = JudgmentEngine(
        inputs.bank, inputs.collection, judge, inputs.relevance, prior_records=prior
    )
    budget = sum(
        estimate_max_judge_calls(report, inputs.bank, inputs.collection, inputs.relevance)
        for report in inputs.reports
    )
    print(f"judging {len(inputs.reports)} report(s); judge-call budget <= {budget}")

    topics_by_id = inputs.topics_by_id

    def judge_one(report: Report) -> tuple[list[JudgmentRecord], JudgeError | None]:
        buffer: list[JudgmentRecord] = []
        try:
            engine.evaluate_report(report, topics_by_id[report.request_id],
                                   on_new_record=buffer.append)
        except JudgeError as exc:
            return buffer, exc
        return buffer, None

    out.parent.mkdir(parents=True, exist_ok=True)
    written = 0
    failure: JudgeError | None = None
    parallel = config.judge == "llm" and config.concurrency > 1 and len(inputs.reports) > 1
    with open(out, "a", encoding="utf-8") as handle:

        def drain(buffer: list[JudgmentRecord]) -> None:
            nonlocal written
            for record in buffer:
                handle.write(serialize_record(record) + "\n")
            written += len(buffer)
            handle.flush()

        if parallel:
            pool = ThreadPoolExecutor(max_workers=config.concurrency)
            try:
                futures = [(r, pool.submit(judge_one, r)) for r in inputs.reports]
                for report, future in futures:
                    buffer, error = future.result()
                    drain(buffer)
                    if error is not None:
                        failure = error
                        break
            finally:
                pool.shutdown(wait=True, cancel_futures=True)
        else:
            for report in inputs.reports:
                buffer, error = judge_one(report)
                drain(buffer)
                if error is not None:
                    failure = error
                    break

    if failure is not None:
        print(f"judge failure: {failure} (log flushed to {out})", file=sys.stderr)
        return EXIT_JUDGE
    print(f"wrote {written} new record(s) to {out} ({len(prior)} already present)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# score
# ---------------------------------------------------------------------------


def cmd_score(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    inputs = _load_inputs(config, need_docs=False)
    records = load_log(args.log)
    by_report: dict[tuple[str, str], list[JudgmentRecord]] = {}
    for record in records:
        by_report.setdefault((record.run_id, record.request_id), []).append(record)

    expected = sorted(t.request_id for t in inputs.topics)
    reports_by_run: dict[str, dict[str, Report]] = {}
    for report in inputs.reports:
        reports_by_run.setdefault(report.run_id, {})[report.request_id] = report

    out_dir = Path(args.out)
    for run_id in sorted(reports_by_run):
        run_reports = reports_by_run[run_id]
        scored: dict[str, TopicScore] = {}
        incomplete: list[str] = []
        for request_id, report in run_reports.items():
            report_records = by_report.get((run_id, request_id), [])
            try:
                judgments = reconstruct_report_judgments(
                    report, inputs.bank.nuggets_for(request_id), report_records
                )
            except IncompleteLogError as exc:
                if not args.allow_partial:
                    print(f"run {run_id}: {exc}", file=sys.stderr)
                    return EXIT_INCOMPLETE
                incomplete.append(request_id)
                continue
            scored[request_id] = score_topic(
                judgments, inputs.bank.nuggets_for(request_id), config.precision_mode
            )

        macro = score_run(run_id, scored, expected)
        all_topics = dict(scored)
        for request_id in expected:
            if request_id in all_topics:
                continue
            flag = "incomplete_log" if request_id in incomplete else "missing_report"
            all_topics[request_id] = zero_topic_score(request_id, flags=(flag,))
        payload = scores_to_json_obj(macro, all_topics)
        out_path = out_dir / f"{run_id}.json"
        write_atomic(out_path, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")
        summary = f"run {run_id}: wrote {out_path}"
        if macro.missing_topics:
            summary += f" (zero-filled topics: {', '.join(macro.missing_topics)})"
        print(summary)
    return EXIT_OK


# ---------------------------------------------------------------------------
# meta
# ---------------------------------------------------------------------------


def _load_matrices(source: Path, metrics: Sequence[str]) -> dict[str, ScoreMatrix]:
    if source.is_dir():
        paths = sorted(source.glob("*.json"))
        if not paths:
            raise FileNotFoundError(f"no scores files in {source}")
        return {metric: matrix_from_scores_files(paths, metric) for metric in metrics}
    return {metrics[0]: matrix_from_tsv(source.read_text(encoding="utf-8"))}


def cmd_meta(args: argparse.Namespace) -> int:
    human_path = Path(args.human)
    auto_path = Path(args.auto)
    if human_path.is_dir() != auto_path.is_dir():
        raise AlignmentError("score sources must both be directories or both TSV files")
    if human_path.is_dir():
        metrics = ("sentence_precision", "nugget_recall")
    else:
        metrics = (args.metric,)
    human_matrices = _load_matrices(human_path, metrics)
    auto_matrices = _load_matrices(auto_path, metrics)

    reports: dict[str, MetaEvalReport] = {}
    for metric in metrics:
        reports[metric] = agreement_accuracy(
            human_matrices[metric], auto_matrices[metric], args.alpha, metric_name=metric
        )
        print(
            f"{metric}: tau={reports[metric].tau:.4f} "
            f"agreement_accuracy={reports[metric].agreement_accuracy:.4f} "
            f"over {reports[metric].n_pairs} pair(s)"
        )

    payload = {"alpha": args.alpha, "reports": {m: r.to_json_obj() for m, r in reports.items()}}
    out = Path(args.out)
    write_atomic(out, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")
    print(f"wrote {out}")

    if args.pair_table:
        base = Path(args.pair_table)
        for metric, report in reports.items():
            path = base if len(reports) == 1 else base.with_name(
                f"{base.stem}.{metric}{base.suffix or '.tsv'}"
            )
            write_atomic(path, pair_table_to_tsv(report))
            print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# export-viz
# ---------------------------------------------------------------------------


def build_viz_bundle(
    scores_obj: dict,
    reports_by_request: Mapping[str, Report],
    bank: NuggetBank,
    judgments_by_request: Mapping[str, ReportJudgments],
) -> dict:
    """Assemble the bundle; metric values are copied verbatim from the scores file."""
    topics_out = []
    for topic_scores in scores_obj["topics"]:
        request_id = topic_scores["request_id"]
        nuggets = bank.nuggets_for(request_id)
        judgments = judgments_by_request.get(request_id)
        report = reports_by_request.get(request_id)

        sentences_out = []
        answered_ids: frozenset[str] = frozenset()
        answering_sentences: dict[str, list[int]] = {n.nugget_id: [] for n in nuggets}
        if judgments is not None and report is not None:
            answered_ids = aggregate_answered(judgments, nuggets)
            for sentence, outcome in zip(report.sentences, judgments.sentence_outcomes):
                for nugget_id, _answer_id in outcome.answered:
                    answering_sentences[nugget_id].append(sentence.index)
                for nugget_id in outcome.unanswerable_claims:
                    answering_sentences[nugget_id].append(sentence.index)
                sentences_out.append(
                    {
                        "index": sentence.index,
                        "text": sentence.text,
                        "citations": [
                            {
                                "doc_id": c.doc_id,
                                "relevant": c.relevant,
                                "attests": c.attests,
                                "outcome": c.outcome.value,
                            }
                            for c in outcome.citation_outcomes
                        ],
                        "missing_citation_penalty": outcome.missing_citation_penalty,
                        "answers": [
                            {"nugget_id": nugget_id, "answer_id": answer_id}
                            for nugget_id, answer_id in sorted(outcome.answered)
                        ],
                    }
                )

        nuggets_out = [
            {
                "nugget_id": nugget.nugget_id,
                "question": nugget.question,
                "importance": nugget.importance.value,
                "combinator": nugget.combinator.value,
                "answered": nugget.nugget_id in answered_ids,
                "answered_by_sentences": sorted(set(answering_sentences[nugget.nugget_id])),
            }
            for nugget in nuggets
        ]
        topics_out.append(
            {
                "request_id": request_id,
                "metrics": topic_scores,
                "sentences": sentences_out,
                "nuggets": nuggets_out,
            }
        )
    return {"run_id": scores_obj["run_id"], "macro": scores_obj["macro"], "topics": topics_out}


def cmd_export_viz(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    inputs = _load_inputs(config, need_docs=False)

    run_ids = sorted({r.run_id for r in inputs.reports})
    run_id = args.run_id
    if run_id is None:
        if len(run_ids) != 1:
            print(f"run file contains {len(run_ids)} runs; pick one with --run-id",
                  file=sys.stderr)
            return EXIT_VALIDATION
        run_id = run_ids[0]
    elif run_id not in run_ids:
        print(f"run {run_id} not present in {config.runs}", file=sys.stderr)
        return EXIT_VALIDATION

    scores_path = Path(args.scores)
    if scores_path.is_dir():
        scores_path = scores_path / f"{run_id}.json"
    scores_obj = json.loads(scores_path.read_text(encoding="utf-8"))
    if scores_obj.get("run_id") != run_id:
        print(f"scores file {scores_path} is for run {scores_obj.get('run_id')}, "
              f"not {run_id}", file=sys.stderr)
        return EXIT_VALIDATION

    records = load_log(args.log)
    by_request: dict[str, list[JudgmentRecord]] = {}
    for record in records:
        if record.run_id == run_id:
            by_request.setdefault(record.request_id, []).append(record)

    reports_by_request = {r.request_id: r for r in inputs.reports if r.run_id == run_id}
    judgments_by_request: dict[str, ReportJudgments] = {}
    for request_id, report in reports_by_request.items():
        judgments_by_request[request_id] = reconstruct_report_judgments(
            report, inputs.bank.nuggets_for(request_id), by_request.get(request_id, [])
        )

    bundle = build_viz_bundle(scores_obj, reports_by_request, inputs.bank, judgments_by_request)
    out = Path(args.out)
    write_atomic(out, json.dumps(bundle, ensure_ascii=False, indent=2) + "\n")
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _add_input_flags(parser: argparse.ArgumentParser, docs: bool = True) -> None:
    parser.add_argument("--runs", required=True, help="run file (JSON Lines of reports)")
    parser.add_argument("--topics", required=True, help="topics file (JSON Lines)")
    parser.add_argument("--nuggets", required=True, help="nugget file (JSON Lines)")
    if docs:
        parser.add_argument("--docs", required=True, help="document collection (JSON Lines)")
    parser.add_argument("--qrels", help="optional relevance judgments (four-column text)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reporteval",
        description="Judge citation-backed reports, score them, and compare rankings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="check input files and cross-references")
    _add_input_flags(p_validate)
    p_validate.set_defaults(handler=cmd_validate)

    p_judge = sub.add_parser("judge", help="walk the judgment tree and write the log")
    _add_input_flags(p_judge)
    p_judge.add_argument("--judge", choices=["oracle", "llm", "human-log"], default="oracle")
    p_judge.add_argument("--out", required=True, help="judgment log path (JSON Lines, appended)")
    p_judge.add_argument("--endpoint", help="chat-completions base URL (llm judge)")
    p_judge.add_argument("--model", help="model name (llm judge)")
    p_judge.add_argument("--api-key-env", dest="api_key_env",
                         help="name of the environment variable holding the API key")
    p_judge.add_argument("--cache-dir", dest="cache_dir", help="response cache directory")
    p_judge.add_argument("--concurrency", type=int, default=8,
                         help="max in-flight judge calls (llm judge)")
    p_judge.add_argument("--human-log", dest="human_log",
                         help="existing judgment log to replay (human-log judge)")
    p_judge.set_defaults(handler=cmd_judge)

    p_score = sub.add_parser("score", help="compute topic and run scores from a judgment log")
    p_score.add_argument("--runs", required=True)
    p_score.add_argument("--topics", required=True)
    p_score.add_argument("--nuggets", required=True)
    p_score.add_argument("--log", required=True, help="judgment log path")
    p_score.add_argument("--out", required=True, help="output directory for per-run scores JSON")
    p_score.add_argument("--precision-mode", dest="precision_mode",
                         choices=["cited", "cited-or-required"], default="cited")
    p_score.add_argument("--allow-partial", action="store_true",
                         help="zero-fill topics whose judgments are incomplete")
    p_score.set_defaults(handler=cmd_score)

    p_meta = sub.add_parser("meta", help="compare two score sources (tau + pairwise agreement)")
    p_meta.add_argument("human", help="scores directory or TSV matrix (reference source)")
    p_meta.add_argument("auto", help="scores directory or TSV matrix (automatic source)")
    p_meta.add_argument("--out", required=True, help="meta-evaluation report JSON path")
    p_meta.add_argument("--alpha", type=float, default=0.05,
                        help="significance level (p <= alpha is significant)")
    p_meta.add_argument("--metric", default="scores",
                        help="metric label when comparing TSV matrices")
    p_meta.add_argument("--pair-table", dest="pair_table",
                        help="also write the per-pair decisions as TSV")
    p_meta.set_defaults(handler=cmd_meta)

    p_export = sub.add_parser("export-viz", help="bundle judgments and scores for the viewer")
    p_export.add_argument("--runs", required=True)
    p_export.add_argument("--topics", required=True)
    p_export.add_argument("--nuggets", required=True)
    p_export.add_argument("--log", required=True, help="judgment log path")
    p_export.add_argument("--scores", required=True, help="scores JSON file or directory")
    p_export.add_argument("--run-id", dest="run_id", help="run to export (required if several)")
    p_export.add_argument("--out", required=True, help="bundle JSON path")
    p_export.set_defaults(handler=cmd_export_viz)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ParseError as exc:
        print(exc.issue, file=sys.stderr)
        return EXIT_VALIDATION
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AlignmentError as exc:
        print(f"misaligned score sources: {exc}", file=sys.stderr)
        return EXIT_MISALIGNMENT
    except IncompleteLogError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INCOMPLETE
    except (JudgeError, GatewayError) as exc:
        print(f"judge failure: {exc}", file=sys.stderr)
        return EXIT_JUDGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
