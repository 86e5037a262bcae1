"""Shared fixtures: a small but fully featured evaluation corpus.

Three topics (river hydrology, harbor works, energy supply), twenty
documents, twelve nuggets covering ANY/ALL combinators, vital/okay
importance and one unanswerable question, and four runs of graded quality:

* r1 — strong: rewards, one neutral citation, one penalty sentence that
  still answers a nugget, an unanswerable claim, an ALL nugget answered
  across two sentences.
* r2 — middling: one reward, one missing-citation penalty, one
  non-attesting citation.
* r3 — weak: a citation to an unknown document, a duplicated citation,
  an uncited numeric claim; answers nothing.
* r4 — degenerate: an empty report for one topic and no report at all
  for another.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import pytest

from reporteval.cli import main as cli_main

DOCS = [
    {"doc_id": "d01", "title": "Arden flow record",
     "text": "Gauging stations record seasonal variation. The Arden river has an average "
             "discharge of 470 cubic meters per second. Peak flow arrives in April."},
    {"doc_id": "d02",
     "text": "Hydrologists agree. The Arden carries about 470 m3/s on average. "
             "Measurements continue."},
    {"doc_id": "d03",
     "text": "Dam infrastructure notes: flow is regulated by the Northgate dam upstream. "
             "Gates were refitted recently."},
    {"doc_id": "d04",
     "text": "Downstream control is provided by the Silverbrook dam. Spill gates open "
             "each spring."},
    {"doc_id": "d05", "text": "The basin survey was finished in 1998 by the county."},
    {"doc_id": "d06",
     "text": "Port authority bulletin. Harbor reconstruction began in spring. Funding "
             "was approved earlier."},
    {"doc_id": "d07", "text": "The port operates two cranes along the quay."},
    {"doc_id": "d08",
     "text": "The river flows north. Its delta spans the coastal plain. New wharves rest "
             "on steel pilings driven at the harbor mouth."},
    {"doc_id": "d09",
     "text": "Maintenance logs for the eastern canal. Concrete caissons anchor the "
             "breakwater."},
    {"doc_id": "d10", "text": "The terminal provides nine berths for cargo ships."},
    {"doc_id": "d11",
     "text": "Dredging opened a deepwater channel last autumn. Pilots praised the change."},
    {"doc_id": "d12", "text": "Regional energy report: solar output doubled within five years."},
    {"doc_id": "d13", "text": "Permitting delays meant wind farms stalled across the plateau."},
    {"doc_id": "d14", "text": "Utilities budgeted for grid upgrades in the capital plan."},
    {"doc_id": "d15", "text": "Pilot sites added battery storage beside substations."},
    {"doc_id": "d16", "text": "Import tariffs were cut for panel components."},
    {"doc_id": "d17", "text": "Census tables for coastal counties."},
    {"doc_id": "d18", "text": "Ferry schedules for the northern strait."},
    {"doc_id": "d19", "text": "Glossary of hydrological terms."},
    {"doc_id": "d20", "text": "Minutes of the planning board meeting."},
]

TOPICS = [
    {"request_id": "t1",
     "problem_statement": "Assess the hydrology of the Arden river basin.",
     "user_story": "As a regional planner, I need discharge and flood-control facts.",
     "collection_id": "col-main"},
    {"request_id": "t2",
     "problem_statement": "Describe the harbor modernization program.",
     "user_story": "As a port economist, I track infrastructure changes.",
     "collection_id": "col-main",
     "background": "The harbor expansion started after the storm season."},
    {"request_id": "t3",
     "problem_statement": "Explain recent shifts in regional energy supply.",
     "user_story": "As a policy analyst, I follow generation trends.",
     "collection_id": "col-main"},
]

NUGGETS = [
    {"request_id": "t1", "nuggets": [
        {"nugget_id": "n01", "question": "What is the average discharge of the Arden river?",
         "combinator": "ANY", "importance": "vital", "answers": [
             {"answer_id": "a1", "text": "470 cubic meters per second", "doc_ids": ["d01"]},
             {"answer_id": "a2", "text": "about 470 m3/s", "doc_ids": ["d02"]}]},
        {"nugget_id": "n02", "question": "Which dams regulate the Arden river?",
         "combinator": "ALL", "importance": "vital", "answers": [
             {"answer_id": "a1", "text": "the Northgate dam", "doc_ids": ["d03"]},
             {"answer_id": "a2", "text": "the Silverbrook dam", "doc_ids": ["d04"]}]},
        {"nugget_id": "n03", "question": "When was the basin survey finished?",
         "importance": "okay", "answers": [
             {"answer_id": "a1", "text": "in 1998", "doc_ids": ["d05"]}]},
        {"nugget_id": "n04", "question": "What caused the great flood?", "answers": []},
    ]},
    {"request_id": "t2", "nuggets": [
        {"nugget_id": "n05", "question": "When did harbor reconstruction begin?",
         "answers": [{"answer_id": "a1", "text": "began in spring", "doc_ids": ["d06"]}]},
        {"nugget_id": "n06", "question": "How many cranes does the port operate?",
         "importance": "okay", "answers": [
             {"answer_id": "a1", "text": "two cranes", "doc_ids": ["d07"]}]},
        {"nugget_id": "n07", "question": "What foundations support the new structures?",
         "combinator": "ALL", "answers": [
             {"answer_id": "a1", "text": "steel pilings", "doc_ids": ["d08"]},
             {"answer_id": "a2", "text": "concrete caissons", "doc_ids": ["d09"]}]},
        {"nugget_id": "n08", "question": "What expanded cargo capacity?", "answers": [
            {"answer_id": "a1", "text": "nine berths", "doc_ids": ["d10"]},
            {"answer_id": "a2", "text": "a deepwater channel", "doc_ids": ["d11"]}]},
    ]},
    {"request_id": "t3", "nuggets": [
        {"nugget_id": "n09", "question": "How did solar generation change?",
         "answers": [{"answer_id": "a1", "text": "solar output doubled", "doc_ids": ["d12"]}]},
        {"nugget_id": "n10", "question": "What happened to wind projects?",
         "importance": "okay", "answers": [
             {"answer_id": "a1", "text": "wind farms stalled", "doc_ids": ["d13"]}]},
        {"nugget_id": "n11", "question": "What investments supported the transition?",
         "combinator": "ALL", "answers": [
             {"answer_id": "a1", "text": "grid upgrades", "doc_ids": ["d14"]},
             {"answer_id": "a2", "text": "battery storage", "doc_ids": ["d15"]}]},
        {"nugget_id": "n12", "question": "What trade policy changed?",
         "answers": [{"answer_id": "a1", "text": "tariffs were cut", "doc_ids": ["d16"]}]},
    ]},
]

RUNS = [
    {"run_id": "r1", "request_id": "t1", "sentences": [
        {"text": "The Arden river has an average discharge of 470 cubic meters per second.",
         "citations": ["d01"]},
        {"text": "Flow is regulated by the Northgate dam upstream.", "citations": ["d03"]},
        {"text": "The river flows north.", "citations": ["d08"]},
        {"text": "Downstream control is provided by the Silverbrook dam.",
         "citations": ["d04"]},
        {"text": "A survey of the basin was completed in 1998.", "citations": ["d09"]},
        {"text": "The cause of the great flood could not be determined.", "citations": []},
        {"text": "Local agencies continue to monitor conditions.", "citations": []},
    ]},
    {"run_id": "r1", "request_id": "t2", "sentences": [
        {"text": "Harbor reconstruction began in spring.", "citations": ["d06"]},
        {"text": "New wharves rest on steel pilings driven at the harbor mouth.",
         "citations": ["d08"]},
        {"text": "Dredging opened a deepwater channel last autumn.", "citations": ["d11"]},
    ]},
    {"run_id": "r1", "request_id": "t3", "sentences": [
        {"text": "Solar output doubled within five years.", "citations": ["d12"]},
        {"text": "Import tariffs were cut for panel components.", "citations": ["d16"]},
    ]},
    {"run_id": "r2", "request_id": "t1", "sentences": [
        {"text": "The Arden carries about 470 m3/s on average.", "citations": ["d02"]},
        {"text": "Construction of flood defenses started in 2014.", "citations": []},
        {"text": "Officials expect rainfall to decline.", "citations": ["d05"]},
    ]},
    {"run_id": "r2", "request_id": "t2", "sentences": [
        {"text": "Harbor reconstruction began in spring.", "citations": ["d06"]},
    ]},
    {"run_id": "r2", "request_id": "t3", "sentences": [
        {"text": "Solar output doubled within five years.", "citations": ["d12"]},
    ]},
    {"run_id": "r3", "request_id": "t1", "sentences": [
        {"text": "Ancient records mention a vanished lake.", "citations": ["dX"]},
        {"text": "Engineers measured the flow rate.", "citations": ["d01", "d01"]},
    ]},
    {"run_id": "r3", "request_id": "t2", "sentences": [
        {"text": "Repairs cost 2 million dollars.", "citations": []},
    ]},
    {"run_id": "r3", "request_id": "t3", "sentences": [
        {"text": "Results remain inconclusive overall.", "citations": ["d12"]},
    ]},
    {"run_id": "r4", "request_id": "t1", "sentences": []},
    {"run_id": "r4", "request_id": "t2", "sentences": [
        {"text": "Harbor reconstruction began in spring.", "citations": ["d06"]},
    ]},
]

QRELS = """\
t1 0 d01 2
t1 0 d05 1
t1 0 d08 0
t3 0 d20 1
"""


def write_jsonl(path: Path, objs) -> Path:
    path.write_text("".join(json.dumps(o, ensure_ascii=False) + "\n" for o in objs),
                    encoding="utf-8")
    return path


@dataclass
class Corpus:
    root: Path
    runs: Path
    topics: Path
    nuggets: Path
    docs: Path
    qrels: Path


def build_corpus(root: Path, runs=RUNS) -> Corpus:
    root.mkdir(parents=True, exist_ok=True)
    qrels = root / "qrels.txt"
    qrels.write_text(QRELS, encoding="utf-8")
    return Corpus(
        root=root,
        runs=write_jsonl(root / "runs.jsonl", runs),
        topics=write_jsonl(root / "topics.jsonl", TOPICS),
        nuggets=write_jsonl(root / "nuggets.jsonl", NUGGETS),
        docs=write_jsonl(root / "docs.jsonl", DOCS),
        qrels=qrels,
    )


@pytest.fixture
def corpus(tmp_path: Path) -> Corpus:
    return build_corpus(tmp_path / "corpus")


# A bank with holes, for exercising the judged document-relevance path:
# nz1's only answer names no attesting document, nz2 is unanswerable.
LLM_DOCS = [
    {"doc_id": "e01", "text": "The observatory logged fourteen clear nights."},
    {"doc_id": "e02", "text": "Cloud cover varies with the monsoon."},
]

LLM_TOPICS = [
    {"request_id": "tz",
     "problem_statement": "Summarize observing conditions at the site.",
     "user_story": "As an astronomer, I plan telescope time.",
     "collection_id": "col-sky"},
]

LLM_NUGGETS = [
    {"request_id": "tz", "nuggets": [
        {"nugget_id": "nz1", "question": "How many clear nights were logged?",
         "answers": [{"answer_id": "a1", "text": "fourteen clear nights", "doc_ids": []}]},
        {"nugget_id": "nz2", "question": "What limits winter observing?", "answers": []},
    ]},
]

LLM_RUNS = [
    {"run_id": "rz", "request_id": "tz", "sentences": [
        {"text": "The observatory logged fourteen clear nights.", "citations": ["e01"]},
        {"text": "Seeing improved by 20 percent after the upgrade.", "citations": []},
    ]},
]


@pytest.fixture
def llm_corpus(tmp_path: Path) -> Corpus:
    root = tmp_path / "llm-corpus"
    root.mkdir(parents=True)
    qrels = root / "qrels.txt"
    qrels.write_text("", encoding="utf-8")
    return Corpus(
        root=root,
        runs=write_jsonl(root / "runs.jsonl", LLM_RUNS),
        topics=write_jsonl(root / "topics.jsonl", LLM_TOPICS),
        nuggets=write_jsonl(root / "nuggets.jsonl", LLM_NUGGETS),
        docs=write_jsonl(root / "docs.jsonl", LLM_DOCS),
        qrels=qrels,
    )


@pytest.fixture
def cli(capsys):
    """Invoke the command line in-process; returns (exit_code, stdout, stderr)."""

    def invoke(*args):
        code = cli_main([str(a) for a in args])
        captured = capsys.readouterr()
        return code, captured.out, captured.err

    return invoke
