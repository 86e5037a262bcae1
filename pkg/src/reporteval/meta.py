"""Meta-evaluation: does an automatic score source rank systems like a human one?

Two views over a pair of run × topic score matrices: Kendall's tau-b on the
macro-score rankings, and pairwise agreement accuracy — for every unordered
run pair, a Wilcoxon signed-rank test per source, agreeing iff both reach the
same three-way conclusion (first better / second better / no significant
difference).

The Wilcoxon p-value is exact for effective n ≤ 25, computed by dynamic
programming over doubled signed-rank sums — the same distribution as
enumerating all 2**n sign assignments, without the exponential blowup. Zero
differences are discarded; tied absolute differences receive mean ranks; the
significance boundary is inclusive (p ≤ alpha).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

#: Largest effective sample size for which the exact p-value is computed.
EXACT_P_MAX_N = 25


class AlignmentError(ValueError):
    """Two score sources disagree on their run or topic sets."""


@dataclass(frozen=True)
class ScoreMatrix:
    runs: tuple[str, ...]
    topics: tuple[str, ...]
    values: tuple[tuple[float, ...], ...]  # one row per run

    def __post_init__(self):
        if len(self.values) != len(self.runs):
            raise ValueError("one value row required per run")
        for run_id, row in zip(self.runs, self.values):
            if len(row) != len(self.topics):
                raise ValueError(f"row for {run_id} has {len(row)} values, "
                                 f"expected {len(self.topics)}")
        if len(set(self.runs)) != len(self.runs):
            raise ValueError("duplicate run ids")
        if len(set(self.topics)) != len(self.topics):
            raise ValueError("duplicate topic ids")

    def row(self, run_id: str) -> tuple[float, ...]:
        return self.values[self.runs.index(run_id)]

    def macro(self, run_id: str) -> float:
        row = self.row(run_id)
        return sum(row) / len(row)

    def reindexed(self, runs: Sequence[str], topics: Sequence[str]) -> "ScoreMatrix":
        """Same data with rows/columns in the given order (must be permutations)."""
        column_of = {topic: i for i, topic in enumerate(self.topics)}
        rows = []
        for run_id in runs:
            row = self.row(run_id)
            rows.append(tuple(row[column_of[topic]] for topic in topics))
        return ScoreMatrix(runs=tuple(runs), topics=tuple(topics), values=tuple(rows))


def matrix_from_tsv(text: str) -> ScoreMatrix:
    """Header `run_id <tab> topic...`, one row of scores per run."""
    lines = [line.rstrip("\n") for line in text.splitlines() if line.strip()]
    if not lines:
        raise ValueError("empty score matrix")
    header = lines[0].split("\t")
    if len(header) < 2:
        raise ValueError("matrix header needs a run_id column and at least one topic")
    topics = tuple(header[1:])
    runs: list[str] = []
    values: list[tuple[float, ...]] = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != len(header):
            raise ValueError(f"line {lineno}: expected {len(header)} fields, got {len(fields)}")
        runs.append(fields[0])
        try:
            values.append(tuple(float(v) for v in fields[1:]))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: non-numeric score") from exc
    return ScoreMatrix(runs=tuple(runs), topics=tuple(topics), values=tuple(values))


def matrix_to_tsv(matrix: ScoreMatrix) -> str:
    lines = ["\t".join(("run_id",) + matrix.topics)]
    for run_id, row in zip(matrix.runs, matrix.values):
        lines.append("\t".join((run_id,) + tuple(f"{v:.6f}" for v in row)))
    return "\n".join(lines) + "\n"


def matrix_from_scores_files(paths: Iterable[str | Path], metric: str) -> ScoreMatrix:
    """Build a matrix from per-run scores files (one JSON file per run)."""
    runs: list[str] = []
    per_run: list[dict[str, float]] = []
    for path in sorted(Path(p) for p in paths):
        obj = json.loads(path.read_text(encoding="utf-8"))
        topics = {}
        for topic in obj["topics"]:
            if metric not in topic:
                raise ValueError(f"{path.name}: topic {topic.get('request_id')} "
                                 f"has no metric {metric}")
            topics[topic["request_id"]] = float(topic[metric])
        runs.append(obj["run_id"])
        per_run.append(topics)
    if not runs:
        raise ValueError("no scores files found")
    topic_ids = sorted(per_run[0])
    for run_id, topics in zip(runs, per_run):
        if sorted(topics) != topic_ids:
            raise AlignmentError(f"run {run_id} covers different topics than {runs[0]}")
    values = tuple(tuple(topics[t] for t in topic_ids) for topics in per_run)
    return ScoreMatrix(runs=tuple(runs), topics=tuple(topic_ids), values=values)


# ---------------------------------------------------------------------------
# Rankings and rank correlation
# ---------------------------------------------------------------------------


def rank_runs(matrix: ScoreMatrix) -> list[tuple[str, float]]:
    """Descending by macro score; ties broken lexicographically by run id."""
    if not matrix.runs:
        raise ValueError("empty matrix")
    scored = [(run_id, matrix.macro(run_id)) for run_id in matrix.runs]
    return sorted(scored, key=lambda pair: (-pair[1], pair[0]))


def kendall_tau(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Tau-b: concordant-minus-discordant pairs, corrected for ties."""
    n = len(xs)
    if n != len(ys):
        raise ValueError("score vectors differ in length")
    if n < 2:
        raise ValueError("tau needs at least 2 items")
    concordant_minus_discordant = 0
    tied_x = 0  # pairs tied in xs
    tied_y = 0  # pairs tied in ys
    for i in range(n):
        for j in range(i + 1, n):
            dx = xs[i] - xs[j]
            dy = ys[i] - ys[j]
            if dx == 0:
                tied_x += 1
            if dy == 0:
                tied_y += 1
            if dx != 0 and dy != 0:
                concordant_minus_discordant += 1 if (dx > 0) == (dy > 0) else -1
    n0 = n * (n - 1) // 2
    denominator = math.sqrt((n0 - tied_x) * (n0 - tied_y))
    if denominator == 0:
        raise ValueError("tau undefined: one vector is entirely tied")
    return concordant_minus_discordant / denominator


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank test
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # min(W+, W-)
    p_value: float
    direction_hint: int  # +1: x larger, -1: y larger, 0: balanced
    n_effective: int  # pairs remaining after discarding zero differences
    method: str  # "exact" | "normal"


def _signed_ranks(diffs: Sequence[float]) -> list[tuple[int, int]]:
    """(doubled mean rank, sign) per difference. Doubling keeps ranks integral."""
    order = sorted(range(len(diffs)), key=lambda i: abs(diffs[i]))
    doubled = [0] * len(diffs)
    position = 0
    while position < len(order):
        tail = position
        while (tail + 1 < len(order)
               and abs(diffs[order[tail + 1]]) == abs(diffs[order[position]])):
            tail += 1
        # ranks position+1 .. tail+1 share the mean; doubled mean = sum of ends
        doubled_mean = (position + 1) + (tail + 1)
        for k in range(position, tail + 1):
            doubled[order[k]] = doubled_mean
        position = tail + 1
    return [(doubled[i], 1 if diffs[i] > 0 else -1) for i in range(len(diffs))]


def _exact_p(doubled_ranks: Sequence[int], doubled_statistic: int) -> float:
    """Two-sided exact p over all sign assignments, by convolution.

    counts[w] = number of sign patterns whose positive doubled-rank sum is w;
    identical to enumerating 2**n patterns because each pattern contributes
    its ranks independently.
    """
    total_doubled = sum(doubled_ranks)
    counts = [0] * (total_doubled + 1)
    counts[0] = 1
    for rank in doubled_ranks:
        for w in range(total_doubled, rank - 1, -1):
            counts[w] += counts[w - rank]
    below = sum(counts[w] for w in range(0, doubled_statistic + 1))
    p = 2 * below / (2 ** len(doubled_ranks))
    return min(1.0, p)


def _normal_p(doubled_ranks: Sequence[int], statistic: float, n: int) -> float:
    mu = n * (n + 1) / 4
    tie_term = 0.0
    seen: dict[int, int] = {}
    for rank in doubled_ranks:
        seen[rank] = seen.get(rank, 0) + 1
    for count in seen.values():
        tie_term += count**3 - count
    sigma_sq = n * (n + 1) * (2 * n + 1) / 24 - tie_term / 48
    sigma = math.sqrt(sigma_sq)
    # statistic = min(W+, W-) <= mu; continuity correction moves toward the mean
    z = (statistic - mu + 0.5) / sigma
    p = math.erfc(-z / math.sqrt(2))
    return min(1.0, p)


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float]) -> WilcoxonResult:
    """Paired two-sided test on per-topic score differences x - y."""
    if len(x) != len(y):
        raise ValueError("paired score vectors differ in length")
    diffs = [a - b for a, b in zip(x, y) if a != b]
    n = len(diffs)
    if n == 0:
        return WilcoxonResult(statistic=0.0, p_value=1.0, direction_hint=0,
                              n_effective=0, method="exact")
    ranks = _signed_ranks(diffs)
    w_plus_doubled = sum(rank for rank, sign in ranks if sign > 0)
    w_minus_doubled = sum(rank for rank, sign in ranks if sign < 0)
    doubled_statistic = min(w_plus_doubled, w_minus_doubled)
    statistic = doubled_statistic / 2
    if w_plus_doubled > w_minus_doubled:
        direction = 1
    elif w_plus_doubled < w_minus_doubled:
        direction = -1
    else:
        direction = 0
    doubled_ranks = [rank for rank, _sign in ranks]
    if n <= EXACT_P_MAX_N:
        p = _exact_p(doubled_ranks, doubled_statistic)
        method = "exact"
    else:
        p = _normal_p(doubled_ranks, statistic, n)
        method = "normal"
    return WilcoxonResult(statistic=statistic, p_value=p, direction_hint=direction,
                          n_effective=n, method=method)


# ---------------------------------------------------------------------------
# Pair decisions and agreement
# ---------------------------------------------------------------------------


class Direction(Enum):
    A_BETTER = "A_BETTER"
    B_BETTER = "B_BETTER"
    NO_SIG_DIFF = "NO_SIG_DIFF"


@dataclass(frozen=True)
class PairDecision:
    run_a: str
    run_b: str
    direction: Direction
    p_value: float
    statistic: float

    def to_json_obj(self) -> dict:
        return {
            "run_a": self.run_a,
            "run_b": self.run_b,
            "direction": self.direction.value,
            "p_value": self.p_value,
            "statistic": self.statistic,
        }


def pair_decision(run_a: str, run_b: str, x: Sequence[float], y: Sequence[float],
                  alpha: float) -> PairDecision:
    result = wilcoxon_signed_rank(x, y)
    if result.p_value <= alpha and result.direction_hint != 0:
        direction = Direction.A_BETTER if result.direction_hint > 0 else Direction.B_BETTER
    else:
        direction = Direction.NO_SIG_DIFF
    return PairDecision(run_a=run_a, run_b=run_b, direction=direction,
                        p_value=result.p_value, statistic=result.statistic)


@dataclass(frozen=True)
class PairAgreement:
    human: PairDecision
    auto: PairDecision
    agree: bool


@dataclass(frozen=True)
class MetaEvalReport:
    metric_name: str
    alpha: float
    tau: float
    agreement_accuracy: float
    n_runs: int
    n_pairs: int
    pairs: tuple[PairAgreement, ...]

    def to_json_obj(self) -> dict:
        return {
            "metric_name": self.metric_name,
            "alpha": self.alpha,
            "tau": self.tau,
            "agreement_accuracy": self.agreement_accuracy,
            "n_runs": self.n_runs,
            "n_pairs": self.n_pairs,
            "conventions": {
                "tau_variant": "b",
                "zero_differences": "discarded",
                "tie_ranks": "mean",
                "exact_p_max_n": EXACT_P_MAX_N,
                "significance_boundary": "p <= alpha",
            },
            "pairs": [
                {
                    "human": agreement.human.to_json_obj(),
                    "auto": agreement.auto.to_json_obj(),
                    "agree": agreement.agree,
                }
                for agreement in self.pairs
            ],
        }


def agreement_accuracy(matrix_human: ScoreMatrix, matrix_auto: ScoreMatrix, alpha: float,
                       metric_name: str = "scores") -> MetaEvalReport:
    """Three-way direction agreement over all unordered run pairs, plus tau."""
    run_diff = set(matrix_human.runs) ^ set(matrix_auto.runs)
    if run_diff:
        raise AlignmentError(f"run sets differ: {sorted(run_diff)}")
    topic_diff = set(matrix_human.topics) ^ set(matrix_auto.topics)
    if topic_diff:
        raise AlignmentError(f"topic sets differ: {sorted(topic_diff)}")
    runs = sorted(matrix_human.runs)
    topics = sorted(matrix_human.topics)
    if len(runs) < 2:
        raise ValueError("agreement needs at least 2 runs")
    human = matrix_human.reindexed(runs, topics)
    auto = matrix_auto.reindexed(runs, topics)

    pairs: list[PairAgreement] = []
    agreeing = 0
    for i in range(len(runs)):
        for j in range(i + 1, len(runs)):
            run_a, run_b = runs[i], runs[j]
            decision_human = pair_decision(run_a, run_b, human.values[i], human.values[j], alpha)
            decision_auto = pair_decision(run_a, run_b, auto.values[i], auto.values[j], alpha)
            agree = decision_human.direction is decision_auto.direction
            agreeing += agree
            pairs.append(PairAgreement(human=decision_human, auto=decision_auto, agree=agree))

    n_pairs = len(pairs)
    tau = kendall_tau([human.macro(r) for r in runs], [auto.macro(r) for r in runs])
    return MetaEvalReport(
        metric_name=metric_name,
        alpha=alpha,
        tau=tau,
        agreement_accuracy=agreeing / n_pairs,
        n_runs=len(runs),
        n_pairs=n_pairs,
        pairs=tuple(pairs),
    )


def pair_table_to_tsv(report: MetaEvalReport) -> str:
    lines = ["\t".join((
        "run_a", "run_b",
        "human_direction", "human_p", "auto_direction", "auto_p", "agree",
    ))]
    for agreement in report.pairs:
        human, auto = agreement.human, agreement.auto
        lines.append("\t".join((
            human.run_a,
            human.run_b,
            human.direction.value,
            f"{human.p_value:.6g}",
            auto.direction.value,
            f"{auto.p_value:.6g}",
            "yes" if agreement.agree else "no",
        )))
    return "\n".join(lines) + "\n"
