"""Scoring, baselines and report assembly for matching experiments.

Accuracy is micro-averaged: correct and possible match counts are pooled
over all problems of a (method, setting) cell before dividing, so the
reported number is total correct matches over total possible matches.
The possible-match denominator is the multiset intersection of the two
scenes' label multisets; objects without a counterpart never count.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .benchgen import MatchingProblem
from .embed import (
    EmbeddingSet,
    classify_matrix,
    semantic_similarity,
    visual_similarity,
)
from .errors import ForeignCropId, MethodConfigError, MissingEmbedding
from .matchers import (
    METHOD_ARGMAX,
    METHOD_HUNGARIAN,
    AssignmentResult,
    assign_argmax,
    assign_hungarian,
    match_discrete,
)

SCHEMA_VERSION = "semmatch-report-1"

_Z95 = 1.959963984540054


def matching_accuracy(
    result: AssignmentResult, problem: MatchingProblem
) -> tuple[int, int]:
    """(correct, possible) matches for one problem.

    possible is the multiset intersection of source and target label
    multisets. A pair counts as correct when its crops share a class
    label; for instance-level problems it must additionally be a
    ground-truth pair. Per label, correct is capped at the intersection
    count so many-to-one argmax collapse can never exceed 100%.
    """
    src_label = {c.crop_id: c.class_label for c in problem.source_crops}
    tgt_label = {c.crop_id: c.class_label for c in problem.target_crops}
    for t, s in result.pairs:
        if t not in tgt_label or s not in src_label:
            raise ForeignCropId(f"pair ({t!r}, {s!r}) references crops outside the problem")
    intersection = Counter(src_label.values()) & Counter(tgt_label.values())
    possible = sum(intersection.values())
    if problem.instance_level and problem.ground_truth:
        correct = len(result.pairs & problem.ground_truth)
    else:
        agree = Counter(
            tgt_label[t] for t, s in result.pairs if tgt_label[t] == src_label[s]
        )
        correct = sum(min(agree[lab], intersection[lab]) for lab in agree)
    return correct, possible


def random_baseline(n: int, trials: int, seed: int = 0) -> float:
    """Monte Carlo accuracy of uniformly random permutations on n-way problems.

    The analytic expectation is 100/n: a uniform random permutation has
    one fixed point on average.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if n == 1:
        return 100.0
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    chunk = max(1, min(trials, 200_000))
    idx = np.arange(n)
    while done < trials:
        take = min(chunk, trials - done)
        perms = np.argsort(rng.random((take, n)), axis=1)
        hits += int((perms == idx).sum())
        done += take
    return 100.0 * hits / (trials * n)


def wilson_interval(correct: int, possible: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion, in percent."""
    if possible == 0:
        return (0.0, 100.0)
    p = correct / possible
    denom = 1.0 + z * z / possible
    centre = (p + z * z / (2 * possible)) / denom
    half = (z / denom) * np.sqrt(p * (1 - p) / possible + z * z / (4 * possible**2))
    lo = 100.0 * max(0.0, centre - half)
    hi = 100.0 * min(1.0, centre + half)
    # guarantee the interval brackets the point estimate despite rounding
    acc = 100.0 * p
    return (float(min(lo, acc)), float(max(hi, acc)))


@dataclass(frozen=True)
class MethodSpec:
    """One matching method: which features it reads and how it scores.

    kind is one of visual / semfeat / discrete. Semantic kinds need a
    prompt-embedding key and a label scope: "n" restricts prompts to the
    labels present in the problem's target crops, "k" uses every prompt.
    ``source_features`` overrides the embedding store used for source
    crops (e.g. a degraded-view copy).
    """

    name: str
    kind: str
    features: str
    source_features: str | None = None
    label_scope: str = "n"
    prompts: str | None = None

    def __post_init__(self):
        if self.kind not in ("visual", "semfeat", "discrete"):
            raise MethodConfigError(f"unknown method kind {self.kind!r}")
        if self.kind in ("semfeat", "discrete"):
            if self.prompts is None:
                raise MethodConfigError(f"method {self.name!r} needs a prompts key")
            if self.label_scope not in ("n", "k"):
                raise MethodConfigError(f"label_scope must be n or k")

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "features": self.features,
            "source_features": self.source_features,
            "label_scope": self.label_scope,
            "prompts": self.prompts,
        }


@dataclass(frozen=True)
class ReportRow:
    method: str
    assignment: str
    setting: str
    correct_matches: int
    possible_matches: int
    accuracy_pct: float
    problem_count: int
    wilson_95_interval: tuple[float, float]


@dataclass(frozen=True)
class BenchmarkReport:
    rows: tuple[ReportRow, ...]
    config_digest: str
    schema_version: str = SCHEMA_VERSION

    def row(self, method: str, setting: str, assignment: str | None = None) -> ReportRow:
        for r in self.rows:
            if r.method == method and r.setting == setting:
                if assignment is None or r.assignment == assignment:
                    return r
        raise KeyError(f"no row for ({method}, {setting}, {assignment})")

    def to_json_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "config_digest": self.config_digest,
            "rows": [
                {
                    "method": r.method,
                    "assignment": r.assignment,
                    "setting": r.setting,
                    "correct_matches": r.correct_matches,
                    "possible_matches": r.possible_matches,
                    "accuracy_pct": r.accuracy_pct,
                    "problem_count": r.problem_count,
                    "wilson_95_lo": r.wilson_95_interval[0],
                    "wilson_95_hi": r.wilson_95_interval[1],
                }
                for r in self.rows
            ],
        }


def _subset(store: EmbeddingSet, ids: Sequence[str], store_name: str) -> EmbeddingSet:
    index = store.row_index()
    missing = [i for i in ids if i not in index]
    if missing:
        raise MissingEmbedding(missing[0], store_name)
    return store.rows_for(ids)


def _prompt_subset(
    prompts: EmbeddingSet, labels: Sequence[str], store_name: str
) -> EmbeddingSet:
    keep = [lab for lab in prompts.crop_ids if lab in set(labels)]
    missing = sorted(set(labels) - set(prompts.crop_ids))
    if missing:
        raise MissingEmbedding(missing[0], store_name)
    return prompts.rows_for(keep)


def _score_problem(
    problem: MatchingProblem,
    method: MethodSpec,
    embeddings: Mapping[str, EmbeddingSet],
    prompt_sets: Mapping[str, EmbeddingSet],
    assignment: str,
) -> tuple[int, int]:
    feat_key = method.features
    src_key = method.source_features or feat_key
    if feat_key not in embeddings or src_key not in embeddings:
        missing = feat_key if feat_key not in embeddings else src_key
        raise MethodConfigError(f"method {method.name!r}: no embedding store {missing!r}")
    target = _subset(embeddings[feat_key], problem.target_ids, feat_key)
    source = _subset(embeddings[src_key], problem.source_ids, src_key)

    if method.kind == "visual":
        sim = visual_similarity(source, target)
        result = assign_argmax(sim) if assignment == METHOD_ARGMAX else assign_hungarian(sim)
        return matching_accuracy(result, problem)

    prompts = prompt_sets.get(method.prompts)
    if prompts is None:
        raise MethodConfigError(f"method {method.name!r}: no prompt store {method.prompts!r}")
    if method.label_scope == "n":
        present = [c.class_label for c in problem.target_crops]
        prompts = _prompt_subset(prompts, present, method.prompts)
    c_t = classify_matrix(target, prompts)
    c_s = classify_matrix(source, prompts)
    if method.kind == "discrete":
        result = match_discrete(c_s, c_t)
    else:
        sim = semantic_similarity(c_s, c_t)
        result = assign_argmax(sim) if assignment == METHOD_ARGMAX else assign_hungarian(sim)
    return matching_accuracy(result, problem)


def config_digest(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def run_benchmark(
    problems: Sequence[MatchingProblem],
    methods: Sequence[MethodSpec],
    embeddings: Mapping[str, EmbeddingSet],
    prompt_sets: Mapping[str, EmbeddingSet] | None = None,
    assignment_mode: str = METHOD_HUNGARIAN,
    jobs: int = 1,
) -> BenchmarkReport:
    """Score every method over every problem and aggregate per setting.

    ``assignment_mode`` is argmax, hungarian or both; discrete methods
    ignore it (their pairing is fixed by construction). Totals are pooled
    before dividing, problems may be scored in parallel (``jobs``), and
    output is byte-identical for any job count.
    """
    prompt_sets = prompt_sets or {}
    if assignment_mode == "both":
        modes = [METHOD_ARGMAX, METHOD_HUNGARIAN]
    elif assignment_mode in (METHOD_ARGMAX, METHOD_HUNGARIAN):
        modes = [assignment_mode]
    else:
        raise MethodConfigError(f"unknown assignment mode {assignment_mode!r}")

    cells: list[tuple[MethodSpec, str]] = []
    for m in methods:
        if m.kind == "discrete":
            cells.append((m, "discrete"))
        else:
            cells.extend((m, mode) for mode in modes)

    tasks = [
        (pi, method, mode)
        for pi in range(len(problems))
        for (method, mode) in cells
    ]

    def work(task):
        pi, method, mode = task
        eff_mode = METHOD_HUNGARIAN if mode == "discrete" else mode
        return _score_problem(problems[pi], method, embeddings, prompt_sets, eff_mode)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(work, tasks))
    else:
        outcomes = [work(t) for t in tasks]

    agg: dict[tuple[str, str, str], list[int]] = {}
    for (pi, method, mode), (correct, possible) in zip(tasks, outcomes):
        key = (method.name, mode, problems[pi].setting_tag)
        cell = agg.setdefault(key, [0, 0, 0])
        cell[0] += correct
        cell[1] += possible
        cell[2] += 1

    rows = []
    for (name, mode, setting) in sorted(agg):
        correct, possible, count = agg[(name, mode, setting)]
        acc = 100.0 * correct / possible if possible else 0.0
        rows.append(
            ReportRow(
                method=name,
                assignment=mode,
                setting=setting,
                correct_matches=correct,
                possible_matches=possible,
                accuracy_pct=acc,
                problem_count=count,
                wilson_95_interval=wilson_interval(correct, possible),
            )
        )

    digest = config_digest(
        {
            "schema": SCHEMA_VERSION,
            "assignment_mode": assignment_mode,
            "methods": [m.to_json_dict() for m in methods],
            "embeddings": {
                k: [v.provenance, len(v), v.dim] for k, v in sorted(embeddings.items())
            },
            "prompts": {
                k: [v.provenance, len(v), v.dim] for k, v in sorted(prompt_sets.items())
            },
            "problems": [
                [p.setting_tag, list(p.source_ids), list(p.target_ids)] for p in problems
            ],
        }
    )
    return BenchmarkReport(rows=tuple(rows), config_digest=digest)


def report_text(report: BenchmarkReport) -> str:
    """Aligned-column human-readable rendering."""
    header = (
        "method", "assign", "setting", "acc%", "correct", "possible",
        "problems", "wilson95",
    )
    body = [
        (
            r.method,
            r.assignment,
            r.setting,
            f"{r.accuracy_pct:.4f}",
            str(r.correct_matches),
            str(r.possible_matches),
            str(r.problem_count),
            f"[{r.wilson_95_interval[0]:.2f}, {r.wilson_95_interval[1]:.2f}]",
        )
        for r in report.rows
    ]
    widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h)
              for i, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(v.ljust(w) for v, w in zip(row, widths)))
    lines.append("")
    lines.append(f"schema: {report.schema_version}  config: {report.config_digest[:16]}")
    return "\n".join(lines) + "\n"


def report_csv(report: BenchmarkReport) -> str:
    lines = [
        "method,assignment,setting,correct_matches,possible_matches,"
        "accuracy_pct,problem_count,wilson_95_lo,wilson_95_hi"
    ]
    for r in report.rows:
        lines.append(
            f"{r.method},{r.assignment},{r.setting},{r.correct_matches},"
            f"{r.possible_matches},{r.accuracy_pct:.10g},{r.problem_count},"
            f"{r.wilson_95_interval[0]:.10g},{r.wilson_95_interval[1]:.10g}"
        )
    return "\n".join(lines) + "\n"


def report_json(report: BenchmarkReport) -> str:
    return json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n"
