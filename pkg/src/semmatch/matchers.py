"""Assignment of target objects to source objects from a similarity matrix.

Three matchers are provided:

* :func:`assign_argmax` pairs every source with its best target and
  permits many-to-one collapse (the greedy baseline failure mode).
* :func:`assign_hungarian` computes the optimal one-to-one assignment
  maximizing total similarity.
* :func:`match_discrete` classifies each side independently against the
  prompt columns and pairs crops that received the same label.

All tie-breaking is deterministic (lowest index / lexicographically
smallest pair set) so a given matrix yields the same assignment on every
platform and run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .embed import ClassMatrix, SimilarityMatrix
from .errors import EmptyMatrix, NonFiniteEntry, PromptSetMismatch
from .tolerances import MATMUL_TOL

METHOD_ARGMAX = "argmax"
METHOD_HUNGARIAN = "hungarian"
METHOD_DISCRETE = "discrete"


@dataclass(frozen=True)
class AssignmentResult:
    """A set of (target_id, source_id) match decisions plus leftovers."""

    pairs: frozenset[tuple[str, str]]
    unmatched_sources: frozenset[str]
    unmatched_targets: frozenset[str]
    total_score: float
    method: str

    def sorted_pairs(self) -> list[tuple[str, str]]:
        return sorted(self.pairs)


def _check_nonempty(s: SimilarityMatrix):
    n, m = s.shape
    if n == 0 or m == 0:
        raise EmptyMatrix(f"similarity matrix is {n}x{m}")


def assign_argmax(s: SimilarityMatrix) -> AssignmentResult:
    """Pair each source column with the target row maximizing it.

    Ties break to the lowest target row index. Several sources may land
    on one target; targets that attract no source are reported unmatched.
    """
    _check_nonempty(s)
    rows = np.argmax(s.entries, axis=0)  # first occurrence = lowest index
    pairs = frozenset(
        (s.row_ids[rows[m]], s.col_ids[m]) for m in range(len(s.col_ids))
    )
    hit = set(rows.tolist())
    total = float(s.entries[rows, np.arange(len(s.col_ids))].sum(dtype=np.float64))
    return AssignmentResult(
        pairs=pairs,
        unmatched_sources=frozenset(),
        unmatched_targets=frozenset(
            s.row_ids[n] for n in range(len(s.row_ids)) if n not in hit
        ),
        total_score=total,
        method=METHOD_ARGMAX,
    )


def _max_total(entries: np.ndarray) -> float:
    """Optimal total similarity over min(N, M) one-to-one pairs."""
    if entries.shape[0] == 0 or entries.shape[1] == 0:
        return 0.0
    r, c = linear_sum_assignment(entries, maximize=True)
    return float(entries[r, c].sum(dtype=np.float64))


def _lexsmallest_optimal(entries: np.ndarray) -> list[tuple[int, int]]:
    """Optimal pairs, canonicalized to the lexicographically smallest set.

    Fixes pairs one at a time: scan candidate (row, col) in ascending
    order and keep the first whose fixation still admits an optimal
    completion on the remaining submatrix. Equal-score optima are
    detected within MATMUL_TOL, so near-ties resolve deterministically.
    """
    n, m = entries.shape
    rows = list(range(n))
    cols = list(range(m))
    remaining = _max_total(entries)
    chosen: list[tuple[int, int]] = []
    k = min(n, m)
    while len(chosen) < k:
        found = False
        for t in rows:
            for c in cols:
                sub_rows = [r for r in rows if r != t]
                sub_cols = [x for x in cols if x != c]
                sub = entries[np.ix_(sub_rows, sub_cols)]
                completion = _max_total(sub)
                if abs(entries[t, c] + completion - remaining) <= MATMUL_TOL:
                    chosen.append((t, c))
                    rows.remove(t)
                    cols.remove(c)
                    remaining = completion
                    found = True
                    break
            if found:
                break
        if not found:  # numerically impossible; guard against drift
            r_idx, c_idx = linear_sum_assignment(
                entries[np.ix_(rows, cols)], maximize=True
            )
            chosen.extend((rows[r], cols[c]) for r, c in zip(r_idx, c_idx))
            break
    return chosen


def assign_hungarian(s: SimilarityMatrix) -> AssignmentResult:
    """Optimal one-to-one assignment maximizing total similarity.

    Internally the maximization is solved as minimum-cost matching on
    (max entry - S), which is exactly the classic algorithm's setting;
    scores are reported as similarities throughout. Rectangular input
    leaves |M - N| items on the larger side unmatched. Among equal-score
    optima the lexicographically smallest pair set (by sorted
    (target, source) index pairs) is returned.
    """
    _check_nonempty(s)
    if not np.isfinite(s.entries).all():
        raise NonFiniteEntry("similarity matrix contains NaN or Inf")
    idx_pairs = _lexsmallest_optimal(s.entries)
    total = float(sum(s.entries[t, c] for t, c in idx_pairs))
    matched_t = {t for t, _ in idx_pairs}
    matched_s = {c for _, c in idx_pairs}
    return AssignmentResult(
        pairs=frozenset((s.row_ids[t], s.col_ids[c]) for t, c in idx_pairs),
        unmatched_sources=frozenset(
            s.col_ids[c] for c in range(len(s.col_ids)) if c not in matched_s
        ),
        unmatched_targets=frozenset(
            s.row_ids[t] for t in range(len(s.row_ids)) if t not in matched_t
        ),
        total_score=total,
        method=METHOD_HUNGARIAN,
    )


def match_discrete(c_source: ClassMatrix, c_target: ClassMatrix) -> AssignmentResult:
    """Label each side independently, then pair same-labelled crops.

    Each object takes the label of its row argmax (ties to the lowest
    column). Within a label owned by several crops on a side, pairing is
    greedy by descending confidence. The score of a pair is the inner
    product of the two confidence rows, matching what the semantic
    similarity matrix would assign.
    """
    if c_source.col_labels != c_target.col_labels:
        raise PromptSetMismatch(
            f"prompt columns differ: {c_target.col_labels} vs {c_source.col_labels}"
        )

    def groups(c: ClassMatrix) -> dict[str, list[int]]:
        best = np.argmax(c.entries, axis=1)
        conf = c.entries[np.arange(len(c.row_ids)), best]
        out: dict[str, list[int]] = {}
        order = sorted(range(len(c.row_ids)), key=lambda i: (-conf[i], i))
        for i in order:
            out.setdefault(c.col_labels[best[i]], []).append(i)
        return out

    src_groups = groups(c_source)
    tgt_groups = groups(c_target)
    pairs: set[tuple[str, str]] = set()
    matched_s: set[int] = set()
    matched_t: set[int] = set()
    total = 0.0
    for label, tgt_list in tgt_groups.items():
        src_list = src_groups.get(label, [])
        for ti, si in zip(tgt_list, src_list):
            pairs.add((c_target.row_ids[ti], c_source.row_ids[si]))
            matched_t.add(ti)
            matched_s.add(si)
            total += float(
                np.dot(c_target.entries[ti], c_source.entries[si])
            )
    return AssignmentResult(
        pairs=frozenset(pairs),
        unmatched_sources=frozenset(
            c_source.row_ids[i] for i in range(len(c_source.row_ids)) if i not in matched_s
        ),
        unmatched_targets=frozenset(
            c_target.row_ids[i] for i in range(len(c_target.row_ids)) if i not in matched_t
        ),
        total_score=total,
        method=METHOD_DISCRETE,
    )


_PERM_CACHE: dict[tuple[int, int], np.ndarray] = {}


def _all_perms(n: int, m: int) -> np.ndarray:
    """All length-n arrangements of range(m), as one integer array."""
    from itertools import permutations

    key = (n, m)
    if key not in _PERM_CACHE:
        _PERM_CACHE[key] = np.array(list(permutations(range(m), n)), dtype=np.intp)
    return _PERM_CACHE[key]


def brute_force_max_total(entries: np.ndarray) -> float:
    """Exhaustive-permutation maximum total; the independent assignment oracle.

    Only feasible for small matrices; used by tests to certify
    :func:`assign_hungarian` optimality.
    """
    e = np.asarray(entries, dtype=np.float64)
    n, m = e.shape
    if n <= m:
        perms = _all_perms(n, m)
        totals = e[np.arange(n), perms].sum(axis=1)
    else:
        perms = _all_perms(m, n)
        totals = e[perms, np.arange(m)].sum(axis=1)
    return float(totals.max())
