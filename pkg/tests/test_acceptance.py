"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Golden accuracy values below were produced once from the fixed-seed runs
and frozen; any drift in generators, matchers or scoring shows up as an
exact mismatch here.
"""

import time
from dataclasses import replace

import numpy as np

from semmatch import benchgen
from semmatch.benchgen import PoolManifest
from semmatch.embed import (
    ClassMatrix,
    classify_matrix,
    concat_sets,
    normalize_set,
    sim_from_array,
    visual_similarity,
)
from semmatch.embedstore import read_embeddings, write_embeddings
from semmatch.evalkit import (
    MethodSpec,
    matching_accuracy,
    random_baseline,
    run_benchmark,
)
from semmatch.matchers import (
    AssignmentResult,
    assign_argmax,
    assign_hungarian,
    brute_force_max_total,
)
from semmatch.zeroshot import topk_accuracy

ACC_SEED = 12345
LADDER_SEED = 2027

# frozen from the fixed-seed protocol run (correct matches out of 1600)
GOLDEN_PROTOCOL = {
    ("visual", "hungarian"): 948,
    ("semfeat-n", "hungarian"): 1298,
    ("semfeat-k", "hungarian"): 1116,
    ("visual", "argmax"): 832,
    ("semfeat-n", "argmax"): 1117,
    ("semfeat-k", "argmax"): 957,
}


def announce(name: str, ok: bool, detail: str = ""):
    status = "PASS" if ok else "FAIL"
    line = f"[ACCEPTANCE] {name}: {status}"
    if detail:
        line += f" ({detail})"
    print(line, flush=True)
    assert ok, line


def test_hungarian_optimality_oracle():
    rng = np.random.default_rng(424242)
    start = time.monotonic()
    worst = 0.0
    for i in range(1000):
        n = 2 + i % 6  # n in 2..7
        entries = rng.standard_normal((n, n))
        got = assign_hungarian(sim_from_array(entries)).total_score
        want = brute_force_max_total(entries)
        worst = max(worst, abs(got - want))
    elapsed = time.monotonic() - start
    announce(
        "hungarian-optimality-oracle",
        worst <= 1e-9 and elapsed < 10.0,
        f"1000 matrices, max |err| {worst:.2e}, {elapsed:.2f}s",
    )


def test_random_baseline_reproduction():
    start = time.monotonic()
    acc8 = random_baseline(8, 100_000, seed=8)
    t8 = time.monotonic() - start
    start = time.monotonic()
    acc20 = random_baseline(20, 100_000, seed=20)
    t20 = time.monotonic() - start
    announce(
        "random-baseline-reproduction",
        12.1 <= acc8 <= 12.9 and 4.75 <= acc20 <= 5.25 and t8 < 5.0 and t20 < 5.0,
        f"8-way {acc8:.4f} (bracket 12.395), 20-way {acc20:.4f} (bracket 4.9613), "
        f"{t8:.2f}s/{t20:.2f}s",
    )


def test_random_classification_reproduction():
    rng = np.random.default_rng(39)
    K, rows = 39, 10_000
    labels = [f"L{i}" for i in range(K)]
    c = ClassMatrix(rng.random((rows, K)), [f"r{i}" for i in range(rows)], labels)
    truth = {f"r{i}": labels[int(rng.integers(0, K))] for i in range(rows)}
    top1 = topk_accuracy(c, truth, 1)
    top5 = topk_accuracy(c, truth, 5)
    announce(
        "random-classification-reproduction",
        2.1 <= top1 <= 3.1 and 11.8 <= top5 <= 13.8,
        f"top-1 {top1:.3f} (bracket 2.5641), top-5 {top5:.3f} (bracket 12.8205)",
    )


def protocol_report():
    pool = benchgen.gen_planted_pool(
        8, 25, 64, 0.4, rng_seed=ACC_SEED, distractor_classes=32
    )
    degraded = benchgen.degrade_embeddings(
        pool.crop_embeddings, 0.8, 8, rng_seed=ACC_SEED + 1
    )
    problems = benchgen.gen_nway_batch(
        pool.manifest, 8, [f"class{i:02d}" for i in range(8)], ACC_SEED + 2, 200
    )
    methods = [
        MethodSpec("visual", "visual", "crops", source_features="crops-degraded"),
        MethodSpec("semfeat-n", "semfeat", "crops", source_features="crops-degraded",
                   label_scope="n", prompts="concepts"),
        MethodSpec("semfeat-k", "semfeat", "crops", source_features="crops-degraded",
                   label_scope="k", prompts="concepts"),
    ]
    return run_benchmark(
        problems, methods,
        {"crops": pool.crop_embeddings, "crops-degraded": degraded},
        {"concepts": pool.prompt_embeddings},
        assignment_mode="both",
    )


def test_cross_instance_ordering_at_desk_scale():
    start = time.monotonic()
    report = protocol_report()
    elapsed = time.monotonic() - start
    ok = elapsed < 120.0
    details = [f"{elapsed:.1f}s"]
    for mode in ("hungarian", "argmax"):
        vis = report.row("visual", "nway", mode).accuracy_pct
        sem_n = report.row("semfeat-n", "nway", mode).accuracy_pct
        sem_k = report.row("semfeat-k", "nway", mode).accuracy_pct
        ok = ok and (sem_n - vis >= 5.0) and (sem_n >= sem_k)
        details.append(
            f"{mode}: semfeat-n {sem_n:.2f} vs visual {vis:.2f} vs semfeat-k {sem_k:.2f}"
        )
    # golden reproduction: the fixed-seed run must come back exactly
    for (method, mode), correct in GOLDEN_PROTOCOL.items():
        row = report.row(method, "nway", mode)
        ok = ok and row.correct_matches == correct and row.possible_matches == 1600
    announce("cross-instance-ordering", ok, "; ".join(details))


def test_degradation_monotonicity():
    ladder = {"easy": 0.3, "medium": 0.8, "hard": 1.4, "hardest": 2.2}
    problems, crop_sets, prompt_set = [], [], None
    for tag, noise in ladder.items():
        pool = benchgen.gen_planted_pool(
            8, 20, 64, noise, rng_seed=LADDER_SEED, distractor_classes=16
        )
        recs = tuple(
            replace(r, crop_id=f"{tag}:{r.crop_id}", image_id=f"{tag}:{r.image_id}",
                    scene_id=f"{tag}:{r.scene_id}")
            for r in pool.manifest.records
        )
        crop_sets.append(pool.crop_embeddings.with_ids([r.crop_id for r in recs]))
        prompt_set = prompt_set or pool.prompt_embeddings
        probs = benchgen.gen_nway_batch(
            PoolManifest(recs), 8, [f"class{i:02d}" for i in range(8)],
            LADDER_SEED + 1, 150,
        )
        problems.extend(replace(p, setting_tag=tag) for p in probs)
    methods = [
        MethodSpec("visual", "visual", "crops"),
        MethodSpec("semfeat-n", "semfeat", "crops", label_scope="n", prompts="concepts"),
        MethodSpec("semfeat-k", "semfeat", "crops", label_scope="k", prompts="concepts"),
    ]
    report = run_benchmark(
        problems, methods, {"crops": concat_sets(crop_sets)},
        {"concepts": prompt_set}, assignment_mode="both",
    )
    order = ["easy", "medium", "hard", "hardest"]
    ok = True
    details = []
    for m in ("visual", "semfeat-n", "semfeat-k"):
        for mode in ("argmax", "hungarian"):
            accs = [report.row(m, s, mode).accuracy_pct for s in order]
            mono = all(a >= b for a, b in zip(accs, accs[1:]))
            ok = ok and mono
            if not mono or m == "visual":
                details.append(
                    f"{m}/{mode}: " + " >= ".join(f"{a:.1f}" for a in accs)
                )
    announce("degradation-monotonicity", ok, "; ".join(details))


def test_invariant_suites(tmp_path):
    rng = np.random.default_rng(31415)
    checks = {}

    raw = rng.standard_normal((6, 10)) * 3.0
    once = normalize_set(raw)
    twice = normalize_set(once.matrix)
    checks["idempotence"] = bool(np.abs(twice.matrix - once.matrix).max() <= 1e-7)

    scaled = normalize_set(raw * 7.5)
    checks["scale-invariance"] = bool(np.abs(scaled.matrix - once.matrix).max() <= 1e-6)

    q, _ = np.linalg.qr(rng.standard_normal((10, 10)))
    prompts_raw = rng.standard_normal((4, 10))
    c0 = classify_matrix(normalize_set(raw), normalize_set(prompts_raw, list("abcd")))
    c1 = classify_matrix(
        normalize_set(raw @ q.T), normalize_set(prompts_raw @ q.T, list("abcd"))
    )
    checks["joint-rotation"] = bool(np.abs(c0.entries - c1.entries).max() <= 1e-6)

    entries = rng.standard_normal((5, 5))
    s = sim_from_array(entries)
    checks["argmax-monotone"] = (
        assign_argmax(s).pairs == assign_argmax(sim_from_array(entries * 4.0)).pairs
    )
    checks["hungarian-shift"] = (
        assign_hungarian(s).pairs
        == assign_hungarian(sim_from_array(entries + 11.25)).pairs
    )

    perm = [4, 2, 0, 3, 1]
    ids = [f"t{i}" for i in range(5)]
    a = assign_hungarian(sim_from_array(entries, row_ids=ids))
    b = assign_hungarian(
        sim_from_array(entries[perm], row_ids=[ids[i] for i in perm])
    )
    checks["permutation-equivariance"] = a.pairs == b.pairs

    es = normalize_set(rng.standard_normal((7, 12)), [f"c{i}" for i in range(7)])
    self_match = assign_hungarian(visual_similarity(es, es))
    checks["self-match"] = (
        sorted(self_match.pairs) == [(f"c{i}", f"c{i}") for i in range(7)]
        and abs(self_match.total_score - 7.0) <= 1e-6
    )

    store = normalize_set(rng.standard_normal((5, 6)), [f"e{i}" for i in range(5)], "p")
    f32 = store.matrix.astype("<f4").astype(np.float64)
    from semmatch.embed import EmbeddingSet

    persisted = EmbeddingSet(f32, store.crop_ids, "p", normalized=True)
    path = tmp_path / "acc.emb"
    write_embeddings(persisted, path)
    back = read_embeddings(path)
    payload_a = path.read_bytes()
    write_embeddings(back, path)
    checks["embedstore-round-trip"] = bool(
        (back.matrix == persisted.matrix).all() and payload_a == path.read_bytes()
    )

    import struct

    values = np.array([[1.5, -3.25]], dtype="<f4")
    header = struct.Struct("<4sIIIIII").pack(b"OMES", 1, 1, 2, 0, 0, 1)
    (tmp_path / "fix.emb").write_bytes(header + b"e" + values.tobytes())
    (tmp_path / "fix.emb.idx").write_text('{"crop_id": "a", "row": 0}\n')
    le_ok = np.array_equal(read_embeddings(tmp_path / "fix.emb").matrix, [[1.5, -3.25]])
    (tmp_path / "fix.emb").write_bytes(header + b"e" + values.astype(">f4").tobytes())
    be_differs = not np.array_equal(
        read_embeddings(tmp_path / "fix.emb").matrix, [[1.5, -3.25]]
    )
    checks["byte-swap-fixture"] = le_ok and be_differs

    failed = [k for k, v in checks.items() if not v]
    announce(
        "invariant-suites",
        not failed,
        "all " + str(len(checks)) + " invariants" if not failed else "failed: " + ", ".join(failed),
    )


def test_accuracy_definition_conformance():
    from semmatch.benchgen import CropRecord, MatchingProblem

    def crop(cid, label):
        return CropRecord(cid, f"i_{cid}", "s", 0, "shelf", label, (0, 0, 4, 4), 4096)

    def prob(src, tgt):
        return MatchingProblem(
            tuple(crop(f"s{i}", lab) for i, lab in enumerate(src)),
            tuple(crop(f"t{i}", lab) for i, lab in enumerate(tgt)),
            frozenset(), "nway", instance_level=False,
        )

    def res(pairs):
        return AssignmentResult(frozenset(pairs), frozenset(), frozenset(), 0.0, "hungarian")

    cases = [
        (prob(["A", "A", "B"], ["A", "C"]), res({("t0", "s0")}), (1, 1)),
        (prob(["A", "B"], ["A", "B"]), res(set()), (0, 2)),
        (prob(["A"] * 8, ["A"] * 8), res({(f"t{i}", f"s{i}") for i in range(8)}), (8, 8)),
        (prob(["A", "A"], ["A"]), res({("t0", "s0"), ("t0", "s1")}), (1, 1)),
        (prob(["A", "B"], ["C", "D"]), res(set()), (0, 0)),
    ]
    ok = True
    for problem, result, want in cases:
        got = matching_accuracy(result, problem)
        ok = ok and got == want
    announce("accuracy-definition-conformance", ok,
             "multiset-intersection denominators exact")
