import numpy as np
import pytest

from semmatch.embed import ClassMatrix, EmbeddingSet, normalize_set
from semmatch.errors import EmptyVariantList, KOutOfRange, UnknownLabel, ZeroNormVector
from semmatch.zeroshot import (
    PromptSet,
    classification_outcome,
    ensemble_embed,
    expand_prompts,
    topk_accuracy,
)


def test_expand_plain():
    p = PromptSet(("stapler",), {"stapler": ("stapler",)}, "plain")
    assert expand_prompts(p) == [("stapler", "stapler")]


def test_expand_picture_of():
    p = PromptSet(("stapler",), {"stapler": ("stapler",)}, "picture_of")
    assert expand_prompts(p) == [("stapler", "A picture of a stapler")]


def test_expand_ensemble_four_templates_per_description():
    descriptions = tuple(f"desc{i}" for i in range(5))
    p = PromptSet(("mug",), {"mug": descriptions}, "ensemble")
    out = expand_prompts(p)
    assert len(out) == 20  # around 20 prompts per class: 4 per description
    assert ("mug", "A picture of a desc0") in out
    assert ("mug", "A picture of a desc0, a product") in out
    assert ("mug", "A desc0, a product") in out
    assert ("mug", "desc0") in out


def test_expand_preserves_class_order():
    p = PromptSet(("b", "a"), {"b": ("b1",), "a": ("a1", "a2")}, "plain")
    assert expand_prompts(p) == [("b", "b1"), ("a", "a1"), ("a", "a2")]


def test_prompt_set_requires_variants():
    with pytest.raises(EmptyVariantList):
        PromptSet(("x",), {"x": ()}, "plain")
    with pytest.raises(ValueError):
        PromptSet(("x",), {}, "no-such-mode")
    # classes without explicit variants default to the label itself
    p = PromptSet(("fork",), {}, "plain")
    assert p.variants["fork"] == ("fork",)


def test_ensemble_embed_single_variant_unchanged():
    es = normalize_set([[3.0, 4.0]], ["cup"], "text")
    out = ensemble_embed(es)
    np.testing.assert_allclose(out.matrix, [[0.6, 0.8]])
    assert out.crop_ids == ("cup",)


def test_ensemble_embed_duplicate_variant():
    es = normalize_set([[0.0, 1.0], [0.0, 1.0]], ["cup", "cup"], "text")
    np.testing.assert_allclose(ensemble_embed(es).matrix, [[0.0, 1.0]])


def test_ensemble_embed_mean_then_renormalize():
    es = normalize_set([[1.0, 0.0], [0.0, 1.0]], ["cup", "cup"], "text")
    out = ensemble_embed(es)
    np.testing.assert_allclose(out.matrix, [[0.7071, 0.7071]], atol=1e-4)


def test_ensemble_embed_exact_cancellation():
    es = EmbeddingSet(np.array([[1.0, 0.0], [-1.0, 0.0]]), ("c", "c"), "t", True)
    with pytest.raises(ZeroNormVector):
        ensemble_embed(es)


def test_ensemble_embed_always_unit_norm():
    rng = np.random.default_rng(4)
    labels = ["a"] * 3 + ["b"] * 5 + ["c"] * 2
    es = normalize_set(rng.standard_normal((10, 7)), labels, "text")
    out = ensemble_embed(es)
    assert out.crop_ids == ("a", "b", "c")
    np.testing.assert_allclose(np.linalg.norm(out.matrix, axis=1), 1.0, atol=1e-6)


def cmatrix(entries, labels):
    e = np.atleast_2d(np.asarray(entries, float))
    return ClassMatrix(e, [f"r{i}" for i in range(e.shape[0])], labels)


def test_topk_identity():
    labels = [f"L{i}" for i in range(5)]
    c = ClassMatrix(np.eye(5), labels, labels)  # row_ids double as truth keys
    truth = {lab: lab for lab in labels}
    assert topk_accuracy(c, truth, 1) == 100.0


def test_topk_errors():
    c = cmatrix([[0.5, 0.2]], ["A", "B"])
    with pytest.raises(KOutOfRange):
        topk_accuracy(c, {"r0": "A"}, 3)
    with pytest.raises(UnknownLabel):
        topk_accuracy(c, {"r0": "C"}, 1)
    with pytest.raises(UnknownLabel):
        topk_accuracy(c, {"other": "A"}, 1)


def test_topk_tie_breaks_by_column_index():
    c = cmatrix([[0.5, 0.5, 0.1]], ["A", "B", "C"])
    assert topk_accuracy(c, {"r0": "A"}, 1) == 100.0
    assert topk_accuracy(c, {"r0": "B"}, 1) == 0.0
    assert topk_accuracy(c, {"r0": "B"}, 2) == 100.0


def test_topk_equals_k_over_K_for_full_k():
    rng = np.random.default_rng(8)
    c = cmatrix(rng.random((20, 6)), [f"L{i}" for i in range(6)])
    truth = {f"r{i}": f"L{int(rng.integers(0, 6))}" for i in range(20)}
    assert topk_accuracy(c, truth, 6) == 100.0


def test_topk_invariant_under_increasing_transform():
    rng = np.random.default_rng(15)
    entries = rng.random((30, 8))
    labels = [f"L{i}" for i in range(8)]
    truth = {f"r{i}": labels[int(rng.integers(0, 8))] for i in range(30)}
    a = topk_accuracy(cmatrix(entries, labels), truth, 3)
    b = topk_accuracy(cmatrix(entries * 4.0, labels), truth, 3)
    assert a == b


def test_topk_random_guess_expectation():
    # i.i.d. continuous scores: expected top-k accuracy is k/K
    rng = np.random.default_rng(99)
    K, rows = 10, 12_000
    labels = [f"L{i}" for i in range(K)]
    c = ClassMatrix(rng.random((rows, K)), [f"r{i}" for i in range(rows)], labels)
    truth = {f"r{i}": labels[int(rng.integers(0, K))] for i in range(rows)}
    for k in (1, 3):
        acc = topk_accuracy(c, truth, k)
        expect = 100.0 * k / K
        sd = 100.0 * np.sqrt((k / K) * (1 - k / K) / rows)
        assert abs(acc - expect) <= 3 * sd


def test_classification_outcome_ranked_and_top5():
    labels = ["A", "B", "C"]
    c = ClassMatrix(np.array([[0.1, 0.9, 0.5]]), ["r0"], labels)
    out = classification_outcome(c, {"r0": "B"})
    assert out.top1_accuracy == 100.0
    assert out.top5_accuracy == 100.0  # falls back to top-3 when K < 5
    crop, ranking = out.ranked[0]
    assert crop == "r0"
    assert [lab for lab, _ in ranking] == ["B", "C", "A"]
    assert out.top1_accuracy <= out.top5_accuracy
