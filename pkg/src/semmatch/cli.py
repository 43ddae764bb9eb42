"""Command-line driver wiring the library into reproducible runs.

Exit codes: 0 success, 2 usage errors (bad flags, missing files,
inconsistent parameters), 3 data errors (missing embeddings, malformed
stores). Every report-producing run writes a config echo with resolved
flags and input digests alongside its outputs.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import benchgen, embedstore, evalkit, figures
from .colorhist import HistogramConfig, RgbCrop, hs_histogram
from .embed import (
    EmbeddingSet,
    classify_matrix,
    normalize_set,
    normalized_copy,
)
from .errors import MissingEmbedding, NTooLarge, SemMatchError
from .zeroshot import classification_outcome, ensemble_embed, expand_prompts

ENV_OUT_DIR = "SEMMATCH_OUT"

EXIT_DATA_ERROR = 3


def _out_dir(value: str | None) -> Path:
    d = Path(value or os.environ.get(ENV_OUT_DIR, "."))
    d.mkdir(parents=True, exist_ok=True)
    return d


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_config_echo(out_dir: Path, name: str, flags: dict, inputs: list[Path]) -> None:
    doc = {
        "command": name,
        "flags": {k: (str(v) if isinstance(v, Path) else v) for k, v in flags.items()},
        "input_digests": {str(p): _sha256(p) for p in inputs if p is not None},
    }
    path = out_dir / f"{name}.config.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _fail_data(err: Exception) -> None:
    click.echo(f"error: {err}", err=True)
    sys.exit(EXIT_DATA_ERROR)


@click.group()
def main():
    """Visual and visual-semantic object-matching benchmark harness."""


@main.command("gen")
@click.option("--mode", required=True,
              type=click.Choice(["easy", "medium", "hard", "hardest", "nway", "planted"]))
@click.option("--manifest", type=click.Path(exists=True, path_type=Path),
              help="Crop manifest (JSON Lines). Required except for planted mode.")
@click.option("--view-distances", type=click.Path(exists=True, path_type=Path),
              help="View-distance JSON (easy/medium modes).")
@click.option("--n", type=int, default=8, show_default=True,
              help="Objects per problem (nway mode).")
@click.option("--count", type=int, default=1, show_default=True,
              help="Number of problems (nway mode).")
@click.option("--whitelist", type=str, default=None,
              help="Comma-separated class whitelist (nway mode; default: all classes).")
@click.option("--seed", type=int, default=None, help="RNG seed (stochastic modes).")
@click.option("--out", type=click.Path(path_type=Path), help="Problem file to write.")
@click.option("--classes", type=int, default=8, show_default=True, help="Planted classes.")
@click.option("--crops-per-class", type=int, default=25, show_default=True)
@click.option("--dim", type=int, default=64, show_default=True)
@click.option("--noise", type=float, default=0.4, show_default=True,
              help="Planted intra-class noise.")
@click.option("--distractors", type=int, default=0, show_default=True,
              help="Extra prompt-only distractor classes (planted mode).")
@click.option("--degrade", type=float, default=0.0, show_default=True,
              help="Extra source-side view noise (planted mode).")
@click.option("--out-dir", type=click.Path(path_type=Path), default=None,
              help="Output directory (planted mode).")
def cmd_gen(mode, manifest, view_distances, n, count, whitelist, seed, out,
            classes, crops_per_class, dim, noise, distractors, degrade, out_dir):
    """Generate matching problems (and, for planted mode, a full fixture pool)."""
    try:
        if mode == "planted":
            if seed is None:
                raise click.UsageError("--seed is mandatory for planted mode")
            d = _out_dir(str(out_dir) if out_dir else None)
            pool = benchgen.gen_planted_pool(
                classes, crops_per_class, dim, noise, seed,
                distractor_classes=distractors,
            )
            embedstore.save_manifest(pool.manifest, d / "pool.jsonl")
            embedstore.write_embeddings(pool.crop_embeddings, d / "visual.emb")
            embedstore.write_embeddings(pool.prompt_embeddings, d / "prompts.emb")
            written = ["pool.jsonl", "visual.emb", "prompts.emb"]
            if degrade > 0:
                degraded = benchgen.degrade_embeddings(
                    pool.crop_embeddings, degrade, classes, seed + 1
                )
                embedstore.write_embeddings(degraded, d / "visual_degraded.emb")
                written.append("visual_degraded.emb")
            if out is not None:
                problems = benchgen.gen_nway_batch(
                    pool.manifest, n, [c.class_label for c in pool.manifest.records],
                    seed, count,
                )
                embedstore.save_problems(problems, out)
                click.echo(f"nway: {len(problems)} problems -> {out}")
            click.echo(f"planted pool ({classes} classes, dim {dim}) -> {d}: "
                       + ", ".join(written))
            return

        if manifest is None:
            raise click.UsageError(f"--manifest is required for mode {mode!r}")
        if out is None:
            raise click.UsageError("--out is required")
        pool = embedstore.load_manifest(manifest, view_distances)
        if mode in ("easy", "medium"):
            problems = benchgen.gen_same_scene_pairs(pool, mode)
        elif mode in ("hard", "hardest"):
            problems = benchgen.gen_cross_scene_pairs(pool, mode)
        else:
            if seed is None:
                raise click.UsageError("--seed is mandatory for nway mode")
            filtered = benchgen.filter_nway_pool(pool)
            labels = (
                [w.strip() for w in whitelist.split(",") if w.strip()]
                if whitelist
                else sorted({r.class_label for r in filtered.records})
            )
            try:
                problems = benchgen.gen_nway_batch(filtered, n, labels, seed, count)
            except NTooLarge as err:
                raise click.UsageError(str(err))
        embedstore.save_problems(problems, out)
        counts: dict[str, int] = {}
        for p in problems:
            counts[p.setting_tag] = counts.get(p.setting_tag, 0) + 1
        for tag in sorted(counts):
            click.echo(f"{tag}: {counts[tag]} problems")
        if not problems:
            click.echo("warning: no problems generated", err=True)
    except click.UsageError:
        raise
    except SemMatchError as err:
        _fail_data(err)


def _colourhist_features(problems, images_root: Path, cfg: HistogramConfig) -> EmbeddingSet:
    """Compute colour-histogram embeddings on the fly from crop images."""
    from PIL import Image

    crops = {}
    for p in problems:
        for c in list(p.source_crops) + list(p.target_crops):
            crops.setdefault(c.crop_id, c)
    vectors, ids = [], []
    for crop_id in sorted(crops):
        rec = crops[crop_id]
        img_path = None
        for ext in (".png", ".jpg", ".jpeg", ".bmp"):
            cand = images_root / f"{rec.image_id}{ext}"
            if cand.exists():
                img_path = cand
                break
        if img_path is None:
            raise MissingEmbedding(crop_id, f"no image for {rec.image_id!r} under {images_root}")
        img = np.asarray(Image.open(img_path).convert("RGB"))
        x, y, w, h = rec.bbox
        patch = img[y:y + h, x:x + w]
        mask = None
        mask_path = images_root / "masks" / f"{crop_id}.png"
        if mask_path.exists():
            mask = np.asarray(Image.open(mask_path).convert("L"))[y:y + h, x:x + w] > 0
        vec = hs_histogram(RgbCrop.from_array(patch, mask), cfg)
        vectors.append(vec.values)
        ids.append(crop_id)
    return normalize_set(vectors, ids, "colourhist")


def _parse_methods(spec: str) -> list[evalkit.MethodSpec]:
    out = []
    for name in [m.strip() for m in spec.split(",") if m.strip()]:
        if name == "visual":
            out.append(evalkit.MethodSpec(name, "visual", "visual",
                                          source_features="visual-source"))
        elif name == "colourhist":
            out.append(evalkit.MethodSpec(name, "visual", "colourhist"))
        elif name in ("semfeat-n", "semfeat-k"):
            out.append(evalkit.MethodSpec(
                name, "semfeat", "visual", source_features="visual-source",
                label_scope=name[-1], prompts="prompts",
            ))
        elif name in ("discrete-n", "discrete-k"):
            out.append(evalkit.MethodSpec(
                name, "discrete", "visual", source_features="visual-source",
                label_scope=name[-1], prompts="prompts",
            ))
        else:
            raise click.UsageError(f"unknown method {name!r}")
    return out


@main.command("match")
@click.option("--problems", "problems_path", required=True,
              type=click.Path(exists=True, path_type=Path))
@click.option("--embeddings", type=click.Path(exists=True, path_type=Path),
              help="Object embedding store (visual/semfeat/discrete methods).")
@click.option("--source-embeddings", type=click.Path(exists=True, path_type=Path),
              help="Override store for source crops (e.g. degraded views).")
@click.option("--prompts", "prompts_path", type=click.Path(exists=True, path_type=Path),
              help="Prompt embedding store (ids are class labels, or expanded "
                   "prompt strings when --prompt-file is given).")
@click.option("--prompt-file", type=click.Path(exists=True, path_type=Path),
              help="Prompt JSON; reduces a per-prompt-string store to one "
                   "vector per class label.")
@click.option("--methods", default="visual", show_default=True,
              help="Comma list: visual, colourhist, semfeat-n, semfeat-k, "
                   "discrete-n, discrete-k.")
@click.option("--assignment", type=click.Choice(["argmax", "hungarian", "both"]),
              default="hungarian", show_default=True)
@click.option("--images", type=click.Path(exists=True, path_type=Path),
              help="Image root for on-the-fly colour histograms.")
@click.option("--hue-bins", type=int, default=32, show_default=True)
@click.option("--sat-bins", type=int, default=32, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("--out-dir", type=click.Path(path_type=Path), default=None)
@click.option("--figures/--no-figures", "render_figures", default=True, show_default=True)
def cmd_match(problems_path, embeddings, source_embeddings, prompts_path, prompt_file,
              methods, assignment, images, hue_bins, sat_bins, jobs, out_dir,
              render_figures):
    """Run matching methods over a problem file and write report files."""
    try:
        problems = embedstore.load_problems(problems_path)
        method_specs = _parse_methods(methods)
        needs_deep = any(m.features == "visual" for m in method_specs)
        needs_hist = any(m.features == "colourhist" for m in method_specs)
        stores: dict[str, EmbeddingSet] = {}
        if needs_deep:
            if embeddings is None:
                raise click.UsageError("--embeddings is required for these methods")
            base = embedstore.read_embeddings(embeddings)
            if not base.normalized:
                base = normalized_copy(base)
            stores["visual"] = base
            if source_embeddings is not None:
                src = embedstore.read_embeddings(source_embeddings)
                stores["visual-source"] = src if src.normalized else normalized_copy(src)
            else:
                stores["visual-source"] = base
        if needs_hist:
            if images is None:
                raise click.UsageError("--images is required for colourhist")
            stores["colourhist"] = _colourhist_features(
                problems, Path(images), HistogramConfig(hue_bins, sat_bins)
            )
        prompt_stores: dict[str, EmbeddingSet] = {}
        if prompts_path is not None:
            ps = embedstore.read_embeddings(prompts_path)
            ps = ps if ps.normalized else normalized_copy(ps)
            if prompt_file is not None:
                prompt_set = embedstore.load_prompt_set(prompt_file)
                expanded = expand_prompts(prompt_set)
                index = ps.row_index()
                missing = [text for _, text in expanded if text not in index]
                if missing:
                    raise MissingEmbedding(missing[0], str(prompts_path))
                ps = ensemble_embed(
                    ps.rows_for([text for _, text in expanded]).with_ids(
                        [label for label, _ in expanded]
                    )
                )
            prompt_stores["prompts"] = ps

        report = evalkit.run_benchmark(
            problems, method_specs, stores, prompt_stores,
            assignment_mode=assignment, jobs=jobs,
        )
        d = _out_dir(str(out_dir) if out_dir else None)
        paths = embedstore.save_report(report, d / "report")
        if render_figures:
            paths["png"] = figures.render_matching_figure(report, d / "report.png")
        _write_config_echo(
            d, "match",
            {
                "problems": problems_path, "embeddings": embeddings,
                "source_embeddings": source_embeddings, "prompts": prompts_path,
                "methods": methods, "assignment": assignment, "jobs": jobs,
                "hue_bins": hue_bins, "sat_bins": sat_bins,
                "config_digest": report.config_digest,
            },
            [p for p in (problems_path, embeddings, source_embeddings, prompts_path) if p],
        )
        click.echo(evalkit.report_text(report), nl=False)
        click.echo(f"report -> {paths['json']}")
    except click.UsageError:
        raise
    except SemMatchError as err:
        _fail_data(err)


@main.command("classify")
@click.option("--manifest", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--embeddings", required=True, type=click.Path(exists=True, path_type=Path),
              help="Object embedding store.")
@click.option("--prompt-file", required=True, type=click.Path(exists=True, path_type=Path),
              help="Prompt JSON (labels -> description variants + template_mode).")
@click.option("--prompt-embeddings", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="Embedding store whose ids are the expanded prompt strings.")
@click.option("--out-dir", type=click.Path(path_type=Path), default=None)
@click.option("--figures/--no-figures", "render_figures", default=True, show_default=True)
def cmd_classify(manifest, embeddings, prompt_file, prompt_embeddings, out_dir,
                 render_figures):
    """Zero-shot top-1/top-5 classification of manifest crops."""
    try:
        pool = embedstore.load_manifest(manifest)
        objects = embedstore.read_embeddings(embeddings)
        if not objects.normalized:
            objects = normalized_copy(objects)
        prompt_set = embedstore.load_prompt_set(prompt_file)
        expanded = expand_prompts(prompt_set)
        store = embedstore.read_embeddings(prompt_embeddings)
        if not store.normalized:
            store = normalized_copy(store)
        index = store.row_index()
        missing = [text for _, text in expanded if text not in index]
        if missing:
            raise MissingEmbedding(missing[0], str(prompt_embeddings))
        variant_vectors = store.rows_for([text for _, text in expanded]).with_ids(
            [label for label, _ in expanded]
        )
        per_class = {}
        for label, _ in expanded:
            per_class[label] = per_class.get(label, 0) + 1
        click.echo(
            "prompts per class: "
            + ", ".join(f"{c}={per_class[c]}" for c in prompt_set.classes)
        )
        class_vectors = ensemble_embed(variant_vectors)
        truth = {r.crop_id: r.class_label for r in pool.records}
        wanted = [r.crop_id for r in pool.records]
        obj_index = objects.row_index()
        lost = [c for c in wanted if c not in obj_index]
        if lost:
            raise MissingEmbedding(lost[0], str(embeddings))
        c = classify_matrix(objects.rows_for(wanted), class_vectors)
        outcome = classification_outcome(c, truth)
        d = _out_dir(str(out_dir) if out_dir else None)
        doc = {
            "top1_accuracy": outcome.top1_accuracy,
            "top5_accuracy": outcome.top5_accuracy,
            "objects": len(wanted),
            "classes": len(class_vectors),
            "template_mode": prompt_set.template_mode,
        }
        (d / "classification.json").write_text(
            json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )
        if render_figures:
            figures.render_classification_figure(
                outcome.top1_accuracy, outcome.top5_accuracy, d / "classification.png"
            )
        _write_config_echo(
            d, "classify",
            {"manifest": manifest, "embeddings": embeddings,
             "prompt_file": prompt_file, "prompt_embeddings": prompt_embeddings},
            [manifest, embeddings, prompt_file, prompt_embeddings],
        )
        click.echo(f"top-1: {outcome.top1_accuracy:.4f}  top-5: {outcome.top5_accuracy:.4f}")
    except click.UsageError:
        raise
    except SemMatchError as err:
        _fail_data(err)


@main.command("prompt-report")
@click.option("--embeddings", required=True, type=click.Path(exists=True, path_type=Path),
              help="Crop embedding store.")
@click.option("--crop-ids", default=None,
              help="Comma list of reference crops (default: all).")
@click.option("--prompt-embeddings", required=True,
              type=click.Path(exists=True, path_type=Path),
              help="Candidate description embeddings (ids are the descriptions).")
@click.option("--out", type=click.Path(path_type=Path), default=None)
def cmd_prompt_report(embeddings, crop_ids, prompt_embeddings, out):
    """Crop-by-description cosine table for manual prompt engineering."""
    try:
        crops = embedstore.read_embeddings(embeddings)
        if not crops.normalized:
            crops = normalized_copy(crops)
        prompts = embedstore.read_embeddings(prompt_embeddings)
        if not prompts.normalized:
            prompts = normalized_copy(prompts)
        wanted = (
            [c.strip() for c in crop_ids.split(",") if c.strip()]
            if crop_ids
            else list(crops.crop_ids)
        )
        index = crops.row_index()
        lost = [c for c in wanted if c not in index]
        if lost:
            raise MissingEmbedding(lost[0], str(embeddings))
        c = classify_matrix(crops.rows_for(wanted), prompts)
        lines = []
        for i, crop in enumerate(c.row_ids):
            order = np.argsort(-c.entries[i], kind="stable")
            lines.append(f"crop {crop}:")
            for j in order:
                lines.append(f"  {c.entries[i, j]:+.4f}  {c.col_labels[j]}")
        text = "\n".join(lines) + "\n"
        click.echo(text, nl=False)
        if out is not None:
            Path(out).write_text(text, encoding="utf-8")
    except click.UsageError:
        raise
    except SemMatchError as err:
        _fail_data(err)


if __name__ == "__main__":
    main()
