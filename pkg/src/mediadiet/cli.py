"""Command-line interface: standalone subcommands plus the config-driven
pipeline.

Exit codes: 0 ok, 2 validation (bad config/arguments), 3 stage failure.
Pipeline artifacts land under the configured output directory together with a
run manifest recording the config hash, seeds, and model tags; a failed stage
leaves a FAILED marker and halts downstream stages.
"""

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path

import pandas as pd

from . import __version__, gateway, probe, survey, synth
from .analysis import (
    correlations_to_frame,
    fit_ols,
    grouped_correlations,
    pearson_bootstrap,
    regression_report,
    rolling_predict,
)
from .analysis.regression import RegressionFit
from .analysis.seeds import derive_seed
from .config import ALL_STAGES, PipelineConfig, parse_backend
from .corpus import (
    CorpusManifest,
    MediaDietDataset,
    ingest_documents,
    read_documents_jsonl,
)
from .errors import ConfigError, MediaDietError, StageDependencyError
from .explain import nearest_training_sentences, neighbors_to_csv
from .ngram import train_ngram
from .paraphrase import EmbeddingTable, backtranslate, synonym_substitute

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_STAGE_FAILURE = 3


def _read_manifest_header(path: Path) -> CorpusManifest:
    with open(path, encoding="utf-8") as f:
        d = json.load(f)
    return CorpusManifest(
        dataset_id=d["dataset_id"], outlet=d["outlet"], medium=d["medium"],
        topic=d.get("topic", ""), window_start=dt.date.fromisoformat(d["window_start"]),
        window_end=dt.date.fromisoformat(d["window_end"]))


def _read_keywords(path: Path | None) -> list[str] | None:
    if path is None:
        return None
    return [w.strip() for w in Path(path).read_text(encoding="utf-8").splitlines()
            if w.strip()]


# -- standalone subcommands ----------------------------------------------------


def cmd_ingest(args) -> int:
    header = _read_manifest_header(Path(args.manifest))
    result = ingest_documents(read_documents_jsonl(args.input), header,
                              keywords=_read_keywords(args.keyword_filter))
    out = Path(args.out or header.dataset_id)
    result.dataset.save(out)
    print(f"ingested {result.manifest.doc_count} docs, "
          f"{result.manifest.sentence_count} sentences -> {out}")
    if result.report.skipped_outside_window:
        print(f"  skipped outside window: {result.report.skipped_outside_window}")
    if result.report.skipped_keyword_filter:
        print(f"  skipped by keyword filter: {result.report.skipped_keyword_filter}")
    return EXIT_OK


def cmd_train_ngram(args) -> int:
    dataset = MediaDietDataset.load(args.dataset)
    model = train_ngram(dataset, order=args.order, discount=args.discount)
    model.save(args.out)
    print(f"trained order-{args.order} model on {dataset.manifest.dataset_id} "
          f"({len(dataset)} sentences) -> {args.out}")
    return EXIT_OK


def _parse_diet_args(pairs: list[str]) -> list[tuple[str, gateway.BackendRef]]:
    diets = []
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError("--diet", f"expected DIET_ID=MODEL_PATH, got {pair!r}")
        diet_id, path = pair.split("=", 1)
        diets.append((diet_id, gateway.BackendRef("ngram", path, f"kn:{diet_id}")))
    return diets


def cmd_score(args) -> int:
    lexicon = probe.load_synonym_lexicon(args.synonyms) if args.synonyms else None
    prompts = probe.load_prompts(args.prompts, lexicon)
    diets = _parse_diet_args(args.diet)
    base = gateway.BackendRef("ngram", args.base, args.base_tag)
    scores = probe.score_matrix(diets, prompts, base)
    probe.validate_provenance(scores)
    probe.write_scores_csv(scores, args.out)
    n_err = int((scores["error"] != "").sum())
    print(f"scored {len(scores)} cells ({n_err} errors) -> {args.out}")
    return EXIT_OK


def cmd_paraphrase(args) -> int:
    prompts = probe.load_prompts(args.prompts)
    variants = []
    if args.method == "synsub":
        table = EmbeddingTable.load(args.embeddings)
        for p in prompts:
            variants.extend(synonym_substitute(p, table, max_subs=args.max_subs,
                                               min_cos=args.min_cos).variants)
    else:
        ref = gateway.BackendRef(args.mt_kind, args.mt, args.mt_tag)
        for p in prompts:
            variants.extend(backtranslate(p, ref, n_samples=args.n_samples,
                                          topk=args.topk).variants)
    probe.save_prompts(variants, args.out)
    print(f"wrote {len(variants)} variants -> {args.out}")
    return EXIT_OK


def cmd_analyze(args) -> int:
    scores = probe.read_scores_csv(args.scores)
    probe.validate_provenance(scores)
    if args.mapping:
        with open(args.mapping, encoding="utf-8") as f:
            waves = survey.load_waves_csv(args.waves, json.load(f))
    else:
        waves = survey.load_canonical_waves_csv(args.waves)
    joined = survey.join_scores_responses(scores, waves)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _run_analysis(joined, {"model": args.model, "bootstrap": args.bootstrap},
                  args.seed, out_dir)
    print(f"analysis artifacts -> {out_dir}")
    return EXIT_OK


def cmd_explain(args) -> int:
    prompts = probe.load_prompts(args.prompts)
    by_id = {p.prompt_id: p for p in prompts}
    if args.prompt_id not in by_id:
        raise ConfigError("--prompt-id", f"unknown prompt {args.prompt_id!r}")
    filled = by_id[args.prompt_id].template.replace(probe.BLANK, args.fill)
    dataset = MediaDietDataset.load(args.dataset)
    backend = gateway.BackendRef(args.backend_kind, args.backend, args.tag)
    result = nearest_training_sentences(filled, dataset, backend, k=args.k,
                                        cache_dir=args.cache_dir)
    neighbors_to_csv(result, args.out)
    print(f"top-{args.k} neighbors of {filled!r} -> {args.out}")
    return EXIT_OK


def cmd_rolling(args) -> int:
    with open(args.windows, encoding="utf-8") as f:
        spec = json.load(f)
    dated = []
    for item in spec:
        window = (dt.date.fromisoformat(item["start"]),
                  dt.date.fromisoformat(item["end"]))
        if item.get("model"):
            ref = gateway.BackendRef("ngram", item["model"],
                                     item.get("tag", f"kn:{item['model']}"))
            dated.append((window, ref))
        else:
            dated.append((window, None))
    prompts = probe.load_prompts(args.prompts)
    with open(args.fit, encoding="utf-8") as f:
        fit = RegressionFit.from_json_dict(json.load(f))
    base = gateway.BackendRef("ngram", args.base, args.base_tag)
    waves = survey.load_canonical_waves_csv(args.waves) if args.waves else None
    table = rolling_predict(dated, prompts, fit, base, waves=waves)
    table.to_csv(args.out, index=False, lineterminator="\n")
    print(f"{len(table)} rolling predictions -> {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    with open(args.spec, encoding="utf-8") as f:
        raw = json.load(f)
    spec = synth.SynthSpec(
        token_distribution=raw["token_distribution"],
        n_sentences=int(raw["n_sentences"]),
        sentence_length=int(raw.get("sentence_length", 10)),
        seed=int(raw.get("seed", 0)),
        dataset_id=raw.get("dataset_id", "synth"))
    dataset, counts = synth.gen_corpus(spec)
    out = Path(args.out_dir)
    dataset.save(out / spec.dataset_id)
    with open(out / f"{spec.dataset_id}_counts.json", "w", encoding="utf-8") as f:
        json.dump(dict(sorted(counts.items())), f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"synthetic corpus {spec.dataset_id}: {len(dataset)} sentences -> {out}")
    return EXIT_OK


# -- pipeline ------------------------------------------------------------------


def _stage_ingest(cfg: PipelineConfig, state: dict):
    reports = {}
    for item in cfg.ingest:
        header = _read_manifest_header(item["manifest"])
        result = ingest_documents(read_documents_jsonl(item["input"]), header,
                                  keywords=_read_keywords(item["keyword_filter"]))
        target = cfg.output_dir / "datasets" / header.dataset_id
        result.dataset.save(target)
        state["datasets"][header.dataset_id] = target
        reports[header.dataset_id] = {
            "doc_count": result.manifest.doc_count,
            "sentence_count": result.manifest.sentence_count,
            "skipped_outside_window": result.report.skipped_outside_window,
            "skipped_keyword_filter": result.report.skipped_keyword_filter,
        }
    state["manifest"]["ingest"] = reports


def _resolve_dataset(cfg: PipelineConfig, state: dict, name: str) -> Path:
    if name in state["datasets"]:
        return state["datasets"][name]
    candidates = [Path(name), cfg.base_dir / name,
                  cfg.output_dir / "datasets" / name]
    for c in candidates:
        if (Path(c) / "manifest.json").exists():
            return Path(c)
    raise StageDependencyError(
        f"dataset {name!r} not found (looked in {[str(c) for c in candidates]}); "
        f"run the ingest stage or point at an existing dataset directory")


def _stage_train(cfg: PipelineConfig, state: dict):
    models_dir = cfg.output_dir / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    for item in cfg.train:
        ds_dir = _resolve_dataset(cfg, state, item["dataset"])
        dataset = MediaDietDataset.load(ds_dir)
        model = train_ngram(dataset, order=item["order"], discount=item["discount"])
        path = models_dir / f"{item['diet_id']}.kn"
        model.save(path)
        state["trained"][item["diet_id"]] = path
        window = (dataset.manifest.window_start, dataset.manifest.window_end)
        state["diet_windows"][item["diet_id"]] = window
        state["diet_media"][item["diet_id"]] = dataset.manifest.medium
    state["manifest"]["models"] = {
        k: str(Path(v).relative_to(cfg.output_dir)) for k, v in state["trained"].items()}


def _collect_diets(cfg: PipelineConfig, state: dict) -> list:
    diets = []
    for diet_id, backend_raw in cfg.diets:
        diets.append((diet_id, parse_backend(backend_raw, "diets.backend",
                                             cfg.base_dir)))
    for item in cfg.train:
        diet_id = item["diet_id"]
        path = state["trained"].get(diet_id, cfg.output_dir / "models" / f"{diet_id}.kn")
        if not Path(path).exists():
            raise StageDependencyError(
                f"no trained model for diet {diet_id!r} at {path}; run the train stage")
        diets.append((diet_id, gateway.BackendRef("ngram", str(path), f"kn:{diet_id}")))
    if not diets:
        raise StageDependencyError("no diets configured: provide 'diets' or 'train'")
    return diets


def _stage_score(cfg: PipelineConfig, state: dict):
    gateway.clear_backend_caches()
    lexicon = (probe.load_synonym_lexicon(cfg.synonym_lexicon_path)
               if cfg.synonym_lexicon_path else None)
    prompts = probe.load_prompts(cfg.prompts_path, lexicon)
    diets = _collect_diets(cfg, state)
    base = parse_backend(cfg.base_backend_raw, "base_backend", cfg.base_dir)
    scores = probe.score_matrix(diets, prompts, base)
    probe.validate_provenance(scores)
    path = cfg.output_dir / "scores.csv"
    probe.write_scores_csv(scores, path)
    state["scores_path"] = path
    state["manifest"]["model_tags"] = {
        "base": base.model_tag, "diets": {d: r.model_tag for d, r in diets}}
    state["artifacts"].append(path)


def _load_scores(cfg: PipelineConfig, state: dict) -> pd.DataFrame:
    path = state.get("scores_path", cfg.output_dir / "scores.csv")
    if not Path(path).exists():
        raise StageDependencyError(f"no score table at {path}; run the score stage")
    return probe.read_scores_csv(path)


def _load_questions(cfg: PipelineConfig) -> list | None:
    if not cfg.questions_path:
        return None
    with open(cfg.questions_path, encoding="utf-8") as f:
        raw = json.load(f)
    return [survey.SurveyQuestion(
        question_id=q["question_id"], text=q.get("text", ""),
        choices=tuple(q["choices"]), opposing_pair=tuple(q["opposing_pair"]),
        category=q.get("category", ""), topic=q.get("topic", "")) for q in raw]


def _stage_join(cfg: PipelineConfig, state: dict):
    scores = _load_scores(cfg, state)
    if "synthetic" in cfg.survey:
        synth_cfg = cfg.survey["synthetic"]
        waves, params = synth.gen_survey(
            scores, synth_cfg["coefficients"],
            noise_sd=float(synth_cfg.get("noise_sd", 0.0)),
            seed=int(synth_cfg.get("seed", cfg.seed)),
            field_date=dt.date.fromisoformat(
                synth_cfg.get("field_date", "2020-04-20")))
        waves_path = cfg.output_dir / "synthetic_waves.csv"
        survey.write_waves_csv(waves, waves_path)
        synth.save_survey_params(params, cfg.output_dir / "survey_generator.json")
        state["artifacts"].append(waves_path)
    else:
        mapping = cfg.survey.get("mapping")
        waves_csv = cfg.base_dir / cfg.survey["waves_csv"]
        waves = (survey.load_waves_csv(waves_csv, mapping) if mapping
                 else survey.load_canonical_waves_csv(waves_csv))
    joined = survey.join_scores_responses(
        scores, waves, questions=_load_questions(cfg),
        diet_media=state["diet_media"] or None,
        diet_windows=state["diet_windows"] or None,
        allow_misaligned=bool(cfg.raw.get("allow_misaligned", False)))
    path = cfg.output_dir / "analysis_dataset.csv"
    joined.to_csv(path, index=False, lineterminator="\n")
    state["joined_path"] = path
    state["artifacts"].append(path)


def _load_joined(cfg: PipelineConfig, state: dict) -> pd.DataFrame:
    path = state.get("joined_path", cfg.output_dir / "analysis_dataset.csv")
    if not Path(path).exists():
        raise StageDependencyError(f"no analysis dataset at {path}; run the join stage")
    return pd.read_csv(path, keep_default_na=False,
                       dtype={"category": str, "topic": str, "medium": str,
                              "variant": str})


def _run_analysis(joined: pd.DataFrame, options: dict, seed: int, out_dir: Path):
    model = options.get("model", "model1")
    B = int(options.get("bootstrap", 2000))
    fit = fit_ols(joined, model=model, B=B, seed=seed)
    regression_report(fit).to_csv(out_dir / f"regression_{model}.csv", index=False,
                                  lineterminator="\n")
    with open(out_dir / f"fit_{model}.json", "w", encoding="utf-8") as f:
        json.dump(fit.to_json_dict(), f, indent=2, sort_keys=True)
        f.write("\n")
    overall = pearson_bootstrap(joined["score"].to_numpy(),
                                joined["proportion"].to_numpy(),
                                B=B, seed=derive_seed(seed, "overall"))
    pd.DataFrame([{"group": "all", "r": overall.r, "ci_low": overall.ci_low,
                   "ci_high": overall.ci_high, "n": overall.n}]).to_csv(
        out_dir / "correlation_overall.csv", index=False, lineterminator="\n")
    for group_by in options.get("group_by", []):
        results, skipped = grouped_correlations(joined, group_by, B=B, seed=seed)
        frame = correlations_to_frame(results)
        frame.to_csv(out_dir / f"correlations_{group_by}.csv", index=False,
                     lineterminator="\n")
        if skipped:
            log.info("group_by=%s skipped undersized groups: %s", group_by, skipped)
    return fit


def _stage_analyze(cfg: PipelineConfig, state: dict):
    joined = _load_joined(cfg, state)
    fit = _run_analysis(joined, cfg.analysis, cfg.seed, cfg.output_dir)
    model = cfg.analysis.get("model", "model1")
    state["fit_path"] = cfg.output_dir / f"fit_{model}.json"
    for name in (f"regression_{model}.csv", "correlation_overall.csv"):
        state["artifacts"].append(cfg.output_dir / name)


def _stage_explain(cfg: PipelineConfig, state: dict):
    spec = cfg.explain
    dataset = MediaDietDataset.load(_resolve_dataset(cfg, state, spec["dataset"]))
    backend = parse_backend(spec["backend"], "explain.backend", cfg.base_dir)
    result = nearest_training_sentences(
        spec["query"], dataset, backend, k=int(spec.get("k", 10)),
        cache_dir=cfg.output_dir / "embed_cache")
    path = cfg.output_dir / "neighbors.csv"
    neighbors_to_csv(result, path)
    state["artifacts"].append(path)


def _stage_rolling(cfg: PipelineConfig, state: dict):
    spec = cfg.rolling
    fit_path = Path(spec.get("fit", state.get("fit_path",
                                              cfg.output_dir / "fit_model1.json")))
    if not fit_path.exists():
        raise StageDependencyError(f"no fitted model at {fit_path}; run analyze first")
    with open(fit_path, encoding="utf-8") as f:
        fit = RegressionFit.from_json_dict(json.load(f))
    dated = []
    for item in spec["windows"]:
        window = (dt.date.fromisoformat(item["start"]),
                  dt.date.fromisoformat(item["end"]))
        if item.get("model"):
            path = _existing(cfg, item["model"])
            dated.append((window, gateway.BackendRef(
                "ngram", str(path), item.get("tag", f"kn:{Path(item['model']).stem}"))))
        else:
            dated.append((window, None))
    prompts = probe.load_prompts(cfg.prompts_path)
    if spec.get("prompt_ids"):
        keep = set(spec["prompt_ids"])
        prompts = [p for p in prompts if p.prompt_id in keep]
    base = parse_backend(cfg.base_backend_raw, "base_backend", cfg.base_dir)
    table = rolling_predict(dated, prompts, fit, base)
    path = cfg.output_dir / "rolling.csv"
    table.to_csv(path, index=False, lineterminator="\n")
    state["artifacts"].append(path)


def _existing(cfg: PipelineConfig, value: str) -> Path:
    for c in (Path(value), cfg.base_dir / value, cfg.output_dir / value):
        if c.exists():
            return c
    raise StageDependencyError(f"path {value!r} not found")


STAGE_RUNNERS = {
    "ingest": _stage_ingest,
    "train": _stage_train,
    "score": _stage_score,
    "join": _stage_join,
    "analyze": _stage_analyze,
    "explain": _stage_explain,
    "rolling": _stage_rolling,
}


def run_pipeline(cfg: PipelineConfig, stages: list[str]) -> dict:
    """Execute the requested stages in dependency order.

    Raises on the first failing stage after writing the FAILED marker;
    partial artifacts from completed stages are retained.
    """
    unknown = [s for s in stages if s not in ALL_STAGES]
    if unknown:
        raise ConfigError("stages", f"unknown stages {unknown}; valid: {ALL_STAGES}")
    ordered = [s for s in ALL_STAGES if s in stages]
    for stage in ordered:
        cfg.require_for_stage(stage)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    failed_marker = cfg.output_dir / "FAILED"
    if failed_marker.exists():
        failed_marker.unlink()
    state = {
        "datasets": {}, "trained": {}, "diet_windows": {}, "diet_media": {},
        "artifacts": [],
        "manifest": {"config_hash": cfg.hash, "seed": cfg.seed,
                     "version": __version__, "stages": ordered},
    }
    for stage in ordered:
        log.info("stage %s", stage)
        try:
            STAGE_RUNNERS[stage](cfg, state)
        except Exception as e:
            failed_marker.write_text(f"stage: {stage}\nerror: {type(e).__name__}: {e}\n")
            raise
    state["manifest"]["artifacts"] = sorted(
        str(Path(p).relative_to(cfg.output_dir)) for p in state["artifacts"])
    with open(cfg.output_dir / "run_manifest.json", "w", encoding="utf-8") as f:
        json.dump(state["manifest"], f, indent=2, sort_keys=True)
        f.write("\n")
    return state["manifest"]


def cmd_run(args) -> int:
    cfg = PipelineConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.stages:
        stages = args.stages.split(",")
    else:
        stages = [s for s in ALL_STAGES if _stage_configured(cfg, s)]
    manifest = run_pipeline(cfg, stages)
    print(f"pipeline ok: stages {','.join(manifest['stages'])} -> {cfg.output_dir}")
    return EXIT_OK


def _stage_configured(cfg: PipelineConfig, stage: str) -> bool:
    try:
        cfg.require_for_stage(stage)
        return True
    except ConfigError:
        return False


# -- argument parsing ------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mediadiet",
        description="Media-diet language models probed with survey-derived prompts")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="ingest JSONL documents into a dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--keyword-filter")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("train-ngram", help="train a Kneser-Ney model on a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--discount", type=float, default=0.75)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train_ngram)

    p = sub.add_parser("score", help="score prompts against diet backends")
    p.add_argument("--prompts", required=True)
    p.add_argument("--synonyms")
    p.add_argument("--diet", action="append", required=True,
                   metavar="DIET_ID=MODEL_PATH")
    p.add_argument("--base", required=True, help="background-unigram TSV or model file")
    p.add_argument("--base-tag", default="bg:v1")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_score)

    p = sub.add_parser("paraphrase", help="generate prompt variants")
    p.add_argument("--prompts", required=True)
    p.add_argument("--method", choices=["synsub", "backtranslation"], required=True)
    p.add_argument("--embeddings", help="word-vector table for synsub")
    p.add_argument("--max-subs", type=int, default=2)
    p.add_argument("--min-cos", type=float, default=0.6)
    p.add_argument("--mt", help="MT endpoint URL or replay cache path")
    p.add_argument("--mt-kind", choices=["neural_remote", "replay"],
                   default="neural_remote")
    p.add_argument("--mt-tag", default="")
    p.add_argument("--n-samples", type=int, default=25)
    p.add_argument("--topk", type=int, default=20)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_paraphrase)

    p = sub.add_parser("analyze", help="join scores with survey waves and fit models")
    p.add_argument("--scores", required=True)
    p.add_argument("--waves", required=True)
    p.add_argument("--mapping", help="JSON column mapping (default: canonical format)")
    p.add_argument("--model", choices=["model1", "model2"], default="model1")
    p.add_argument("--bootstrap", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("explain", help="nearest training sentences for a filled prompt")
    p.add_argument("--prompt-id", required=True)
    p.add_argument("--fill", required=True)
    p.add_argument("--prompts", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--backend", required=True)
    p.add_argument("--backend-kind", choices=["neural_remote", "replay"],
                   default="replay")
    p.add_argument("--tag", default="")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--cache-dir")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_explain)

    p = sub.add_parser("rolling", help="rolling predictions from dated models")
    p.add_argument("--windows", required=True, help="JSON list of {start,end,model}")
    p.add_argument("--prompts", required=True)
    p.add_argument("--fit", required=True, help="fit JSON from analyze")
    p.add_argument("--base", required=True)
    p.add_argument("--base-tag", default="bg:v1")
    p.add_argument("--waves")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_rolling)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("run", help="run the config-driven pipeline")
    p.add_argument("--config", required=True)
    p.add_argument("--stages", help="comma-separated subset of "
                   + ",".join(ALL_STAGES))
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_run)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except MediaDietError as e:
        print(f"stage failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_STAGE_FAILURE


if __name__ == "__main__":
    sys.exit(main())
