"""Command-line interface: generate, mbr, postprocess, score, build-data,
and the staged pipeline driver with a run manifest."""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time

import click

from . import __version__
from .bleu import BleuConfig, Smoothing
from .core import (AlignmentError, CollectionError, DocmtError, JsonlError,
                   SchemaError, Scheme, Segment, SubTask, Track, TrackKind,
                   read_jsonl, write_jsonl)
from .dataset import MixtureSpec, MixtureSummary, build_mixture
from .evaluate import config_fingerprint, score_subtask
from .genclient import EndpointConfig, GenerationClient, SamplingConfig
from .mbr import CandidateSet, mbr_batch
from .postprocess import PostprocessConfig, run_pipeline as postprocess_text

DEFAULT_PROMPT = "Translate the following text into Chinese:\n{source_text}"

# Distinct exit codes per failure class.
EXIT_CODES = {
    JsonlError: 3,
    SchemaError: 4,
    AlignmentError: 5,
    CollectionError: 6,
}
EXIT_MISSING_INPUT = 7

# Which stage produces each pipeline artifact, for actionable errors.
STAGE_PRODUCERS = {
    "candidates": "generate",
    "mbr": "mbr",
    "postprocessed": "postprocess",
}


class MissingStageInput(DocmtError):
    def __init__(self, path, producer):
        self.producer = producer
        msg = f"missing input file {path}"
        if producer:
            msg += f" (produced by the {producer!r} stage; run it first)"
        super().__init__(msg)


def _fail(exc: DocmtError):
    click.echo(f"error: {exc}", err=True)
    if isinstance(exc, MissingStageInput):
        sys.exit(EXIT_MISSING_INPUT)
    for cls, code in EXIT_CODES.items():
        if isinstance(exc, cls):
            sys.exit(code)
    sys.exit(1)


def _bleu_from_dict(data: dict) -> BleuConfig:
    return BleuConfig(
        max_order=data.get("max_order", 4),
        smoothing=Smoothing(data.get("smoothing", "floor_epsilon")),
        epsilon=data.get("epsilon", 0.1),
        tokenization=Scheme(data.get("tokenization", "mixed")),
    )


def _load_config(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    paths = cfg.get("paths", {})
    cfg["paths"] = {
        key: value if os.path.isabs(value) else os.path.join(base, value)
        for key, value in paths.items()
    }
    return cfg


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _require_input(path, producer=None):
    if not os.path.exists(path):
        raise MissingStageInput(path, producer)


def _run_generate(input_path, out_path, endpoint: EndpointConfig,
                  sampling: SamplingConfig, prompt_template: str) -> int:
    _require_input(input_path)
    segments = read_jsonl(input_path, schema=Segment.from_record)
    errors: list = []
    with GenerationClient(endpoint) as client:
        count = write_jsonl(
            client.collect_batch(segments, prompt_template, sampling,
                                 errors=errors),
            out_path,
        )
    for err in errors:
        click.echo(f"warning: {err}", err=True)
    return count


def _run_mbr(input_path, out_path, bleu_config: BleuConfig,
             parallelism: int) -> int:
    _require_input(input_path, STAGE_PRODUCERS["candidates"])
    sets = read_jsonl(input_path, schema=CandidateSet.from_record)
    return write_jsonl(mbr_batch(sets, bleu_config, parallelism), out_path)


def _run_postprocess(input_path, out_path, config: PostprocessConfig) -> int:
    _require_input(input_path, STAGE_PRODUCERS["mbr"])

    def records():
        for record in read_jsonl(input_path):
            sid = record.get("segment_id") or record.get("id")
            text = record.get("selected_text", record.get("text", ""))
            report = postprocess_text(text, config)
            yield {
                "id": sid,
                "text": report.output_text,
                "rules_fired": [r.value for r in report.rules_fired],
                "runs_compressed": report.runs_compressed,
            }

    return write_jsonl(records(), out_path)


def _run_score(hyp_path, ref_path, sub_task: SubTask, bleu_config: BleuConfig,
               allow_partial: bool, out_path=None) -> float:
    _require_input(hyp_path, STAGE_PRODUCERS["postprocessed"])
    _require_input(ref_path)
    diagnostics = str(hyp_path) + ".diagnostics.json" if allow_partial else None
    value = score_subtask(hyp_path, ref_path, sub_task, bleu_config,
                          allow_partial=allow_partial,
                          diagnostics_path=diagnostics)
    payload = {
        "bleu": round(value, 2),
        "sub_task": sub_task.value,
        "config_fingerprint": config_fingerprint(bleu_config),
    }
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, ensure_ascii=False, indent=2)
    return value


@click.group()
@click.version_option(version=__version__)
def main():
    """Document-image translation toolkit: candidate generation, MBR
    selection, post-processing, scoring, and training-data assembly."""


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--base-url", required=True)
@click.option("--model", "model_name", required=True)
@click.option("--temperature", default=0.7, show_default=True)
@click.option("--top-p", default=0.95, show_default=True)
@click.option("--samples", default=10, show_default=True)
@click.option("--no-deterministic", is_flag=True,
              help="Skip the greedy deterministic request.")
@click.option("--prompt-template", default=DEFAULT_PROMPT, show_default=True)
@click.option("--max-retries", default=3, show_default=True)
@click.option("--concurrency", default=8, show_default=True)
@click.option("--timeout", default=120.0, show_default=True)
def generate(input_path, out_path, base_url, model_name, temperature, top_p,
             samples, no_deterministic, prompt_template, max_retries,
             concurrency, timeout):
    """Collect candidate sets from a chat-completion endpoint."""
    try:
        endpoint = EndpointConfig(base_url=base_url, model_name=model_name,
                                  max_retries=max_retries,
                                  max_concurrent_requests=concurrency,
                                  timeout=timeout)
        sampling = SamplingConfig(temperature=temperature, top_p=top_p,
                                  num_samples=samples,
                                  deterministic_pass=not no_deterministic)
        count = _run_generate(input_path, out_path, endpoint, sampling,
                              prompt_template)
    except DocmtError as exc:
        _fail(exc)
    click.echo(f"wrote {count} candidate sets to {out_path}")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--parallelism", default=1, show_default=True)
@click.option("--max-order", default=4, show_default=True)
@click.option("--smoothing", default="floor_epsilon", show_default=True,
              type=click.Choice([s.value for s in Smoothing]))
@click.option("--epsilon", default=0.1, show_default=True)
@click.option("--tokenization", default="mixed", show_default=True,
              type=click.Choice([s.value for s in Scheme]))
def mbr(input_path, out_path, parallelism, max_order, smoothing, epsilon,
        tokenization):
    """Select the highest-utility candidate per segment by pairwise BLEU."""
    try:
        config = BleuConfig(max_order=max_order, smoothing=Smoothing(smoothing),
                            epsilon=epsilon, tokenization=Scheme(tokenization))
        count = _run_mbr(input_path, out_path, config, parallelism)
    except DocmtError as exc:
        _fail(exc)
    click.echo(f"wrote {count} selections to {out_path}")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="JSON file with postprocess settings; flags win.")
@click.option("--max-run-length", type=int, default=None)
@click.option("--table-pipe-threshold", type=int, default=None)
@click.option("--table-row-threshold", type=int, default=None)
@click.option("--no-collapse-spaces", is_flag=True)
@click.option("--strip-cjk-boundary-spaces", is_flag=True)
@click.option("--special-symbols", default=None,
              help="Symbols treated as compressible runs, as one string.")
def postprocess(input_path, out_path, config_path, max_run_length,
                table_pipe_threshold, table_row_threshold, no_collapse_spaces,
                strip_cjk_boundary_spaces, special_symbols):
    """Apply table suppression, run compression, and space normalization."""
    try:
        data = {}
        if config_path:
            with open(config_path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        if max_run_length is not None:
            data["max_run_length"] = max_run_length
        if table_pipe_threshold is not None:
            data["table_pipe_threshold"] = table_pipe_threshold
        if table_row_threshold is not None:
            data["table_row_threshold"] = table_row_threshold
        if no_collapse_spaces:
            data["collapse_spaces"] = False
        if strip_cjk_boundary_spaces:
            data["strip_cjk_boundary_spaces"] = True
        if special_symbols is not None:
            data["special_symbols"] = frozenset(special_symbols)
        config = PostprocessConfig.from_dict(data)
        count = _run_postprocess(input_path, out_path, config)
    except DocmtError as exc:
        _fail(exc)
    click.echo(f"wrote {count} post-processed outputs to {out_path}")


@main.command()
@click.option("--track", type=click.Choice(["1", "2"]), required=True)
@click.option("--split", type=click.Choice(["valid", "test"]), required=True)
@click.option("--subtask", type=click.Choice(["ocr", "mt"]), required=True)
@click.option("--hyp", "hyp_path", required=True, type=click.Path())
@click.option("--ref", "ref_path", required=True, type=click.Path())
@click.option("--allow-partial", is_flag=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
@click.option("--max-order", default=4, show_default=True)
@click.option("--smoothing", default="none", show_default=True,
              type=click.Choice([s.value for s in Smoothing]))
@click.option("--tokenization", default="mixed", show_default=True,
              type=click.Choice([s.value for s in Scheme]))
def score(track, split, subtask, hyp_path, ref_path, allow_partial, out_path,
          max_order, smoothing, tokenization):
    """Score hypotheses against references with corpus BLEU x 100."""
    try:
        kind = TrackKind.TRACK1_WEBDOC if track == "1" else TrackKind.TRACK2_ARXIV
        Track(kind, SubTask(subtask))  # rejects track2 OCR
        config = BleuConfig(max_order=max_order, smoothing=Smoothing(smoothing),
                            tokenization=Scheme(tokenization))
        value = _run_score(hyp_path, ref_path, SubTask(subtask), config,
                           allow_partial, out_path)
    except DocmtError as exc:
        _fail(exc)
    click.echo(f"{kind.value} {split} {subtask}: BLEU = {value:.2f}")


@main.command("build-data")
@click.option("--track", type=click.Choice(["1", "2"]), required=True)
@click.option("--split", type=click.Choice(["train", "valid", "test"]),
              required=True)
@click.option("--mixture", "mixture_path", required=True,
              type=click.Path(exists=True),
              help="JSON file with weights, seed, and prompt templates.")
@click.option("--seed", type=int, default=None, help="Overrides the file seed.")
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--stats-out", "stats_path", type=click.Path(), default=None)
def build_data(track, split, mixture_path, seed, input_path, out_path,
               stats_path):
    """Assemble multi-task / chained fine-tuning conversations."""
    try:
        with open(mixture_path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if seed is not None:
            data["seed"] = seed
        spec = MixtureSpec.from_dict(data)
        kind = TrackKind.TRACK1_WEBDOC if track == "1" else TrackKind.TRACK2_ARXIV
        _require_input(input_path)
        segments = read_jsonl(input_path, schema=Segment.from_record)
        summary = MixtureSummary()
        count = write_jsonl(
            build_mixture(segments, spec, Track(kind, SubTask.MT), summary),
            out_path,
        )
        if stats_path:
            with open(stats_path, "w", encoding="utf-8") as fh:
                json.dump({"split": split, **summary.to_record()}, fh,
                          ensure_ascii=False, indent=2)
    except DocmtError as exc:
        _fail(exc)
    if summary.skipped:
        click.echo(f"warning: skipped {summary.skipped} infeasible segments",
                   err=True)
    click.echo(f"wrote {count} examples to {out_path}")


STAGES = ("generate", "mbr", "postprocess", "score")


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True))
@click.option("--stages", default="mbr,postprocess,score", show_default=True,
              help="Comma-separated ordered subset of "
                   "generate,mbr,postprocess,score.")
def pipeline(config_path, stages):
    """Run an ordered subset of the inference pipeline with one config file;
    writes a run manifest beside the outputs."""
    requested = [s.strip() for s in stages.split(",") if s.strip()]
    for stage in requested:
        if stage not in STAGES:
            raise click.UsageError(f"unknown stage {stage!r}")
    try:
        cfg = _load_config(config_path)
        paths = cfg["paths"]
        bleu_config = _bleu_from_dict(cfg.get("bleu", {}))
        eval_config = _bleu_from_dict(cfg.get("eval_bleu", {"smoothing": "none"}))
        manifest = {
            "config": os.path.abspath(config_path),
            "bleu_fingerprint": config_fingerprint(bleu_config),
            "stages": [],
        }
        started = time.time()
        for stage in requested:
            stage_start = time.time()
            if stage == "generate":
                endpoint = EndpointConfig.from_dict(cfg["endpoint"])
                sampling = SamplingConfig(**cfg.get("sampling", {}))
                count = _run_generate(
                    paths["segments"], paths["candidates"], endpoint, sampling,
                    cfg.get("prompt_template", DEFAULT_PROMPT))
                inputs = [paths["segments"]]
            elif stage == "mbr":
                count = _run_mbr(paths["candidates"], paths["mbr"], bleu_config,
                                 int(cfg.get("parallelism", 1)))
                inputs = [paths["candidates"]]
            elif stage == "postprocess":
                pp = PostprocessConfig.from_dict(cfg.get("postprocess", {}))
                count = _run_postprocess(paths["mbr"], paths["postprocessed"], pp)
                inputs = [paths["mbr"]]
            else:
                value = _run_score(
                    paths["postprocessed"], paths["references"],
                    SubTask(cfg.get("subtask", "mt")), eval_config,
                    bool(cfg.get("allow_partial", False)),
                    paths.get("score"))
                count = 1
                inputs = [paths["postprocessed"], paths["references"]]
                click.echo(f"score: BLEU = {value:.2f}")
            manifest["stages"].append({
                "stage": stage,
                "records": count,
                "input_hashes": {p: _sha256_file(p) for p in inputs},
                "seconds": round(time.time() - stage_start, 3),
            })
        manifest["wall_time_seconds"] = round(time.time() - started, 3)
        output_keys = ("candidates", "mbr", "postprocessed", "score")
        out_dir = next(
            (os.path.dirname(paths[k]) for k in output_keys if k in paths),
            os.path.dirname(os.path.abspath(config_path))) or "."
        manifest_path = os.path.join(out_dir, "manifest.json")
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, ensure_ascii=False, indent=2)
    except DocmtError as exc:
        _fail(exc)
    click.echo(f"pipeline ok ({len(requested)} stages); manifest: {manifest_path}")


if __name__ == "__main__":
    main()
