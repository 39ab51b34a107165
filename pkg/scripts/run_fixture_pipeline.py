#!/usr/bin/env python3
"""Run the full inference pipeline against the bundled fixtures and a local
mock endpoint, then print the scored result as a report row.

Usage: python3 scripts/run_fixture_pipeline.py [output_dir]
"""

import json
import pathlib
import subprocess
import sys

REPO = pathlib.Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO))

from tests.mockserver import MockEndpoint, RecordedResponder  # noqa: E402

from docmt.evaluate import EvalReport, EvalRow, render_report  # noqa: E402

FIXTURES = REPO / "tests" / "fixtures"


def main():
    out_dir = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "fixture_run")
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(FIXTURES / "mock_responses.json", encoding="utf-8") as fh:
        recordings = json.load(fh)

    with MockEndpoint(responder=RecordedResponder(recordings)) as server:
        config = {
            "endpoint": {"base_url": server.base_url,
                         "model_name": "fixture-model",
                         "max_retries": 1, "backoff_base": 0.01},
            "sampling": {"temperature": 0.7, "top_p": 0.95, "num_samples": 10},
            "bleu": {"smoothing": "floor_epsilon"},
            "postprocess": {},
            "subtask": "mt",
            "paths": {
                "segments": str(FIXTURES / "segments.jsonl"),
                "references": str(FIXTURES / "segments.jsonl"),
                "candidates": str(out_dir / "candidates.jsonl"),
                "mbr": str(out_dir / "mbr.jsonl"),
                "postprocessed": str(out_dir / "postprocessed.jsonl"),
                "score": str(out_dir / "score.json"),
            },
        }
        config_path = out_dir / "pipeline.json"
        config_path.write_text(json.dumps(config, indent=2), encoding="utf-8")
        subprocess.run(
            [sys.executable, "-m", "docmt.cli", "pipeline",
             "--config", str(config_path),
             "--stages", "generate,mbr,postprocess,score"],
            check=True)

    scored = json.loads((out_dir / "score.json").read_text(encoding="utf-8"))
    report = EvalReport(
        rows=(EvalRow("fixture-model +mbr +postprocess",
                      {"track1/valid/mt": scored["bleu"]}),),
        config_fingerprint=scored["config_fingerprint"])
    print()
    print(render_report(report, "markdown"))


if __name__ == "__main__":
    main()
