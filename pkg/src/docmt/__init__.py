"""Toolkit for document-image machine translation: BLEU, MBR candidate
selection, output post-processing, training-data assembly, candidate
collection, and evaluation reporting."""

__version__ = "0.1.0"

from .bleu import BleuConfig, BleuScore, Smoothing, corpus_bleu, sentence_bleu
from .core import (AlignmentError, CollectionError, DocmtError, JsonlError,
                   SchemaError, Scheme, Segment, SubTask, TokenSequence, Track,
                   TrackKind, read_jsonl, tokenize, write_jsonl)
from .mbr import Candidate, CandidateSet, MbrResult, Origin, mbr_batch, mbr_select
from .postprocess import (PostprocessConfig, PostprocessReport, Rule,
                          compress_runs, normalize_spaces, run_pipeline,
                          suppress_complex_table)

__all__ = [
    "AlignmentError", "BleuConfig", "BleuScore", "Candidate", "CandidateSet",
    "CollectionError", "DocmtError", "JsonlError", "MbrResult", "Origin",
    "PostprocessConfig", "PostprocessReport", "Rule", "SchemaError", "Scheme",
    "Segment", "Smoothing", "SubTask", "TokenSequence", "Track", "TrackKind",
    "compress_runs", "corpus_bleu", "mbr_batch", "mbr_select",
    "normalize_spaces", "read_jsonl", "run_pipeline", "sentence_bleu",
    "suppress_complex_table", "tokenize", "write_jsonl",
]
