"""Detecting watermarked segments in edited token sequences.

A toy Markov language model, ITS/EMS watermark decoders, randomization tests
that turn a text into per-token p-values, and change-point segmentation of
that p-value sequence.
"""
from .attacks_eval import (ExperimentConfig, GroundTruth, attack_delete, attack_insert,
                           attack_substitute, build_setting, rand_index, run_experiment)
from .dependence import MeasureKind, levenshtein_cost, measure
from .errors import InvalidParameter, InvalidToken
from .rtest import TestConfig, global_test, window_pvalues
from .segmentation import SegmentationConfig, seedbs_not
from .toy_lm import TokenModel, TokenSequence, new_markov_model, sample_plain
from .watermark import KeySequence, gen_keys, generate_watermarked

__version__ = "0.1.0"

__all__ = [
    "ExperimentConfig", "GroundTruth", "InvalidParameter", "InvalidToken", "KeySequence",
    "MeasureKind", "SegmentationConfig", "TestConfig", "TokenModel", "TokenSequence",
    "attack_delete", "attack_insert", "attack_substitute", "build_setting", "gen_keys",
    "generate_watermarked", "global_test", "levenshtein_cost", "measure", "new_markov_model",
    "rand_index", "run_experiment", "sample_plain", "seedbs_not", "window_pvalues",
]
