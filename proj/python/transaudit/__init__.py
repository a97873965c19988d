"""Integrity audit and quality analysis for machine-translated benchmarks."""

import json
from os import fspath

from . import _transaudit as _native
from ._transaudit import (
    Error,
    __version__,
    average_ranks,
    deserialize_fragments,
    friedman,
    leakage_inflation,
    majority_threshold,
    nemenyi_cd,
    serialize_fragments,
    spearman,
)

__all__ = [
    "Error",
    "__version__",
    "analyze_ranks",
    "audit",
    "average_ranks",
    "compare",
    "deserialize_fragments",
    "friedman",
    "landscape",
    "leakage_inflation",
    "majority_threshold",
    "nemenyi_cd",
    "serialize_fragments",
    "spearman",
]


def _paths(p):
    if isinstance(p, (str, bytes)) or hasattr(p, "__fspath__"):
        return [fspath(p)]
    return [fspath(x) for x in p]


def analyze_ranks(systems, blocks, per_block_ranks, alpha=0.05):
    """Friedman + Nemenyi over a rank matrix; returns a dict."""
    return json.loads(_native.analyze_ranks(list(systems), list(blocks), per_block_ranks, alpha))


def audit(corpus, english, languages=()):
    """Structural audit of translated JSONL files against the English originals."""
    return json.loads(_native.audit(_paths(corpus), _paths(english), list(languages)))


def landscape(scores):
    """Per (language, dataset, system) score summaries."""
    return json.loads(_native.landscape(_paths(scores)))


def compare(scores, system_a, system_b, mode="ref_free", bootstrap=5000, alpha=0.05, seed=20240917):
    """Median delta, win rate and paired bootstrap interval for two systems."""
    return json.loads(_native.compare(_paths(scores), system_a, system_b, mode, bootstrap, alpha, seed))
