"""Python bindings for the QERS scoring core."""

import json

from ._qers import (
    QersError,
    classify,
    normalize,
    score_basic,
    score_csv,
    score_fusion,
    score_tuned,
    simulate,
)
from . import _qers

__all__ = [
    "QersError",
    "aggregates",
    "classify",
    "normalize",
    "presets",
    "score_basic",
    "score_csv",
    "score_fusion",
    "score_tuned",
    "simulate",
]


def presets():
    """Built-in weight presets as dictionaries."""
    return json.loads(_qers.presets_json())


def aggregates(score_text):
    """Per-algorithm aggregates of a score CSV."""
    return json.loads(_qers.aggregates_json(score_text))
