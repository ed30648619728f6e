"""Temporal action localisation metrics, synthetic corpus and command line."""

import json

from ._wtal import (
    ArgumentError,
    ConfigError,
    DimensionError,
    average_precision,
    generate_corpus,
    gradcheck,
    iou_1d,
    nms,
    registered_ops,
    run_cli,
    sha256_hex,
)

__all__ = [
    "ArgumentError",
    "ConfigError",
    "DimensionError",
    "average_precision",
    "generate_corpus",
    "gradcheck",
    "iou_1d",
    "map_table",
    "nms",
    "registered_ops",
    "run_cli",
    "sha256_hex",
]


def map_table(per_video, ground_truth, class_names, thresholds=None):
    """mAP report as a dict.

    per_video maps a video id to (class, q, t_s, t_e) tuples; ground_truth is a
    list of (video_id, class, t_s, t_e).
    """
    from ._wtal import map_table_json

    return json.loads(map_table_json(per_video, ground_truth, list(class_names), thresholds))
