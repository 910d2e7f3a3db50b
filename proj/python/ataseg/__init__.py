"""Active test-time adaptation for semantic segmentation."""

import json

from ._ataseg import (
    ConfigError,
    DivergenceError,
    FormatError,
    SegNet,
    UsageError,
    annotate,
    ce_sparse,
    corrupt,
    cst,
    ent_full,
    gen_scene,
    imbalance_degree,
    mean_pairwise_distance,
    miou,
    score,
    select,
    softmax,
)
from . import _ataseg

__all__ = [
    "ConfigError",
    "DivergenceError",
    "FormatError",
    "SegNet",
    "UsageError",
    "annotate",
    "ce_sparse",
    "corrupt",
    "cst",
    "default_config",
    "ent_full",
    "gen_scene",
    "imbalance_degree",
    "mean_pairwise_distance",
    "miou",
    "run_experiment",
    "score",
    "select",
    "softmax",
    "source_network",
    "validate_config",
]


def default_config():
    """Desk preset as a dict."""
    return json.loads(_ataseg.default_config_json())


def validate_config(cfg):
    """Fill defaults and validate; raises ConfigError naming the bad field."""
    return json.loads(_ataseg.validate_config_json(json.dumps(cfg)))


def source_network(cfg=None, cache_dir=".ataseg-cache"):
    """Pretrained (and cached) source network for the config's stream."""
    return _ataseg.source_network(json.dumps(cfg) if cfg else "", cache_dir)


def run_experiment(cfg, source, seed=0, out_dir=""):
    """One adaptation run. Returns (summary dict, adapted SegNet)."""
    summary, net = _ataseg.run_experiment(json.dumps(cfg), source, seed, out_dir)
    return json.loads(summary), net
