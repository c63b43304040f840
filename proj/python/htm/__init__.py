"""Zero-shot planning with hallucinated topological memory.

Configs are plain dicts using the same schema as the CLI's JSON config;
absent keys take their defaults.
"""

import json as _json

from . import _htm
from ._htm import (
    ConfigError,
    Context,
    IoError,
    NoPathError,
    ShapeError,
    Task,
    TransitionDataset,
    UsageError,
    cpc_loss_from_logits,
    edge_weights,
    hallucinate,
    jensen_bound_check,
    load_cpc,
    load_cvae,
    load_dataset,
    load_inverse,
    load_sptm,
    mi_lower_bound,
    shortest_path,
)

__version__ = _htm.__version__


def _cfg(config):
    return _json.dumps(config or {})


def effective_config(config=None):
    return _json.loads(_htm.effective_config(_cfg(config)))


def world(config=None):
    return _htm.World(_cfg(config))


def collect_dataset(config=None):
    return _htm.collect_dataset(_cfg(config))


def train_cvae(dataset, config=None):
    return _htm.train_cvae(_cfg(config), dataset)


def train_cpc(dataset, cvae=None, config=None):
    return _htm.train_cpc(_cfg(config), dataset, cvae)


def train_sptm(dataset, config=None):
    return _htm.train_sptm(_cfg(config), dataset)


def train_inverse(dataset, config=None):
    return _htm.train_inverse(_cfg(config), dataset)


def benchmark_tasks(count, config=None):
    return _htm.benchmark_tasks(_cfg(config), count)


def plan(task, cvae, cpc, seed=0, config=None):
    return _json.loads(_htm.plan(_cfg(config), task, cvae, cpc, seed))


def execute(task, inverse, cvae=None, cpc=None, seed=0, config=None):
    return _json.loads(_htm.execute(_cfg(config), task, cvae, cpc, inverse, seed))


def evaluate(cvae, inverse, cpc, sptm=None, config=None):
    """Returns (csv text, report dict)."""
    csv, report = _htm.evaluate(_cfg(config), cvae, inverse, cpc, sptm)
    return csv, _json.loads(report)


def render_plan(observations, task, panel=64, config=None):
    return _htm.render_plan(_cfg(config), observations, task, panel)
