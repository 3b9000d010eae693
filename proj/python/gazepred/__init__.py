# Copyright 2026 The gazepred Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#   http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Eye-tracking feature prediction from text.

Thin wrapper over the compiled ``_core`` module: configs and sweep results
are exchanged as plain dicts.
"""

import json

from ._core import (
    ConfigError,
    DataError,
    Dataset,
    NumericalError,
    SubwordVocab,
    TrainedModel,
    __version__,
    generate_fixture,
    load_data_dir,
    load_dataset,
    mae,
    parse_dataset,
    pool,
)
from . import _core

TARGETS = ("FFD_Avg", "FFD_Std", "TRT_Avg", "TRT_Std")


def fit(config, train, dev=None):
    """Train one configuration (a RunConfig dict) and return the model."""
    return TrainedModel.fit(json.dumps(config), train, dev)


def model_config(model):
    return json.loads(model.config)


def encode(encoder_config, ids):
    """Encode ids with freshly initialized parameters for encoder_config."""
    return _core.encode(json.dumps(encoder_config), list(ids))


def enumerate_grid(base=None):
    """The 48 RunConfig dicts for a base config {"train": ..., "encoder": ...}."""
    return [json.loads(c) for c in _core.enumerate_grid(json.dumps(base or {}))]


def run_sweep(base, train, dev, test, parallelism=1, seed=None):
    """Train and score every grid configuration; returns result dicts sorted by name."""
    lines = _core.run_sweep(json.dumps(base), train, dev, test, parallelism, seed)
    return [json.loads(line) for line in lines.splitlines() if line]


def build_report(results):
    """Render (markdown, report dict) from result dicts."""
    jsonl = "".join(json.dumps(r) + "\n" for r in results)
    markdown, report = _core.build_report(jsonl)
    return markdown, json.loads(report)


__all__ = [
    "TARGETS",
    "ConfigError",
    "DataError",
    "Dataset",
    "NumericalError",
    "SubwordVocab",
    "TrainedModel",
    "__version__",
    "build_report",
    "encode",
    "enumerate_grid",
    "fit",
    "generate_fixture",
    "load_data_dir",
    "load_dataset",
    "mae",
    "model_config",
    "parse_dataset",
    "pool",
    "run_sweep",
]
