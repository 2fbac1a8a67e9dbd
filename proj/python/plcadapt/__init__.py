# python/plcadapt/__init__.py

# Copyright 2026  The plcadapt Authors
#
# See ../../LICENSE for clarification regarding multiple authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#  http://www.apache.org/licenses/LICENSE-2.0
#
# THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
# KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
# WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
# MERCHANTABLITY OR NON-INFRINGEMENT.
# See the Apache 2 License for the specific language governing permissions and
# limitations under the License.

"""Packet-loss robust log-mel adapter: native core plus thin conveniences.

Spectrograms are numpy arrays of shape (frames, n_mels).
"""

import json

from . import _core
from ._core import (
    Adapter,
    Backend,
    ConfigError,
    DataError,
    Error,
    NumericError,
    apply_mask,
    compose_loss,
    compute_logmel,
    lr_at_epoch,
    read_mel,
    run_cli,
    sample_loss_mask,
    silence_value,
    wer,
    write_mel,
)

__all__ = [
    "Adapter",
    "Backend",
    "ConfigError",
    "DataError",
    "Error",
    "NumericError",
    "adapter_config",
    "apply_mask",
    "compose_loss",
    "compute_logmel",
    "count_params",
    "create_adapter",
    "default_config",
    "load_config",
    "lr_at_epoch",
    "read_mel",
    "read_report",
    "run_cli",
    "sample_loss_mask",
    "silence_value",
    "wer",
    "write_mel",
]


def default_config():
    return json.loads(_core.default_config_json())


def load_config(path):
    return json.loads(_core.load_config_json(str(path)))


def read_report(path):
    return json.loads(_core.read_report_json(str(path)))


def _dump(config):
    """Adapter config dict to JSON, missing keys taking their defaults."""
    if config is None:
        return ""
    merged = json.loads(_core.default_adapter_config_json())
    merged.update(config)
    return json.dumps(merged)


def count_params(config=None):
    return _core.count_params(_dump(config))


def create_adapter(config=None, seed=0):
    return Adapter.create(_dump(config), seed)


def adapter_config(adapter):
    return json.loads(adapter.config_json)
