# Copyright 2026 The asyncfl Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Python bindings for the asyncfl simulator."""

import json as _json

from asyncfl import _core
from asyncfl._core import (  # noqa: F401
    ConfigError,
    Error,
    UnsupportedError,
    chi_square_bias,
    epsilon_terms,
    exact_async_staleness_sum,
    expectation_recursion,
    expected_round_time,
    exponent_check,
    lr_constraint,
    phi,
    staleness_law,
    variance_recursion,
)


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def run(config, seed=None):
    """Runs one trajectory; `config` is a dict or a JSON string."""
    return _core.run(_text(config), seed)


def trajectory_csv(config, seed=None):
    return _core.trajectory_csv(_text(config), seed)


def plan_weights(config):
    return _core.plan_weights(_text(config))


def bounds_report(config):
    out = {}
    for line in _core.bounds_report(_text(config)).splitlines():
        key, _, value = line.partition("=")
        if key == "note":
            out.setdefault("notes", []).append(value)
            continue
        try:
            out[key] = float(value)
        except ValueError:
            out[key] = value
    return out


def oracle_check(config, seed=None):
    return _core.oracle_check(_text(config), seed)
