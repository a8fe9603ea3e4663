# Copyright 2026 The ploc Authors
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
"""Patch presence testing over anchor graphs.

Inputs may be given as paths or as already-loaded text; documents come back
as plain dicts.
"""

from __future__ import annotations

import json
import os
from typing import Any, Mapping, Sequence, Union

from . import _core
from ._core import (
    DEFAULT_T_BCSD,
    DEFAULT_T_CPM,
    DEFAULT_T_IFF,
    PlocError,
    UndetectablePatch,
)

__all__ = [
    "DEFAULT_T_BCSD",
    "DEFAULT_T_CPM",
    "DEFAULT_T_IFF",
    "PlocError",
    "UndetectablePatch",
    "anchor_graph_dot",
    "detect",
    "evaluate",
    "run_cli",
    "sign",
]

PathOrText = Union[str, "os.PathLike[str]"]


def _text(value: PathOrText) -> str:
    # A path-like object, or a string naming an existing file, is read;
    # anything else is taken as the content itself.
    if isinstance(value, os.PathLike) or (
        isinstance(value, str) and "\n" not in value and os.path.isfile(value)
    ):
        with open(value, encoding="utf-8") as f:
            return f.read()
    return str(value)


def _document(value: Union[Mapping[str, Any], PathOrText]) -> str:
    if isinstance(value, Mapping):
        return json.dumps(value)
    return _text(value)


def sign(
    vul_cfg: PathOrText,
    fix_cfg: PathOrText,
    vul_src: PathOrText,
    fix_src: PathOrText,
    patch: PathOrText,
    *,
    cve: str = "",
    function: str = "",
) -> dict:
    """Builds the signature pair; raises UndetectablePatch when no anchor
    lies on a changed line."""
    return json.loads(
        _core.sign(
            _text(vul_cfg),
            _text(fix_cfg),
            _text(vul_src),
            _text(fix_src),
            _text(patch),
            cve,
            function,
        )
    )


def detect(
    signature: Union[Mapping[str, Any], PathOrText],
    pool: PathOrText,
    *,
    t_iff: float = DEFAULT_T_IFF,
    t_cpm: float = DEFAULT_T_CPM,
    t_bcsd: float = DEFAULT_T_BCSD,
    simdb: PathOrText | None = None,
    threads: int = 0,
    timing: bool = True,
) -> dict:
    """Classifies every function of a CFG bundle."""
    return json.loads(
        _core.detect(
            _document(signature),
            _text(pool),
            t_iff,
            t_cpm,
            t_bcsd,
            _text(simdb) if simdb is not None else "",
            threads,
            timing,
        )
    )


def evaluate(report: Union[Mapping[str, Any], PathOrText], truth: PathOrText) -> dict:
    return json.loads(_core.evaluate(_document(report), _text(truth)))


def anchor_graph_dot(cfg: PathOrText, function: str = "") -> str:
    return _core.anchor_graph_dot(_text(cfg), function)


def run_cli(args: Sequence[str]) -> tuple[int, str, str]:
    return _core.run_cli([str(a) for a in args])
