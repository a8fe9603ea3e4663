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
import json
from pathlib import Path

import pytest

import ploc

FIXTURES = Path(__file__).resolve().parents[2] / "tests" / "fixtures"


def kx_signature():
    d = FIXTURES / "kx"
    return ploc.sign(
        d / "ref_vul.json",
        d / "ref_fix.json",
        d / "vul.c",
        d / "fix.c",
        d / "kx.diff",
        cve="kx",
    )


def test_sign_kx():
    sig = kx_signature()
    assert sig["cve"] == "kx"
    assert sig["vul"]["patch_path"] is None
    assert [a["value"] for a in sig["fix"]["patch_path"]] == [0, "ssl3_send_alert"]


def test_assignment_only_patch_is_undetectable():
    d = FIXTURES / "ccs"
    with pytest.raises(ploc.UndetectablePatch, match="undetectable patch"):
        ploc.sign(d / "ref_vul.json", d / "ref_fix.json", d / "vul.c", d / "fix.c", d / "ccs.diff")
    assert issubclass(ploc.UndetectablePatch, ploc.PlocError)


def test_detect_and_evaluate_pool():
    sig = kx_signature()
    report = ploc.detect(sig, FIXTURES / "pool10" / "pool.json", timing=False, threads=2)
    labels = {row["target"]: row["label"] for row in report["rows"]}
    assert labels["ssl3_send_client_key_exchange"] == "vulnerable"
    assert labels["dtls1_send_client_key_exchange"] == "fixed"
    assert sum(v == "irrelevant" for v in labels.values()) == 8

    metrics = ploc.evaluate(report, FIXTURES / "pool10" / "truth.csv")
    assert metrics["tp"] == 1
    assert metrics["tn"] == 9
    assert metrics["tpr"] == 1.0


def test_stripped_target_with_similarity_table():
    sig = kx_signature()
    report = ploc.detect(
        sig,
        FIXTURES / "kx" / "target_clang_o0_vul.json",
        simdb=FIXTURES / "kx" / "simdb.csv",
        timing=False,
    )
    labels = {row["target"]: row["label"] for row in report["rows"]}
    assert labels["sub_8049A10"] == "vulnerable"


def test_thresholds_are_passed_through():
    report = ploc.detect(kx_signature(), FIXTURES / "pool10" / "pool.json", t_iff=0.99)
    assert report["thresholds"]["t_iff"] == 0.99


def test_text_inputs_and_dot():
    text = (FIXTURES / "frag" / "target_vul.json").read_text()
    dot = ploc.anchor_graph_dot(text)
    assert dot.startswith("digraph")


def test_malformed_bundle():
    with pytest.raises(ploc.PlocError):
        ploc.anchor_graph_dot(json.dumps({"functions": [{}]}))


def test_cli(tmp_path):
    d = FIXTURES / "frag"
    code, out, err = ploc.run_cli(
        ["sign", "--cfg", d / "ref_vul.json", d / "ref_fix.json",
         "--src", d / "vul.c", d / "fix.c", "--patch", d / "frag.diff", "--out", tmp_path]
    )
    assert code == 0, err
    assert Path(out.strip()).is_file()
    code, _, err = ploc.run_cli(["detect", "--sig", "missing.json", "--pool", "x", "--report", "y"])
    assert code == 2
    assert "not found" in err
