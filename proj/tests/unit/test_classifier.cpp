/*
 * Copyright 2026 The ploc Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include <doctest.h>

#include <random>

#include "ploc/classifier.hpp"
#include "ploc/report.hpp"
#include "support.hpp"

using namespace ploc;

namespace {

SigPath one_anchor(std::int64_t v) {
  return {SigAnchor{AnchorValue::integer(v), AnchorKind::Cmp, {}}};
}

SignaturePair pair_with(bool vul_patch, bool fix_patch) {
  SignaturePair p;
  p.vul.origin = Side::Vul;
  p.fix.origin = Side::Fix;
  if (vul_patch)
    p.vul.patch_path = one_anchor(1);
  if (fix_patch)
    p.fix.patch_path = one_anchor(2);
  return p;
}

void verified(SideDetection &s, double patch_score, double context_score = 0.0) {
  s.has_patch = true;
  s.patch = MatchedPath{{0}};
  s.patch_score = patch_score;
  s.context_score = context_score;
}

void context_only(SideDetection &s, double context_score) {
  s.context_matched = true;
  s.context_score = context_score;
}

SignaturePair load_pair(const std::string &dir, const std::string &diff) {
  auto vul = load_cfg_bundle(test::fixture(dir + "/ref_vul.json"));
  auto fix = load_cfg_bundle(test::fixture(dir + "/ref_fix.json"));
  SignatureInputs in;
  in.vul = &vul.functions().front();
  in.fix = &fix.functions().front();
  in.vul_source = test::slurp(test::fixture(dir + "/vul.c"));
  in.fix_source = test::slurp(test::fixture(dir + "/fix.c"));
  in.patch = parse_patch(test::fixture(dir + "/" + diff));
  in.cve = dir;
  return generate_signature_pair(in);
}

} // namespace

TEST_CASE("filtered targets are irrelevant") {
  Detection det;
  det.filter.irrelevant = true;
  verified(det.fix, 3.0);
  auto v = classify(pair_with(true, true), det);
  CHECK(v.route == Route::FilteredIrrelevant);
  CHECK(v.label == Label::Irrelevant);
  CHECK(v.score == 0.0);
}

TEST_CASE("both patch paths") {
  auto sig = pair_with(true, true);
  Detection det;
  verified(det.vul, 0.5);
  verified(det.fix, 2.0);
  auto v = classify(sig, det);
  CHECK(v.route == Route::BothPatchesFixHigher);
  CHECK(v.label == Label::Fixed);
  CHECK(v.score > 0.0);

  Detection tie;
  verified(tie.vul, 1.0, 0.5);
  verified(tie.fix, 1.0, 1.5);
  CHECK(classify(sig, tie).route == Route::BothPatchesContextFix);
  verified(tie.fix, 1.0, 0.5);
  auto t = classify(sig, tie);
  CHECK(t.route == Route::BothPatchesTie);
  CHECK(t.label == Label::Irrelevant);
  CHECK(t.score == 0.0);

  Detection only_vul;
  verified(only_vul.vul, 0.1);
  CHECK(classify(sig, only_vul).route == Route::OnlyVulPatch);
  CHECK(classify(sig, only_vul).label == Label::Vulnerable);

  Detection neither;
  context_only(neither.fix, 2.0);
  CHECK(classify(sig, neither).route == Route::NoPatchVerified);
}

TEST_CASE("pure addition") {
  auto sig = pair_with(false, true);
  Detection patched;
  verified(patched.fix, 1.0);
  CHECK(classify(sig, patched).route == Route::AdditionFixPatch);

  Detection missing;
  context_only(missing.fix, 1.5);
  auto v = classify(sig, missing);
  CHECK(v.route == Route::AdditionFixContext);
  CHECK(v.label == Label::Vulnerable);
  CHECK(v.score < 0.0);

  CHECK(classify(sig, Detection{}).route == Route::AdditionNothing);
}

TEST_CASE("pure deletion") {
  auto sig = pair_with(true, false);
  Detection present;
  verified(present.vul, 1.0);
  CHECK(classify(sig, present).route == Route::DeletionVulPatch);
  CHECK(classify(sig, present).label == Label::Vulnerable);

  Detection removed;
  context_only(removed.vul, 1.0);
  CHECK(classify(sig, removed).route == Route::DeletionVulContext);
  CHECK(classify(sig, removed).label == Label::Fixed);

  CHECK(classify(sig, Detection{}).route == Route::DeletionNothing);
}

TEST_CASE("normalised score") {
  CHECK(normalized_score(0.0, 0.0) == 0.0);
  CHECK(normalized_score(0.5, 2.0) == doctest::Approx(1.5 / 2.5));
  CHECK(normalized_score(0.2, 0.3) == doctest::Approx(0.1));
  CHECK(normalized_score(4.0, 0.0) == doctest::Approx(-1.0));
}

TEST_CASE("every route has a stable name and label") {
  for (int r = 0; r <= static_cast<int>(Route::DeletionNothing); ++r) {
    auto route = static_cast<Route>(r);
    CHECK(std::string(to_string(route)) != "?");
  }
  CHECK(label_from_string("fixed") == Label::Fixed);
  CHECK_FALSE(label_from_string("patched"));
}

TEST_CASE("label and score signs agree, scaling keeps the label") {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int round = 0; round < 2000; ++round) {
    auto sig = pair_with(rng() % 3 != 0, rng() % 3 != 1);
    if (!sig.vul.patch_path && !sig.fix.patch_path)
      sig.fix.patch_path = one_anchor(2);
    Detection det;
    det.filter.irrelevant = rng() % 10 == 0;
    for (auto *s : {&det.vul, &det.fix}) {
      if (rng() % 2)
        verified(*s, u(rng), u(rng));
      else if (rng() % 2)
        context_only(*s, u(rng));
      // Scores below the floor still carry a sign.
      if (rng() % 7 == 0)
        s->patch_score = 0.0;
    }
    auto v = classify(sig, det);
    CAPTURE(to_string(v.route));
    switch (v.label) {
    case Label::Vulnerable:
      CHECK(v.score < 0.0);
      break;
    case Label::Fixed:
      CHECK(v.score > 0.0);
      break;
    case Label::Irrelevant:
      CHECK(v.score == 0.0);
      break;
    }
    CHECK(v.score >= -1.0);
    CHECK(v.score <= 1.0);

    const double c = 0.25 + u(rng);
    Detection scaled = det;
    for (auto *s : {&scaled.vul, &scaled.fix}) {
      s->patch_score *= c;
      s->context_score *= c;
    }
    CHECK(classify(sig, scaled).label == v.label);
  }
}

TEST_CASE("references classify as themselves") {
  for (auto [dir, diff] : {std::pair{"kx", "kx.diff"}, std::pair{"frag", "frag.diff"}}) {
    CAPTURE(dir);
    auto sig = load_pair(dir, diff);
    DetectOptions opts;
    opts.timing = false;
    auto vul = load_cfg_bundle(test::fixture(std::string(dir) + "/ref_vul.json"));
    auto fix = load_cfg_bundle(test::fixture(std::string(dir) + "/ref_fix.json"));
    CHECK(detect_function(sig, vul.functions()[0], vul, opts).label == Label::Vulnerable);
    CHECK(detect_function(sig, fix.functions()[0], fix, opts).label == Label::Fixed);
  }
}

TEST_CASE("parameter change resolved by aux") {
  auto sig = load_pair("frag", "frag.diff");
  DetectOptions opts;
  auto vul = load_cfg_bundle(test::fixture("frag/target_vul.json"));
  auto fix = load_cfg_bundle(test::fixture("frag/target_fix.json"));
  auto rv = detect_function(sig, vul.functions()[0], vul, opts);
  auto rf = detect_function(sig, fix.functions()[0], fix, opts);
  CHECK(rv.label == Label::Vulnerable);
  CHECK(rv.evidence["route"] == "both-patches-vul-higher");
  CHECK(rf.label == Label::Fixed);
  CHECK(rf.evidence["route"] == "both-patches-fix-higher");
}
