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
#include "ploc/classifier.hpp"

#include <algorithm>
#include <cmath>

namespace ploc {

const char *to_string(Label label) {
  switch (label) {
  case Label::Vulnerable:
    return "vulnerable";
  case Label::Fixed:
    return "fixed";
  case Label::Irrelevant:
    return "irrelevant";
  }
  return "irrelevant";
}

std::optional<Label> label_from_string(std::string_view s) {
  for (auto l : {Label::Vulnerable, Label::Fixed, Label::Irrelevant})
    if (s == to_string(l))
      return l;
  return std::nullopt;
}

const char *to_string(Route route) {
  switch (route) {
  case Route::FilteredIrrelevant:
    return "filtered-irrelevant";
  case Route::BothPatchesFixHigher:
    return "both-patches-fix-higher";
  case Route::BothPatchesVulHigher:
    return "both-patches-vul-higher";
  case Route::BothPatchesContextFix:
    return "both-patches-context-fix";
  case Route::BothPatchesContextVul:
    return "both-patches-context-vul";
  case Route::BothPatchesTie:
    return "both-patches-tie";
  case Route::OnlyFixPatch:
    return "only-fix-patch";
  case Route::OnlyVulPatch:
    return "only-vul-patch";
  case Route::NoPatchVerified:
    return "no-patch-verified";
  case Route::AdditionFixPatch:
    return "addition-fix-patch";
  case Route::AdditionFixContext:
    return "addition-fix-context";
  case Route::AdditionNothing:
    return "addition-nothing";
  case Route::DeletionVulPatch:
    return "deletion-vul-patch";
  case Route::DeletionVulContext:
    return "deletion-vul-context";
  case Route::DeletionNothing:
    return "deletion-nothing";
  }
  return "?";
}

Label route_label(Route route) {
  switch (route) {
  case Route::BothPatchesFixHigher:
  case Route::BothPatchesContextFix:
  case Route::OnlyFixPatch:
  case Route::AdditionFixPatch:
  case Route::DeletionVulContext:
    return Label::Fixed;
  case Route::BothPatchesVulHigher:
  case Route::BothPatchesContextVul:
  case Route::OnlyVulPatch:
  case Route::AdditionFixContext:
  case Route::DeletionVulPatch:
    return Label::Vulnerable;
  default:
    return Label::Irrelevant;
  }
}

double normalized_score(double vul_total, double fix_total) {
  return std::clamp((fix_total - vul_total) / std::max(1.0, fix_total + vul_total), -1.0, 1.0);
}

namespace {

constexpr double kTieEpsilon = 1e-9;

Route decide(const SignaturePair &sig, const Detection &det, double &vul_total, double &fix_total) {
  vul_total = 0.0;
  fix_total = 0.0;
  if (det.filter.irrelevant)
    return Route::FilteredIrrelevant;

  const auto &v = det.vul;
  const auto &f = det.fix;
  const bool vul_patch = v.patch.has_value();
  const bool fix_patch = f.patch.has_value();

  if (sig.vul.patch_path && sig.fix.patch_path) {
    if (vul_patch && fix_patch) {
      vul_total = v.patch_score + v.context_score;
      fix_total = f.patch_score + f.context_score;
      if (std::abs(f.patch_score - v.patch_score) > kTieEpsilon)
        return f.patch_score > v.patch_score ? Route::BothPatchesFixHigher
                                             : Route::BothPatchesVulHigher;
      if (std::abs(f.context_score - v.context_score) > kTieEpsilon)
        return f.context_score > v.context_score ? Route::BothPatchesContextFix
                                                 : Route::BothPatchesContextVul;
      return Route::BothPatchesTie;
    }
    if (fix_patch) {
      fix_total = f.patch_score + f.context_score;
      return Route::OnlyFixPatch;
    }
    if (vul_patch) {
      vul_total = v.patch_score + v.context_score;
      return Route::OnlyVulPatch;
    }
    return Route::NoPatchVerified;
  }

  if (!sig.vul.patch_path) {
    if (fix_patch) {
      fix_total = f.patch_score + f.context_score;
      return Route::AdditionFixPatch;
    }
    if (f.context_matched) {
      // The fix context without its patch is evidence for the vulnerable side.
      vul_total = f.context_score;
      return Route::AdditionFixContext;
    }
    return Route::AdditionNothing;
  }

  if (vul_patch) {
    vul_total = v.patch_score + v.context_score;
    return Route::DeletionVulPatch;
  }
  if (v.context_matched) {
    fix_total = v.context_score;
    return Route::DeletionVulContext;
  }
  return Route::DeletionNothing;
}

} // namespace

Verdict classify(const SignaturePair &sig, const Detection &det) {
  Verdict out;
  out.route = decide(sig, det, out.vul_total, out.fix_total);
  out.label = route_label(out.route);
  if (out.label == Label::Irrelevant) {
    out.score = 0.0;
    return out;
  }
  const double raw = normalized_score(out.vul_total, out.fix_total);
  const double sign = out.label == Label::Fixed ? 1.0 : -1.0;
  double magnitude = raw * sign;
  if (magnitude < kMinScoreMagnitude)
    magnitude = kMinScoreMagnitude;
  out.score = sign * std::min(1.0, magnitude);
  return out;
}

} // namespace ploc
