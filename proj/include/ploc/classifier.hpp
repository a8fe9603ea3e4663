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
#pragma once

#include <string>

#include "ploc/detector.hpp"

namespace ploc {

enum class Label { Vulnerable, Fixed, Irrelevant };

const char *to_string(Label label);
std::optional<Label> label_from_string(std::string_view s);

/// Leaves of the decision tree.
enum class Route {
  FilteredIrrelevant,    ///< neither proportion exceeds t_iff
  BothPatchesFixHigher,  ///< both patch paths verified, fix scores higher
  BothPatchesVulHigher,  ///< both verified, vul scores higher
  BothPatchesContextFix, ///< patch scores tie, fix context scores higher
  BothPatchesContextVul, ///< patch scores tie, vul context scores higher
  BothPatchesTie,        ///< patch and context scores tie
  OnlyFixPatch,          ///< only the fix patch path verified
  OnlyVulPatch,          ///< only the vul patch path verified
  NoPatchVerified,       ///< both patch paths exist, neither verified
  AdditionFixPatch,      ///< vul patch NULL, fix patch verified
  AdditionFixContext,    ///< vul patch NULL, only the fix context matched
  AdditionNothing,       ///< vul patch NULL, nothing of the fix side matched
  DeletionVulPatch,      ///< fix patch NULL, vul patch verified
  DeletionVulContext,    ///< fix patch NULL, only the vul context matched
  DeletionNothing,       ///< fix patch NULL, nothing of the vul side matched
};

const char *to_string(Route route);
Label route_label(Route route);

/// Scores below this magnitude are raised to it so the sign carries the label.
inline constexpr double kMinScoreMagnitude = 0.001;

struct Verdict {
  Label label = Label::Irrelevant;
  double score = 0.0; ///< < 0 vulnerable, > 0 fixed, 0 irrelevant
  Route route = Route::FilteredIrrelevant;
  double vul_total = 0.0;
  double fix_total = 0.0;
};

/// (fix - vul) / max(1, fix + vul), clamped to [-1, 1].
double normalized_score(double vul_total, double fix_total);

Verdict classify(const SignaturePair &sig, const Detection &det);

} // namespace ploc
