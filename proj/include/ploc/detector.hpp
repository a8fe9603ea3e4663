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

#include <optional>
#include <vector>

#include "ploc/anchor.hpp"
#include "ploc/callsim.hpp"
#include "ploc/signature.hpp"

namespace ploc {

inline constexpr double kDefaultIffThreshold = 0.4;
inline constexpr double kDefaultCpmThreshold = 0.3;

struct Thresholds {
  double t_iff = kDefaultIffThreshold;
  double t_cpm = kDefaultCpmThreshold;
  double t_bcsd = kDefaultBcsdThreshold;
};

// ---------------------------------------------------------------------------
// Irrelevant-function filter
// ---------------------------------------------------------------------------

struct Proportion {
  std::size_t matched = 0;
  std::size_t total = 0;
  double rho() const { return total == 0 ? 0.0 : static_cast<double>(matched) / total; }
};

struct FilterResult {
  Proportion vul;
  Proportion fix;
  bool irrelevant = false;
};

/// Share of `ref` values present in `tgt`. A CALL value also counts when
/// `matcher` pairs it with a callee whose CALL value is in `tgt`.
Proportion matching_proportion(const std::set<ValueKey> &ref, const std::set<ValueKey> &tgt,
                               CalleeMatcher *matcher = nullptr);

/// Irrelevant when neither reference's proportion exceeds `t_iff`.
FilterResult filter_irrelevant(const SignaturePair &sig, const AnchorGraph &tgt, double t_iff,
                               CalleeMatcher *matcher = nullptr);

// ---------------------------------------------------------------------------
// Path matching
// ---------------------------------------------------------------------------

/// Target anchor indices for one reference anchor.
using CandidateSet = std::vector<std::size_t>;

enum class AuxPolicy {
  Any,       ///< equal value is enough
  SharedAux, ///< reference anchors with aux also need one aux constant in common
};

/// One candidate set per reference anchor, each ordered by aux LCS with the
/// reference anchor (descending), then by site.
std::vector<CandidateSet> build_candidate_sets(const SigPath &ref, const AnchorGraph &tgt,
                                               CalleeMatcher *matcher = nullptr,
                                               AuxPolicy policy = AuxPolicy::Any);

/// Whether target anchor `t` can stand for reference anchor `r` by value.
bool values_match(const SigAnchor &r, const Anchor &t, CalleeMatcher *matcher);

/// Aligned to the reference path; nullopt marks a skipped reference anchor.
struct MatchedPath {
  std::vector<std::optional<std::size_t>> anchors;

  std::size_t matched_count() const;
  bool full() const { return matched_count() == anchors.size(); }
  std::optional<std::size_t> first() const;
  std::optional<std::size_t> last() const;

  auto operator<=>(const MatchedPath &) const = default;
  bool operator==(const MatchedPath &) const = default;
};

inline constexpr std::size_t kMaxMatchedPaths = 64;

struct PathMatchResult {
  std::vector<MatchedPath> paths; ///< all of maximal matched_count, DFS order
  bool truncated = false;
};

/// Depth-first matching. The first matched anchor may be any candidate;
/// afterwards only the candidates at the smallest finite distance from the
/// last matched anchor are explored. A reference anchor with no admissible
/// candidate is skipped.
PathMatchResult path_match(const std::vector<CandidateSet> &sets, const AnchorGraph &tgt,
                           std::size_t max_results = kMaxMatchedPaths);

/// Sum of aux LCS over matched positions / |ref|.
double path_score(const SigPath &ref, const MatchedPath &matched, const AnchorGraph &tgt);

struct ContextMatch {
  bool vacuous = false; ///< reference path empty
  bool retained = false;
  double ratio = 0.0;
  double score = 0.0;
  std::optional<MatchedPath> best;
  std::size_t alternatives = 0; ///< maximal-length paths found
};

/// Best maximal match by score, kept when matched/|ref| > t_cpm.
ContextMatch match_context(const SigPath &ref, const std::vector<CandidateSet> &sets,
                           const AnchorGraph &tgt, double t_cpm);

/// Full-length matches only.
std::vector<MatchedPath> match_patch(const std::vector<CandidateSet> &sets, const AnchorGraph &tgt);

struct PatchCandidate {
  MatchedPath path;
  Distance d_bw = Distance::hops(0); ///< to the matched bw context; 0 when unconstrained
  Distance d_fw = Distance::hops(0);
  bool verified = false;
  std::string reason; ///< why it was rejected
};

struct Verification {
  std::vector<PatchCandidate> candidates;
  std::optional<std::size_t> chosen; ///< index into candidates
};

/// Keeps candidates whose distances to the matched context do not exceed the
/// reference distances, and picks the one closest to its context.
Verification verify_patch_path(const std::vector<MatchedPath> &patch_matches,
                               const ContextMatch &bw, const ContextMatch &fw,
                               const Signature &sig, const AnchorGraph &tgt);

// ---------------------------------------------------------------------------
// Per-signature detection
// ---------------------------------------------------------------------------

struct SideDetection {
  Side side = Side::Vul;
  bool has_patch = false;
  ContextMatch bw;
  ContextMatch fw;
  Verification verification;
  std::optional<MatchedPath> patch; ///< verified patch match
  double patch_score = 0.0;
  double context_score = 0.0;
  bool context_matched = false;
};

struct Detection {
  FilterResult filter;
  SideDetection vul;
  SideDetection fix;
};

SideDetection detect_side(const Signature &sig, const AnchorGraph &tgt, CalleeMatcher *matcher,
                          const Thresholds &t);

/// Runs the filter and, unless it rejects the target, both sides.
Detection detect(const SignaturePair &sig, const AnchorGraph &tgt, CalleeMatcher *matcher,
                 const Thresholds &t);

} // namespace ploc
