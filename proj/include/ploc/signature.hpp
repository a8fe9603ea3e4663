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

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "ploc/anchor.hpp"
#include "ploc/patch.hpp"

namespace ploc {

enum class Side { Vul, Fix };

const char *to_string(Side side);

/// Indices of anchors in one AnchorGraph, in control-flow order.
using AnchorPath = std::vector<std::size_t>;

// ---------------------------------------------------------------------------
// Patch mapping
// ---------------------------------------------------------------------------

inline constexpr const char *kBlankLine = "blank";

/// Strips comments, braces, tabs and whitespace and returns the hex MD5 of
/// what is left, or "blank" when nothing is left. `in_block_comment` carries
/// an open `/* ... */` across lines; pass nullptr for a standalone line.
std::string normalize_and_hash_line(std::string_view line, bool *in_block_comment = nullptr);

/// The normalised text before hashing; exposed for diagnostics.
std::string normalize_line(std::string_view line, bool *in_block_comment = nullptr);

struct PatchMapping {
  std::set<int> lines;                                ///< source lines of changed code
  std::map<BlockId, std::vector<std::uint64_t>> blocks; ///< instructions on those lines
  std::set<std::uint64_t> addresses;
  std::vector<std::string> warnings;
};

/// Locates the deleted (Vul) or added (Fix) lines of every hunk in `source`
/// and collects the instructions of `f` whose debug line is one of them.
PatchMapping map_patch_to_blocks(const FunctionCFG &f, std::string_view source,
                                 const PatchFile &patch, Side side);

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

/// Sets every anchor's weight to 1 / (number of anchors with the same value,
/// kind and aux).
void compute_weights(AnchorGraph &ag);

inline constexpr std::size_t kMaxCandidatePaths = 256;

/// Best entry-to-exit path over the connected sub-graphs induced by
/// `patch_anchors`. Paths holding an anchor absent from `other` rank first,
/// then higher total weight, lower first-anchor address and fewer anchors.
std::optional<AnchorPath> select_patch_path(const AnchorGraph &ag,
                                            const std::set<std::size_t> &patch_anchors,
                                            const AnchorGraph &other);

/// All candidate paths in the order select_patch_path examines them.
std::vector<AnchorPath> candidate_patch_paths(const AnchorGraph &ag,
                                              const std::set<std::size_t> &patch_anchors);

struct ContextPaths {
  AnchorPath bw; ///< entry side first
  AnchorPath fw;
};

/// Greedy highest-weight walks from the ends of `patch_path` to an AG entry
/// and an AG exit. Anchors in `skip` (the patch anchors) are walked through
/// but not recorded.
ContextPaths extract_context_paths(const AnchorGraph &ag, const AnchorPath &patch_path,
                                   const std::set<std::size_t> &skip = {});

// ---------------------------------------------------------------------------
// Signatures
// ---------------------------------------------------------------------------

/// Anchor as stored in a signature: no site or weight.
struct SigAnchor {
  AnchorValue value;
  AnchorKind kind = AnchorKind::Cmp;
  AuxList aux;

  bool operator==(const SigAnchor &) const = default;
  static SigAnchor from(const Anchor &a) { return {a.value, a.kind, a.aux}; }
};

using SigPath = std::vector<SigAnchor>;

struct Signature {
  Side origin = Side::Vul;
  std::optional<SigPath> patch_path;
  SigPath bw;
  SigPath fw;
  Distance d_bw_patch = Distance::infinite();
  Distance d_patch_fw = Distance::infinite();
  std::set<ValueKey> unique_values;

  bool operator==(const Signature &) const = default;
};

struct SignaturePair {
  std::string cve;
  Signature vul;
  Signature fix;

  bool operator==(const SignaturePair &) const = default;
  const Signature &side(Side s) const { return s == Side::Vul ? vul : fix; }
};

struct SignatureInputs {
  const FunctionCFG *vul = nullptr;
  const FunctionCFG *fix = nullptr;
  std::string vul_source;
  std::string fix_source;
  PatchFile patch;
  std::string cve;
  AnchorOptions anchor_options;
};

/// Intermediate products, kept for --dump-ag and diagnostics.
struct SignatureTrace {
  AnchorGraph vul_ag;
  AnchorGraph fix_ag;
  PatchMapping vul_mapping;
  PatchMapping fix_mapping;
  std::set<std::size_t> vul_patch_anchors;
  std::set<std::size_t> fix_patch_anchors;
  std::optional<AnchorPath> vul_patch_path;
  std::optional<AnchorPath> fix_patch_path;
};

/// Builds the signature of one side from its AG, given the anchors mapped to
/// changed lines.
Signature build_signature(const AnchorGraph &ag, const std::set<std::size_t> &patch_anchors,
                          const AnchorGraph &other, Side origin,
                          std::optional<AnchorPath> *chosen = nullptr);

/// Throws UndetectablePatch when neither side yields a patch path.
SignaturePair generate_signature_pair(const SignatureInputs &in, SignatureTrace *trace = nullptr);

nlohmann::json to_json(const SignaturePair &pair);
SignaturePair signature_from_json(const nlohmann::json &doc);
SignaturePair load_signature(const std::filesystem::path &path);
/// Writes `dir/<cve>.json` through a temporary file and a rename; returns the
/// final path.
std::filesystem::path save_signature(const SignaturePair &pair, const std::filesystem::path &dir);

nlohmann::json anchor_to_json(const SigAnchor &a);
SigAnchor anchor_from_json(const nlohmann::json &j, const std::string &where);

/// Writes `content` to `path` atomically (temporary sibling, then rename).
void write_file_atomic(const std::filesystem::path &path, std::string_view content);

} // namespace ploc
