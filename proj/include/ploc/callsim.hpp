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
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ploc/cfg.hpp"

namespace ploc {

inline constexpr double kDefaultBcsdThreshold = 0.9;

/// A callee known by id, with its body when one is available.
struct CalleeRef {
  std::string id;
  const FunctionCFG *body = nullptr;
};

/// Function-similarity oracle. Implementations must be safe to call from
/// several threads at once and return one score in [0, 1] per candidate.
class SimilarityProvider {
public:
  virtual ~SimilarityProvider() = default;
  virtual std::vector<double> score(const CalleeRef &query,
                                    std::span<const CalleeRef> candidates) const = 0;
  virtual std::string name() const = 0;
};

/// Cosine similarity of mnemonic frequency vectors.
double histogram_similarity(const FunctionCFG &a, const FunctionCFG &b);

/// Scores with histogram_similarity; a missing body scores 0.
class HistogramProvider final : public SimilarityProvider {
public:
  std::vector<double> score(const CalleeRef &query,
                            std::span<const CalleeRef> candidates) const override;
  std::string name() const override { return "histogram"; }
};

/// Precomputed pairwise scores (`query_id,candidate_id,score`). Pairs absent
/// from the table are delegated to `fallback`, or score 0 without one.
class MatrixProvider final : public SimilarityProvider {
public:
  explicit MatrixProvider(std::shared_ptr<const SimilarityProvider> fallback = nullptr)
      : fallback_(std::move(fallback)) {}

  static MatrixProvider load_csv(const std::filesystem::path &path,
                                 std::shared_ptr<const SimilarityProvider> fallback = nullptr);
  static MatrixProvider parse_csv(std::string_view text,
                                  std::shared_ptr<const SimilarityProvider> fallback = nullptr);

  void set(const std::string &query, const std::string &candidate, double score);
  std::optional<double> lookup(const std::string &query, const std::string &candidate) const;
  std::size_t size() const { return table_.size(); }

  std::vector<double> score(const CalleeRef &query,
                            std::span<const CalleeRef> candidates) const override;
  std::string name() const override { return "matrix"; }

private:
  std::map<std::pair<std::string, std::string>, double> table_;
  std::shared_ptr<const SimilarityProvider> fallback_;
};

struct CalleeMatch {
  std::size_t index = 0; ///< position in the candidate list
  std::string id;
  double score = 1.0;
  bool exact = false; ///< matched by name, provider not consulted
};

/// Exact name match among `candidates` when the reference symbol is usable;
/// otherwise the highest provider score strictly above `t_bcsd` (first wins a
/// tie). Provider failures are logged and count as no match.
std::optional<CalleeMatch> match_callee(const CalleeRef &ref, std::span<const CalleeRef> candidates,
                                        const SimilarityProvider *provider, double t_bcsd);

/// Callee matching against one target's invoked functions, memoised per
/// reference callee. Not shared between threads.
class CalleeMatcher {
public:
  CalleeMatcher(std::vector<CalleeRef> candidates, const SimilarityProvider *provider,
                double t_bcsd, const std::map<std::string, const FunctionCFG *> *ref_bodies = nullptr);

  /// Target callee id matched to the reference callee `symbol`, if any.
  std::optional<CalleeMatch> match(const std::string &symbol);

  const std::vector<CalleeRef> &candidates() const { return candidates_; }

private:
  std::vector<CalleeRef> candidates_;
  const SimilarityProvider *provider_;
  double t_bcsd_;
  const std::map<std::string, const FunctionCFG *> *ref_bodies_;
  std::map<std::string, std::optional<CalleeMatch>> cache_;
};

/// Target-side candidate list: every named callee in `f.invoked()` and every
/// symbol called directly, in first-seen order, with bodies looked up in
/// `pool` when given.
std::vector<CalleeRef> invoked_callees(const FunctionCFG &f, const class BinaryPool *pool = nullptr);

} // namespace ploc
