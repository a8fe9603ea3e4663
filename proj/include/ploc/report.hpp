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
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ploc/classifier.hpp"

namespace ploc {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct Prediction {
  std::string target;
  Label predicted = Label::Irrelevant;
  Label truth = Label::Irrelevant;
  bool supported = true; ///< false when detection failed for this target
};

/// Vulnerable is the positive class; fixed and irrelevant are negative.
struct MetricsBundle {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double tpr = 0.0, fpr = 0.0;
  std::size_t tc_all = 0, tc_s = 0;
  std::size_t tp_s = 0, fp_s = 0, tn_s = 0, fn_s = 0;
  double sr = 0.0, tpr_s = 0.0, fpr_s = 0.0;

  bool operator==(const MetricsBundle &) const = default;
};

/// TPR = TP/(TP+FN), FPR = FP/(TN+FP), SR = supported/all; the _s variants
/// use only supported cases. An empty denominator gives 0.
MetricsBundle compute_metrics(const std::vector<Prediction> &predictions);

nlohmann::json to_json(const MetricsBundle &m);
MetricsBundle metrics_from_json(const nlohmann::json &j);

/// `target_id,label` rows; an optional header row is skipped.
std::map<std::string, Label> load_truth_csv(const std::filesystem::path &path);
std::map<std::string, Label> parse_truth_csv(std::string_view text);

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

struct ReportRow {
  std::string target;
  Label label = Label::Irrelevant;
  double score = 0.0;
  double time_ms = 0.0;
  nlohmann::json evidence = nlohmann::json::object();
  std::optional<std::string> error;
};

struct Report {
  std::string cve;
  Thresholds thresholds;
  std::vector<ReportRow> rows; ///< sorted by target id
  std::optional<MetricsBundle> metrics;
};

struct DetectOptions {
  Thresholds thresholds;
  /// Used for CALL anchors without an exact name match; may be null.
  std::shared_ptr<const SimilarityProvider> provider;
  /// Bodies of reference callees, for providers that compare code.
  std::map<std::string, const FunctionCFG *> reference_callees;
  unsigned threads = 0; ///< 0: hardware concurrency
  bool timing = true;   ///< false: time_ms is written as 0
};

/// Symbols of all named functions in `pool`, for tail-call recognition.
std::set<std::string> function_symbols(const BinaryPool &pool);

/// Classifies one target; errors are reported in the row, never thrown.
ReportRow detect_function(const SignaturePair &sig, const FunctionCFG &target,
                          const BinaryPool &pool, const DetectOptions &opts);

/// Classifies every function of `pool` on a worker pool.
Report detect_pool(const SignaturePair &sig, const BinaryPool &pool, const DetectOptions &opts);

/// Evidence object for one detection.
nlohmann::json detection_evidence(const SignaturePair &sig, const Detection &det,
                                  const Verdict &verdict, const AnchorGraph &tgt);

nlohmann::json to_json(const Report &report);
Report report_from_json(const nlohmann::json &doc);
Report load_report(const std::filesystem::path &path);
std::string to_csv(const Report &report);

/// Joins a report with ground truth. Throws Error listing ids present in one
/// but not the other.
std::vector<Prediction> join_truth(const Report &report, const std::map<std::string, Label> &truth);

// ---------------------------------------------------------------------------
// Logging
// ---------------------------------------------------------------------------

/// Routes log output to stderr at the level named by $PLOC_LOG (default
/// "warn").
void init_logging();

} // namespace ploc
