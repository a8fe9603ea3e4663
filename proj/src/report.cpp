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
#include "ploc/report.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "ploc/error.hpp"

namespace ploc {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

std::string trim(const std::string &s) {
  auto b = s.find_first_not_of(" \t\r");
  auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

} // namespace

MetricsBundle compute_metrics(const std::vector<Prediction> &predictions) {
  MetricsBundle m;
  for (const auto &p : predictions) {
    const bool positive = p.truth == Label::Vulnerable;
    const bool predicted = p.predicted == Label::Vulnerable;
    auto tally = [&](std::size_t &tp, std::size_t &fp, std::size_t &tn, std::size_t &fn) {
      if (positive)
        ++(predicted ? tp : fn);
      else
        ++(predicted ? fp : tn);
    };
    tally(m.tp, m.fp, m.tn, m.fn);
    ++m.tc_all;
    if (p.supported) {
      ++m.tc_s;
      tally(m.tp_s, m.fp_s, m.tn_s, m.fn_s);
    }
  }
  m.tpr = ratio(m.tp, m.tp + m.fn);
  m.fpr = ratio(m.fp, m.tn + m.fp);
  m.sr = ratio(m.tc_s, m.tc_all);
  m.tpr_s = ratio(m.tp_s, m.tp_s + m.fn_s);
  m.fpr_s = ratio(m.fp_s, m.tn_s + m.fp_s);
  return m;
}

json to_json(const MetricsBundle &m) {
  return {{"tp", m.tp},       {"fp", m.fp},         {"tn", m.tn},       {"fn", m.fn},
          {"tpr", m.tpr},     {"fpr", m.fpr},       {"tc_all", m.tc_all}, {"tc_s", m.tc_s},
          {"tp_s", m.tp_s},   {"fp_s", m.fp_s},     {"tn_s", m.tn_s},   {"fn_s", m.fn_s},
          {"sr", m.sr},       {"tpr_s", m.tpr_s},   {"fpr_s", m.fpr_s}};
}

MetricsBundle metrics_from_json(const json &j) {
  MetricsBundle m;
  try {
    for (auto [key, field] : {std::pair{"tp", &m.tp}, {"fp", &m.fp}, {"tn", &m.tn}, {"fn", &m.fn},
                              {"tc_all", &m.tc_all}, {"tc_s", &m.tc_s}, {"tp_s", &m.tp_s},
                              {"fp_s", &m.fp_s}, {"tn_s", &m.tn_s}, {"fn_s", &m.fn_s}})
      *field = j.at(key).get<std::size_t>();
    for (auto [key, field] : {std::pair{"tpr", &m.tpr}, {"fpr", &m.fpr}, {"sr", &m.sr},
                              {"tpr_s", &m.tpr_s}, {"fpr_s", &m.fpr_s}})
      *field = j.at(key).get<double>();
  } catch (const json::exception &e) {
    throw ParseError("metrics", e.what());
  }
  return m;
}

std::map<std::string, Label> parse_truth_csv(std::string_view text) {
  std::map<std::string, Label> truth;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line.front() == '#')
      continue;
    auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ParseError("line " + std::to_string(lineno), "expected target_id,label");
    auto id = trim(line.substr(0, comma));
    auto label_text = lower(trim(line.substr(comma + 1)));
    if (lineno == 1 && lower(id) == "target_id")
      continue;
    std::optional<Label> label = label_from_string(label_text);
    if (!label && label_text == "vul")
      label = Label::Vulnerable;
    if (!label && label_text == "fix")
      label = Label::Fixed;
    if (!label)
      throw ParseError("line " + std::to_string(lineno), "unknown label '" + label_text + "'");
    if (!truth.emplace(id, *label).second)
      throw ParseError("line " + std::to_string(lineno), "duplicate target '" + id + "'");
  }
  return truth;
}

std::map<std::string, Label> load_truth_csv(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open truth file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_truth_csv(ss.str());
  } catch (const ParseError &e) {
    throw ParseError(path.string() + ": " + e.where(), e.detail());
  }
}

std::vector<Prediction> join_truth(const Report &report, const std::map<std::string, Label> &truth) {
  std::vector<Prediction> out;
  std::vector<std::string> missing_truth;
  std::set<std::string> seen;
  for (const auto &row : report.rows) {
    seen.insert(row.target);
    auto it = truth.find(row.target);
    if (it == truth.end()) {
      missing_truth.push_back(row.target);
      continue;
    }
    out.push_back({row.target, row.label, it->second, !row.error.has_value()});
  }
  std::vector<std::string> missing_report;
  for (const auto &[id, label] : truth)
    if (!seen.contains(id))
      missing_report.push_back(id);
  if (!missing_truth.empty() || !missing_report.empty()) {
    std::string msg = "report and truth disagree on targets";
    auto list = [](const std::vector<std::string> &ids) {
      std::string s;
      for (const auto &id : ids)
        s += (s.empty() ? "" : ", ") + id;
      return s;
    };
    if (!missing_truth.empty())
      msg += "; missing from truth: " + list(missing_truth);
    if (!missing_report.empty())
      msg += "; missing from report: " + list(missing_report);
    throw Error(msg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Detection over a pool
// ---------------------------------------------------------------------------

std::set<std::string> function_symbols(const BinaryPool &pool) {
  std::set<std::string> out;
  for (const auto &f : pool.functions())
    if (f.name())
      out.insert(*f.name());
  return out;
}

namespace {

std::string anchor_label(const Anchor &a) {
  auto aux = aux_to_string(a.aux);
  return std::string(to_string(a.kind)) + ":" + a.value.to_string() + (aux.empty() ? "" : "|" + aux);
}

json sites_of(const MatchedPath &p, const AnchorGraph &tgt) {
  json out = json::array();
  for (const auto &a : p.anchors)
    out.push_back(a ? json(tgt.at(*a).site) : json(nullptr));
  return out;
}

json distance_json(const Distance &d) { return d.is_infinite() ? json("inf") : json(d.value()); }

json context_json(const ContextMatch &c, const AnchorGraph &tgt) {
  json out = {{"vacuous", c.vacuous}, {"retained", c.retained}, {"ratio", c.ratio}, {"score", c.score}};
  out["sites"] = c.best ? sites_of(*c.best, tgt) : json(nullptr);
  return out;
}

json side_json(const Signature &sig, const SideDetection &d, const AnchorGraph &tgt) {
  json out;
  out["has_patch"] = sig.patch_path.has_value();
  if (d.patch) {
    json anchors = json::array();
    for (const auto &a : d.patch->anchors)
      anchors.push_back(anchor_label(tgt.at(*a)));
    out["patch"] = {{"sites", sites_of(*d.patch, tgt)},
                    {"anchors", anchors},
                    {"score", d.patch_score}};
  } else {
    out["patch"] = nullptr;
  }
  out["bw"] = context_json(d.bw, tgt);
  out["fw"] = context_json(d.fw, tgt);
  out["context_matched"] = d.context_matched;
  out["context_score"] = d.context_score;
  json rejected = json::array();
  for (const auto &c : d.verification.candidates) {
    if (c.verified)
      continue;
    rejected.push_back({{"sites", sites_of(c.path, tgt)},
                        {"d_bw", distance_json(c.d_bw)},
                        {"d_fw", distance_json(c.d_fw)},
                        {"reason", c.reason}});
  }
  out["rejected"] = rejected;
  out["ref_d_bw_patch"] = distance_json(sig.d_bw_patch);
  out["ref_d_patch_fw"] = distance_json(sig.d_patch_fw);
  return out;
}

} // namespace

json detection_evidence(const SignaturePair &sig, const Detection &det, const Verdict &verdict,
                        const AnchorGraph &tgt) {
  json ev;
  ev["route"] = to_string(verdict.route);
  ev["anchors"] = tgt.size();
  ev["rho_vul"] = det.filter.vul.rho();
  ev["rho_fix"] = det.filter.fix.rho();
  ev["filtered"] = det.filter.irrelevant;
  ev["vul_total"] = verdict.vul_total;
  ev["fix_total"] = verdict.fix_total;
  if (!det.filter.irrelevant) {
    ev["vul"] = side_json(sig.vul, det.vul, tgt);
    ev["fix"] = side_json(sig.fix, det.fix, tgt);
  }
  return ev;
}

namespace {

ReportRow detect_one(const SignaturePair &sig, const FunctionCFG &target, const BinaryPool &pool,
                     const DetectOptions &opts, const std::set<std::string> &symbols) {
  ReportRow row;
  row.target = target.id();
  const auto start = std::chrono::steady_clock::now();
  try {
    AnchorOptions anchor_opts;
    anchor_opts.function_symbols = &symbols;
    const auto ag = build_anchor_graph(target, anchor_opts);
    CalleeMatcher matcher(invoked_callees(target, &pool), opts.provider.get(),
                          opts.thresholds.t_bcsd, &opts.reference_callees);
    const auto det = detect(sig, ag, &matcher, opts.thresholds);
    const auto verdict = classify(sig, det);
    row.label = verdict.label;
    row.score = verdict.score;
    row.evidence = detection_evidence(sig, det, verdict, ag);
  } catch (const std::exception &e) {
    spdlog::error("{}: {}", row.target, e.what());
    row.label = Label::Irrelevant;
    row.score = 0.0;
    row.error = e.what();
    row.evidence = {{"error", e.what()}};
  }
  if (opts.timing)
    row.time_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return row;
}

} // namespace

ReportRow detect_function(const SignaturePair &sig, const FunctionCFG &target,
                          const BinaryPool &pool, const DetectOptions &opts) {
  return detect_one(sig, target, pool, opts, function_symbols(pool));
}

Report detect_pool(const SignaturePair &sig, const BinaryPool &pool, const DetectOptions &opts) {
  Report report;
  report.cve = sig.cve;
  report.thresholds = opts.thresholds;
  const auto &functions = pool.functions();
  report.rows.resize(functions.size());

  unsigned workers = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(1, functions.size())));
  const auto symbols = function_symbols(pool);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < functions.size(); i = next++)
      report.rows[i] = detect_one(sig, functions[i], pool, opts, symbols);
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool_threads;
    for (unsigned w = 0; w < workers; ++w)
      pool_threads.emplace_back(work);
  }
  std::sort(report.rows.begin(), report.rows.end(),
            [](const ReportRow &a, const ReportRow &b) { return a.target < b.target; });
  return report;
}

// ---------------------------------------------------------------------------
// Serialisation
// ---------------------------------------------------------------------------

json to_json(const Report &report) {
  json rows = json::array();
  for (const auto &r : report.rows) {
    json row = {{"target", r.target},
                {"label", to_string(r.label)},
                {"score", r.score},
                {"time_ms", r.time_ms},
                {"evidence", r.evidence}};
    if (r.error)
      row["error"] = *r.error;
    rows.push_back(row);
  }
  return {{"cve", report.cve},
          {"thresholds",
           {{"t_iff", report.thresholds.t_iff},
            {"t_cpm", report.thresholds.t_cpm},
            {"t_bcsd", report.thresholds.t_bcsd}}},
          {"rows", rows},
          {"metrics", report.metrics ? to_json(*report.metrics) : json(nullptr)}};
}

Report report_from_json(const json &doc) {
  Report r;
  try {
    r.cve = doc.at("cve").get<std::string>();
    const auto &t = doc.at("thresholds");
    r.thresholds.t_iff = t.value("t_iff", kDefaultIffThreshold);
    r.thresholds.t_cpm = t.value("t_cpm", kDefaultCpmThreshold);
    r.thresholds.t_bcsd = t.value("t_bcsd", kDefaultBcsdThreshold);
    const auto &rows = doc.at("rows");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto &jr = rows[i];
      ReportRow row;
      row.target = jr.at("target").get<std::string>();
      auto label = label_from_string(jr.at("label").get<std::string>());
      if (!label)
        throw ParseError("rows[" + std::to_string(i) + "].label", "unknown label");
      row.label = *label;
      row.score = jr.at("score").get<double>();
      row.time_ms = jr.value("time_ms", 0.0);
      row.evidence = jr.value("evidence", json::object());
      if (jr.contains("error") && jr["error"].is_string())
        row.error = jr["error"].get<std::string>();
      r.rows.push_back(std::move(row));
    }
    if (doc.contains("metrics") && !doc["metrics"].is_null())
      r.metrics = metrics_from_json(doc["metrics"]);
  } catch (const json::exception &e) {
    throw ParseError("report", e.what());
  }
  return r;
}

Report load_report(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open report '" + path.string() + "'");
  try {
    return report_from_json(json::parse(in));
  } catch (const json::parse_error &e) {
    throw ParseError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

std::string to_csv(const Report &report) {
  std::ostringstream os;
  os << "target,label,score,time_ms,route,error\n";
  for (const auto &r : report.rows) {
    std::string route = r.evidence.is_object() && r.evidence.contains("route")
                            ? r.evidence["route"].get<std::string>()
                            : "";
    std::string err = r.error.value_or("");
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    os << r.target << ',' << to_string(r.label) << ',' << std::setprecision(6) << r.score << ','
       << r.time_ms << ',' << route << ',' << err << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Logging
// ---------------------------------------------------------------------------

void init_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_logger_mt("ploc");
    logger->set_pattern("%^%l%$: %v");
    spdlog::set_default_logger(logger);
    const char *env = std::getenv("PLOC_LOG");
    auto level = env ? spdlog::level::from_str(env) : spdlog::level::warn;
    // from_str maps unknown names to "off"; keep warnings in that case.
    if (env && level == spdlog::level::off && std::string_view(env) != "off")
      level = spdlog::level::warn;
    spdlog::set_level(level);
  });
}

} // namespace ploc
