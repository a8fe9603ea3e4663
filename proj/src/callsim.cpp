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
#include "ploc/callsim.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "ploc/error.hpp"

namespace ploc {

double histogram_similarity(const FunctionCFG &a, const FunctionCFG &b) {
  auto histogram = [](const FunctionCFG &f) {
    std::map<std::string, double> h;
    for (const auto &blk : f.blocks())
      for (const auto &ins : blk.instructions)
        h[ins.mnemonic] += 1.0;
    return h;
  };
  auto ha = histogram(a);
  auto hb = histogram(b);
  if (ha.empty() || hb.empty())
    return ha.empty() && hb.empty() ? 1.0 : 0.0;
  double dot = 0;
  double na = 0;
  double nb = 0;
  for (const auto &[m, c] : ha) {
    na += c * c;
    if (auto it = hb.find(m); it != hb.end())
      dot += c * it->second;
  }
  for (const auto &[m, c] : hb)
    nb += c * c;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

std::vector<double> HistogramProvider::score(const CalleeRef &query,
                                             std::span<const CalleeRef> candidates) const {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (const auto &c : candidates)
    out.push_back(query.body && c.body ? histogram_similarity(*query.body, *c.body) : 0.0);
  return out;
}

MatrixProvider MatrixProvider::parse_csv(std::string_view text,
                                         std::shared_ptr<const SimilarityProvider> fallback) {
  MatrixProvider p(std::move(fallback));
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty() || line.front() == '#')
      continue;
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string col; std::getline(ls, col, ',');)
      cols.push_back(col);
    if (cols.size() != 3)
      throw ParseError("line " + std::to_string(lineno), "expected query_id,candidate_id,score");
    if (lineno == 1 && cols[0] == "query_id")
      continue;
    double s = 0;
    try {
      std::size_t used = 0;
      s = std::stod(cols[2], &used);
      if (used != cols[2].size())
        throw std::invalid_argument("trailing text");
    } catch (const std::exception &) {
      throw ParseError("line " + std::to_string(lineno), "bad score '" + cols[2] + "'");
    }
    if (s < 0.0 || s > 1.0)
      throw ParseError("line " + std::to_string(lineno), "score outside [0, 1]");
    p.set(cols[0], cols[1], s);
  }
  return p;
}

MatrixProvider MatrixProvider::load_csv(const std::filesystem::path &path,
                                        std::shared_ptr<const SimilarityProvider> fallback) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open similarity table '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_csv(ss.str(), std::move(fallback));
  } catch (const ParseError &e) {
    throw ParseError(path.string() + ": " + e.where(), e.detail());
  }
}

void MatrixProvider::set(const std::string &query, const std::string &candidate, double score) {
  table_[{query, candidate}] = score;
}

std::optional<double> MatrixProvider::lookup(const std::string &query,
                                             const std::string &candidate) const {
  if (auto it = table_.find({query, candidate}); it != table_.end())
    return it->second;
  return std::nullopt;
}

std::vector<double> MatrixProvider::score(const CalleeRef &query,
                                          std::span<const CalleeRef> candidates) const {
  std::vector<double> out(candidates.size(), 0.0);
  std::vector<CalleeRef> missing;
  std::vector<std::size_t> missing_at;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (auto s = lookup(query.id, candidates[i].id)) {
      out[i] = *s;
    } else {
      missing.push_back(candidates[i]);
      missing_at.push_back(i);
    }
  }
  if (fallback_ && !missing.empty()) {
    auto rest = fallback_->score(query, missing);
    for (std::size_t k = 0; k < rest.size() && k < missing_at.size(); ++k)
      out[missing_at[k]] = rest[k];
  }
  return out;
}

std::optional<CalleeMatch> match_callee(const CalleeRef &ref, std::span<const CalleeRef> candidates,
                                        const SimilarityProvider *provider, double t_bcsd) {
  if (!is_stripped_name(ref.id) && !ref.id.empty()) {
    for (std::size_t i = 0; i < candidates.size(); ++i)
      if (candidates[i].id == ref.id)
        return CalleeMatch{i, candidates[i].id, 1.0, true};
  }
  if (!provider || candidates.empty())
    return std::nullopt;

  std::vector<double> scores;
  try {
    scores = provider->score(ref, candidates);
  } catch (const std::exception &e) {
    spdlog::warn("similarity provider '{}' failed for {}: {}", provider->name(), ref.id, e.what());
    return std::nullopt;
  }
  if (scores.size() != candidates.size()) {
    spdlog::warn("similarity provider '{}' returned {} scores for {} candidates", provider->name(),
                 scores.size(), candidates.size());
    return std::nullopt;
  }
  std::optional<CalleeMatch> best;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (scores[i] > t_bcsd && (!best || scores[i] > best->score))
      best = CalleeMatch{i, candidates[i].id, scores[i], false};
  return best;
}

CalleeMatcher::CalleeMatcher(std::vector<CalleeRef> candidates, const SimilarityProvider *provider,
                             double t_bcsd,
                             const std::map<std::string, const FunctionCFG *> *ref_bodies)
    : candidates_(std::move(candidates)), provider_(provider), t_bcsd_(t_bcsd),
      ref_bodies_(ref_bodies) {}

std::optional<CalleeMatch> CalleeMatcher::match(const std::string &symbol) {
  if (auto it = cache_.find(symbol); it != cache_.end())
    return it->second;
  CalleeRef ref{symbol, nullptr};
  if (ref_bodies_)
    if (auto it = ref_bodies_->find(symbol); it != ref_bodies_->end())
      ref.body = it->second;
  auto result = match_callee(ref, candidates_, provider_, t_bcsd_);
  cache_.emplace(symbol, result);
  return result;
}

std::vector<CalleeRef> invoked_callees(const FunctionCFG &f, const BinaryPool *pool) {
  std::vector<CalleeRef> out;
  std::set<std::string> seen;
  auto add = [&](const std::string &id) {
    if (!seen.insert(id).second)
      return;
    const FunctionCFG *body = pool ? pool->find(id) : nullptr;
    out.push_back({id, body});
  };
  for (const auto &inv : f.invoked())
    if (inv.callee)
      add(*inv.callee);
  for (const auto &b : f.blocks())
    for (const auto &ins : b.instructions)
      if (ins.mnemonic == "call" && !ins.operands.empty() && ins.operands[0].is_symbol() &&
          !f.invocation_at(ins.address))
        add(ins.operands[0].sym().name);
  return out;
}

} // namespace ploc
