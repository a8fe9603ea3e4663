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
#include "ploc/detector.hpp"

#include <algorithm>
#include <functional>
#include <unordered_map>

#include <spdlog/spdlog.h>

namespace ploc {

// ---------------------------------------------------------------------------
// Filter
// ---------------------------------------------------------------------------

Proportion matching_proportion(const std::set<ValueKey> &ref, const std::set<ValueKey> &tgt,
                               CalleeMatcher *matcher) {
  Proportion p;
  p.total = ref.size();
  for (const auto &key : ref) {
    if (tgt.contains(key)) {
      ++p.matched;
      continue;
    }
    const auto &[value, kind] = key;
    if (kind != AnchorKind::Call || !value.is_symbol() || !matcher)
      continue;
    if (auto m = matcher->match(value.as_symbol());
        m && tgt.contains(ValueKey{AnchorValue::symbol(m->id), AnchorKind::Call}))
      ++p.matched;
  }
  return p;
}

FilterResult filter_irrelevant(const SignaturePair &sig, const AnchorGraph &tgt, double t_iff,
                               CalleeMatcher *matcher) {
  FilterResult r;
  const auto values = tgt.unique_values();
  r.vul = matching_proportion(sig.vul.unique_values, values, matcher);
  r.fix = matching_proportion(sig.fix.unique_values, values, matcher);
  r.irrelevant = r.vul.rho() <= t_iff && r.fix.rho() <= t_iff;
  return r;
}

// ---------------------------------------------------------------------------
// Candidates
// ---------------------------------------------------------------------------

bool values_match(const SigAnchor &r, const Anchor &t, CalleeMatcher *matcher) {
  if (r.kind != t.kind)
    return false;
  if (r.kind == AnchorKind::Cmp || !r.value.is_symbol() || !matcher)
    return r.value == t.value;
  auto m = matcher->match(r.value.as_symbol());
  return m && t.value.is_symbol() && t.value.as_symbol() == m->id;
}

std::vector<CandidateSet> build_candidate_sets(const SigPath &ref, const AnchorGraph &tgt,
                                               CalleeMatcher *matcher, AuxPolicy policy) {
  std::vector<CandidateSet> sets;
  sets.reserve(ref.size());
  for (const auto &r : ref) {
    std::vector<std::pair<std::size_t, std::size_t>> scored; // (lcs, index)
    for (std::size_t i = 0; i < tgt.size(); ++i) {
      const auto &t = tgt.at(i);
      if (!values_match(r, t, matcher))
        continue;
      auto lcs = aux_lcs(r.aux, t.aux);
      if (policy == AuxPolicy::SharedAux && !r.aux.empty() && lcs == 0)
        continue;
      scored.emplace_back(lcs, i);
    }
    std::stable_sort(scored.begin(), scored.end(), [&](const auto &a, const auto &b) {
      if (a.first != b.first)
        return a.first > b.first;
      return std::pair(tgt.at(a.second).site, a.second) < std::pair(tgt.at(b.second).site, b.second);
    });
    CandidateSet set;
    for (const auto &[lcs, i] : scored)
      set.push_back(i);
    sets.push_back(std::move(set));
  }
  return sets;
}

// ---------------------------------------------------------------------------
// Path matching
// ---------------------------------------------------------------------------

std::size_t MatchedPath::matched_count() const {
  return static_cast<std::size_t>(
      std::count_if(anchors.begin(), anchors.end(), [](const auto &a) { return a.has_value(); }));
}

std::optional<std::size_t> MatchedPath::first() const {
  for (const auto &a : anchors)
    if (a)
      return a;
  return std::nullopt;
}

std::optional<std::size_t> MatchedPath::last() const {
  for (auto it = anchors.rbegin(); it != anchors.rend(); ++it)
    if (*it)
      return *it;
  return std::nullopt;
}

namespace {

class DistanceCache {
public:
  explicit DistanceCache(const AnchorGraph &ag) : ag_(ag) {}

  Distance operator()(std::size_t from, std::size_t to) {
    auto it = rows_.find(from);
    if (it == rows_.end())
      it = rows_.emplace(from, ag_.distances_from(from)).first;
    return it->second[to];
  }

private:
  const AnchorGraph &ag_;
  std::unordered_map<std::size_t, std::vector<Distance>> rows_;
};

// Bounds the DFS on adversarial inputs with many equally close candidates.
constexpr std::size_t kMaxSearchSteps = 1'000'000;

} // namespace

PathMatchResult path_match(const std::vector<CandidateSet> &sets, const AnchorGraph &tgt,
                           std::size_t max_results) {
  PathMatchResult result;
  DistanceCache dist(tgt);
  std::size_t max_len = 0;
  std::size_t steps = 0;
  MatchedPath current;
  current.anchors.reserve(sets.size());

  std::function<void(std::size_t, std::optional<std::size_t>, std::size_t)> visit =
      [&](std::size_t index, std::optional<std::size_t> last, std::size_t matched) {
        if (++steps > kMaxSearchSteps) {
          result.truncated = true;
          return;
        }
        if (index == sets.size()) {
          if (matched > max_len || result.paths.empty()) {
            max_len = matched;
            result.paths.assign(1, current);
          } else if (matched == max_len) {
            if (result.paths.size() < max_results)
              result.paths.push_back(current);
            else
              result.truncated = true;
          }
          return;
        }
        std::vector<std::size_t> options;
        if (!last) {
          options = sets[index];
        } else {
          auto best = Distance::infinite();
          for (auto c : sets[index]) {
            if (c == *last)
              continue;
            auto d = dist(*last, c);
            if (d.is_infinite())
              continue;
            if (d < best) {
              best = d;
              options.assign(1, c);
            } else if (d == best) {
              options.push_back(c);
            }
          }
        }
        if (options.empty()) {
          current.anchors.push_back(std::nullopt);
          visit(index + 1, last, matched);
          current.anchors.pop_back();
          return;
        }
        for (auto c : options) {
          current.anchors.push_back(c);
          visit(index + 1, c, matched + 1);
          current.anchors.pop_back();
        }
      };
  visit(0, std::nullopt, 0);
  if (result.truncated)
    spdlog::warn("path matching truncated at {} results", result.paths.size());
  return result;
}

double path_score(const SigPath &ref, const MatchedPath &matched, const AnchorGraph &tgt) {
  if (ref.empty())
    return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < ref.size() && i < matched.anchors.size(); ++i)
    if (matched.anchors[i])
      total += static_cast<double>(aux_lcs(ref[i].aux, tgt.at(*matched.anchors[i]).aux));
  return total / static_cast<double>(ref.size());
}

ContextMatch match_context(const SigPath &ref, const std::vector<CandidateSet> &sets,
                           const AnchorGraph &tgt, double t_cpm) {
  ContextMatch cm;
  if (ref.empty()) {
    cm.vacuous = true;
    cm.retained = true;
    cm.ratio = 1.0;
    return cm;
  }
  auto found = path_match(sets, tgt);
  cm.alternatives = found.paths.size();
  for (const auto &p : found.paths) {
    if (p.matched_count() == 0)
      continue;
    double s = path_score(ref, p, tgt);
    if (!cm.best || s > cm.score) {
      cm.best = p;
      cm.score = s;
    }
  }
  if (cm.best)
    cm.ratio = static_cast<double>(cm.best->matched_count()) / static_cast<double>(ref.size());
  cm.retained = cm.best && cm.ratio > t_cpm;
  if (!cm.retained)
    cm.score = 0.0;
  return cm;
}

std::vector<MatchedPath> match_patch(const std::vector<CandidateSet> &sets, const AnchorGraph &tgt) {
  std::vector<MatchedPath> out;
  if (sets.empty())
    return out;
  for (auto &p : path_match(sets, tgt).paths)
    if (p.full())
      out.push_back(std::move(p));
  return out;
}

Verification verify_patch_path(const std::vector<MatchedPath> &patch_matches,
                               const ContextMatch &bw, const ContextMatch &fw,
                               const Signature &sig, const AnchorGraph &tgt) {
  Verification v;
  for (const auto &p : patch_matches) {
    PatchCandidate c;
    c.path = p;
    c.verified = true;
    auto check = [&](bool ref_empty, const ContextMatch &ctx, Distance ref_d, bool backward,
                     Distance &d) {
      if (ref_empty)
        return;
      const char *name = backward ? "backward" : "forward";
      if (!ctx.retained || !ctx.best) {
        c.verified = false;
        c.reason = std::string(name) + " context not matched";
        d = Distance::infinite();
        return;
      }
      d = backward ? tgt.distance(*ctx.best->last(), *p.first())
                   : tgt.distance(*p.last(), *ctx.best->first());
      if (d.value() == 0) {
        c.verified = false;
        c.reason = std::string(name) + " context shares an anchor with the patch";
      } else if (d > ref_d) {
        c.verified = false;
        c.reason = std::string(name) + " distance " + d.to_string() + " exceeds reference " +
                   ref_d.to_string();
      }
    };
    check(sig.bw.empty(), bw, sig.d_bw_patch, true, c.d_bw);
    if (c.verified)
      check(sig.fw.empty(), fw, sig.d_patch_fw, false, c.d_fw);
    else if (!sig.fw.empty() && fw.retained && fw.best)
      c.d_fw = tgt.distance(*p.last(), *fw.best->first());
    v.candidates.push_back(std::move(c));
  }
  for (std::size_t i = 0; i < v.candidates.size(); ++i) {
    const auto &c = v.candidates[i];
    if (!c.verified)
      continue;
    if (!v.chosen || c.d_bw + c.d_fw < v.candidates[*v.chosen].d_bw + v.candidates[*v.chosen].d_fw)
      v.chosen = i;
  }
  return v;
}

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

SideDetection detect_side(const Signature &sig, const AnchorGraph &tgt, CalleeMatcher *matcher,
                          const Thresholds &t) {
  SideDetection d;
  d.side = sig.origin;
  d.has_patch = sig.patch_path.has_value();
  d.bw = match_context(sig.bw, build_candidate_sets(sig.bw, tgt, matcher), tgt, t.t_cpm);
  d.fw = match_context(sig.fw, build_candidate_sets(sig.fw, tgt, matcher), tgt, t.t_cpm);
  d.context_matched = d.bw.retained && d.fw.retained && !(d.bw.vacuous && d.fw.vacuous);
  d.context_score = d.bw.score + d.fw.score;
  if (!d.has_patch)
    return d;

  auto sets = build_candidate_sets(*sig.patch_path, tgt, matcher, AuxPolicy::SharedAux);
  d.verification = verify_patch_path(match_patch(sets, tgt), d.bw, d.fw, sig, tgt);
  if (d.verification.chosen) {
    d.patch = d.verification.candidates[*d.verification.chosen].path;
    d.patch_score = path_score(*sig.patch_path, *d.patch, tgt);
  }
  return d;
}

Detection detect(const SignaturePair &sig, const AnchorGraph &tgt, CalleeMatcher *matcher,
                 const Thresholds &t) {
  Detection det;
  det.vul.side = Side::Vul;
  det.fix.side = Side::Fix;
  det.vul.has_patch = sig.vul.patch_path.has_value();
  det.fix.has_patch = sig.fix.patch_path.has_value();
  det.filter = filter_irrelevant(sig, tgt, t.t_iff, matcher);
  if (det.filter.irrelevant)
    return det;
  det.vul = detect_side(sig.vul, tgt, matcher, t);
  det.fix = detect_side(sig.fix, tgt, matcher, t);
  return det;
}

} // namespace ploc
