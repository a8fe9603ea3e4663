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
#include "ploc/signature.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <tuple>

#include <openssl/evp.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include "ploc/error.hpp"

namespace ploc {

using nlohmann::json;

const char *to_string(Side side) { return side == Side::Vul ? "vul" : "fix"; }

// ---------------------------------------------------------------------------
// Line normalisation
// ---------------------------------------------------------------------------

std::string normalize_line(std::string_view line, bool *in_block_comment) {
  bool local = false;
  bool &in_comment = in_block_comment ? *in_block_comment : local;
  std::string out;
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    const char next = i + 1 < line.size() ? line[i + 1] : '\0';
    if (in_comment) {
      if (c == '*' && next == '/') {
        in_comment = false;
        ++i;
      }
      continue;
    }
    if (quote) {
      out += c;
      if (c == '\\' && next) {
        out += next;
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '/' && next == '/')
      break;
    if (c == '/' && next == '*') {
      in_comment = true;
      ++i;
      continue;
    }
    if (c == '"' || c == '\'') {
      quote = c;
      out += c;
      continue;
    }
    if (c == '{' || c == '}' || std::isspace(static_cast<unsigned char>(c)))
      continue;
    out += c;
  }
  return out;
}

namespace {

std::string md5_hex(std::string_view text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_md5(), nullptr) != 1)
    throw Error("MD5 digest failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

} // namespace

std::string normalize_and_hash_line(std::string_view line, bool *in_block_comment) {
  auto residue = normalize_line(line, in_block_comment);
  return residue.empty() ? std::string(kBlankLine) : md5_hex(residue);
}

// ---------------------------------------------------------------------------
// Patch mapping
// ---------------------------------------------------------------------------

namespace {

std::string basename_of(const std::string &path) {
  return std::filesystem::path(path).filename().string();
}

std::vector<std::string> split_source_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      if (pos < text.size())
        lines.emplace_back(text.substr(pos));
      break;
    }
    lines.emplace_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  return lines;
}

struct HashedLine {
  int line = 0; ///< 1-based source line; 0 for patch-side lines
  std::string hash;
  bool changed = false;
  std::string text;
};

// Start indices of every occurrence of `needle` (by hash) in `hay`.
std::vector<std::size_t> occurrences(const std::vector<HashedLine> &hay,
                                     const std::vector<HashedLine> &needle) {
  std::vector<std::size_t> out;
  if (needle.empty() || needle.size() > hay.size())
    return out;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    bool ok = true;
    for (std::size_t k = 0; k < needle.size() && ok; ++k)
      ok = hay[i + k].hash == needle[k].hash;
    if (ok)
      out.push_back(i);
  }
  return out;
}

} // namespace

PatchMapping map_patch_to_blocks(const FunctionCFG &f, std::string_view source,
                                 const PatchFile &patch, Side side) {
  PatchMapping result;

  std::vector<HashedLine> src;
  {
    bool comment = false;
    auto lines = split_source_lines(source);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      auto h = normalize_and_hash_line(lines[i], &comment);
      if (h != kBlankLine)
        src.push_back({static_cast<int>(i + 1), std::move(h), false, lines[i]});
    }
  }

  std::set<std::string> function_files;
  for (const auto &b : f.blocks())
    for (const auto &ins : b.instructions)
      if (ins.source_line)
        function_files.insert(basename_of(ins.source_line->file));

  auto hunk_file = [&](const Hunk &h) {
    return basename_of(side == Side::Vul ? h.old_file : h.new_file);
  };
  bool any_hunk_in_function_file = false;
  for (const auto &h : patch.hunks)
    any_hunk_in_function_file = any_hunk_in_function_file || function_files.contains(hunk_file(h));

  for (const auto &hunk : patch.hunks) {
    const auto &changed = side == Side::Vul ? hunk.deleted : hunk.added;
    if (changed.empty())
      continue;
    if (any_hunk_in_function_file && !function_files.contains(hunk_file(hunk)))
      continue;
    const int expected = side == Side::Vul ? hunk.old_change_line() : hunk.new_change_line();

    std::vector<HashedLine> before;
    std::vector<HashedLine> change;
    std::vector<HashedLine> after;
    bool comment = false;
    auto hash_into = [&](const std::vector<std::string> &lines, std::vector<HashedLine> &out,
                         bool is_changed) {
      for (const auto &l : lines) {
        auto h = normalize_and_hash_line(l, &comment);
        if (h != kBlankLine)
          out.push_back({0, std::move(h), is_changed, l});
      }
    };
    hash_into(hunk.context_before, before, false);
    hash_into(changed, change, true);
    hash_into(hunk.context_after, after, false);
    if (change.empty()) {
      result.warnings.push_back("hunk at line " + std::to_string(expected) +
                                " changes only blank or comment lines");
      continue;
    }

    auto concat = [](std::initializer_list<const std::vector<HashedLine> *> parts) {
      std::vector<HashedLine> out;
      for (const auto *p : parts)
        out.insert(out.end(), p->begin(), p->end());
      return out;
    };
    const std::vector<std::vector<HashedLine>> windows = {
        concat({&before, &change, &after}), concat({&before, &change}),
        concat({&change, &after}), change};

    bool mapped = false;
    for (const auto &window : windows) {
      auto offset = static_cast<std::size_t>(
          std::find_if(window.begin(), window.end(), [](const auto &l) { return l.changed; }) -
          window.begin());
      auto hits = occurrences(src, window);
      if (hits.empty())
        continue;
      auto best = *std::min_element(hits.begin(), hits.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(src[a + offset].line - expected) < std::abs(src[b + offset].line - expected);
      });
      for (std::size_t k = 0; k < window.size(); ++k)
        if (window[k].changed)
          result.lines.insert(src[best + k].line);
      mapped = true;
      break;
    }
    if (mapped)
      continue;

    // Line by line, nearest occurrence to where the change should be.
    int cursor = expected;
    for (const auto &c : change) {
      const HashedLine *hit = nullptr;
      for (const auto &s : src)
        if (s.hash == c.hash && (!hit || std::abs(s.line - cursor) < std::abs(hit->line - cursor)))
          hit = &s;
      if (!hit) {
        result.warnings.push_back("unmapped patch line: " + c.text);
        continue;
      }
      result.lines.insert(hit->line);
      cursor = hit->line + 1;
    }
  }

  std::set<std::string> files;
  for (const auto &h : patch.hunks)
    files.insert(hunk_file(h));
  bool any_file_match = false;
  for (const auto &b : f.blocks())
    for (const auto &ins : b.instructions)
      any_file_match = any_file_match ||
                       (ins.source_line && files.contains(basename_of(ins.source_line->file)));

  for (const auto &b : f.blocks()) {
    for (const auto &ins : b.instructions) {
      if (!ins.source_line || !result.lines.contains(ins.source_line->line))
        continue;
      if (any_file_match && !files.contains(basename_of(ins.source_line->file)))
        continue;
      result.blocks[b.id].push_back(ins.address);
      result.addresses.insert(ins.address);
    }
  }
  for (const auto &w : result.warnings)
    spdlog::warn("{} side: {}", to_string(side), w);
  return result;
}

// ---------------------------------------------------------------------------
// Weights and paths
// ---------------------------------------------------------------------------

void compute_weights(AnchorGraph &ag) {
  using Identity = std::tuple<AnchorValue, AnchorKind, AuxList>;
  std::map<Identity, std::size_t> tf;
  for (const auto &a : ag.nodes())
    ++tf[Identity{a.value, a.kind, a.aux}];
  for (std::size_t i = 0; i < ag.size(); ++i) {
    auto &a = ag.at(i);
    a.weight = 1.0 / static_cast<double>(tf[Identity{a.value, a.kind, a.aux}]);
  }
}

namespace {

bool present_in(const Anchor &a, const AnchorGraph &other) {
  return std::any_of(other.nodes().begin(), other.nodes().end(),
                     [&](const Anchor &b) { return a.same_identity(b); });
}

double path_weight(const AnchorGraph &ag, const AnchorPath &p) {
  return std::accumulate(p.begin(), p.end(), 0.0,
                         [&](double s, std::size_t i) { return s + ag.at(i).weight; });
}

bool site_less(const AnchorGraph &ag, std::size_t a, std::size_t b) {
  return std::pair(ag.at(a).site, a) < std::pair(ag.at(b).site, b);
}

} // namespace

std::vector<AnchorPath> candidate_patch_paths(const AnchorGraph &ag,
                                              const std::set<std::size_t> &patch_anchors) {
  // Weakly connected components of the sub-graph induced by patch_anchors.
  std::map<std::size_t, std::size_t> parent;
  for (auto a : patch_anchors)
    parent[a] = a;
  std::function<std::size_t(std::size_t)> root = [&](std::size_t x) {
    while (parent[x] != x)
      x = parent[x] = parent[parent[x]];
    return x;
  };
  for (auto a : patch_anchors)
    for (auto s : ag.successors(a))
      if (patch_anchors.contains(s))
        parent[root(a)] = root(s);

  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (auto a : patch_anchors)
    groups[root(a)].push_back(a);
  std::vector<std::vector<std::size_t>> components;
  for (auto &[r, members] : groups) {
    std::sort(members.begin(), members.end(),
              [&](std::size_t x, std::size_t y) { return site_less(ag, x, y); });
    components.push_back(std::move(members));
  }
  std::sort(components.begin(), components.end(), [&](const auto &x, const auto &y) {
    return site_less(ag, x.front(), y.front());
  });

  std::vector<AnchorPath> out;
  for (const auto &comp : components) {
    std::set<std::size_t> members(comp.begin(), comp.end());
    auto inner_succ = [&](std::size_t a) {
      std::vector<std::size_t> s;
      for (auto n : ag.successors(a))
        if (members.contains(n))
          s.push_back(n);
      std::sort(s.begin(), s.end(), [&](std::size_t x, std::size_t y) { return site_less(ag, x, y); });
      return s;
    };
    auto has_inner_pred = [&](std::size_t a) {
      return std::any_of(ag.predecessors(a).begin(), ag.predecessors(a).end(),
                         [&](std::size_t p) { return members.contains(p); });
    };

    std::size_t produced = 0;
    bool capped = false;
    AnchorPath current;
    std::function<void(std::size_t)> dfs = [&](std::size_t a) {
      if (capped)
        return;
      current.push_back(a);
      auto next = inner_succ(a);
      if (next.empty()) {
        if (produced == kMaxCandidatePaths) {
          capped = true;
        } else {
          out.push_back(current);
          ++produced;
        }
      }
      for (auto n : next)
        dfs(n);
      current.pop_back();
    };
    for (auto a : comp)
      if (!has_inner_pred(a))
        dfs(a);
    if (capped)
      spdlog::warn("patch sub-graph has more than {} entry-to-exit paths; keeping the first {}",
                   kMaxCandidatePaths, kMaxCandidatePaths);
  }
  return out;
}

std::optional<AnchorPath> select_patch_path(const AnchorGraph &ag,
                                            const std::set<std::size_t> &patch_anchors,
                                            const AnchorGraph &other) {
  auto candidates = candidate_patch_paths(ag, patch_anchors);
  if (candidates.empty())
    return std::nullopt;

  struct Rank {
    bool exclusive;
    double weight;
    std::uint64_t first_site;
    std::size_t length;
  };
  auto rank = [&](const AnchorPath &p) {
    bool exclusive = std::any_of(p.begin(), p.end(),
                                 [&](std::size_t i) { return !present_in(ag.at(i), other); });
    return Rank{exclusive, path_weight(ag, p), ag.at(p.front()).site, p.size()};
  };
  auto better = [](const Rank &a, const Rank &b) {
    if (a.exclusive != b.exclusive)
      return a.exclusive;
    if (std::abs(a.weight - b.weight) > 1e-9)
      return a.weight > b.weight;
    if (a.first_site != b.first_site)
      return a.first_site < b.first_site;
    return a.length < b.length;
  };

  std::size_t best = 0;
  Rank best_rank = rank(candidates[0]);
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    auto r = rank(candidates[i]);
    if (better(r, best_rank)) {
      best = i;
      best_rank = r;
    }
  }
  return candidates[best];
}

namespace {

// Highest weight; ties go to the lowest block address, then the lowest site.
std::size_t pick_heaviest(const AnchorGraph &ag, const std::vector<std::size_t> &options) {
  return *std::min_element(options.begin(), options.end(), [&](std::size_t x, std::size_t y) {
    const auto &a = ag.at(x);
    const auto &b = ag.at(y);
    if (std::abs(a.weight - b.weight) > 1e-9)
      return a.weight > b.weight;
    return std::tie(a.block_address, a.site, x) < std::tie(b.block_address, b.site, y);
  });
}

} // namespace

ContextPaths extract_context_paths(const AnchorGraph &ag, const AnchorPath &patch_path,
                                   const std::set<std::size_t> &skip) {
  ContextPaths ctx;
  if (patch_path.empty())
    return ctx;
  std::set<std::size_t> excluded(skip);
  excluded.insert(patch_path.begin(), patch_path.end());

  for (auto cur = patch_path.front(); !ag.predecessors(cur).empty();) {
    cur = pick_heaviest(ag, ag.predecessors(cur));
    if (!excluded.contains(cur))
      ctx.bw.push_back(cur);
  }
  std::reverse(ctx.bw.begin(), ctx.bw.end());

  for (auto cur = patch_path.back(); !ag.successors(cur).empty();) {
    cur = pick_heaviest(ag, ag.successors(cur));
    if (!excluded.contains(cur))
      ctx.fw.push_back(cur);
  }
  return ctx;
}

// ---------------------------------------------------------------------------
// Signature generation
// ---------------------------------------------------------------------------

Signature build_signature(const AnchorGraph &ag, const std::set<std::size_t> &patch_anchors,
                          const AnchorGraph &other, Side origin,
                          std::optional<AnchorPath> *chosen) {
  Signature sig;
  sig.origin = origin;
  sig.unique_values = ag.unique_values();
  auto patch = select_patch_path(ag, patch_anchors, other);
  if (chosen)
    *chosen = patch;
  if (!patch)
    return sig;

  auto to_sig = [&](const AnchorPath &p) {
    SigPath out;
    for (auto i : p)
      out.push_back(SigAnchor::from(ag.at(i)));
    return out;
  };
  auto ctx = extract_context_paths(ag, *patch, patch_anchors);
  sig.patch_path = to_sig(*patch);
  sig.bw = to_sig(ctx.bw);
  sig.fw = to_sig(ctx.fw);
  if (!ctx.bw.empty())
    sig.d_bw_patch = ag.distance(ctx.bw.back(), patch->front());
  if (!ctx.fw.empty())
    sig.d_patch_fw = ag.distance(patch->back(), ctx.fw.front());
  return sig;
}

SignaturePair generate_signature_pair(const SignatureInputs &in, SignatureTrace *trace) {
  if (!in.vul || !in.fix)
    throw Error("both reference functions are required");
  SignatureTrace local;
  SignatureTrace &t = trace ? *trace : local;

  t.vul_ag = build_anchor_graph(*in.vul, in.anchor_options);
  t.fix_ag = build_anchor_graph(*in.fix, in.anchor_options);
  compute_weights(t.vul_ag);
  compute_weights(t.fix_ag);

  t.vul_mapping = map_patch_to_blocks(*in.vul, in.vul_source, in.patch, Side::Vul);
  t.fix_mapping = map_patch_to_blocks(*in.fix, in.fix_source, in.patch, Side::Fix);

  auto patch_anchors = [](const AnchorGraph &ag, const PatchMapping &m) {
    std::set<std::size_t> out;
    for (std::size_t i = 0; i < ag.size(); ++i)
      if (m.addresses.contains(ag.at(i).site))
        out.insert(i);
    return out;
  };
  t.vul_patch_anchors = patch_anchors(t.vul_ag, t.vul_mapping);
  t.fix_patch_anchors = patch_anchors(t.fix_ag, t.fix_mapping);

  SignaturePair pair;
  pair.cve = in.cve;
  pair.vul = build_signature(t.vul_ag, t.vul_patch_anchors, t.fix_ag, Side::Vul, &t.vul_patch_path);
  pair.fix = build_signature(t.fix_ag, t.fix_patch_anchors, t.vul_ag, Side::Fix, &t.fix_patch_path);
  if (!pair.vul.patch_path && !pair.fix.patch_path)
    throw UndetectablePatch("undetectable patch: no anchor lies on a changed line in either "
                            "reference function");
  return pair;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

namespace {

json value_to_json(const AnchorValue &v) {
  switch (v.tag()) {
  case AnchorValue::Tag::Integer:
    return v.as_integer();
  case AnchorValue::Tag::Symbol:
    return v.as_symbol();
  case AnchorValue::Tag::Unresolved:
    return "?";
  case AnchorValue::Tag::Inf:
    return "INF";
  }
  return nullptr;
}

AnchorValue value_from_json(const json &j, const std::string &where) {
  if (j.is_number_integer())
    return AnchorValue::integer(j.get<std::int64_t>());
  if (j.is_string()) {
    const auto &s = j.get_ref<const std::string &>();
    if (s == "INF")
      return AnchorValue::inf();
    if (s == "?")
      return AnchorValue::unresolved();
    return AnchorValue::symbol(s);
  }
  throw ParseError(where, "expected integer or string anchor value");
}

AnchorKind kind_from_json(const json &j, const std::string &where) {
  if (j == "CMP")
    return AnchorKind::Cmp;
  if (j == "CALL")
    return AnchorKind::Call;
  throw ParseError(where, "expected \"CMP\" or \"CALL\"");
}

json distance_to_json(const Distance &d) {
  return d.is_infinite() ? json("inf") : json(d.value());
}

Distance distance_from_json(const json &j, const std::string &where) {
  if (j == "inf")
    return Distance::infinite();
  if (j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0))
    return Distance::hops(j.get<std::size_t>());
  throw ParseError(where, "expected non-negative integer or \"inf\"");
}

const json &field(const json &obj, const char *key, const std::string &where) {
  if (!obj.is_object())
    throw ParseError(where, "expected object");
  auto it = obj.find(key);
  if (it == obj.end())
    throw ParseError(where.empty() ? key : where + "." + key, "missing field");
  return *it;
}

json path_to_json(const SigPath &p) {
  json out = json::array();
  for (const auto &a : p)
    out.push_back(anchor_to_json(a));
  return out;
}

SigPath path_from_json(const json &j, const std::string &where) {
  if (!j.is_array())
    throw ParseError(where, "expected array");
  SigPath out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(anchor_from_json(j[i], where + "[" + std::to_string(i) + "]"));
  return out;
}

json signature_to_json(const Signature &s) {
  json out;
  out["patch_path"] = s.patch_path ? path_to_json(*s.patch_path) : json(nullptr);
  out["bw"] = path_to_json(s.bw);
  out["fw"] = path_to_json(s.fw);
  out["d_bw_patch"] = distance_to_json(s.d_bw_patch);
  out["d_patch_fw"] = distance_to_json(s.d_patch_fw);
  json uv = json::array();
  for (const auto &[value, kind] : s.unique_values)
    uv.push_back(json::array({value_to_json(value), to_string(kind)}));
  out["unique_values"] = uv;
  return out;
}

Signature signature_from_json_side(const json &j, Side origin, const std::string &where) {
  Signature s;
  s.origin = origin;
  const auto &patch = field(j, "patch_path", where);
  if (!patch.is_null())
    s.patch_path = path_from_json(patch, where + ".patch_path");
  s.bw = path_from_json(field(j, "bw", where), where + ".bw");
  s.fw = path_from_json(field(j, "fw", where), where + ".fw");
  s.d_bw_patch = distance_from_json(field(j, "d_bw_patch", where), where + ".d_bw_patch");
  s.d_patch_fw = distance_from_json(field(j, "d_patch_fw", where), where + ".d_patch_fw");
  const auto &uv = field(j, "unique_values", where);
  if (!uv.is_array())
    throw ParseError(where + ".unique_values", "expected array");
  for (std::size_t i = 0; i < uv.size(); ++i) {
    auto w = where + ".unique_values[" + std::to_string(i) + "]";
    if (!uv[i].is_array() || uv[i].size() != 2)
      throw ParseError(w, "expected [value, kind]");
    s.unique_values.emplace(value_from_json(uv[i][0], w + "[0]"), kind_from_json(uv[i][1], w + "[1]"));
  }
  return s;
}

} // namespace

json anchor_to_json(const SigAnchor &a) {
  json aux = json::array();
  for (const auto &c : a.aux) {
    json constant = std::holds_alternative<std::int64_t>(c.constant)
                        ? json(std::get<std::int64_t>(c.constant))
                        : json(std::get<std::string>(c.constant));
    aux.push_back(json::array({constant, to_string(c.tag)}));
  }
  return {{"kind", to_string(a.kind)}, {"value", value_to_json(a.value)}, {"aux", aux}};
}

SigAnchor anchor_from_json(const json &j, const std::string &where) {
  SigAnchor a;
  a.kind = kind_from_json(field(j, "kind", where), where + ".kind");
  a.value = value_from_json(field(j, "value", where), where + ".value");
  const auto &aux = field(j, "aux", where);
  if (!aux.is_array())
    throw ParseError(where + ".aux", "expected array");
  for (std::size_t i = 0; i < aux.size(); ++i) {
    auto w = where + ".aux[" + std::to_string(i) + "]";
    const auto &e = aux[i];
    if (!e.is_array() || e.size() != 2 || !e[1].is_string())
      throw ParseError(w, "expected [constant, tag]");
    auto tag = aux_tag_from_string(e[1].get<std::string>());
    if (!tag)
      throw ParseError(w + "[1]", "unknown aux tag '" + e[1].get<std::string>() + "'");
    if (e[0].is_number_integer())
      a.aux.push_back({e[0].get<std::int64_t>(), *tag});
    else if (e[0].is_string())
      a.aux.push_back({e[0].get<std::string>(), *tag});
    else
      throw ParseError(w + "[0]", "expected integer or string constant");
  }
  return a;
}

json to_json(const SignaturePair &pair) {
  return {{"cve", pair.cve}, {"vul", signature_to_json(pair.vul)}, {"fix", signature_to_json(pair.fix)}};
}

SignaturePair signature_from_json(const json &doc) {
  SignaturePair pair;
  const auto &cve = field(doc, "cve", "");
  if (!cve.is_string())
    throw ParseError("cve", "expected string");
  pair.cve = cve.get<std::string>();
  pair.vul = signature_from_json_side(field(doc, "vul", ""), Side::Vul, "vul");
  pair.fix = signature_from_json_side(field(doc, "fix", ""), Side::Fix, "fix");
  if (!pair.vul.patch_path && !pair.fix.patch_path)
    throw ParseError("", "signature has no patch path on either side");
  return pair;
}

SignaturePair load_signature(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open signature '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error &e) {
    throw ParseError(path.string(), std::string("invalid JSON: ") + e.what());
  }
  try {
    return signature_from_json(doc);
  } catch (const ParseError &e) {
    throw ParseError(e.where().empty() ? path.string() : path.string() + ": " + e.where(),
                     e.detail());
  }
}

void write_file_atomic(const std::filesystem::path &path, std::string_view content) {
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw Error("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out)
      throw Error("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  }
}

std::filesystem::path save_signature(const SignaturePair &pair, const std::filesystem::path &dir) {
  auto name = pair.cve.empty() ? std::string("signature") : pair.cve;
  for (auto &c : name)
    if (c == '/' || c == '\\')
      c = '_';
  auto path = dir / (name + ".json");
  write_file_atomic(path, to_json(pair).dump(2) + "\n");
  return path;
}

} // namespace ploc
