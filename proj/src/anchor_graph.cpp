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
#include <algorithm>
#include <deque>
#include <sstream>

#include "ploc/anchor.hpp"

namespace ploc {

namespace {

std::string format_integer(std::int64_t v) {
  if (v >= 0 && v < 10)
    return std::to_string(v);
  std::ostringstream os;
  if (v < 0)
    os << '-';
  os << "0x" << std::uppercase << std::hex
     << (v < 0 ? static_cast<std::uint64_t>(-(v + 1)) + 1 : static_cast<std::uint64_t>(v));
  return os.str();
}

} // namespace

std::string AnchorValue::to_string() const {
  switch (tag_) {
  case Tag::Integer:
    return format_integer(integer_);
  case Tag::Symbol:
    return symbol_;
  case Tag::Unresolved:
    return "?";
  case Tag::Inf:
    return "INF";
  }
  return {};
}

const char *to_string(AnchorKind kind) { return kind == AnchorKind::Cmp ? "CMP" : "CALL"; }

const char *to_string(AuxTag tag) {
  switch (tag) {
  case AuxTag::Offset:
    return "offset";
  case AuxTag::Add:
    return "add";
  case AuxTag::Sub:
    return "sub";
  case AuxTag::Mul:
    return "mul";
  case AuxTag::Div:
    return "div";
  case AuxTag::And:
    return "and";
  case AuxTag::Assign:
    return "assign";
  case AuxTag::Param:
    return "param";
  }
  return "?";
}

std::optional<AuxTag> aux_tag_from_string(std::string_view s) {
  for (auto t : {AuxTag::Offset, AuxTag::Add, AuxTag::Sub, AuxTag::Mul, AuxTag::Div, AuxTag::And,
                 AuxTag::Assign, AuxTag::Param})
    if (s == to_string(t))
      return t;
  return std::nullopt;
}

std::string aux_to_string(const AuxList &aux) {
  std::string out;
  for (const auto &a : aux) {
    if (!out.empty())
      out += ' ';
    out += '(';
    if (const auto *i = std::get_if<std::int64_t>(&a.constant))
      out += format_integer(*i);
    else
      out += '"' + std::get<std::string>(a.constant) + '"';
    out += ',';
    out += to_string(a.tag);
    out += ')';
  }
  return out;
}

std::size_t aux_lcs(const AuxList &a, const AuxList &b) {
  if (a.empty() || b.empty())
    return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::size_t AnchorGraph::add_anchor(Anchor a) {
  nodes_.push_back(std::move(a));
  succ_.emplace_back();
  pred_.emplace_back();
  return nodes_.size() - 1;
}

void AnchorGraph::add_edge(std::size_t from, std::size_t to) {
  auto &s = succ_.at(from);
  if (std::find(s.begin(), s.end(), to) != s.end())
    return;
  s.push_back(to);
  pred_.at(to).push_back(from);
}

std::vector<std::pair<std::size_t, std::size_t>> AnchorGraph::edges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < succ_.size(); ++i)
    for (auto j : succ_[i])
      out.emplace_back(i, j);
  return out;
}

std::vector<std::size_t> AnchorGraph::entry_anchors() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pred_.size(); ++i)
    if (pred_[i].empty())
      out.push_back(i);
  return out;
}

std::vector<std::size_t> AnchorGraph::exit_anchors() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < succ_.size(); ++i)
    if (succ_[i].empty())
      out.push_back(i);
  return out;
}

Distance AnchorGraph::distance(std::size_t from, std::size_t to) const {
  if (from == to)
    return Distance::hops(0);
  std::vector<std::size_t> depth(nodes_.size(), 0);
  std::vector<bool> seen(nodes_.size(), false);
  std::deque<std::size_t> queue{from};
  seen[from] = true;
  while (!queue.empty()) {
    auto cur = queue.front();
    queue.pop_front();
    for (auto next : succ_[cur]) {
      if (seen[next])
        continue;
      if (next == to)
        return Distance::hops(depth[cur] + 1);
      seen[next] = true;
      depth[next] = depth[cur] + 1;
      queue.push_back(next);
    }
  }
  return Distance::infinite();
}

std::vector<Distance> AnchorGraph::distances_from(std::size_t from) const {
  std::vector<Distance> out(nodes_.size(), Distance::infinite());
  out[from] = Distance::hops(0);
  std::deque<std::size_t> queue{from};
  while (!queue.empty()) {
    auto cur = queue.front();
    queue.pop_front();
    for (auto next : succ_[cur]) {
      if (!out[next].is_infinite())
        continue;
      out[next] = Distance::hops(out[cur].value() + 1);
      queue.push_back(next);
    }
  }
  return out;
}

std::set<ValueKey> AnchorGraph::unique_values() const {
  std::set<ValueKey> out;
  for (const auto &a : nodes_)
    out.emplace(a.value, a.kind);
  return out;
}

std::string to_dot(const AnchorGraph &ag) {
  auto escape = [](const std::string &s) {
    std::string out;
    for (char c : s) {
      if (c == '"' || c == '\\')
        out += '\\';
      out += c;
    }
    return out;
  };
  std::ostringstream os;
  os << "digraph \"" << escape(ag.origin()) << "\" {\n";
  for (std::size_t i = 0; i < ag.size(); ++i) {
    const auto &a = ag.at(i);
    os << "  n" << i << " [label=\"" << to_string(a.kind) << ':' << escape(a.value.to_string())
       << '|' << escape(aux_to_string(a.aux)) << "\"];\n";
  }
  for (auto [from, to] : ag.edges())
    os << "  n" << from << " -> n" << to << ";\n";
  os << "}\n";
  return os.str();
}

} // namespace ploc
