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

#include <compare>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ploc/cfg.hpp"

namespace ploc {

/// Stable value carried by an anchor.
class AnchorValue {
public:
  enum class Tag { Integer, Symbol, Unresolved, Inf };

  static AnchorValue integer(std::int64_t v) { return AnchorValue(Tag::Integer, v, {}); }
  static AnchorValue symbol(std::string name) { return AnchorValue(Tag::Symbol, 0, std::move(name)); }
  static AnchorValue unresolved() { return AnchorValue(Tag::Unresolved, 0, {}); }
  static AnchorValue inf() { return AnchorValue(Tag::Inf, 0, {}); }

  AnchorValue() = default;

  Tag tag() const { return tag_; }
  bool is_integer() const { return tag_ == Tag::Integer; }
  bool is_symbol() const { return tag_ == Tag::Symbol; }
  std::int64_t as_integer() const { return integer_; }
  const std::string &as_symbol() const { return symbol_; }

  /// Symbol that can be used for exact-name matching.
  bool has_usable_symbol() const { return is_symbol() && !is_stripped_name(symbol_); }

  /// "2", "0xE", "foobar", "?" or "INF".
  std::string to_string() const;

  auto operator<=>(const AnchorValue &) const = default;
  bool operator==(const AnchorValue &) const = default;

private:
  AnchorValue(Tag t, std::int64_t v, std::string s) : tag_(t), integer_(v), symbol_(std::move(s)) {}

  Tag tag_ = Tag::Integer;
  std::int64_t integer_ = 0;
  std::string symbol_;
};

enum class AnchorKind { Cmp, Call };

const char *to_string(AnchorKind kind);

/// Role of an auxiliary constant.
enum class AuxTag { Offset, Add, Sub, Mul, Div, And, Assign, Param };

const char *to_string(AuxTag tag);
std::optional<AuxTag> aux_tag_from_string(std::string_view s);

struct AuxConstant {
  std::variant<std::int64_t, std::string> constant;
  AuxTag tag = AuxTag::Offset;

  auto operator<=>(const AuxConstant &) const = default;
  bool operator==(const AuxConstant &) const = default;
};

using AuxList = std::vector<AuxConstant>;

struct Anchor {
  AnchorValue value;
  AnchorKind kind = AnchorKind::Cmp;
  AuxList aux; ///< slicing discovery order
  std::uint64_t site = 0;
  BlockId block;
  std::uint64_t block_address = 0;
  double weight = 1.0;

  /// Identity used for term frequency and exclusivity: value, kind and aux.
  bool same_identity(const Anchor &other) const {
    return kind == other.kind && value == other.value && aux == other.aux;
  }
};

/// (value, kind) pair; the granularity of the irrelevant-function filter.
using ValueKey = std::pair<AnchorValue, AnchorKind>;

/// Shortest-path hop count in an anchor graph, or infinite when unreachable.
class Distance {
public:
  static Distance infinite() { return Distance(kInfinite); }
  static Distance hops(std::size_t n) { return Distance(n); }

  bool is_infinite() const { return hops_ == kInfinite; }
  std::size_t value() const { return hops_; }
  std::string to_string() const { return is_infinite() ? "inf" : std::to_string(hops_); }

  Distance operator+(const Distance &o) const {
    return is_infinite() || o.is_infinite() ? infinite() : hops(hops_ + o.hops_);
  }
  auto operator<=>(const Distance &) const = default;

private:
  static constexpr std::size_t kInfinite = std::numeric_limits<std::size_t>::max();
  explicit Distance(std::size_t h) : hops_(h) {}
  std::size_t hops_;
};

/// Directed acyclic graph of anchors following the function's control flow.
class AnchorGraph {
public:
  AnchorGraph() = default;
  explicit AnchorGraph(std::string origin) : origin_(std::move(origin)) {}

  /// Returns the index of the new node.
  std::size_t add_anchor(Anchor a);
  /// Duplicate edges are ignored.
  void add_edge(std::size_t from, std::size_t to);

  const std::string &origin() const { return origin_; }
  std::size_t size() const { return nodes_.size(); }
  bool empty() const { return nodes_.empty(); }
  const Anchor &at(std::size_t i) const { return nodes_[i]; }
  Anchor &at(std::size_t i) { return nodes_[i]; }
  const std::vector<Anchor> &nodes() const { return nodes_; }
  const std::vector<std::size_t> &successors(std::size_t i) const { return succ_[i]; }
  const std::vector<std::size_t> &predecessors(std::size_t i) const { return pred_[i]; }
  std::vector<std::pair<std::size_t, std::size_t>> edges() const;

  std::vector<std::size_t> entry_anchors() const; ///< in-degree zero
  std::vector<std::size_t> exit_anchors() const;  ///< out-degree zero

  /// Shortest path in edges from `from` to `to`; zero when equal.
  Distance distance(std::size_t from, std::size_t to) const;
  /// Distance from `from` to every node.
  std::vector<Distance> distances_from(std::size_t from) const;
  /// Unique (value, kind) pairs over all nodes.
  std::set<ValueKey> unique_values() const;

private:
  std::string origin_;
  std::vector<Anchor> nodes_;
  std::vector<std::vector<std::size_t>> succ_;
  std::vector<std::vector<std::size_t>> pred_;
};

/// Free-function form of AnchorGraph::distance.
inline Distance anchor_distance(const AnchorGraph &ag, std::size_t a, std::size_t b) {
  return ag.distance(a, b);
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

struct KeyInstruction {
  const Instruction *instruction = nullptr;
  BlockId block;
  std::size_t position = 0; ///< index inside the block
  AnchorKind kind = AnchorKind::Cmp;
  AnchorValue value;
};

struct AnchorOptions {
  /// Entry symbols of known functions; a `jmp` to one of these is a tail call.
  /// Tail jumps recorded in the function's `invoked` list are always calls.
  const std::set<std::string> *function_symbols = nullptr;
};

/// Condition comparisons (`cmp`, `test`) and calls (`call`, tail `jmp`) in
/// block order, canonicalised:
///   test r, r          -> CMP 0
///   test x, imm        -> CMP 0 (imm recorded as an `and` aux constant)
///   cmp x, imm         -> CMP imm
///   cmp x, y           -> CMP INF
///   call sym           -> CALL sym
///   call reg / [mem]   -> CALL unresolved
std::vector<KeyInstruction> identify_key_instructions(const FunctionCFG &f,
                                                      const AnchorOptions &opts = {});

inline constexpr std::size_t kMaxSlicedInstructions = 64;
inline constexpr std::size_t kMaxCallParameters = 8;

/// Auxiliary constants of a key instruction, gathered by backward slicing
/// within its block and up through chains of unique predecessors.
AuxList backward_slice(const FunctionCFG &f, const KeyInstruction &key);

/// One anchor per key instruction. Edges connect anchors whose key
/// instructions are consecutive along some CFG path with back-edges removed.
AnchorGraph build_anchor_graph(const FunctionCFG &f, const AnchorOptions &opts = {});

/// Graphviz text; nodes are labelled `kind:value|aux`.
std::string to_dot(const AnchorGraph &ag);

/// Longest common subsequence of two aux lists; elements are equal when both
/// constant and tag agree.
std::size_t aux_lcs(const AuxList &a, const AuxList &b);

/// "(0xE,offset) (3,param)".
std::string aux_to_string(const AuxList &aux);

} // namespace ploc
