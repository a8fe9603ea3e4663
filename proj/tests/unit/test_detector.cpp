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
#include <doctest.h>

#include <random>

#include "ploc/detector.hpp"
#include "recording.hpp"
#include "support.hpp"

using namespace ploc;
using test::aux;
using test::call_anchor;
using test::cmp_anchor;

namespace {

using Opt = std::optional<std::size_t>;

MatchedPath mp(std::vector<Opt> anchors) { return MatchedPath{std::move(anchors)}; }

SignaturePair values_only(std::set<ValueKey> vul, std::set<ValueKey> fix) {
  SignaturePair p;
  p.vul.origin = Side::Vul;
  p.fix.origin = Side::Fix;
  p.vul.unique_values = std::move(vul);
  p.fix.unique_values = std::move(fix);
  return p;
}

ValueKey cmpv(std::int64_t v) { return {AnchorValue::integer(v), AnchorKind::Cmp}; }
ValueKey callv(const std::string &s) { return {AnchorValue::symbol(s), AnchorKind::Call}; }

AnchorGraph graph(std::vector<Anchor> nodes, std::vector<std::pair<std::size_t, std::size_t>> edges) {
  AnchorGraph ag;
  std::uint64_t site = 0x10;
  for (auto &n : nodes) {
    if (n.site == 0) {
      n.site = site;
      n.block_address = site;
    }
    site += 0x10;
    ag.add_anchor(std::move(n));
  }
  for (auto [a, b] : edges)
    ag.add_edge(a, b);
  return ag;
}

ContextMatch retained(MatchedPath p) {
  ContextMatch c;
  c.retained = true;
  c.ratio = 1.0;
  c.best = std::move(p);
  return c;
}

ContextMatch vacuous() {
  ContextMatch c;
  c.vacuous = true;
  c.retained = true;
  c.ratio = 1.0;
  return c;
}

SigAnchor sa(const Anchor &a) { return SigAnchor::from(a); }

} // namespace

TEST_CASE("matching proportion") {
  std::set<ValueKey> ref{cmpv(2), cmpv(0xE), callv("foobar"), cmpv(0)};
  auto tgt = graph({cmp_anchor(2), cmp_anchor(0), cmp_anchor(99)}, {});
  auto p = matching_proportion(ref, tgt.unique_values());
  CHECK(p.matched == 2);
  CHECK(p.total == 4);
  CHECK(p.rho() == doctest::Approx(0.5));

  auto sig = values_only(ref, ref);
  CHECK_FALSE(filter_irrelevant(sig, tgt, 0.4).irrelevant);
  CHECK(filter_irrelevant(sig, tgt, 0.5).irrelevant);

  auto disjoint = graph({cmp_anchor(77), call_anchor("other")}, {});
  auto r = filter_irrelevant(sig, disjoint, 0.4);
  CHECK(r.irrelevant);
  CHECK(r.vul.rho() == 0.0);

  auto self = graph({cmp_anchor(2), cmp_anchor(0xE), call_anchor("foobar"), cmp_anchor(0)}, {});
  CHECK(filter_irrelevant(sig, self, 0.4).fix.rho() == doctest::Approx(1.0));

  CHECK(matching_proportion({}, tgt.unique_values()).rho() == 0.0);
  // Only one side needs to exceed the threshold.
  auto one_sided = values_only({cmpv(2), cmpv(0)}, {cmpv(50), cmpv(51)});
  CHECK_FALSE(filter_irrelevant(one_sided, tgt, 0.4).irrelevant);
}

TEST_CASE("callee matching counts toward the proportion") {
  std::set<ValueKey> ref{callv("ssl3_send_alert"), cmpv(0)};
  auto tgt = graph({call_anchor("sub_80A9FF0"), cmp_anchor(0)}, {});
  test::RecordingProvider provider([](auto &q, auto &c) {
    return q == "ssl3_send_alert" && c == "sub_80A9FF0" ? 0.97 : 0.1;
  });
  CalleeMatcher matcher({{"sub_80A9FF0", nullptr}}, &provider, 0.9);
  CHECK(matching_proportion(ref, tgt.unique_values()).matched == 1);
  CHECK(matching_proportion(ref, tgt.unique_values(), &matcher).matched == 2);
}

TEST_CASE("proportion never drops when anchors are added") {
  std::mt19937 rng(21);
  for (int round = 0; round < 200; ++round) {
    std::set<ValueKey> ref;
    for (int i = 0; i < 6; ++i)
      ref.insert(rng() % 2 ? cmpv(rng() % 8) : callv("f" + std::to_string(rng() % 8)));
    AnchorGraph tgt;
    double last = 0.0;
    for (int k = 0; k < 10; ++k) {
      tgt.add_anchor(rng() % 2 ? cmp_anchor(rng() % 8)
                               : call_anchor("f" + std::to_string(rng() % 8)));
      double rho = matching_proportion(ref, tgt.unique_values()).rho();
      CHECK(rho >= last);
      last = rho;
    }
  }
}

TEST_CASE("candidate sets") {
  auto tgt = graph({cmp_anchor(0, {aux(3, AuxTag::Add)}), cmp_anchor(0, {aux(0xE, AuxTag::Offset)}),
                    cmp_anchor(5), call_anchor("foobar", {aux(2, AuxTag::Param)})},
                   {});
  SigPath ref{sa(cmp_anchor(0, {aux(0xE, AuxTag::Offset)})), sa(cmp_anchor(7)),
              sa(call_anchor("foobar"))};
  auto sets = build_candidate_sets(ref, tgt);
  REQUIRE(sets.size() == 3);
  CHECK(sets[0] == CandidateSet{1, 0});
  CHECK(sets[1].empty());
  CHECK(sets[2] == CandidateSet{3});

  auto shared = build_candidate_sets(ref, tgt, nullptr, AuxPolicy::SharedAux);
  CHECK(shared[0] == CandidateSet{1});
  // A reference anchor without aux is not restricted.
  CHECK(shared[2] == CandidateSet{3});

  auto inf = graph({Anchor{AnchorValue::inf(), AnchorKind::Cmp}}, {});
  CHECK(build_candidate_sets({SigAnchor{AnchorValue::inf(), AnchorKind::Cmp, {}}}, inf)[0] ==
        CandidateSet{0});
}

TEST_CASE("stripped callees are found through the provider") {
  auto tgt = graph({call_anchor("sub_10"), call_anchor("sub_20")}, {});
  test::RecordingProvider provider([](auto &, auto &c) { return c == "sub_20" ? 0.95 : 0.3; });
  CalleeMatcher matcher({{"sub_10", nullptr}, {"sub_20", nullptr}}, &provider, 0.9);
  auto sets = build_candidate_sets({sa(call_anchor("ssl3_send_alert"))}, tgt, &matcher);
  CHECK(sets[0] == CandidateSet{1});
  CHECK(provider.seen() == std::set<std::string>{"sub_10", "sub_20"});
}

TEST_CASE("path matching keeps the closest candidate") {
  // x1 -> y1 directly, x1 -> m -> n -> y2.
  auto tgt = graph({cmp_anchor(1), cmp_anchor(2), cmp_anchor(9), cmp_anchor(9), cmp_anchor(2)},
                   {{0, 1}, {0, 2}, {2, 3}, {3, 4}});
  auto r = path_match({{0}, {1, 4}}, tgt);
  REQUIRE(r.paths.size() == 1);
  CHECK(r.paths[0] == mp({0, 1}));
  CHECK_FALSE(r.truncated);
}

TEST_CASE("empty candidate sets are skipped") {
  auto tgt = graph({cmp_anchor(2)}, {});
  auto r = path_match({{}, {0}}, tgt);
  REQUIRE(r.paths.size() == 1);
  CHECK(r.paths[0] == mp({std::nullopt, 0}));
  CHECK(r.paths[0].matched_count() == 1);
  CHECK_FALSE(r.paths[0].full());
}

TEST_CASE("equally close candidates are all kept") {
  auto tgt = graph({cmp_anchor(1), cmp_anchor(2), cmp_anchor(2)}, {{0, 1}, {0, 2}});
  auto r = path_match({{0}, {1, 2}}, tgt);
  CHECK(r.paths == std::vector<MatchedPath>{mp({0, 1}), mp({0, 2})});
}

TEST_CASE("unreachable candidates become gaps") {
  auto tgt = graph({cmp_anchor(1), cmp_anchor(2), cmp_anchor(3)}, {{0, 2}});
  auto r = path_match({{0}, {1}, {2}}, tgt);
  REQUIRE(r.paths.size() == 1);
  CHECK(r.paths[0] == mp({0, std::nullopt, 2}));
}

TEST_CASE("only the longest matches survive") {
  // Starting at a gives 3 anchors, starting at the unconnected a' gives 1.
  auto tgt = graph({cmp_anchor(1), cmp_anchor(2), cmp_anchor(3), cmp_anchor(1)}, {{0, 1}, {1, 2}});
  auto r = path_match({{0, 3}, {1}, {2}}, tgt);
  CHECK(r.paths == std::vector<MatchedPath>{mp({0, 1, 2})});
}

TEST_CASE("result list is capped") {
  // Five positions with two equally close candidates each: 32 paths.
  std::vector<Anchor> nodes{cmp_anchor(0)};
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<CandidateSet> sets{{0}};
  std::vector<std::size_t> prev{0};
  for (int level = 1; level <= 5; ++level) {
    std::size_t a = nodes.size(), b = a + 1;
    nodes.push_back(cmp_anchor(level));
    nodes.push_back(cmp_anchor(level));
    for (auto p : prev) {
      edges.push_back({p, a});
      edges.push_back({p, b});
    }
    prev = {a, b};
    sets.push_back({a, b});
  }
  auto tgt = graph(nodes, edges);
  CHECK(path_match(sets, tgt).paths.size() == 32);
  auto capped = path_match(sets, tgt, 10);
  CHECK(capped.paths.size() == 10);
  CHECK(capped.truncated);
}

TEST_CASE("path score") {
  auto tgt = graph({cmp_anchor(0, {aux(1, AuxTag::Offset)}),
                    cmp_anchor(0, {aux(2, AuxTag::Add), aux(3, AuxTag::Add)})},
                   {{0, 1}});
  SigPath ref{sa(cmp_anchor(0, {aux(1, AuxTag::Offset)})),
              sa(cmp_anchor(0, {aux(2, AuxTag::Add), aux(3, AuxTag::Add)}))};
  CHECK(path_score(ref, mp({0, 1}), tgt) == doctest::Approx(1.5));
  CHECK(path_score(ref, mp({std::nullopt, std::nullopt}), tgt) == 0.0);
  CHECK(path_score({}, mp({}), tgt) == 0.0);
}

TEST_CASE("context ratio threshold") {
  auto tgt = graph({cmp_anchor(1), cmp_anchor(2), cmp_anchor(3), cmp_anchor(4)},
                   {{0, 1}, {1, 2}, {2, 3}});
  SigPath four{sa(cmp_anchor(1)), sa(cmp_anchor(2)), sa(cmp_anchor(50)), sa(cmp_anchor(51))};
  auto half = match_context(four, build_candidate_sets(four, tgt), tgt, 0.3);
  CHECK(half.ratio == doctest::Approx(0.5));
  CHECK(half.retained);

  SigPath quarter{sa(cmp_anchor(1)), sa(cmp_anchor(60)), sa(cmp_anchor(50)), sa(cmp_anchor(51))};
  auto q = match_context(quarter, build_candidate_sets(quarter, tgt), tgt, 0.3);
  CHECK(q.ratio == doctest::Approx(0.25));
  CHECK_FALSE(q.retained);

  auto empty = match_context({}, {}, tgt, 0.3);
  CHECK(empty.vacuous);
  CHECK(empty.retained);
  CHECK(empty.ratio == 1.0);
}

TEST_CASE("patch matches must be complete") {
  auto tgt = graph({cmp_anchor(1), cmp_anchor(2)}, {{0, 1}});
  CHECK(match_patch({{0}, {1}}, tgt).size() == 1);
  CHECK(match_patch({{0}, {}}, tgt).empty());
}

TEST_CASE("verification") {
  // bw -> p -> fw, and a copy p2 reachable from nothing.
  auto tgt = graph({cmp_anchor(1), cmp_anchor(0), cmp_anchor(7), cmp_anchor(0)},
                   {{0, 1}, {1, 2}, {3, 2}});
  Signature sig;
  sig.bw = {sa(cmp_anchor(1))};
  sig.fw = {sa(cmp_anchor(7))};
  sig.patch_path = SigPath{sa(cmp_anchor(0))};
  sig.d_bw_patch = Distance::hops(1);
  sig.d_patch_fw = Distance::hops(1);

  SUBCASE("equal distances pass, unreachable copies fail") {
    auto v = verify_patch_path({mp({1}), mp({3})}, retained(mp({0})), retained(mp({2})), sig, tgt);
    REQUIRE(v.candidates.size() == 2);
    CHECK(v.candidates[0].verified);
    CHECK_FALSE(v.candidates[1].verified);
    CHECK(v.candidates[1].d_bw.is_infinite());
    CHECK(v.chosen == 0u);
  }
  SUBCASE("unmatched context fails when the reference has one") {
    ContextMatch lost;
    auto v = verify_patch_path({mp({1})}, lost, retained(mp({2})), sig, tgt);
    CHECK_FALSE(v.candidates[0].verified);
    CHECK_FALSE(v.chosen);
  }
  SUBCASE("empty reference side carries no constraint") {
    sig.bw.clear();
    sig.d_bw_patch = Distance::infinite();
    auto v = verify_patch_path({mp({3})}, vacuous(), retained(mp({2})), sig, tgt);
    CHECK(v.candidates[0].verified);
  }
  SUBCASE("a context anchor cannot also be the patch") {
    auto v = verify_patch_path({mp({1})}, retained(mp({1})), retained(mp({2})), sig, tgt);
    CHECK_FALSE(v.candidates[0].verified);
  }
}

TEST_CASE("closest verified candidate is chosen") {
  // b -> x -> p1 (distance 2) and b -> y1 -> y2 -> y3 -> y4 -> p2 (distance 5).
  auto tgt = graph({cmp_anchor(1), cmp_anchor(8), cmp_anchor(0), cmp_anchor(8), cmp_anchor(8),
                    cmp_anchor(8), cmp_anchor(8), cmp_anchor(0)},
                   {{0, 1}, {1, 2}, {0, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}});
  Signature sig;
  sig.bw = {sa(cmp_anchor(1))};
  sig.patch_path = SigPath{sa(cmp_anchor(0))};
  sig.d_bw_patch = Distance::hops(5);
  auto v = verify_patch_path({mp({7}), mp({2})}, retained(mp({0})), vacuous(), sig, tgt);
  REQUIRE(v.candidates.size() == 2);
  CHECK(v.candidates[0].verified);
  CHECK(v.candidates[1].verified);
  CHECK(v.chosen == 1u);
  CHECK(v.candidates[1].d_bw == Distance::hops(2));
}

TEST_CASE("verification never accepts an unreachable patch") {
  std::mt19937 rng(17);
  for (int round = 0; round < 300; ++round) {
    const std::size_t n = 3 + rng() % 8;
    std::vector<Anchor> nodes;
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < n; ++i)
      nodes.push_back(cmp_anchor(static_cast<std::int64_t>(rng() % 3)));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (rng() % 3 == 0)
          edges.push_back({i, j});
    auto tgt = graph(nodes, edges);
    Signature sig;
    sig.bw = {sa(cmp_anchor(9))};
    sig.patch_path = SigPath{sa(cmp_anchor(0))};
    sig.d_bw_patch = Distance::hops(1 + rng() % 4);
    std::size_t b = rng() % n, p = rng() % n;
    auto v = verify_patch_path({mp({p})}, retained(mp({b})), vacuous(), sig, tgt);
    if (tgt.distance(b, p).is_infinite())
      CHECK_FALSE(v.candidates[0].verified);
  }
}

TEST_CASE("detection is deterministic") {
  auto pool = load_cfg_bundle(test::fixture("kx/ref_fix.json"));
  auto ag = build_anchor_graph(pool.functions()[0]);
  SignaturePair sig;
  sig.fix.origin = Side::Fix;
  sig.fix.patch_path = SigPath{SigAnchor::from(ag.at(3))};
  sig.fix.unique_values = ag.unique_values();
  sig.vul.unique_values = ag.unique_values();
  auto a = detect(sig, ag, nullptr, Thresholds{});
  auto b = detect(sig, ag, nullptr, Thresholds{});
  CHECK(a.fix.verification.candidates.size() == b.fix.verification.candidates.size());
  CHECK(a.fix.patch == b.fix.patch);
  CHECK(a.fix.patch_score == b.fix.patch_score);
}
