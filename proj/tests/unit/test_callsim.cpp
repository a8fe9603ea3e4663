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

#include <cmath>
#include <random>

#include "ploc/callsim.hpp"
#include "ploc/error.hpp"
#include "ploc/report.hpp"
#include "recording.hpp"
#include "support.hpp"

using namespace ploc;

namespace {

std::vector<CalleeRef> refs(std::initializer_list<const char *> ids) {
  std::vector<CalleeRef> out;
  for (const char *id : ids)
    out.push_back({id, nullptr});
  return out;
}

class ThrowingProvider final : public SimilarityProvider {
public:
  std::vector<double> score(const CalleeRef &, std::span<const CalleeRef>) const override {
    throw std::runtime_error("model unavailable");
  }
  std::string name() const override { return "throwing"; }
};

class ShortProvider final : public SimilarityProvider {
public:
  std::vector<double> score(const CalleeRef &, std::span<const CalleeRef>) const override {
    return {0.99};
  }
  std::string name() const override { return "short"; }
};

} // namespace

TEST_CASE("exact name wins without the provider") {
  test::RecordingProvider provider([](auto &, auto &) { return 1.0; });
  auto candidates = refs({"baz", "foobar"});
  auto m = match_callee({"foobar", nullptr}, candidates, &provider, 0.9);
  REQUIRE(m);
  CHECK(m->id == "foobar");
  CHECK(m->index == 1);
  CHECK(m->exact);
  CHECK(provider.calls() == 0);
}

TEST_CASE("exact name precedence holds for any provider scores") {
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int round = 0; round < 100; ++round) {
    std::vector<double> scores{u(rng), u(rng), u(rng)};
    test::RecordingProvider provider([&](auto &, const std::string &c) {
      return scores[static_cast<std::size_t>(c.back() - '0')];
    });
    auto candidates = refs({"f0", "f1", "f2"});
    auto m = match_callee({"f1", nullptr}, candidates, &provider, 0.0);
    REQUIRE(m);
    CHECK(m->id == "f1");
  }
}

TEST_CASE("stripped reference goes through the provider") {
  test::RecordingProvider provider([](auto &, const std::string &c) {
    return c == "sub_1" ? 0.95 : c == "sub_2" ? 0.4 : 0.2;
  });
  auto candidates = refs({"sub_1", "sub_2", "sub_3"});
  auto m = match_callee({"sub_80A9FF0", nullptr}, candidates, &provider, 0.9);
  REQUIRE(m);
  CHECK(m->index == 0);
  CHECK(m->score == doctest::Approx(0.95));
  CHECK_FALSE(m->exact);
  CHECK(provider.calls() == 1);
}

TEST_CASE("scores at or below the threshold do not match") {
  test::RecordingProvider provider([](auto &, const std::string &c) {
    return c == "a" ? 0.9 : 0.5;
  });
  auto candidates = refs({"a", "b"});
  CHECK_FALSE(match_callee({"missing", nullptr}, candidates, &provider, 0.9));
  CHECK(match_callee({"missing", nullptr}, candidates, &provider, 0.89));
}

TEST_CASE("first candidate wins a tie") {
  test::RecordingProvider provider([](auto &, auto &) { return 0.95; });
  auto candidates = refs({"x", "y"});
  auto m = match_callee({"q", nullptr}, candidates, &provider, 0.9);
  REQUIRE(m);
  CHECK(m->id == "x");
}

TEST_CASE("provider failures mean no match") {
  ThrowingProvider throwing;
  ShortProvider short_answer;
  auto candidates = refs({"x", "y"});
  CHECK_FALSE(match_callee({"q", nullptr}, candidates, &throwing, 0.5));
  CHECK_FALSE(match_callee({"q", nullptr}, candidates, &short_answer, 0.5));
  CHECK_FALSE(match_callee({"q", nullptr}, candidates, nullptr, 0.5));
}

TEST_CASE("matcher memoises") {
  test::RecordingProvider provider([](auto &, auto &) { return 0.95; });
  CalleeMatcher matcher(refs({"sub_10", "sub_20"}), &provider, 0.9);
  auto a = matcher.match("ssl3_send_alert");
  auto b = matcher.match("ssl3_send_alert");
  REQUIRE(a);
  CHECK(a->id == b->id);
  CHECK(provider.calls() == 1);
}

TEST_CASE("provider only sees the target's callees") {
  auto pool = load_cfg_bundle(test::fixture("kx/target_clang_o0_vul.json"));
  const auto *target = pool.find("sub_8049A10");
  REQUIRE(target);
  std::set<std::string> allowed;
  for (const auto &inv : target->invoked())
    allowed.insert(*inv.callee);

  auto provider = std::make_shared<test::RecordingProvider>(
      [](auto &, auto &) { return 0.5; });
  CalleeMatcher matcher(invoked_callees(*target, &pool), provider.get(), 0.9);
  for (const char *name : {"ssl3_send_alert", "ssl3_do_write", "memcpy"})
    matcher.match(name);
  CHECK(provider->calls() == 3);
  CHECK_FALSE(provider->seen().empty());
  for (const auto &id : provider->seen())
    CHECK(allowed.count(id) == 1);
}

TEST_CASE("invoked callees") {
  auto f = test::make_function({{"b", {}, {"call alpha", "call eax", "call beta", "call alpha"}}});
  auto c = invoked_callees(f);
  REQUIRE(c.size() == 2);
  CHECK(c[0].id == "alpha");
  CHECK(c[1].id == "beta");
}

TEST_CASE("histogram similarity") {
  auto f = test::make_function({{"b", {}, {"mov eax, 1", "mov ebx, 2", "add eax, ebx", "ret"}}});
  auto g = test::make_function({{"b", {}, {"mov eax, 1", "mov ebx, 2", "add eax, ebx", "nop", "ret"}}});
  auto h = test::make_function({{"b", {}, {"push ebp", "pop ebp"}}});
  CHECK(histogram_similarity(f, f) == doctest::Approx(1.0));
  CHECK(histogram_similarity(f, h) == doctest::Approx(0.0));
  // mov 2, add 1, ret 1 against the same plus nop 1: 6 / sqrt(6 * 7).
  CHECK(histogram_similarity(f, g) == doctest::Approx(6.0 / std::sqrt(42.0)));
  CHECK(histogram_similarity(f, g) == doctest::Approx(histogram_similarity(g, f)));
  FunctionCFG empty;
  CHECK(histogram_similarity(empty, empty) == doctest::Approx(1.0));
  CHECK(histogram_similarity(empty, f) == doctest::Approx(0.0));

  HistogramProvider provider;
  std::vector<CalleeRef> candidates{{"g", &g}, {"h", &h}, {"none", nullptr}};
  auto scores = provider.score({"f", &f}, candidates);
  REQUIRE(scores.size() == 3);
  CHECK(scores[0] == doctest::Approx(6.0 / std::sqrt(42.0)));
  CHECK(scores[2] == 0.0);
}

TEST_CASE("similarity table") {
  auto inner = std::make_shared<test::RecordingProvider>([](auto &, auto &) { return 0.33; });
  auto m = MatrixProvider::parse_csv("query_id,candidate_id,score\n"
                                     "# comment\n"
                                     "ssl3_send_alert,sub_80A9FF0,0.97\n"
                                     "ssl3_send_alert,sub_1,0.2\n",
                                     inner);
  CHECK(m.size() == 2);
  CHECK(m.lookup("ssl3_send_alert", "sub_80A9FF0") == 0.97);
  CHECK_FALSE(m.lookup("x", "y"));
  std::vector<CalleeRef> candidates{{"sub_1", nullptr}, {"sub_80A9FF0", nullptr}, {"sub_9", nullptr}};
  auto scores = m.score({"ssl3_send_alert", nullptr}, candidates);
  CHECK(scores == std::vector<double>{0.2, 0.97, 0.33});
  CHECK(inner->seen() == std::set<std::string>{"sub_9"});

  CHECK_THROWS_AS(MatrixProvider::parse_csv("a,b,1.5\n"), ParseError);
  CHECK_THROWS_AS(MatrixProvider::parse_csv("a,b\n"), ParseError);
  CHECK_THROWS_AS(MatrixProvider::parse_csv("a,b,high\n"), ParseError);

  auto loaded = MatrixProvider::load_csv(test::fixture("kx/simdb.csv"));
  CHECK(loaded.lookup("ssl3_send_alert", "sub_80A9FF0") == 0.97);
}
