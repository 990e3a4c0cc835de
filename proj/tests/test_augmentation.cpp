#include <doctest.h>

#include <set>

#include "checks.hpp"
#include "covnet/augmentation.hpp"

using namespace covnet;

TEST_CASE("fixed strategies are the eleven documented windows") {
  const auto& fixed = fixed_strategies();
  REQUIRE(fixed.size() == 11);
  std::set<std::string> labels;
  for (const auto& s : fixed) labels.insert(s.label());
  CHECK(labels.size() == 11);
  CHECK(labels.count("(-30,snap)") == 1);
  CHECK(labels.count("(0,pass_forward)") == 1);
  CHECK(labels.count("(0,pass_arrival)") == 1);
  CHECK(labels.count("(0,snap)") == 0);
  for (const auto& s : fixed) CHECK(!s.is_random());
}

TEST_CASE("truncation draws follow the 60/40 mix") {
  const auto r = checks::check_augmentation(100000, 2024);
  INFO(r.detail);
  CHECK(r.pass);
}

TEST_CASE("random windows are ordered and bounded for any pass arrival") {
  Rng rng(5);
  for (Index arrival : {-29, -10, 0, 1, 12, 60}) {
    for (int i = 0; i < 2000; ++i) {
      const auto s = sample_truncation(rng, arrival);
      if (!s.is_random()) continue;
      const Window w = resolve_window(s, EventOffsets{std::min<Index>(arrival, 0), arrival});
      CHECK(w.start >= kEarliestStartOffset);
      CHECK(w.start < w.end);
      CHECK(w.end <= arrival);
    }
  }
  CHECK_THROWS_AS(sample_truncation(rng, -30), ConfigError);
}

TEST_CASE("windows resolve against event offsets") {
  const EventOffsets ev{12, 21};
  CHECK(resolve_window({-30, EndEvent::Snap, 0}, ev) == Window{-30, 0});
  CHECK(resolve_window({-10, EndEvent::PassForward, 0}, ev) == Window{-10, 12});
  CHECK(resolve_window({0, EndEvent::PassArrival, 0}, ev) == Window{0, 21});
  TruncationStrategy r{-5, std::nullopt, 7};
  CHECK(resolve_window(r, ev) == Window{-5, 7});
  CHECK_THROWS_AS(resolve_window({0, EndEvent::PassForward, 0}, EventOffsets{-1, 5}), ConfigError);
}

TEST_CASE("apply_truncation slices the frame range and rejects bad windows") {
  Tensor<double> seq({3, 10, 2});
  for (Index a = 0; a < 3; ++a)
    for (Index t = 0; t < 10; ++t)
      for (Index f = 0; f < 2; ++f) seq(a, t, f) = 100.0 * a + 10.0 * t + f;
  const auto out = apply_truncation(seq, -4, Window{-2, 3});
  REQUIRE(out.dim(1) == 6);
  CHECK(out(1, 0, 1) == doctest::Approx(100 + 20 + 1));
  CHECK(out(2, 5, 0) == doctest::Approx(200 + 70));
  CHECK_THROWS_AS(apply_truncation(seq, -4, Window{-5, 0}), ConfigError);
  CHECK_THROWS_AS(apply_truncation(seq, -4, Window{0, 6}), ConfigError);
  CHECK_THROWS_AS(apply_truncation(seq, -4, Window{2, 1}), ConfigError);
  Tensor<double> flat({3, 10});
  CHECK_THROWS_AS(apply_truncation(flat, -4, Window{0, 1}), ConfigError);
}

TEST_CASE("nested truncations compose") {
  Rng rng(9);
  std::normal_distribution<double> n;
  Tensor<double> seq({4, 51, 3});
  for (double& v : seq.data()) v = n(rng);
  const EventOffsets ev{12, 20};
  Window outer_w;
  const auto outer = apply_truncation(seq, -30, ev, {-30, EndEvent::PassForward, 0}, &outer_w);
  const auto nested = apply_truncation(outer, static_cast<int>(outer_w.start), Window{-10, 0});
  const auto direct = apply_truncation(seq, -30, ev, {-10, EndEvent::Snap, 0});
  REQUIRE(nested.dim(1) == 11);
  CHECK(nested == direct);
}
