#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "evreg/bootstrap.hpp"

using evreg::BootstrapPlan;

TEST_CASE("wrapped blocks") {
  CHECK(evreg::wrapped_block(3, 4, 10) == std::vector<int>{3, 4, 5, 6});
  CHECK(evreg::wrapped_block(8, 5, 10) == std::vector<int>{8, 9, 0, 1, 2});
  CHECK(evreg::wrapped_block(0, 1, 1) == std::vector<int>{0});
  CHECK_THROWS_AS(evreg::wrapped_block(10, 1, 10), std::invalid_argument);
  CHECK_THROWS_AS(evreg::wrapped_block(0, 0, 10), std::invalid_argument);
}

TEST_CASE("resampled sequences have exact length and in-range indices") {
  evreg::Rng rng(7);
  for (int t_len : {1, 2, 17, 50}) {
    for (double m : {1.0, 2.0, 8.0}) {
      for (int rep = 0; rep < 50; ++rep) {
        const std::vector<int> s = evreg::stationary_resample(t_len, m, rng);
        REQUIRE(static_cast<int>(s.size()) == t_len);
        for (int t : s) {
          REQUIRE(t >= 0);
          REQUIRE(t < t_len);
        }
      }
    }
  }
}

TEST_CASE("unit mean block length degenerates to single-point resampling") {
  // Every drawn block has length one.
  evreg::Rng rng(11);
  std::vector<std::int64_t> lens;
  for (int rep = 0; rep < 200; ++rep) evreg::stationary_resample(20, 1.0, rng, &lens);
  for (std::int64_t k : lens) CHECK(k == 1);
  CHECK(lens.size() == 200u * 20u);
}

TEST_CASE("drawn block lengths match the target mean within five percent") {
  evreg::Rng rng(23);
  std::vector<std::int64_t> lens;
  for (int rep = 0; rep < 10000; ++rep) evreg::stationary_resample(50, 5.0, rng, &lens);
  const double mean =
      static_cast<double>(std::accumulate(lens.begin(), lens.end(), std::int64_t{0})) / lens.size();
  CHECK(mean > 5.0 * 0.95);
  CHECK(mean < 5.0 * 1.05);
}

TEST_CASE("time-index marginals are uniform across replicates") {
  const int t_len = 20, b = 4000;
  BootstrapPlan plan;
  plan.b = b;
  plan.mean_block_len = 2.0;
  plan.seed = 99;
  const auto seqs = evreg::stationary_bootstrap(t_len, plan);
  REQUIRE(seqs.size() == static_cast<std::size_t>(b));
  std::vector<int> counts(t_len, 0);
  for (const auto& s : seqs)
    for (int t : s) ++counts[static_cast<std::size_t>(t)];
  const double expect = static_cast<double>(b);
  for (int t = 0; t < t_len; ++t)
    CHECK(std::abs(counts[static_cast<std::size_t>(t)] - expect) < 0.15 * expect);
}

TEST_CASE("bootstrap replicates are seed-deterministic and distinct") {
  BootstrapPlan plan;
  plan.b = 5;
  plan.mean_block_len = 3.0;
  plan.seed = 42;
  const auto a = evreg::stationary_bootstrap(30, plan);
  const auto b = evreg::stationary_bootstrap(30, plan);
  CHECK(a == b);
  plan.seed = 43;
  CHECK(a != evreg::stationary_bootstrap(30, plan));
  // Replicates within one run differ from each other.
  CHECK(a[0] != a[1]);
}

TEST_CASE("pointwise envelopes") {
  Eigen::ArrayXXd samples(5, 2);
  samples.col(0) << 1.0, 2.0, 3.0, 4.0, 5.0;
  samples.col(1) << 10.0, 10.0, 10.0, 10.0, 10.0;
  const evreg::Envelope env = evreg::pointwise_envelope(samples, 0.25, 0.75);
  CHECK(env.median(0) == 3.0);
  CHECK(env.lo(0) == 2.0);  // h = 4*0.25 = 1 -> second order statistic
  CHECK(env.hi(0) == 4.0);
  CHECK(env.median(1) == 10.0);
  CHECK(env.lo(1) == 10.0);
  CHECK(env.hi(1) == 10.0);
  CHECK_THROWS_AS(evreg::pointwise_envelope(Eigen::ArrayXXd(0, 2)), std::invalid_argument);
  CHECK_THROWS_AS(evreg::pointwise_envelope(samples, 0.9, 0.1), std::invalid_argument);
}
