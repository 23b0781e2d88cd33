#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "evreg/folds.hpp"

using evreg::FoldPlan;
using evreg::GridLayout;

TEST_CASE("great-Earth distance") {
  CHECK(evreg::haversine_miles(40.0, -100.0, 40.0, -100.0) == 0.0);
  // One degree of longitude along the equator.
  CHECK(evreg::haversine_miles(0.0, 0.0, 0.0, 1.0) == doctest::Approx(69.09409442795152).epsilon(1e-12));
  // Antipodal poles: half the circumference.
  CHECK(evreg::haversine_miles(90.0, 0.0, -90.0, 0.0) ==
        doctest::Approx(12436.936997031273).epsilon(1e-12));
  CHECK(evreg::haversine_miles(40.7128, -74.0060, 51.5074, -0.1278) ==
        doctest::Approx(3461.2141838246158).epsilon(1e-10));
  // Symmetry.
  CHECK(evreg::haversine_miles(40.0, -100.0, 40.0, -90.0) ==
        evreg::haversine_miles(40.0, -90.0, 40.0, -100.0));
}

TEST_CASE("separable correlation") {
  CHECK(evreg::gp_correlation(0.0, 0.0) == 1.0);
  CHECK(evreg::gp_correlation(100.0, 0.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(evreg::gp_correlation(0.0, 5.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(evreg::gp_correlation(0.0, -5.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(evreg::gp_correlation(50.0, 2.5) ==
        doctest::Approx(evreg::gp_correlation(50.0, 0.0) * evreg::gp_correlation(0.0, 2.5)).epsilon(1e-15));
}

namespace {

Eigen::ArrayXXd line_of_sites(int n, double lat, double lon0, double dlon) {
  Eigen::ArrayXXd c(n, 2);
  for (int i = 0; i < n; ++i) {
    c(i, 0) = lat;
    c(i, 1) = lon0 + i * dlon;
  }
  return c;
}

std::vector<int> all_cells(const GridLayout& layout) {
  std::vector<int> v(static_cast<std::size_t>(layout.n_cells()));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<int>(i);
  return v;
}

}  // namespace

TEST_CASE("fold plan partitions cells with balanced blocks") {
  const GridLayout layout{7, 1, 4};  // 28 cells, one block
  const Eigen::ArrayXXd coords = line_of_sites(7, 40.0, -100.0, 0.5);
  const FoldPlan plan = evreg::make_cv_folds(coords, layout, all_cells(layout), 5, 11);

  REQUIRE(plan.labels.size() == 28);
  std::vector<int> counts(6, 0);
  for (int l : plan.labels) {
    REQUIRE(l >= 1);
    REQUIRE(l <= 5);
    ++counts[static_cast<std::size_t>(l)];
  }
  // 28/5 = 5.6: every fold holds 5 or 6 cells.
  for (int f = 1; f <= 5; ++f) CHECK(std::abs(counts[static_cast<std::size_t>(f)] - 5.6) < 1.0);

  // fold_cells / complement_cells partition the covered cells.
  std::set<int> seen;
  for (int f = 1; f <= 5; ++f)
    for (int c : plan.fold_cells(f)) CHECK(seen.insert(c).second);
  CHECK(seen.size() == 28);
  const std::vector<int> held = plan.fold_cells(2), rest = plan.complement_cells(2);
  CHECK(held.size() + rest.size() == 28);
  for (int c : held) CHECK(std::find(rest.begin(), rest.end(), c) == rest.end());
}

TEST_CASE("every time block spreads evenly across folds") {
  const GridLayout layout{5, 1, 20};  // blocks of 9, 9, 2 time steps
  const Eigen::ArrayXXd coords = line_of_sites(5, 35.0, -105.0, 1.0);
  const FoldPlan plan = evreg::make_cv_folds(coords, layout, all_cells(layout), 5, 3);

  auto block_counts = [&](int t_lo, int t_hi) {
    std::vector<int> counts(6, 0);
    for (std::size_t i = 0; i < plan.cells.size(); ++i) {
      const int t = plan.cells[i] / layout.n_sites();
      if (t >= t_lo && t < t_hi) ++counts[static_cast<std::size_t>(plan.labels[i])];
    }
    return counts;
  };
  for (auto [lo, hi] : std::vector<std::pair<int, int>>{{0, 9}, {9, 18}, {18, 20}}) {
    const std::vector<int> counts = block_counts(lo, hi);
    const double expect = 5.0 * (hi - lo) / 5.0;
    for (int f = 1; f <= 5; ++f)
      CHECK(std::abs(counts[static_cast<std::size_t>(f)] - expect) <= 1.0);
  }
}

TEST_CASE("fold plans are seed-deterministic") {
  const GridLayout layout{4, 1, 9};
  const Eigen::ArrayXXd coords = line_of_sites(4, 45.0, -110.0, 0.3);
  const FoldPlan a = evreg::make_cv_folds(coords, layout, all_cells(layout), 5, 7);
  const FoldPlan b = evreg::make_cv_folds(coords, layout, all_cells(layout), 5, 7);
  CHECK(a.labels == b.labels);
  const FoldPlan c = evreg::make_cv_folds(coords, layout, all_cells(layout), 5, 8);
  CHECK(a.labels != c.labels);
}

TEST_CASE("nearby cells cluster into the same fold far more often than distant ones") {
  // Sites: two nearly coincident (about half a mile apart) and one about
  // 529 miles east.
  Eigen::ArrayXXd coords(3, 2);
  coords << 40.0, -100.0, 40.0, -99.99, 40.0, -90.0;
  const GridLayout layout{3, 1, 9};
  const std::vector<int> cells = all_cells(layout);

  int near_same = 0, far_same = 0, pairs = 0;
  for (int seed = 0; seed < 200; ++seed) {
    const FoldPlan plan = evreg::make_cv_folds(coords, layout, cells, 3, static_cast<std::uint64_t>(seed));
    for (int t = 0; t < 9; ++t) {
      const int a = plan.labels[static_cast<std::size_t>(t * 3 + 0)];
      const int b = plan.labels[static_cast<std::size_t>(t * 3 + 1)];
      const int c = plan.labels[static_cast<std::size_t>(t * 3 + 2)];
      near_same += a == b;
      far_same += a == c;
      ++pairs;
    }
  }
  const double frac_near = static_cast<double>(near_same) / pairs;
  const double frac_far = static_cast<double>(far_same) / pairs;
  CHECK(frac_near > frac_far + 0.2);
}

TEST_CASE("duplicated space-time points survive through diagonal inflation") {
  Eigen::ArrayXXd coords(3, 2);
  coords << 40.0, -100.0, 40.0, -100.0, 40.0, -100.0;  // identical sites
  const GridLayout layout{3, 1, 2};
  const FoldPlan plan = evreg::make_cv_folds(coords, layout, all_cells(layout), 2, 99);
  for (int l : plan.labels) CHECK((l == 1 || l == 2));
}

TEST_CASE("fold construction rejects bad arguments") {
  const GridLayout layout{2, 1, 2};
  const Eigen::ArrayXXd coords = line_of_sites(2, 40.0, -100.0, 1.0);
  CHECK_THROWS_AS(evreg::make_cv_folds(coords, layout, all_cells(layout), 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(evreg::make_cv_folds(coords, layout, {0, 99}, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(evreg::make_cv_folds(line_of_sites(3, 40.0, -100.0, 1.0), layout, all_cells(layout), 2, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(evreg::make_cv_folds(coords, layout, all_cells(layout), 2, 1, 0), std::invalid_argument);
}

TEST_CASE("partial cell coverage: only covered cells are labeled, blocks still balanced") {
  const GridLayout layout{4, 1, 9};
  const Eigen::ArrayXXd coords = line_of_sites(4, 38.0, -102.0, 0.8);
  std::vector<int> cells;
  for (int i = 0; i < 36; i += 2) cells.push_back(i);  // every other cell
  const FoldPlan plan = evreg::make_cv_folds(coords, layout, cells, 3, 5);
  REQUIRE(plan.cells == cells);
  REQUIRE(plan.labels.size() == cells.size());
  std::vector<int> counts(4, 0);
  for (int l : plan.labels) ++counts[static_cast<std::size_t>(l)];
  for (int f = 1; f <= 3; ++f) CHECK(counts[static_cast<std::size_t>(f)] == 6);
}
