#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "mvgen/metrics.hpp"
#include "mvgen/rng.hpp"

using namespace mvgen;

namespace {

double auc_brute(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0;
  for (double p : pos)
    for (double q : neg) {
      if (p < q)
        wins += 1.0;
      else if (p == q)
        wins += 0.5;
    }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

}  // namespace

TEST_CASE("auc hand cases") {
  CHECK(auc_lower_distance({0.1, 0.2}, {0.3, 0.4}) == 1.0);
  CHECK(auc_lower_distance({0.3, 0.4}, {0.1, 0.2}) == 0.0);
  CHECK(auc_lower_distance({0.5}, {0.5}) == 0.5);
  CHECK(auc_lower_distance({0.1, 0.5}, {0.3}) == 0.5);
  // pairs: (1<2)=1 (1<3)=1 (2=2)=.5 (2<3)=1 (2=2)=.5 (2<3)=1 -> 5/6
  CHECK(auc_lower_distance({1, 2, 2}, {2, 3}) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK_THROWS_AS(auc_lower_distance({}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(auc_lower_distance({1.0}, {}), std::invalid_argument);
}

TEST_CASE("auc equals brute force exactly on random instances") {
  Rng rng(42);
  for (int inst = 0; inst < 100; ++inst) {
    size_t m = 1 + rng.uniform_int(200);
    size_t n = 1 + rng.uniform_int(200);
    std::vector<double> pos(m), neg(n);
    bool gridded = rng.bernoulli(0.5);  // force heavy ties half the time
    for (auto& v : pos) v = gridded ? static_cast<double>(rng.uniform_int(8)) : rng.uniform();
    for (auto& v : neg) v = gridded ? static_cast<double>(rng.uniform_int(8)) : rng.uniform();
    double fast = auc_lower_distance(pos, neg);
    CHECK(fast == auc_brute(pos, neg));
    CHECK(fast + auc_lower_distance(neg, pos) == 1.0);
  }
}

TEST_CASE("bhattacharyya closed forms") {
  std::vector<double> p = {0.3, 0.7, 0.05};
  CHECK(bhattacharyya_bernoulli_sum(p, p) == 0.0);

  CHECK(std::abs(bhattacharyya_bernoulli_sum({0.9}, {0.1}) - 0.51082562376599072) < 1e-12);
  CHECK(std::abs(bhattacharyya_bernoulli_sum({0.9}, {0.5}) - 0.11157177565710491) < 1e-12);

  std::vector<double> a = {0.25, 0.25, 0.25, 0.5, 0.5, 0.5, 0.5, 0.56, 0.5, 0.05};
  std::vector<double> b = {0.31, 0.18, 0.22, 0.44, 0.61, 0.48, 0.55, 0.49, 0.52, 0.11};
  CHECK(std::abs(bhattacharyya_bernoulli_sum(a, b) - 0.024958532213561712) < 1e-12);
  CHECK(bhattacharyya_bernoulli_sum(a, b) == bhattacharyya_bernoulli_sum(b, a));

  // a never-produced attribute hits the per-term cap instead of diverging
  CHECK(bhattacharyya_bernoulli_sum({1.0}, {0.0}) == 20.0);
  CHECK(bhattacharyya_bernoulli_sum({1.0, 1.0}, {0.0, 0.0}) == 40.0);

  CHECK_THROWS_AS(bhattacharyya_bernoulli_sum({1.2}, {0.5}), std::invalid_argument);
  CHECK_THROWS_AS(bhattacharyya_bernoulli_sum({0.5}, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("unique combination ratio") {
  CHECK(unique_combination_ratio({1, 1, 2, 3}) == 0.75);
  CHECK(unique_combination_ratio({7, 7, 7, 7}) == 0.25);
  CHECK(unique_combination_ratio({1, 2, 3, 4}) == 1.0);
  CHECK(unique_combination_ratio({3, 1, 2, 1}) == unique_combination_ratio({1, 1, 2, 3}));
  CHECK_THROWS_AS(unique_combination_ratio({}), std::invalid_argument);
}
