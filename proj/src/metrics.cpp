#include "mvgen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace mvgen {

double auc_lower_distance(const std::vector<double>& pos, const std::vector<double>& neg) {
  if (pos.empty() || neg.empty()) throw std::invalid_argument("auc: empty distance list");
  const size_t m = pos.size(), n = neg.size();

  struct Entry {
    double v;
    bool is_pos;
  };
  std::vector<Entry> all;
  all.reserve(m + n);
  for (double v : pos) all.push_back({v, true});
  for (double v : neg) all.push_back({v, false});
  std::sort(all.begin(), all.end(), [](const Entry& a, const Entry& b) { return a.v < b.v; });

  // rank sum of the pos sample with midranks over tie groups; every quantity
  // below is a multiple of 0.5, so the result matches pairwise enumeration
  // exactly in double arithmetic
  double pos_rank_sum = 0;
  size_t i = 0;
  while (i < all.size()) {
    size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t t = i; t < j; ++t)
      if (all[t].is_pos) pos_rank_sum += midrank;
    i = j;
  }

  double u_pos_higher = pos_rank_sum - 0.5 * static_cast<double>(m) * static_cast<double>(m + 1);
  double wins_lower = static_cast<double>(m) * static_cast<double>(n) - u_pos_higher;
  return wins_lower / (static_cast<double>(m) * static_cast<double>(n));
}

double bhattacharyya_bernoulli_sum(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw std::invalid_argument("bhattacharyya: length mismatch");
  constexpr double kTermCap = 20.0;
  double sum = 0;
  for (size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0 || p[i] > 1 || q[i] < 0 || q[i] > 1)
      throw std::invalid_argument("bhattacharyya: probability outside [0,1]");
    double bc = std::sqrt(p[i] * q[i]) + std::sqrt((1 - p[i]) * (1 - q[i]));
    double term = bc > 0 ? -std::log(bc) : kTermCap;
    sum += std::clamp(term, 0.0, kTermCap);
  }
  return sum;
}

double unique_combination_ratio(const std::vector<uint16_t>& codes) {
  if (codes.empty()) throw std::invalid_argument("unique_combination_ratio: empty input");
  std::unordered_set<uint16_t> seen(codes.begin(), codes.end());
  return static_cast<double>(seen.size()) / static_cast<double>(codes.size());
}

}  // namespace mvgen
