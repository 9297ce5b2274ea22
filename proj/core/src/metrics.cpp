#include "damr/metrics.hpp"

#include <set>

namespace damr::harness {

double hits_at_1(std::span<const std::string> ranked, std::span<const std::string> gold) {
  if (ranked.empty()) return 0.0;
  for (const auto& g : gold) {
    if (g == ranked.front()) return 1.0;
  }
  return 0.0;
}

double f1(std::span<const std::string> predicted, std::span<const std::string> gold) {
  const std::set<std::string> p(predicted.begin(), predicted.end());
  const std::set<std::string> g(gold.begin(), gold.end());
  if (p.empty() || g.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& x : p) hit += g.count(x);
  if (hit == 0) return 0.0;
  const double precision = static_cast<double>(hit) / static_cast<double>(p.size());
  const double recall = static_cast<double>(hit) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace damr::harness
