#include "sessionrec/binning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sessionrec {

EqualFrequencyBinner::EqualFrequencyBinner(std::vector<double> edges) : edges_(std::move(edges)) {
  if (!std::is_sorted(edges_.begin(), edges_.end()) ||
      std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    throw std::invalid_argument("binner: edges must be strictly increasing");
  }
}

EqualFrequencyBinner EqualFrequencyBinner::fit(std::span<const double> values,
                                               std::size_t num_bins) {
  if (num_bins == 0) throw std::invalid_argument("binner: need at least one bin");
  std::vector<double> sorted;
  sorted.reserve(values.size());
  for (double v : values) {
    if (!std::isnan(v)) sorted.push_back(v);
  }
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  if (!sorted.empty()) {
    for (std::size_t k = 1; k < num_bins; ++k) {
      const double edge = sorted[k * sorted.size() / num_bins];
      // Heavy ties collapse quantiles; keep each edge once.
      if (edge > sorted.front() && (edges.empty() || edge > edges.back())) edges.push_back(edge);
    }
  }
  return EqualFrequencyBinner(std::move(edges));
}

std::uint32_t EqualFrequencyBinner::bin(double value) const {
  if (std::isnan(value)) return 0;
  return static_cast<std::uint32_t>(std::upper_bound(edges_.begin(), edges_.end(), value) -
                                    edges_.begin());
}

}  // namespace sessionrec
