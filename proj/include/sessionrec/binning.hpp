#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sessionrec {

// Equal-frequency discretizer for continuous side features. Bin index is the
// number of edges <= value, so it is monotone in the raw value.
class EqualFrequencyBinner {
 public:
  EqualFrequencyBinner() = default;
  explicit EqualFrequencyBinner(std::vector<double> edges);

  static EqualFrequencyBinner fit(std::span<const double> values, std::size_t num_bins);

  std::uint32_t bin(double value) const;
  std::size_t cardinality() const { return edges_.size() + 1; }
  const std::vector<double>& edges() const { return edges_; }

 private:
  std::vector<double> edges_;  // strictly increasing
};

}  // namespace sessionrec
