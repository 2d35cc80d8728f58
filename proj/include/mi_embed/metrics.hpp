#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include "mi_embed/features.hpp"

namespace mi_embed {

/// Binary metrics in percent with member as the positive class. precision is
/// undefined when nothing is predicted member, recall when no member exists.
struct BinaryMetrics {
  double accuracy = 0.0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_negative = 0;
};

BinaryMetrics evaluate(std::span<const MembershipLabel> verdicts, std::span<const MembershipLabel> truth);

struct Aggregate {
  std::optional<double> mean;
  double stddev = 0.0;  // population standard deviation over the defined values
  std::size_t n = 0;

  bool operator==(const Aggregate&) const = default;
};

Aggregate aggregate(std::span<const std::optional<double>> values);

}  // namespace mi_embed
