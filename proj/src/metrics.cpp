#include "mi_embed/metrics.hpp"

#include <cmath>

#include "mi_embed/errors.hpp"

namespace mi_embed {

BinaryMetrics evaluate(std::span<const MembershipLabel> verdicts, std::span<const MembershipLabel> truth) {
  if (verdicts.empty()) throw InvalidArgument("cannot evaluate an empty verdict list");
  if (verdicts.size() != truth.size()) throw DimensionError("verdict and ground-truth lengths differ");
  BinaryMetrics m;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (truth[i] == MembershipLabel::unknown || verdicts[i] == MembershipLabel::unknown)
      throw InvalidArgument("evaluation needs definite labels");
    const bool predicted = verdicts[i] == MembershipLabel::member;
    const bool actual = truth[i] == MembershipLabel::member;
    if (predicted && actual) ++m.true_positive;
    else if (predicted) ++m.false_positive;
    else if (actual) ++m.false_negative;
    else ++m.true_negative;
  }
  m.accuracy = 100.0 * static_cast<double>(m.true_positive + m.true_negative) / static_cast<double>(verdicts.size());
  if (m.true_positive + m.false_positive > 0)
    m.precision = 100.0 * static_cast<double>(m.true_positive) / static_cast<double>(m.true_positive + m.false_positive);
  if (m.true_positive + m.false_negative > 0)
    m.recall = 100.0 * static_cast<double>(m.true_positive) / static_cast<double>(m.true_positive + m.false_negative);
  return m;
}

Aggregate aggregate(std::span<const std::optional<double>> values) {
  Aggregate a;
  double sum = 0.0;
  for (const auto& v : values)
    if (v) {
      sum += *v;
      ++a.n;
    }
  if (a.n == 0) return a;
  const double mean = sum / static_cast<double>(a.n);
  double ss = 0.0;
  for (const auto& v : values)
    if (v) ss += (*v - mean) * (*v - mean);
  a.mean = mean;
  a.stddev = std::sqrt(ss / static_cast<double>(a.n));
  return a;
}

}  // namespace mi_embed
