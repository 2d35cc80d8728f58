#include "mi_embed/augment.hpp"

#include <cmath>

#include "mi_embed/errors.hpp"

namespace mi_embed {

void AugmentationSpec::validate() const {
  if (n_views < 2) throw InvalidArgument("augmentation needs at least 2 views");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw InvalidArgument("noise sigma must be >= 0");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw InvalidArgument("dropout rate must be in [0, 1)");
  if (!(scale_min > 0.0 && scale_min <= scale_max) || !std::isfinite(scale_max))
    throw InvalidArgument("scaling range must satisfy 0 < min <= max");
}

Vector augment(std::span<const double> x, const AugmentationSpec& spec, Rng& rng) {
  Vector out(x.begin(), x.end());
  if (spec.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (auto& v : out) v += noise(rng);
  }
  if (spec.dropout_rate > 0.0) {
    std::bernoulli_distribution drop(spec.dropout_rate);
    for (auto& v : out)
      if (drop(rng)) v = 0.0;
  }
  if (spec.scale_min != 1.0 || spec.scale_max != 1.0) {
    const double s = spec.scale_min == spec.scale_max
                         ? spec.scale_min
                         : std::uniform_real_distribution<double>(spec.scale_min, spec.scale_max)(rng);
    for (auto& v : out) v *= s;
  }
  return out;
}

}  // namespace mi_embed
