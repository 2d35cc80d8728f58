#pragma once

#include <cstddef>
#include <span>

#include "mi_embed/nn.hpp"
#include "mi_embed/rng.hpp"

namespace mi_embed {

/// Feature-vector analogues of image augmentations, applied in the order
/// noise, dropout, scaling.
struct AugmentationSpec {
  double noise_sigma = 0.0;
  double dropout_rate = 0.0;
  double scale_min = 1.0;
  double scale_max = 1.0;
  std::size_t n_views = 8;

  bool is_identity() const { return noise_sigma == 0.0 && dropout_rate == 0.0 && scale_min == 1.0 && scale_max == 1.0; }
  void validate() const;

  bool operator==(const AugmentationSpec&) const = default;
};

Vector augment(std::span<const double> x, const AugmentationSpec& spec, Rng& rng);

}  // namespace mi_embed
